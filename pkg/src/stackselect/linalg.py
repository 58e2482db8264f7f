"""Dense kernels: truncated SVD, least squares, mode-n unfolding, Khatri-Rao."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMatrix, RankTooLarge, ShapeMismatch, SingularSystem

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60
RIDGE = 1e-10


@dataclass(frozen=True, eq=False)
class SvdTruncation:
    singular_values: np.ndarray  # (r,) non-increasing
    left_vectors: np.ndarray  # (m, r)
    right_vectors: np.ndarray  # (n, r)

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or min(M.shape) < 1:
        raise InvalidMatrix(f"expected a non-empty 2D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix("matrix contains non-finite entries")
    return M


def jacobi_svd(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD by one-sided (Hestenes) Jacobi rotations.

    Rotations act on the columns of whichever of M, M^T has fewer columns,
    so a short-and-wide stack matrix only ever needs k x k rotations with
    k = min(m, n). Returns (U, s, V) with s sorted non-increasing.
    """
    M = _as_matrix(M)
    transposed = M.shape[0] < M.shape[1]
    W = (M.T if transposed else M).copy()  # tall: rows >= cols
    k = W.shape[1]
    J = np.eye(k)
    tiny = np.finfo(np.float64).tiny
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for i in range(k - 1):
            for j in range(i + 1, k):
                wi, wj = W[:, i], W[:, j]
                alpha = wi @ wi
                beta = wj @ wj
                gamma = wi @ wj
                # pairwise test keeps small singular values accurate
                if abs(gamma) <= JACOBI_TOL * np.sqrt(alpha * beta) or abs(gamma) < tiny:
                    continue
                rotated = True
                with np.errstate(over="ignore"):
                    zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta)) if zeta != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                W[:, i], W[:, j] = c * wi - s * wj, s * wi + c * wj
                Ji, Jj = J[:, i].copy(), J[:, j].copy()
                J[:, i], J[:, j] = c * Ji - s * Jj, s * Ji + c * Jj
        if not rotated:
            break
    sv = np.linalg.norm(W, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    W = W[:, order]
    J = J[:, order]
    cols = np.empty_like(W)
    nz = sv > sv[0] * 1e-15 if sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    cols[:, nz] = W[:, nz] / sv[nz]
    if not np.all(nz):
        cols[:, ~nz] = _complete_basis(cols[:, nz], int(np.count_nonzero(~nz)))
    # W = M' J diag-normalized, so M' = cols diag(sv) J^T
    if transposed:
        return J, sv, cols
    return cols, sv, J


def _complete_basis(Q: np.ndarray, extra: int) -> np.ndarray:
    """Orthonormal columns orthogonal to Q (for null singular values)."""
    n = Q.shape[0]
    out = []
    basis = [Q[:, i] for i in range(Q.shape[1])]
    for e in np.eye(n):
        v = e - sum((b @ e) * b for b in basis) if basis else e.copy()
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            basis.append(v)
            out.append(v)
            if len(out) == extra:
                break
    return np.stack(out, axis=1)


def truncated_svd(M, r: int, method: str = "lapack") -> SvdTruncation:
    """Top-``r`` singular triplets of ``M``.

    ``method`` is "lapack" (numpy's divide-and-conquer driver) or "jacobi".
    """
    M = _as_matrix(M)
    r = int(r)
    if r < 1 or r > min(M.shape):
        raise RankTooLarge(f"rank {r} not in [1, {min(M.shape)}] for shape {M.shape}")
    if method == "jacobi":
        U, s, V = jacobi_svd(M)
    elif method == "lapack":
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        V = Vt.T
    else:
        raise ValueError(f"unknown SVD method {method!r}")
    return SvdTruncation(s[:r].copy(), U[:, :r].copy(), V[:, :r].copy())


def low_rank_error(M, t: SvdTruncation) -> float:
    """Relative Frobenius error ||M - M'|| / ||M||; 0 for a zero matrix."""
    M = _as_matrix(M)
    if t.left_vectors.shape[0] != M.shape[0] or t.right_vectors.shape[0] != M.shape[1]:
        raise ShapeMismatch("truncation does not match the matrix shape")
    norm = np.linalg.norm(M)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(M - t.reconstruct()) / norm)


def tail_errors(stack: np.ndarray, r: int) -> np.ndarray:
    """Rank-``r`` relative truncation error for each matrix of a (n, h, w) batch.

    Uses the Eckart-Young identity err^2 = sum_{i>r} s_i^2 / sum_i s_i^2.
    Zero matrices give 0.
    """
    s = np.linalg.svd(stack, compute_uv=False)
    s2 = s * s
    total = s2.sum(axis=-1)
    tail = s2[..., r:].sum(axis=-1)
    out = np.zeros_like(total)
    nz = total > 0
    out[nz] = np.sqrt(np.clip(tail[nz] / total[nz], 0.0, 1.0))
    return out


def unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n matricization (modes 1, 2, 3) with Kolda-Bader column ordering.

    For mode 1 the column index of element (i, j, k) is j + J*k.
    """
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    x = np.asarray(x)
    n = mode - 1
    return np.reshape(np.moveaxis(x, n, 0), (x.shape[n], -1), order="F")


def fold(mat: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    n = mode - 1
    shape = tuple(shape)
    moved = (shape[n],) + tuple(s for i, s in enumerate(shape) if i != n)
    return np.moveaxis(np.reshape(mat, moved, order="F"), 0, n)


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; row i*q + k of column j is A[i, j] * B[k, j]."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ShapeMismatch(f"column counts differ: {A.shape} vs {B.shape}")
    return (A[:, None, :] * B[None, :, :]).reshape(A.shape[0] * B.shape[0], A.shape[1])


def solve_normal(gram: np.ndarray, rhs: np.ndarray, regularize: bool = True) -> np.ndarray:
    """Solve gram @ X = rhs for symmetric PSD ``gram``."""
    k = gram.shape[0]
    if regularize:
        tr = float(np.trace(gram))
        gram = gram + (RIDGE * tr / k) * np.eye(k)
    try:
        c = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise SingularSystem("normal matrix is not positive definite") from None
    if not np.all(np.isfinite(c)) or np.min(np.abs(np.diag(c))) <= 1e-150:
        raise SingularSystem("normal matrix is numerically singular")
    y = np.linalg.solve(c, rhs)
    return np.linalg.solve(c.T, y)


def solve_least_squares(A, B, regularize: bool = True) -> np.ndarray:
    """argmin_X ||A X - B||_F through the (ridge-stabilized) normal equations."""
    A = _as_matrix(A)
    B = np.asarray(B, dtype=np.float64)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    if B.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"A has {A.shape[0]} rows, B has {B.shape[0]}")
    gram = A.T @ A
    if not regularize:
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularSystem(f"normal matrix condition number {cond:.3g}")
    elif np.trace(gram) == 0.0:
        raise SingularSystem("design matrix is zero")
    X = solve_normal(gram, A.T @ B, regularize=regularize)
    return X[:, 0] if vector else X
