"""CP decomposition of 3-way tensors by alternating least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTensor, InvalidParameter, RankTooLarge, ShapeMismatch
from .linalg import khatri_rao, solve_normal, truncated_svd, unfold

# below this squared relative residual the Gram-identity residual loses digits
_EXACT_RESIDUAL_BELOW = 1e-6
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class CPModel:
    weights: np.ndarray  # (r,)
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]  # (k, r), (m, r), (n, r)

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(f.shape[0]) for f in self.factors)


@dataclass(frozen=True)
class AlsConfig:
    rank: int = 25
    max_iterations: int = 100
    fit_tolerance: float = 1e-5
    init_seed: int = 0
    init_scheme: str = "random"  # "random" | "svd"

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidParameter(f"rank must be >= 1, got {self.rank}")
        if not self.fit_tolerance > 0:
            raise InvalidParameter(f"fit_tolerance must be > 0, got {self.fit_tolerance}")
        if self.max_iterations < 0:
            raise InvalidParameter("max_iterations must be >= 0")
        if self.init_scheme not in ("random", "svd"):
            raise InvalidParameter(f"unknown init_scheme {self.init_scheme!r}")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def _normalize(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(F, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return F / safe, norms


def _initial_factors(x: np.ndarray, cfg: AlsConfig, init: CPModel | None):
    rng = _rng(cfg.init_seed)
    r = cfg.rank
    if init is not None:
        if init.shape != x.shape:
            raise ShapeMismatch(f"initial model shape {init.shape} != tensor shape {x.shape}")
        if init.rank > r:
            raise InvalidParameter("initial model has more components than cfg.rank")
        extra = r - init.rank
        factors = []
        for f in init.factors:
            pad = _normalize(rng.random((f.shape[0], extra)))[0]
            factors.append(np.hstack([_normalize(f)[0], pad]))
        weights = np.concatenate([init.weights, np.zeros(extra)])
        return factors, weights

    factors = []
    for mode, dim in enumerate(x.shape, start=1):
        if cfg.init_scheme == "svd":
            lead = min(r, dim)
            u = truncated_svd(unfold(x, mode), lead).left_vectors
            if lead < r:
                u = np.hstack([u, rng.random((dim, r - lead))])
            factors.append(u)
        else:
            factors.append(rng.random((dim, r)))
    factors = [_normalize(f)[0] for f in factors]
    return factors, np.ones(r)


def _exact_residual_sq(unf3: np.ndarray, weights, factors) -> float:
    A, B, C = factors
    kr = khatri_rao(B, A)
    step = max(1, _CHUNK_ELEMENTS // max(unf3.shape[1], 1))
    total = 0.0
    for s in range(0, unf3.shape[0], step):
        rec = (C[s : s + step] * weights) @ kr.T
        diff = unf3[s : s + step] - rec
        total += float(np.sum(diff * diff))
    return total


def _residual_sq(norm_x_sq, weights, factors, mttkrp3, unf3) -> float:
    A, B, C = factors
    inner = float(np.sum(weights * np.sum(C * mttkrp3, axis=0)))
    gram = (A.T @ A) * (B.T @ B) * (C.T @ C)
    model_sq = float(weights @ gram @ weights)
    res = norm_x_sq - 2.0 * inner + model_sq
    if res < _EXACT_RESIDUAL_BELOW * norm_x_sq:
        return _exact_residual_sq(unf3, weights, factors)
    return res


def _canonical(weights: np.ndarray, factors) -> CPModel:
    A, B, C = (f.copy() for f in factors)
    for j in range(A.shape[1]):
        i = int(np.argmax(np.abs(A[:, j])))
        if A[i, j] < 0:
            A[:, j] = -A[:, j]
            B[:, j] = -B[:, j]
    order = np.argsort(-weights, kind="stable")
    return CPModel(weights[order].copy(), (A[:, order], B[:, order], C[:, order]))


def check_rank(shape, rank: int) -> None:
    k, m, n = shape
    bound = min(m * n, k * n, k * m)
    if rank > bound:
        raise RankTooLarge(f"rank {rank} exceeds {bound} for tensor shape {tuple(shape)}")


def cp_als(x, cfg: AlsConfig = AlsConfig(), init: CPModel | None = None):
    """Fit a rank-``cfg.rank`` CP model to a 3-way tensor.

    Each sweep updates the three factor matrices in turn by exact least
    squares against the corresponding unfolding. Iteration stops once the fit
    ``1 - ||X - X'|| / ||X||`` changes by less than ``cfg.fit_tolerance`` or
    after ``cfg.max_iterations`` sweeps.

    Parameters
    ----------
    x:
        Tensor of shape (k, m, n).
    cfg:
        Rank, stopping rule and initialization.
    init:
        Optional model of rank <= ``cfg.rank`` to start from; missing
        components are filled with random columns of weight 0.

    Returns
    -------
    model:
        Column-normalized model with weights sorted non-increasing.
    fit_history:
        Fit of the initial model followed by the fit after every sweep.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected a 3-way tensor, got {x.ndim} dims")
    norm_x_sq = float(np.sum(x * x))
    if norm_x_sq == 0.0:
        raise DegenerateTensor("cannot decompose an all-zero tensor")
    check_rank(x.shape, cfg.rank)
    norm_x = np.sqrt(norm_x_sq)

    factors, weights = _initial_factors(x, cfg, init)
    unf = [np.ascontiguousarray(unfold(x, mode)) for mode in (1, 2, 3)]

    def fit_of(res_sq: float) -> float:
        return 1.0 - np.sqrt(max(res_sq, 0.0)) / norm_x

    history = [fit_of(_exact_residual_sq(unf[2], weights, factors))]
    for _ in range(cfg.max_iterations):
        for n in range(3):
            earlier, later = [factors[i] for i in range(3) if i != n]
            kr = khatri_rao(later, earlier)
            gram = (earlier.T @ earlier) * (later.T @ later)
            mttkrp = unf[n] @ kr
            updated = solve_normal(gram, mttkrp.T).T
            factors[n], weights = _normalize(updated)
        history.append(fit_of(_residual_sq(norm_x_sq, weights, factors, mttkrp, unf[2])))
        if abs(history[-1] - history[-2]) < cfg.fit_tolerance:
            break
    return _canonical(weights, factors), history


def cp_reconstruct(m: CPModel) -> np.ndarray:
    """Dense tensor sum_i w_i a_i o b_i o c_i."""
    A, B, C = m.factors
    return np.einsum("r,ir,jr,kr->ijk", m.weights, A, B, C, optimize=True)


def cp_relative_error(x, m: CPModel) -> float:
    """||X - X'||_F / ||X||_F, accumulated slab by slab."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != m.shape:
        raise ShapeMismatch(f"model shape {m.shape} != tensor shape {x.shape}")
    norm_x_sq = float(np.sum(x * x))
    if norm_x_sq == 0.0:
        raise DegenerateTensor("relative error undefined for an all-zero tensor")
    res = _exact_residual_sq(unfold(x, 3), m.weights, m.factors)
    return float(np.sqrt(res / norm_x_sq))

