"""Volumetric image-quality metrics: SSIM, NRMSE and the DSSIM map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DegenerateTruth, InvalidParameter, ShapeMismatch
from .volume import Mask, Volume


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    gaussian_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float | None = None  # None -> brightest voxel of the pair

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidParameter(f"window must be a positive odd integer, got {self.window}")
        if not (self.gaussian_sigma > 0 and self.k1 > 0 and self.k2 > 0):
            raise InvalidParameter("sigma, k1 and k2 must be positive")
        if self.dynamic_range is not None and not self.dynamic_range > 0:
            raise InvalidParameter("dynamic_range must be positive")


def _arrays(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = a.data if isinstance(a, Volume) else np.asarray(a, dtype=np.float64)
    b = b.data if isinstance(b, Volume) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def bounding_box(mask: Mask | np.ndarray) -> tuple[slice, ...]:
    m = mask.data if isinstance(mask, Mask) else np.asarray(mask, dtype=bool)
    if not m.any():
        return tuple(slice(0, 0) for _ in m.shape)
    idx = np.nonzero(m)
    return tuple(slice(int(i.min()), int(i.max()) + 1) for i in idx)


def _crop(a, b, mask):
    if mask is None:
        return a, b
    m = mask.data if isinstance(mask, Mask) else np.asarray(mask)
    if m.shape != a.shape:
        raise ShapeMismatch(f"mask shape {m.shape} does not match {a.shape}")
    box = bounding_box(m)
    return a[box], b[box]


def ssim_map(a, b, cfg: SsimConfig = SsimConfig()) -> np.ndarray:
    """Local SSIM index under an isotropic 3D Gaussian window."""
    a, b = _arrays(a, b)
    L = cfg.dynamic_range
    if L is None:
        L = float(max(a.max(initial=0.0), b.max(initial=0.0)))
        if L <= 0:
            L = 1.0
    c1 = (cfg.k1 * L) ** 2
    c2 = (cfg.k2 * L) ** 2
    truncate = (cfg.window // 2) / cfg.gaussian_sigma

    def blur(x):
        return gaussian_filter(x, cfg.gaussian_sigma, mode="reflect", truncate=truncate)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return np.clip(num / den, -1.0, 1.0)


def ssim(a, b, cfg: SsimConfig = SsimConfig(), mask=None) -> float:
    """Mean local SSIM; restricted to the mask's bounding box when a mask is given."""
    a, b = _arrays(a, b)
    a, b = _crop(a, b, mask)
    return float(np.mean(ssim_map(a, b, cfg)))


def nrmse(a, b_truth, mask=None) -> float:
    """||a - b|| / ||b|| with b the ground truth."""
    a, b = _arrays(a, b_truth)
    a, b = _crop(a, b, mask)
    denom = float(np.linalg.norm(b))
    if denom == 0.0:
        raise DegenerateTruth("ground truth has zero norm")
    return float(np.linalg.norm(a - b) / denom)


def dssim_map(a, b, cfg: SsimConfig = SsimConfig(), mask=None) -> Volume:
    """Voxel-wise structural dissimilarity (1 - local SSIM) / 2."""
    a_arr, b_arr = _arrays(a, b)
    a_arr, b_arr = _crop(a_arr, b_arr, mask)
    d = np.clip((1.0 - ssim_map(a_arr, b_arr, cfg)) / 2.0, 0.0, 1.0)
    spacing = a.spacing if isinstance(a, Volume) else (1.0, 1.0, 1.0)
    return Volume(d, spacing)
