"""3D raster types, isotropic resampling, reslicing and the synthetic phantom.

Arrays are indexed ``data[x, y, z]``; the flat on-disk layout is x-fastest,
i.e. ``data.ravel(order="F")``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidParameter,
    InvalidVolume,
    RequiresIsotropic,
    ShapeMismatch,
)

AXES = {"X": 0, "Y": 1, "Z": 2}


class Orientation(enum.IntEnum):
    AXIAL = 0
    CORONAL = 1
    SAGITTAL = 2
    ISOTROPIC = 3

    @property
    def slice_axis(self) -> int:
        """Array axis the slices are stacked along (z for axial, y for coronal, x for sagittal)."""
        return {0: 2, 1: 1, 2: 0, 3: 2}[int(self)]

    @classmethod
    def parse(cls, name: "str | Orientation") -> "Orientation":
        if isinstance(name, Orientation):
            return name
        try:
            return cls[name.upper()]
        except KeyError:
            raise InvalidParameter(f"unknown orientation {name!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Volume:
    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientation: Orientation = Orientation.ISOTROPIC

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise InvalidVolume(f"expected a non-empty 3D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidVolume("volume contains non-finite intensities")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise InvalidVolume(f"spacing must be three positive numbers, got {self.spacing}")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "orientation", Orientation.parse(self.orientation))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def extent_mm(self) -> np.ndarray:
        return np.asarray(self.dims) * np.asarray(self.spacing)

    @property
    def is_isotropic(self) -> bool:
        s = self.spacing
        return bool(np.allclose(s, s[0], rtol=1e-9, atol=0.0))

    def flat(self) -> np.ndarray:
        """Intensities in x-fastest order."""
        return self.data.ravel(order="F")

    @classmethod
    def from_flat(cls, flat, dims, spacing=(1.0, 1.0, 1.0), orientation=Orientation.ISOTROPIC):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != int(np.prod(dims)):
            raise InvalidVolume(f"data length {flat.size} != prod(dims) {int(np.prod(dims))}")
        return cls(flat.reshape(tuple(dims), order="F"), spacing, orientation)

    def with_data(self, data: np.ndarray) -> "Volume":
        return Volume(data, self.spacing, self.orientation)


@dataclass(frozen=True, eq=False)
class Mask:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise InvalidVolume(f"expected a non-empty 3D mask, got shape {data.shape}")
        if data.dtype != bool:
            if not np.all(np.isin(data, (0, 1))):
                raise InvalidVolume("mask values must be 0 or 1")
            data = data.astype(bool)
        object.__setattr__(self, "data", _frozen(data))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    def flat(self) -> np.ndarray:
        return self.data.ravel(order="F").astype(np.uint8)

    @classmethod
    def full(cls, dims) -> "Mask":
        return cls(np.ones(tuple(dims), dtype=bool))


@dataclass(frozen=True, eq=False)
class SliceImage:
    """A 2D plane; ``data`` has shape (height, width) with width the fastest index."""

    data: np.ndarray
    spacing: tuple[float, float] = (1.0, 1.0)

    @property
    def dims(self) -> tuple[int, int]:
        h, w = self.data.shape
        return (int(w), int(h))


def check_pair(v: Volume, m: Mask) -> None:
    if v.dims != m.dims:
        raise ShapeMismatch(f"mask dims {m.dims} do not match volume dims {v.dims}")


def _linear_weights(n_in: int, n_out: int, ratio: float) -> np.ndarray:
    """Row k holds the linear-interpolation weights for output sample k.

    Output sample k sits at source coordinate (k + 0.5) * ratio - 0.5. Samples
    within half a voxel of the grid extend the edge value; beyond that they are 0.
    """
    c = (np.arange(n_out) + 0.5) * ratio - 0.5
    w = np.zeros((n_out, n_in))
    inside = (c >= -0.5) & (c <= n_in - 0.5)
    cc = np.clip(c, 0.0, n_in - 1)
    i0 = np.floor(cc).astype(int)
    i0 = np.minimum(i0, max(n_in - 2, 0))
    frac = cc - i0
    rows = np.nonzero(inside)[0]
    if n_in == 1:
        w[rows, 0] = 1.0
        return w
    w[rows, i0[rows]] = 1.0 - frac[rows]
    w[rows, i0[rows] + 1] += frac[rows]
    return w


def _nearest_index(n_in: int, n_out: int, ratio: float) -> np.ndarray:
    """Source index for each output sample, or -1 outside the grid."""
    c = (np.arange(n_out) + 0.5) * ratio - 0.5
    idx = np.clip(np.floor(c + 0.5).astype(int), 0, n_in - 1)
    idx[(c < -0.5) | (c > n_in - 0.5)] = -1
    return idx


def resample_isotropic(
    v: Volume, m: Mask, target_spacing: float | None = None
) -> tuple[Volume, Mask]:
    """Resample a volume and its mask onto an isotropic grid.

    Intensities use trilinear interpolation (fill 0 outside the source grid),
    the mask uses nearest neighbour. ``target_spacing`` defaults to the
    smallest input spacing.
    """
    check_pair(v, m)
    if target_spacing is None:
        target_spacing = min(v.spacing)
    target_spacing = float(target_spacing)
    if not np.isfinite(target_spacing) or target_spacing <= 0:
        raise InvalidParameter(f"target_spacing must be > 0, got {target_spacing}")

    out_dims = [max(1, int(round(e / target_spacing))) for e in v.extent_mm]
    if tuple(out_dims) == v.dims and all(s == target_spacing for s in v.spacing):
        return Volume(v.data, (target_spacing,) * 3, Orientation.ISOTROPIC), m

    data = v.data
    mask = m.data
    for axis in range(3):
        ratio = target_spacing / v.spacing[axis]
        w = _linear_weights(v.dims[axis], out_dims[axis], ratio)
        data = np.moveaxis(np.tensordot(w, data, axes=([1], [axis])), 0, axis)
        idx = _nearest_index(v.dims[axis], out_dims[axis], ratio)
        taken = np.take(mask, np.maximum(idx, 0), axis=axis)
        shape = [1, 1, 1]
        shape[axis] = -1
        mask = taken & (idx >= 0).reshape(shape)
    return (
        Volume(data, (target_spacing,) * 3, Orientation.ISOTROPIC),
        Mask(mask),
    )


def _axis_index(axis) -> int:
    if isinstance(axis, str):
        try:
            return AXES[axis.upper()]
        except KeyError:
            raise InvalidParameter(f"axis must be X, Y or Z, got {axis!r}") from None
    if axis not in (0, 1, 2):
        raise InvalidParameter(f"axis must be 0, 1 or 2, got {axis!r}")
    return int(axis)


def _plane(a: np.ndarray, axis: int, index: int) -> np.ndarray:
    # rows follow the slower remaining axis, columns the faster one
    return np.take(a, index, axis=axis).T


def reslice(v: Volume, axis) -> list[SliceImage]:
    """Split an isotropic volume into its planes along ``axis`` (X, Y or Z)."""
    if not v.is_isotropic:
        raise RequiresIsotropic(f"reslice needs isotropic spacing, got {v.spacing}")
    ax = _axis_index(axis)
    s = v.spacing[0]
    return [SliceImage(_plane(v.data, ax, i), (s, s)) for i in range(v.dims[ax])]


def reslice_array(a: np.ndarray, axis) -> np.ndarray:
    """All planes along ``axis`` as one (n, height, width) array."""
    ax = _axis_index(axis)
    return np.ascontiguousarray(np.moveaxis(a, ax, 0).transpose(0, 2, 1))


def reassemble(slices, axis, spacing: float = 1.0) -> Volume:
    """Inverse of :func:`reslice`."""
    ax = _axis_index(axis)
    stacked = np.stack([np.asarray(s.data).T for s in slices], axis=ax)
    return Volume(stacked, (spacing,) * 3, Orientation.ISOTROPIC)


def effective_area(m: Mask, axis, index: int) -> int:
    """Number of mask-positive voxels in one plane."""
    ax = _axis_index(axis)
    n = m.dims[ax]
    if not 0 <= index < n:
        raise IndexOutOfRange(f"plane index {index} outside [0, {n})")
    return int(np.count_nonzero(np.take(m.data, index, axis=ax)))


def effective_volume(m: Mask) -> int:
    return int(np.count_nonzero(m.data))


@dataclass(frozen=True)
class PhantomParams:
    """Geometry drawn from the seed; kept for inspection."""

    centre: tuple[float, float, float]
    brain_axes: tuple[float, float, float]
    ventricle_axes: tuple[float, float, float]
    frequencies: tuple[float, float, float]
    phases: tuple[float, float, float]


def phantom_params(size: int, seed: int) -> PhantomParams:
    rng = np.random.Generator(np.random.Philox(seed))
    centre = tuple(size / 2 - 0.5 + rng.uniform(-1.0, 1.0, 3))
    brain = tuple(size * rng.uniform([0.34, 0.30, 0.28], [0.40, 0.36, 0.33]))
    vent = tuple(np.asarray(brain) * rng.uniform(0.25, 0.40, 3))
    freqs = tuple(rng.uniform(2.0, 4.0, 3) / size)
    phases = tuple(rng.uniform(0.0, 2 * np.pi, 3))
    return PhantomParams(centre, brain, vent, freqs, phases)


def make_phantom(size: int, seed: int, spacing: float = 1.0) -> tuple[Volume, Mask]:
    """Nested-ellipsoid brain phantom with a smooth sinusoidal texture.

    The brain ellipsoid is the mask. Intensity ramps from 0 at the mask
    boundary up to full brightness over a few voxels, and a darker ventricle
    ellipsoid sits inside. Intensities lie in [0, 1000] and are 0 outside the
    mask.
    """
    if int(size) != size or size < 32:
        raise InvalidParameter(f"size must be ≥ 32, got {size}")
    size = int(size)
    p = phantom_params(size, seed)
    grid = np.meshgrid(*(np.arange(size, dtype=np.float64),) * 3, indexing="ij")
    rel = [g - c for g, c in zip(grid, p.centre)]

    rho = np.sqrt(sum((r / a) ** 2 for r, a in zip(rel, p.brain_axes)))
    # ventricle offset along y so the phantom is not mirror-symmetric
    vrel = [rel[0], rel[1] + 0.25 * p.brain_axes[1], rel[2]]
    rho_v = np.sqrt(sum((r / a) ** 2 for r, a in zip(vrel, p.ventricle_axes)))

    texture = np.ones_like(rho)
    for r, f, ph in zip(rel, p.frequencies, p.phases):
        texture = texture + 0.12 * np.sin(2 * np.pi * f * r + ph)
    texture = texture + 0.08 * np.sin(
        6 * np.pi * (p.frequencies[0] * rel[0] + p.frequencies[1] * rel[1])
    )

    depth = (1.0 - rho) * float(np.mean(p.brain_axes))  # ~voxels inside the boundary
    brain = _smoothstep(depth / _EDGE_VOXELS)
    vdepth = (1.0 - rho_v) * float(np.mean(p.ventricle_axes))
    ventricle = _smoothstep(0.5 + vdepth / _EDGE_VOXELS)

    data = 700.0 * texture * brain * (1.0 - 0.65 * ventricle)
    mask = rho <= 1.0
    data = np.where(mask, np.clip(data, 0.0, 1000.0), 0.0)
    return Volume(data, (spacing,) * 3, Orientation.ISOTROPIC), Mask(mask)


_EDGE_VOXELS = 3.0


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)
