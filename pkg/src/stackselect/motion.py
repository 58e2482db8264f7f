"""Rigid 6-DoF motion, slice-wise trajectories and motion-corrupted stack synthesis."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import CubicSpline, make_smoothing_spline
from scipy.ndimage import map_coordinates

from .errors import InvalidParameter, RequiresIsotropic, ShapeMismatch
from .volume import Mask, Orientation, Volume, check_pair


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix(rotation_deg) -> np.ndarray:
    """R = Rz @ Ry @ Rx for angles given in degrees."""
    ax, ay, az = np.deg2rad(np.asarray(rotation_deg, dtype=np.float64))
    return _rz(az) @ _ry(ay) @ _rx(ax)


def euler_from_matrix(R: np.ndarray) -> tuple[float, float, float]:
    """Angles (deg) such that rotation_matrix(angles) == R."""
    sy = np.hypot(R[2, 1], R[2, 2])
    if sy > 1e-12:
        ax = np.arctan2(R[2, 1], R[2, 2])
        ay = np.arctan2(-R[2, 0], sy)
        az = np.arctan2(R[1, 0], R[0, 0])
    else:  # gimbal lock, fold everything into z
        ax = 0.0
        ay = np.arctan2(-R[2, 0], sy)
        az = np.arctan2(-R[0, 1], R[1, 1])
    return tuple(float(a) for a in np.rad2deg([ax, ay, az]))


@dataclass(frozen=True)
class RigidTransform:
    rotation_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    translation_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        rot = tuple(float(a) for a in np.broadcast_to(self.rotation_deg, 3))
        trans = tuple(float(a) for a in np.broadcast_to(self.translation_mm, 3))
        object.__setattr__(self, "rotation_deg", rot)
        object.__setattr__(self, "translation_mm", trans)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "RigidTransform":
        T = np.asarray(T, dtype=np.float64)
        return cls(euler_from_matrix(T[:3, :3]), tuple(T[:3, 3]))

    def params(self) -> np.ndarray:
        return np.array(self.rotation_deg + self.translation_mm)


def to_matrix(t: RigidTransform) -> np.ndarray:
    """4x4 homogeneous matrix [[R, d], [0, 1]]."""
    T = np.eye(4)
    T[:3, :3] = rotation_matrix(t.rotation_deg)
    T[:3, 3] = t.translation_mm
    return T


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform whose matrix is to_matrix(a) @ to_matrix(b)."""
    return RigidTransform.from_matrix(to_matrix(a) @ to_matrix(b))


def invert(t: RigidTransform) -> RigidTransform:
    R = rotation_matrix(t.rotation_deg)
    T = np.eye(4)
    T[:3, :3] = R.T
    T[:3, 3] = -R.T @ np.asarray(t.translation_mm)
    return RigidTransform.from_matrix(T)


@dataclass(frozen=True)
class MotionTrajectory:
    transforms: tuple[RigidTransform, ...]
    interleaved: bool = False
    seed: int | None = None
    config: dict | None = None

    def __len__(self) -> int:
        return len(self.transforms)

    def params(self) -> np.ndarray:
        """(n_slices, 6) array of rotation (deg) then translation (mm)."""
        if not self.transforms:
            return np.zeros((0, 6))
        return np.stack([t.params() for t in self.transforms])

    @classmethod
    def from_params(cls, params, interleaved=False, seed=None, config=None) -> "MotionTrajectory":
        params = np.asarray(params, dtype=np.float64).reshape(-1, 6)
        return cls(
            tuple(RigidTransform(tuple(p[:3]), tuple(p[3:])) for p in params),
            interleaved,
            seed,
            config,
        )

    @classmethod
    def identity(cls, n_slices: int) -> "MotionTrajectory":
        return cls(tuple(RigidTransform() for _ in range(n_slices)))


LINEAR_MODES = ("cumulative", "alternating")


def linear_trajectory(
    n_slices: int, rot_step_deg=0.0, trans_step_mm=0.0, mode: str = "cumulative"
) -> MotionTrajectory:
    """Slice-wise linear motion with a fixed step between adjacent slices.

    ``mode="cumulative"`` ramps the pose: slice i is moved by i * step.
    ``mode="alternating"`` jitters around the volume pose: even slices sit at
    -step/2 and odd slices at +step/2. Scalar steps apply to all three axes.
    """
    if n_slices < 1:
        raise InvalidParameter(f"n_slices must be >= 1, got {n_slices}")
    if mode not in LINEAR_MODES:
        raise InvalidParameter(f"linear mode must be one of {LINEAR_MODES}, got {mode!r}")
    rot = np.broadcast_to(np.asarray(rot_step_deg, dtype=np.float64), 3)
    trans = np.broadcast_to(np.asarray(trans_step_mm, dtype=np.float64), 3)
    i = np.arange(n_slices)
    factor = i.astype(np.float64) if mode == "cumulative" else np.where(i % 2 == 0, -0.5, 0.5)
    params = factor[:, None] * np.concatenate([rot, trans])[None, :]
    return MotionTrajectory.from_params(
        params,
        config={
            "mode": "linear",
            "linear_mode": mode,
            "rot_step_deg": rot.tolist(),
            "trans_step_mm": trans.tolist(),
        },
    )


@dataclass(frozen=True)
class RandomMotionConfig:
    local_max_rot_deg: float = 5.0
    local_max_trans_mm: float = 1.0
    global_offset_factor: float = 2.0
    clamp_rot_deg: float = 25.0
    clamp_trans_mm: float = 5.0
    seed: int = 0
    spline_smoothing: float = 0.5

    def __post_init__(self):
        if self.local_max_rot_deg < 0 or self.local_max_trans_mm < 0:
            raise InvalidParameter("local maxima must be non-negative")
        if self.clamp_rot_deg < self.local_max_rot_deg or self.clamp_trans_mm < self.local_max_trans_mm:
            raise InvalidParameter("clamps must be >= local maxima")
        if self.global_offset_factor < 0:
            raise InvalidParameter("global_offset_factor must be non-negative")
        if not 0.0 <= self.spline_smoothing < 1.0:
            raise InvalidParameter("spline_smoothing must lie in [0, 1)")


def smoothing_lambda(smoothing: float) -> float:
    """Map the [0, 1) roughness knob onto the spline penalty weight (0 interpolates)."""
    return smoothing / (1.0 - smoothing)


def fit_control_points(points: np.ndarray, smoothing: float):
    """Cubic smoothing spline through control points indexed 0..len-1."""
    t = np.arange(len(points), dtype=np.float64)
    lam = smoothing_lambda(smoothing)
    if len(points) < 5:
        return CubicSpline(t, points, bc_type="natural")
    return make_smoothing_spline(t, points, lam=lam)


def temporal_sample_times(n_slices: int) -> np.ndarray:
    """Curve position sampled for each slice, in spatial slice order.

    Slices 0, 2, 4, ... (the "odd" slices 1, 3, 5, ... counted from one) are
    acquired first and read the first half of the curve at every other control
    point; the remaining slices read the second half the same way.
    """
    times = np.empty(n_slices)
    first = np.arange(0, n_slices, 2)
    second = np.arange(1, n_slices, 2)
    times[first] = 2.0 * np.arange(len(first))
    times[second] = n_slices + 2.0 * np.arange(len(second))
    return times


def random_trajectory(n_slices: int, cfg: RandomMotionConfig = RandomMotionConfig()) -> MotionTrajectory:
    """Interleaved random-walk trajectory smoothed by a cubic spline.

    For each DoF the generator draws a start point uniformly in
    [-offset, offset] with offset = global_offset_factor * local_max, then
    2N - 1 uniform steps in [-local_max, local_max]. The 2N accumulated
    control points are spline-smoothed, sampled per :func:`temporal_sample_times`
    and clamped to the configured limits.
    """
    if n_slices < 2:
        raise InvalidParameter(f"random trajectories need >= 2 slices, got {n_slices}")
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    local = [cfg.local_max_rot_deg] * 3 + [cfg.local_max_trans_mm] * 3
    clamp = [cfg.clamp_rot_deg] * 3 + [cfg.clamp_trans_mm] * 3
    times = temporal_sample_times(n_slices)
    params = np.empty((n_slices, 6))
    for dof in range(6):
        offset = cfg.global_offset_factor * local[dof]
        start = rng.uniform(-offset, offset)
        steps = rng.uniform(-local[dof], local[dof], size=2 * n_slices - 1)
        control = start + np.concatenate([[0.0], np.cumsum(steps)])
        curve = fit_control_points(control, cfg.spline_smoothing)
        params[:, dof] = np.clip(curve(times), -clamp[dof], clamp[dof])
    return MotionTrajectory.from_params(
        params, interleaved=True, seed=cfg.seed, config={"mode": "random", **asdict(cfg)}
    )


def stack_geometry(v: Volume, orientation, slice_thickness_mm: float):
    """Slice count and output spacing for acquiring ``v`` in ``orientation``."""
    orientation = Orientation.parse(orientation)
    if orientation is Orientation.ISOTROPIC:
        raise InvalidParameter("stacks need an acquisition orientation (axial, coronal, sagittal)")
    if not slice_thickness_mm > 0:
        raise InvalidParameter(f"slice thickness must be > 0, got {slice_thickness_mm}")
    axis = orientation.slice_axis
    n_slices = int(np.floor(v.extent_mm[axis] / slice_thickness_mm + 1e-9))
    spacing = list(v.spacing)
    spacing[axis] = float(slice_thickness_mm)
    return orientation, axis, n_slices, tuple(spacing)


def apply_motion(
    v: Volume,
    m: Mask,
    traj: MotionTrajectory,
    orientation="axial",
    slice_thickness_mm: float = 2.0,
) -> tuple[Volume, Mask]:
    """Acquire a stack from ``v`` with slice ``i`` taken from the volume moved by ``traj[i]``.

    Each transform acts about the volume centre. Intensities are point-sampled
    at the slice centre plane by trilinear interpolation, the mask by nearest
    neighbour.
    """
    check_pair(v, m)
    if not v.is_isotropic:
        raise RequiresIsotropic("apply_motion needs an isotropic source volume")
    orientation, axis, n_slices, out_spacing = stack_geometry(v, orientation, slice_thickness_mm)
    if len(traj) != n_slices:
        raise ShapeMismatch(f"trajectory has {len(traj)} transforms, stack has {n_slices} slices")
    if n_slices < 1:
        raise InvalidParameter("slice thickness exceeds the volume extent")

    s = v.spacing[0]
    out_dims = list(v.dims)
    out_dims[axis] = n_slices
    pos = [np.arange(n) * s for n in out_dims]
    pos[axis] = -0.5 * s + (np.arange(n_slices) + 0.5) * slice_thickness_mm
    grid = np.stack(np.meshgrid(*pos, indexing="ij"))  # (3, *out_dims) in mm
    centre = (np.asarray(v.dims) - 1) * s / 2.0

    params = traj.params()
    rots = np.stack([rotation_matrix(p[:3]) for p in params])
    trans = params[:, 3:]
    g = np.moveaxis(grid, axis + 1, 1)  # (3, n_slices, ...)
    rel = g - centre.reshape(3, 1, 1, 1) - trans.T.reshape(3, n_slices, 1, 1)
    # inverse mapping q = c + R^T (p - c - d)
    src = np.einsum("sji,js...->is...", rots, rel) + centre.reshape(3, 1, 1, 1)
    src = np.moveaxis(src, 1, axis + 1) / s

    n = np.asarray(v.dims).reshape(3, 1, 1, 1)
    outside = np.any((src < -0.5) | (src > n - 0.5), axis=0)
    data = map_coordinates(v.data, src, order=1, mode="nearest")
    data[outside] = 0.0
    mask = map_coordinates(m.data.astype(np.float64), src, order=0, mode="nearest") > 0.5
    mask[outside] = False
    return Volume(data, out_spacing, orientation), Mask(mask)


def acquire_stack(v: Volume, m: Mask, orientation="axial", slice_thickness_mm: float = 2.0):
    """Motion-free stack: :func:`apply_motion` with the identity trajectory."""
    _, _, n_slices, _ = stack_geometry(v, orientation, slice_thickness_mm)
    return apply_motion(v, m, MotionTrajectory.identity(n_slices), orientation, slice_thickness_mm)
