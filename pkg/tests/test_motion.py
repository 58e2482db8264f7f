import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.interpolate import make_smoothing_spline
from scipy.ndimage import affine_transform

from stackselect.errors import InvalidParameter, RequiresIsotropic, ShapeMismatch
from stackselect.motion import (
    MotionTrajectory,
    RandomMotionConfig,
    RigidTransform,
    acquire_stack,
    apply_motion,
    compose,
    invert,
    linear_trajectory,
    random_trajectory,
    rotation_matrix,
    stack_geometry,
    to_matrix,
)
from stackselect.volume import Mask, Orientation, Volume

angles = st.floats(-170, 170)
shifts = st.floats(-20, 20)
transforms = st.builds(
    RigidTransform, st.tuples(angles, angles, angles), st.tuples(shifts, shifts, shifts)
)


def _elementary(theta_deg):
    a, b, c = np.radians(theta_deg)
    rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    rz = np.array([[np.cos(c), -np.sin(c), 0], [np.sin(c), np.cos(c), 0], [0, 0, 1]])
    return rz @ ry @ rx


def test_identity_matrix():
    np.testing.assert_array_equal(to_matrix(RigidTransform.identity()), np.eye(4))


def test_quarter_turn_about_x():
    T = to_matrix(RigidTransform((90, 0, 0), 0))
    np.testing.assert_allclose(T @ [0, 1, 0, 1], [0, 0, 1, 1], atol=1e-12)


def test_matrix_matches_elementary_product():
    T = to_matrix(RigidTransform((10, 20, 30), (1, 2, 3)))
    np.testing.assert_allclose(T[:3, :3], _elementary((10, 20, 30)), atol=1e-14)
    np.testing.assert_allclose(T[:3, 3], [1, 2, 3])
    np.testing.assert_allclose(T[3], [0, 0, 0, 1])


def test_compose_invert_identities():
    t = RigidTransform((3, -4, 5), (0.5, 1, -2))
    np.testing.assert_allclose(to_matrix(compose(t, RigidTransform.identity())), to_matrix(t), atol=1e-12)
    np.testing.assert_allclose(to_matrix(invert(RigidTransform.identity())), np.eye(4), atol=1e-15)


@given(transforms)
def test_compose_with_inverse_is_identity(t):
    M = to_matrix(compose(t, invert(t)))
    assert np.max(np.abs(M - np.eye(4))) < 1e-9


@given(transforms, transforms)
def test_compose_matches_matrix_product(a, b):
    np.testing.assert_allclose(to_matrix(compose(a, b)), to_matrix(a) @ to_matrix(b), atol=1e-9)


@given(st.tuples(angles, angles, angles))
def test_rotation_is_orthonormal(theta):
    R = rotation_matrix(theta)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


# linear trajectories ---------------------------------------------------------------


def test_linear_cumulative_steps():
    traj = linear_trajectory(4, 5.0, 1.0)
    p = traj.params()
    np.testing.assert_allclose(p[3], [15, 15, 15, 3, 3, 3])
    np.testing.assert_array_equal(p[0], 0)
    small = linear_trajectory(3, 2.0, 0.4).params()
    np.testing.assert_allclose(small[1], [2, 2, 2, 0.4, 0.4, 0.4])
    assert np.all(linear_trajectory(5, 0, 0).params() == 0)


def test_linear_per_axis_and_alternating():
    p = linear_trajectory(3, (0, 0, 5), (1, 0, 0)).params()
    np.testing.assert_allclose(p[2], [0, 0, 10, 2, 0, 0])
    alt = linear_trajectory(4, 2.0, 0.0, mode="alternating").params()
    np.testing.assert_allclose(alt[:, 0], [-1, 1, -1, 1])
    with pytest.raises(InvalidParameter):
        linear_trajectory(3, 1, 1, mode="sawtooth")


# random trajectories ----------------------------------------------------------------


def _reference_random(n, cfg):
    """Step-by-step generator: draws, running sums, spline, interleaved sampling, clamp."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    out = np.zeros((n, 6))
    for dof in range(6):
        local = cfg.local_max_rot_deg if dof < 3 else cfg.local_max_trans_mm
        clamp = cfg.clamp_rot_deg if dof < 3 else cfg.clamp_trans_mm
        bound = cfg.global_offset_factor * local
        points = [rng.uniform(-bound, bound)]
        for _ in range(2 * n - 1):
            points.append(points[-1] + rng.uniform(-local, local))
        lam = cfg.spline_smoothing / (1 - cfg.spline_smoothing)
        spline = make_smoothing_spline(np.arange(2 * n, dtype=float), np.array(points), lam=lam)
        # acquisition order: every other slice from 0, then every other from 1
        order = list(range(0, n, 2)) + list(range(1, n, 2))
        half = len(range(0, n, 2))
        for acq, slice_idx in enumerate(order):
            t = 2 * acq if acq < half else n + 2 * (acq - half)
            out[slice_idx, dof] = min(max(float(spline(t)), -clamp), clamp)
    return out


def test_random_matches_reference_generator():
    cfg = RandomMotionConfig(seed=42)
    traj = random_trajectory(24, cfg)
    np.testing.assert_allclose(traj.params(), _reference_random(24, cfg), rtol=0, atol=1e-12)
    again = random_trajectory(24, cfg)
    assert traj.params().tobytes() == again.params().tobytes()
    assert traj.interleaved and traj.seed == 42


def test_interleaving_allows_large_adjacent_jumps():
    p = random_trajectory(24, RandomMotionConfig(seed=42)).params()
    assert np.max(np.abs(np.diff(p[:, :3], axis=0))) > 5.0


def test_random_zero_motion_is_identity():
    cfg = RandomMotionConfig(local_max_rot_deg=0, local_max_trans_mm=0, seed=3)
    assert np.all(random_trajectory(10, cfg).params() == 0)


@given(st.integers(0, 2**31 - 1), st.integers(2, 40))
def test_random_respects_clamp(seed, n):
    p = random_trajectory(n, RandomMotionConfig(seed=seed)).params()
    assert np.all(np.abs(p[:, :3]) <= 25.0) and np.all(np.abs(p[:, 3:]) <= 5.0)


def test_random_config_validation():
    with pytest.raises(InvalidParameter):
        RandomMotionConfig(spline_smoothing=1.0)
    with pytest.raises(InvalidParameter):
        RandomMotionConfig(local_max_rot_deg=-1)
    with pytest.raises(InvalidParameter):
        random_trajectory(1, RandomMotionConfig())


# stack synthesis -----------------------------------------------------------------------


def test_identity_motion_samples_untransformed_volume(phantom32):
    v, m = phantom32
    for orient in ("axial", "coronal", "sagittal"):
        s, sm = acquire_stack(v, m, orient, slice_thickness_mm=1.0)
        np.testing.assert_allclose(s.data, v.data, atol=1e-12)
        np.testing.assert_array_equal(sm.data, m.data)
        assert s.orientation is Orientation.parse(orient)


def test_thick_slices_interpolate_between_planes(phantom32):
    v, m = phantom32
    s, _ = acquire_stack(v, m, "axial", 2.0)
    assert s.dims == (32, 32, 16) and s.spacing == (1.0, 1.0, 2.0)
    # slice j is centred at z = 2j + 0.5
    np.testing.assert_allclose(s.data[:, :, 3], 0.5 * (v.data[:, :, 6] + v.data[:, :, 7]), atol=1e-12)


def test_integer_translation_shifts_content():
    data = np.zeros((8, 8, 4))
    data[2:6, 2:6, :] = 7.0
    data[0, :, :] = 3.0
    v = Volume(data)
    traj = MotionTrajectory.from_params(np.tile([0, 0, 0, 1.0, 0, 0], (4, 1)))
    s, _ = apply_motion(v, Mask.full(v.dims), traj, "axial", 1.0)
    np.testing.assert_allclose(s.data[1:], data[:-1], atol=1e-12)
    # background zeros enter from the edge
    np.testing.assert_array_equal(s.data[0], 0.0)


def test_inplane_rotation_matches_2d_resampler(phantom32):
    v, m = phantom32
    n = v.dims[2]
    params = np.zeros((n, 6))
    j = 8
    params[j, 2] = 5.0
    s, _ = apply_motion(v, m, MotionTrajectory.from_params(params), "axial", 1.0)
    plane = v.data[:, :, j]
    c = (np.array(plane.shape) - 1) / 2.0
    th = np.radians(5.0)
    Rt = np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]])
    ref = affine_transform(plane, Rt, offset=c - Rt @ c, order=1, mode="constant")
    np.testing.assert_allclose(s.data[:, :, j], ref, atol=1e-9)
    np.testing.assert_allclose(s.data[:, :, j + 1], v.data[:, :, j + 1], atol=1e-12)


def test_apply_motion_errors(phantom32):
    v, m = phantom32
    with pytest.raises(ShapeMismatch):
        apply_motion(v, m, MotionTrajectory.identity(3), "axial", 2.0)
    aniso = Volume(np.ones((4, 4, 4)), (1, 1, 2))
    with pytest.raises(RequiresIsotropic):
        apply_motion(aniso, Mask.full(aniso.dims), MotionTrajectory.identity(4), "axial", 2.0)
    with pytest.raises(InvalidParameter):
        stack_geometry(v, "isotropic", 2.0)


def test_motion_moves_mask(phantom32):
    v, m = phantom32
    n = stack_geometry(v, "axial", 2.0)[2]
    s, sm = apply_motion(v, m, random_trajectory(n, RandomMotionConfig(seed=1)), "axial", 2.0)
    s0, sm0 = acquire_stack(v, m, "axial", 2.0)
    assert sm.data.dtype == bool
    assert not np.array_equal(sm.data, sm0.data)
    assert not np.allclose(s.data, s0.data)
