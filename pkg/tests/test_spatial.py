import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation

from oracles import crf6, crm6, force_matrix, motion_matrix
from vecrbd.errors import ModelError
from vecrbd.spatial import (
    SpatialTransform,
    cross_force,
    cross_motion,
    inertia_from_params,
    kinetic_energy,
    power,
    rotation_about_axis,
    skew,
    transform_force,
    transform_inertia,
    transform_motion,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec6 = arrays(np.float64, 6, elements=finite)
vec3 = arrays(np.float64, 3, elements=finite)


@st.composite
def transforms(draw):
    quat = draw(arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(
        lambda x: np.linalg.norm(x) > 1e-3))
    R = Rotation.from_quat(quat / np.linalg.norm(quat)).as_matrix()
    return SpatialTransform(R, draw(vec3))


@st.composite
def inertias(draw):
    mass = draw(st.floats(0.0, 5.0))
    com = draw(arrays(np.float64, 3, elements=st.floats(-1, 1)))
    moments = draw(arrays(np.float64, 3, elements=st.floats(0.01, 1.0)))
    moments[2] = min(moments[2], moments[0] + moments[1])
    Q = draw(transforms()).rotation
    return inertia_from_params(mass, com, Q @ np.diag(moments) @ Q.T)


def close(a, b, tol=1e-12):
    scale = max(1.0, np.max(np.abs(b)))
    assert np.max(np.abs(np.asarray(a) - b)) <= tol * scale


def test_skew_is_cross():
    a, b = np.array([1.0, 2, 3]), np.array([-4.0, 0.5, 2])
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b))


@given(vec6)
def test_self_cross_vanishes(v):
    close(cross_motion(v, v), np.zeros(6))


@given(vec6)
def test_zero_cross(m):
    assert np.all(cross_motion(np.zeros(6), m) == 0)
    assert np.all(cross_force(np.zeros(6), m) == 0)


@given(vec6, vec6)
def test_cross_motion_matches_dense_operator(v, m):
    close(cross_motion(v, m), crm6(v) @ m)


@given(vec6, vec6)
def test_cross_force_matches_dense_operator(v, f):
    close(cross_force(v, f), crf6(v) @ f)


@given(vec6, vec6, vec6)
def test_adjoint_identity(v, f, m):
    lhs = cross_force(v, f) @ m + f @ cross_motion(v, m)
    scale = max(1.0, np.abs(cross_force(v, f) @ m))
    assert abs(lhs) <= 1e-12 * scale


def test_batched_cross_products():
    rng = np.random.default_rng(1)
    v, m = rng.normal(size=(2, 5, 6))
    np.testing.assert_allclose(cross_motion(v, m), np.stack([crm6(a) @ b for a, b in zip(v, m)]))


def test_identity_transform_is_noop():
    T = SpatialTransform.identity()
    m = np.arange(6.0)
    np.testing.assert_array_equal(transform_motion(T, m), m)
    np.testing.assert_array_equal(transform_force(T, m), m)
    I = inertia_from_params(2.0, [0.1, 0.2, 0.3], np.diag([1.0, 2, 2.5]))
    np.testing.assert_allclose(transform_inertia(T, I), I, atol=1e-15)


def test_translation_couples_angular_into_linear():
    T = SpatialTransform(np.eye(3), np.array([1.0, 0.0, 0.0]))
    w = np.array([0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
    out = transform_motion(T, w)
    # velocity at A's origin of a body spinning about B's origin: ω × (0 - p)
    np.testing.assert_allclose(out, [0, 0, 2, 0, -2, 0])
    I = inertia_from_params(1.0, [0.3, 0.0, 0.0], np.eye(3) * 0.1)
    assert np.isclose(kinetic_energy(transform_inertia(T, I), out), kinetic_energy(I, w))


@given(transforms(), vec6)
def test_motion_transform_matches_plucker_matrix(T, m):
    close(transform_motion(T, m), motion_matrix(T.rotation, T.translation) @ m, 1e-10)
    close(transform_force(T, m), force_matrix(T.rotation, T.translation) @ m, 1e-10)


@given(transforms(), inertias(), vec6)
def test_energy_is_frame_invariant(T, I, v):
    before = kinetic_energy(I, v)
    after = kinetic_energy(transform_inertia(T, I), transform_motion(T, v))
    assert abs(after - before) <= 1e-12 * max(1.0, abs(before)) * 100


@given(transforms(), vec6, vec6)
def test_power_is_frame_invariant(T, f, v):
    before = power(f, v)
    after = power(transform_force(T, f), transform_motion(T, v))
    assert abs(after - before) <= 1e-12 * max(1.0, np.abs(f).max() * np.abs(v).max()) * 100


@given(transforms(), inertias(), vec6)
def test_inertia_transform_is_consistent(T, I, m):
    lhs = transform_inertia(T, I) @ transform_motion(T, m)
    close(lhs, transform_force(T, I @ m), 1e-10)


@given(transforms(), transforms(), vec6)
def test_composition(T1, T2, m):
    close(transform_motion(T1 @ T2, m), transform_motion(T1, transform_motion(T2, m)), 1e-10)


@given(transforms())
def test_inverse(T):
    H = (T @ T.inverse()).as_homogeneous()
    np.testing.assert_allclose(H, np.eye(4), atol=1e-12)


def test_checked_rejects_bad_rotations():
    with pytest.raises(ModelError):
        SpatialTransform.checked(np.diag([1.0, 1.0, 1.1]), np.zeros(3))
    with pytest.raises(ModelError):
        SpatialTransform.checked(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    T = SpatialTransform.checked(rotation_about_axis([0, 0, 1], 0.3), [1, 2, 3])
    assert T.translation.tolist() == [1, 2, 3]


def test_inertia_from_params_cases():
    np.testing.assert_array_equal(inertia_from_params(0.0, [0, 0, 0], np.zeros((3, 3))),
                                  np.zeros((6, 6)))
    np.testing.assert_array_equal(inertia_from_params(3.0, [0, 0, 0], np.zeros((3, 3))),
                                  np.diag([0, 0, 0, 3.0, 3.0, 3.0]))
    # point mass at (0,0,1), pure rotation: ½ m |ω × c|²
    I = inertia_from_params(1.0, [0, 0, 1], np.zeros((3, 3)))
    w = np.array([0.7, -0.2, 0.4])
    v = np.concatenate([w, np.zeros(3)])
    assert np.isclose(kinetic_energy(I, v), 0.5 * np.sum(np.cross(w, [0, 0, 1]) ** 2), rtol=1e-14)


def test_inertia_from_params_errors():
    with pytest.raises(ModelError):
        inertia_from_params(-1.0, [0, 0, 0], np.eye(3))
    with pytest.raises(ModelError):
        inertia_from_params(1.0, [0, 0, 0], [[1, 0.5, 0], [0, 1, 0], [0, 0, 1]])


@given(inertias(), vec6)
def test_inertia_is_psd(I, v):
    np.testing.assert_allclose(I, I.T, atol=1e-14)
    assert kinetic_energy(I, v) >= -1e-12


@given(arrays(np.float64, 3, elements=st.floats(-1, 1)).filter(lambda a: np.linalg.norm(a) > 1e-3),
       st.floats(-np.pi, np.pi))
def test_rotation_about_axis_matches_scipy(axis, angle):
    axis = axis / np.linalg.norm(axis)
    np.testing.assert_allclose(rotation_about_axis(axis, angle),
                               Rotation.from_rotvec(axis * angle).as_matrix(), atol=1e-12)
