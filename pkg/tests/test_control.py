import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

import vecrbd
from oracles import rel_err
from vecrbd.control import TaskTarget, diff_ik_step, lie_derivative, osc_step, pose_error, rotation_log
from vecrbd.dynamics import crba, dynamics_terms, forward_dynamics, gravity_vector
from vecrbd.errors import DimensionError, UnknownFrameError
from vecrbd.kinematics import frame_transform, geometric_jacobian, manipulability
from vecrbd.model import ModelBuilder
from vecrbd.spatial import SpatialTransform


def error_norm(model, q, target):
    return np.linalg.norm(pose_error(frame_transform(model, q, target.frame), target.pose))


@given(st.floats(0.0, np.pi - 1e-3), st.integers(0, 2**31 - 1))
def test_rotation_log_matches_scipy(angle, seed):
    axis = np.random.default_rng(seed).normal(size=3)
    axis /= np.linalg.norm(axis)
    R = Rotation.from_rotvec(angle * axis).as_matrix()
    np.testing.assert_allclose(rotation_log(R), angle * axis, atol=1e-9)


def test_rotation_log_at_pi():
    R = Rotation.from_rotvec([0, np.pi, 0]).as_matrix()
    np.testing.assert_allclose(np.abs(rotation_log(R)), [0, np.pi, 0], atol=1e-9)


def test_pose_error_backends_agree():
    rng = np.random.default_rng(1)
    a = SpatialTransform(Rotation.random(random_state=2).as_matrix(), rng.normal(size=3))
    b = SpatialTransform(Rotation.random(random_state=3).as_matrix(), rng.normal(size=3))
    with vecrbd.use_backend("numpy"):
        expected = pose_error(a, b)
    with vecrbd.use_backend("jit"):
        np.testing.assert_allclose(pose_error(a, b), expected, atol=1e-13)


def test_target_gains_validated():
    with pytest.raises(ValueError):
        TaskTarget(SpatialTransform.identity(), "x", kp=-1.0)
    with pytest.raises(ValueError):
        TaskTarget(SpatialTransform.identity(), "x", kd=[1, 1, 1, 1, 1, -1])


def test_ik_zero_at_target(arm, backend):
    q = np.random.default_rng(4).uniform(-1, 1, 7)
    target = TaskTarget(frame_transform(arm, q, "hand_tcp"), "hand_tcp")
    assert np.max(np.abs(diff_ik_step(arm, q, target))) < 1e-12


def test_ik_damping_shrinks_command(arm, backend):
    rng = np.random.default_rng(5)
    q = rng.uniform(-1, 1, 7)
    goal = frame_transform(arm, q + rng.normal(scale=0.2, size=7), "hand_tcp")
    target = TaskTarget(goal, "hand_tcp")
    norms = [np.linalg.norm(diff_ik_step(arm, q, target, damping=lam))
             for lam in (1e-3, 1e-1, 1.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-3


def test_ik_step_reduces_error(arm, backend):
    rng = np.random.default_rng(6)
    for _ in range(20):
        q = rng.uniform(-2, 2, 7)
        goal = frame_transform(arm, q + rng.normal(scale=0.3, size=7), "hand_tcp")
        target = TaskTarget(goal, "hand_tcp")
        qn = q + 1e-3 * diff_ik_step(arm, q, target, damping=1e-3)
        assert error_norm(arm, qn, target) < error_norm(arm, q, target)


def test_ik_backends_agree(humanoid):
    rng = np.random.default_rng(7)
    q = rng.uniform(-1, 1, 23)
    target = TaskTarget(frame_transform(humanoid, q + 0.1, "left_hand"), "left_hand",
                        twist_ff=rng.normal(size=6), kp=2.0)
    with vecrbd.use_backend("numpy"):
        expected = diff_ik_step(humanoid, q, target)
    with vecrbd.use_backend("jit"):
        assert rel_err(diff_ik_step(humanoid, q, target), expected) < 1e-10


def test_ik_is_invariant_to_joint_listing(arm):
    desc = arm.description
    shuffled = ModelBuilder(desc.name)
    shuffled.description.links.extend(desc.links)
    shuffled.description.joints.extend(reversed(desc.joints))
    other = shuffled.build()
    q = np.random.default_rng(8).uniform(-1, 1, 7)
    target = TaskTarget(frame_transform(arm, q + 0.2, "hand_tcp"), "hand_tcp")
    np.testing.assert_array_equal(diff_ik_step(other, q, target), diff_ik_step(arm, q, target))


def test_ik_errors(arm):
    target = TaskTarget(SpatialTransform.identity(), "missing")
    with pytest.raises(UnknownFrameError):
        diff_ik_step(arm, np.zeros(7), target)
    with pytest.raises(ValueError):
        diff_ik_step(arm, np.zeros(7), TaskTarget(SpatialTransform.identity(), "hand_tcp"), damping=0.0)


@pytest.mark.parametrize("name, frame", [("chain7", "hand_tcp"), ("humanoid_floating", "left_hand")])
def test_osc_at_rest_is_gravity_compensation(name, frame, backend):
    model = vecrbd.load_builtin(name)
    q = np.random.default_rng(9).uniform(-1, 1, model.n_dof)
    target = TaskTarget(frame_transform(model, q, frame), frame, kp=50.0, kd=10.0)
    tau = osc_step(model, q, np.zeros(model.n_dof), target)
    np.testing.assert_array_equal(tau, gravity_vector(model, q))


def test_osc_zero_everything(arm, backend):
    q = np.random.default_rng(10).uniform(-1, 1, 7)
    target = TaskTarget(SpatialTransform.identity(), "hand_tcp", kp=0.0, kd=0.0)
    tau = osc_step(arm, q, np.zeros(7), target, a_g=np.zeros(6))
    np.testing.assert_array_equal(tau, np.zeros(7))


def null_space_residual(model, q, qd, frame, eps):
    rng = np.random.default_rng(11)
    posture = rng.uniform(-1, 1, model.n_dof)
    target = TaskTarget(frame_transform(model, q, frame), frame, kp=0.0, kd=0.0)
    gains = (30.0, 0.0)
    with_posture = osc_step(model, q, qd, target, posture, gains, eps=eps)
    without = osc_step(model, q, qd, target, eps=eps)
    projected = with_posture - without  # (1 - Jᵀ J̄ᵀ) τ₀
    M = crba(model, q)
    J = geometric_jacobian(model, q, frame)
    tau0 = gains[0] * (posture - q)
    return J @ np.linalg.solve(M, projected), M, J, tau0


@pytest.mark.parametrize("name, frame", [("chain7", "hand_tcp"), ("humanoid_floating", "left_hand")])
def test_osc_null_space_is_dynamically_consistent(name, frame, backend):
    model = vecrbd.load_builtin(name)
    rng = np.random.default_rng(12)
    for _ in range(5):
        q, qd = rng.uniform(-1, 1, (2, model.n_dof))
        residual, *_ = null_space_residual(model, q, qd, frame, eps=0.0)
        assert np.max(np.abs(residual)) <= 1e-8


def test_osc_null_space_with_regularizer(arm, backend):
    q, qd = np.random.default_rng(13).uniform(-1, 1, (2, 7))
    eps = 1e-6
    residual, M, J, tau0 = null_space_residual(arm, q, qd, "hand_tcp", eps)
    Minv_Jt = np.linalg.solve(M, J.T)
    Lam = np.linalg.inv(J @ Minv_Jt + eps * np.eye(6))
    expected = eps * Lam @ (J @ np.linalg.solve(M, tau0))
    assert rel_err(residual, expected) < 1e-5


def test_osc_tracks_task_acceleration(arm, backend):
    """Applying the OSC torque produces the commanded task acceleration (J̇ q̇ aside)."""
    rng = np.random.default_rng(14)
    q = rng.uniform(-1, 1, 7)
    accel_ff = rng.normal(size=6)
    target = TaskTarget(frame_transform(arm, q, "hand_tcp"), "hand_tcp", kp=0.0, kd=0.0,
                        accel_ff=accel_ff)
    tau = osc_step(arm, q, np.zeros(7), target, eps=0.0)
    qdd = forward_dynamics(arm, q, np.zeros(7), tau)
    J = geometric_jacobian(arm, q, "hand_tcp")
    assert rel_err(J @ qdd, accel_ff) < 1e-7


def test_osc_backends_agree(floating):
    rng = np.random.default_rng(15)
    q, qd = rng.uniform(-1, 1, (2, floating.n_dof))
    target = TaskTarget(frame_transform(floating, q + 0.1, "left_hand"), "left_hand",
                        kp=100.0, kd=20.0, twist_ff=rng.normal(size=6))
    posture = rng.uniform(-1, 1, floating.n_dof)
    with vecrbd.use_backend("numpy"):
        expected = osc_step(floating, q, qd, target, posture, (10.0, 1.0))
    with vecrbd.use_backend("jit"):
        assert rel_err(osc_step(floating, q, qd, target, posture, (10.0, 1.0)), expected) < 1e-8


def test_osc_evaluates_dynamics_once(arm, monkeypatch):
    import vecrbd.control as control
    calls = []

    def counting(*args, **kwargs):
        calls.append(1)
        return dynamics_terms(*args, **kwargs)

    monkeypatch.setattr(control, "dynamics_terms", counting)
    target = TaskTarget(frame_transform(arm, np.zeros(7), "hand_tcp"), "hand_tcp")
    osc_step(arm, np.ones(7) * 0.1, np.zeros(7), target)
    assert len(calls) == 1


def test_osc_input_errors(arm):
    target = TaskTarget(SpatialTransform.identity(), "hand_tcp")
    with pytest.raises(DimensionError):
        osc_step(arm, np.zeros(6), np.zeros(7), target)
    with pytest.raises(ValueError):
        osc_step(arm, np.zeros(7), np.zeros(7), target, eps=-1.0)
    with pytest.raises(ValueError):
        osc_step(arm, np.zeros(7), np.zeros(7), target, posture_gains=(-1.0, 0.0))


def test_lie_derivative_basic():
    z = np.array([0.3, -1.2, 2.0])
    assert lie_derivative(lambda x: 4.2 + 0.0 * x.sum(), lambda x: x, z) == 0.0
    assert np.isclose(lie_derivative(lambda x: 0.5 * (x * x).sum(), lambda x: x, z), z @ z, rtol=1e-15)
    with pytest.raises(DimensionError):
        lie_derivative(lambda x: x.sum(), lambda x: x[:2], z)
    with pytest.raises(DimensionError):
        lie_derivative(lambda x: x, lambda x: x, z)


def test_lie_derivative_manipulability_along_drift(arm):
    rng = np.random.default_rng(16)
    n = 7
    z = np.concatenate([rng.uniform(-1, 1, n), rng.uniform(-0.5, 0.5, n)])

    def h(state):
        return manipulability(geometric_jacobian(arm, state[:n], "hand_tcp"))

    def f(state):
        q, qd = state[:n], state[n:]
        return np.concatenate([qd, forward_dynamics(arm, q, qd, np.zeros(n))])

    value = lie_derivative(h, f, z)
    step = 1e-6
    direction = f(z)
    fd = (h(z + step * direction) - h(z - step * direction)) / (2 * step)
    assert abs(value - fd) <= 1e-4 * abs(fd)
