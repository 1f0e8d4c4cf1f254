"""Reference task-space controllers: damped least-squares IK and operational space control."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _backend
from .autodiff import jvp
from .dynamics import dynamics_terms
from .errors import DimensionError, SingularInertiaError
from .kinematics import _frame, coerce_vector, frame_jacobian, is_plain, jacobian_from_axes
from .model import RobotModel
from .spatial import SpatialTransform

__all__ = ["TaskTarget", "rotation_log", "pose_error", "diff_ik_step", "osc_step",
           "lie_derivative"]


def _six(x, name):
    x = np.broadcast_to(np.asarray(x, dtype=float), (6,)).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


@dataclass(frozen=True, eq=False)
class TaskTarget:
    """Desired pose of a named frame plus feedforward and per-axis gains.

    Twists, accelerations and gains are ordered ``[angular, linear]`` in root
    coordinates. ``kp`` is in 1/s for velocity-level IK and 1/s² for OSC;
    ``kd`` is in 1/s.
    """

    pose: SpatialTransform
    frame: str
    twist_ff: np.ndarray = field(default_factory=lambda: np.zeros(6))
    kp: np.ndarray = field(default_factory=lambda: np.ones(6))
    kd: np.ndarray = field(default_factory=lambda: np.zeros(6))
    accel_ff: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        for name in ("twist_ff", "kp", "kd", "accel_ff"):
            object.__setattr__(self, name, _six(getattr(self, name), name))
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise ValueError("gains must be nonnegative")


def rotation_log(R):
    """Rotation vector ``θ·a`` with ``exp(skew(θ·a)) = R``, θ in [0, π]."""
    R = np.asarray(R, dtype=float)
    cos = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = np.arccos(cos)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-6:
        # sin θ ≈ θ (1 - θ²/6)
        return w * (1.0 + theta * theta / 6.0)
    if np.pi - theta > 1e-6:
        return w * (theta / np.sin(theta))
    # near π: R ≈ 2 a aᵀ - 1, read the axis off the largest diagonal entry
    B = 0.5 * (R + np.eye(3))
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / np.sqrt(B[k, k])
    if axis @ w < 0.0:
        axis = -axis
    return theta * axis


def pose_error(current: SpatialTransform, desired: SpatialTransform):
    """Error twist ``[log(R_d R_cᵀ), p_d - p_c]`` in root coordinates."""
    if _backend.jit_active() and is_plain(current.rotation, desired.rotation):
        from . import _jit

        return _jit.pose_error(np.ascontiguousarray(current.rotation, dtype=float),
                               np.ascontiguousarray(current.translation, dtype=float),
                               np.ascontiguousarray(desired.rotation, dtype=float),
                               np.ascontiguousarray(desired.translation, dtype=float))
    rot = rotation_log(desired.rotation @ current.rotation.T)
    return np.concatenate([rot, desired.translation - current.translation])


def diff_ik_step(model: RobotModel, q, target: TaskTarget, damping=1e-3):
    """Joint velocity command ``Jᵀ (J Jᵀ + λ² 1)⁻¹ (kp ⊙ e + twist_ff)``."""
    if not damping > 0.0:
        raise ValueError("damping must be positive")
    q = coerce_vector(model, q)
    pose, J = frame_jacobian(model, q, target.frame)
    if _backend.jit_active() and is_plain(q):
        from . import _jit

        return _jit.dls_step(J, pose.rotation, pose.translation, target.pose.rotation,
                             target.pose.translation, target.kp, target.twist_ff,
                             float(damping))
    rhs = target.kp * pose_error(pose, target.pose) + target.twist_ff
    JJt = J @ J.T
    JJt[np.diag_indices(6)] += damping * damping
    return J.T @ scipy.linalg.solve(JJt, rhs, assume_a="pos", check_finite=False)


def osc_step(model: RobotModel, q, qd, target: TaskTarget, posture=None,
             posture_gains=(0.0, 0.0), eps=1e-6, a_g=None):
    """Operational space torque with a dynamically consistent posture task.

    ``Λ = (J M⁻¹ Jᵀ + eps·1)⁻¹`` and ``J̄ = M⁻¹ Jᵀ Λ``;
    ``τ = Jᵀ Λ (kp ⊙ e + kd ⊙ (twist_ff - J q̇) + accel_ff) + (1 - Jᵀ J̄ᵀ) τ₀ + c + g``
    where ``τ₀ = kp₀ (posture - q) - kd₀ q̇``. The ``J̇ q̇`` term is neglected.
    """
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    q = coerce_vector(model, q, "q")
    qd = coerce_vector(model, qd, "qd")
    posture = q if posture is None else coerce_vector(model, posture, "posture")
    kp0, kd0 = posture_gains
    if kp0 < 0 or kd0 < 0:
        raise ValueError("posture gains must be nonnegative")

    terms = dynamics_terms(model, q, qd, a_g)
    frame = _frame(model, target.frame)
    if frame.joint < 0:
        pose = frame.offset
    else:
        pose = terms.frames[frame.joint].compose(frame.offset)
    J = jacobian_from_axes(model, terms.S, frame.joint, pose.translation)

    err = pose_error(pose, target.pose)
    accel = target.kp * err + target.kd * (target.twist_ff - J @ qd) + target.accel_ff
    tau_posture = kp0 * (posture - q) - kd0 * qd
    if _backend.jit_active() and is_plain(terms.M):
        from . import _jit

        try:
            return _jit.osc_torque(terms.M, J, terms.c, terms.g, accel, tau_posture, float(eps))
        except np.linalg.LinAlgError as exc:
            raise SingularInertiaError(f"operational space factorization failed: {exc}") from None
    try:
        factor = scipy.linalg.cho_factor(terms.M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularInertiaError(f"mass matrix factorization failed: {exc}") from None
    MinvJt = scipy.linalg.cho_solve(factor, J.T, check_finite=False)
    Lambda_inv = J @ MinvJt
    Lambda_inv[np.diag_indices(6)] += eps
    try:
        Lambda = scipy.linalg.solve(Lambda_inv, np.eye(6), assume_a="pos", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularInertiaError(f"task-space inertia is singular: {exc}") from None
    Jbar = MinvJt @ Lambda
    tau_null = tau_posture - J.T @ (Jbar.T @ tau_posture)
    return J.T @ (Lambda @ accel) + tau_null + terms.c + terms.g


def lie_derivative(h, f, z):
    """``L_f h(z) = ∇h(z) · f(z)`` via one forward-mode JVP (no gradient is formed)."""
    z = np.asarray(z, dtype=float)
    direction = np.asarray(f(z), dtype=float)
    if direction.shape != z.shape:
        raise DimensionError(f"f(z) has shape {direction.shape}, expected {z.shape}")
    _, tangent = jvp(h, z, direction)
    tangent = np.asarray(tangent)
    if tangent.shape not in ((), (1,)):
        raise DimensionError(f"h must be scalar-valued, got output shape {tangent.shape}")
    return float(tangent.reshape(()))
