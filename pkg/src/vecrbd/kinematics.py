"""Forward kinematics, frame queries, geometric Jacobians and manipulability."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .autodiff import Dual
from .errors import DimensionError, UnknownFrameError, UnsupportedStructureError
from .model import JointType, RobotModel
from .spatial import SpatialTransform, skew

__all__ = [
    "FrameSet",
    "forward_kinematics",
    "forward_kinematics_loop",
    "forward_kinematics_scan",
    "associative_scan",
    "frame_transform",
    "spatial_axes",
    "frame_jacobian",
    "geometric_jacobian",
    "manipulability",
]


@dataclass(frozen=True, eq=False)
class FrameSet:
    """World poses ``⁰T_i`` of every moving joint frame.

    ``rotations`` has shape ``(n, 3, 3)`` and ``translations`` ``(n, 3)``.
    """

    rotations: np.ndarray
    translations: np.ndarray

    def __len__(self):
        return len(self.rotations)

    def __getitem__(self, i) -> SpatialTransform:
        return SpatialTransform(self.rotations[i], self.translations[i])

    @property
    def transforms(self) -> SpatialTransform:
        return SpatialTransform(self.rotations, self.translations)


def is_plain(*arrays) -> bool:
    return not any(isinstance(a, Dual) for a in arrays)


def coerce_vector(model: RobotModel, x, name="q"):
    """Validate an n-vector argument; keeps Duals, casts plain data to the model dtype."""
    if isinstance(x, Dual):
        if x.shape != (model.n_dof,):
            raise DimensionError(f"{name} has shape {x.shape}, expected ({model.n_dof},)")
        return x
    x = np.ascontiguousarray(x, dtype=model.dtype)
    if x.shape != (model.n_dof,):
        raise DimensionError(f"{name} has shape {x.shape}, expected ({model.n_dof},)")
    return x


def _model_args(model):
    return (model.parents, model.joint_types, model.axes,
            model.fixed_rotations, model.fixed_translations)


def local_transforms(model: RobotModel, q):
    """Pose of each joint frame in its parent joint's frame, all joints at once."""
    rev = (model.joint_types == JointType.REVOLUTE).astype(model.dtype)
    K = skew(model.axes)
    s = np.sin(q) * rev
    c1 = (1.0 - np.cos(q)) * rev
    R_joint = np.eye(3, dtype=model.dtype) + s[:, None, None] * K + c1[:, None, None] * (K @ K)
    R = model.fixed_rotations @ R_joint
    slide = (model.fixed_rotations @ model.axes[:, :, None])[:, :, 0]
    p = model.fixed_translations + slide * (q * (1.0 - rev))[:, None]
    return R, p


def forward_kinematics_loop(model: RobotModel, q) -> FrameSet:
    """Topological-order FK in numpy; works for :class:`Dual` inputs."""
    q = coerce_vector(model, q)
    if model.n_dof == 0:
        return FrameSet(np.zeros((0, 3, 3), model.dtype), np.zeros((0, 3), model.dtype))
    Rl, pl = local_transforms(model, q)
    Rs, ps = [], []
    for i, par in enumerate(model.parents):
        if par < 0:
            Rs.append(Rl[i])
            ps.append(pl[i])
        else:
            Rs.append(Rs[par] @ Rl[i])
            ps.append(ps[par] + Rs[par] @ pl[i])
    return FrameSet(np.stack(Rs), np.stack(ps))


def forward_kinematics(model: RobotModel, q) -> FrameSet:
    """World transform of every moving joint frame, computed in one topological pass."""
    q = coerce_vector(model, q)
    if model.n_dof and _backend.jit_active() and is_plain(q):
        from . import _jit

        R, p = _jit.forward_kinematics(*_model_args(model), q)
        return FrameSet(R, p)
    return forward_kinematics_loop(model, q)


def associative_scan(fn, elems):
    """Inclusive prefix scan of an associative ``fn`` over the leading axis.

    ``elems`` is a tuple of arrays sharing the leading length; ``fn(a, b)``
    combines batches of earlier elements ``a`` with later elements ``b``.
    Uses the odd/even recursion, so the depth is logarithmic in the length.
    """
    num = elems[0].shape[0]
    if num < 2:
        return elems
    reduced = fn(tuple(e[0:-1:2] for e in elems), tuple(e[1::2] for e in elems))
    odd = associative_scan(fn, reduced)
    if num % 2 == 0:
        even = fn(tuple(o[:-1] for o in odd), tuple(e[2::2] for e in elems))
    else:
        even = fn(odd, tuple(e[2::2] for e in elems))
    even = tuple(np.concatenate([e[:1], v], axis=0) for e, v in zip(elems, even))
    return tuple(_interleave(ev, od) for ev, od in zip(even, odd))


def _interleave(even, odd):
    k = odd.shape[0]
    pairs = np.stack([even[:k], odd], axis=1)
    merged = pairs.reshape((2 * k,) + tuple(odd.shape[1:]))
    if even.shape[0] > k:
        merged = np.concatenate([merged, even[k:]], axis=0)
    return merged


def _compose(a, b):
    Ra, pa = a
    Rb, pb = b
    return Ra @ Rb, pa + (Ra @ pb[..., None])[..., 0]


def forward_kinematics_scan(model: RobotModel, q) -> FrameSet:
    """FK for serial chains as a parallel prefix over transform composition."""
    if not model.is_serial_chain:
        raise UnsupportedStructureError(
            f"forward_kinematics_scan needs a serial chain; {model.name!r} branches"
        )
    q = coerce_vector(model, q)
    if model.n_dof == 0:
        return forward_kinematics_loop(model, q)
    R, p = associative_scan(_compose, local_transforms(model, q))
    return FrameSet(R, p)


def _frame(model: RobotModel, name: str):
    try:
        return model.frames[name]
    except KeyError:
        raise UnknownFrameError(f"unknown frame {name!r} in model {model.name!r}") from None


def frame_pose(model: RobotModel, frames: FrameSet, name: str) -> SpatialTransform:
    """Pose of a named frame given precomputed joint poses."""
    frame = _frame(model, name)
    if frame.joint < 0:
        return frame.offset
    return frames[frame.joint].compose(frame.offset)


def frame_transform(model: RobotModel, q, frame_name: str) -> SpatialTransform:
    """World pose ``⁰T_joint ∘ offset`` of a named frame."""
    frame = _frame(model, frame_name)
    if frame.joint < 0:
        return frame.offset
    return frame_pose(model, forward_kinematics(model, q), frame_name)


def spatial_axes(model: RobotModel, frames: FrameSet):
    """World-frame joint axes as spatial motion vectors, shape ``(n, 6)``.

    Revolute: ``[a, p × a]``; prismatic: ``[0, a]``; ``a`` is the world axis and
    ``p`` the joint frame origin.
    """
    rev = (model.joint_types == JointType.REVOLUTE).astype(model.dtype)[:, None]
    a = (frames.rotations @ model.axes[:, :, None])[:, :, 0]
    moment = (skew(frames.translations) @ a[:, :, None])[:, :, 0]
    return np.concatenate([a * rev, moment * rev + a * (1.0 - rev)], axis=1)


def _world_axes(model: RobotModel, q):
    if _backend.jit_active() and is_plain(q):
        from . import _jit

        R, p, S = _jit.fk_axes(*_model_args(model), q)
        return FrameSet(R, p), S
    frames = forward_kinematics_loop(model, q)
    return frames, spatial_axes(model, frames)


def jacobian_from_axes(model: RobotModel, S, joint: int, point):
    """Geometric Jacobian (6×n) of a frame on ``joint`` whose origin is ``point``."""
    if joint < 0:
        return np.zeros((6, model.n_dof), dtype=model.dtype)
    mask = model.ancestor_mask[joint]
    if _backend.jit_active() and is_plain(S, point):
        from . import _jit

        return _jit.jacobian_from_axes(S, mask, np.ascontiguousarray(point))
    w = S[:, :3]
    v = S[:, 3:] - (skew(point) @ w[:, :, None])[:, :, 0]
    return np.concatenate([w, v], axis=1).T * mask


def frame_jacobian(model: RobotModel, q, frame_name: str):
    """World pose of a named frame together with its 6×n Jacobian, from one FK pass."""
    frame = _frame(model, frame_name)
    q = coerce_vector(model, q)
    if frame.joint < 0:
        return frame.offset, jacobian_from_axes(model, None, -1, None)
    if _backend.jit_active() and is_plain(q):
        from . import _jit

        R, p, J = _jit.frame_jacobian(*_model_args(model), model.ancestor_mask[frame.joint],
                                      frame.joint, frame.offset.rotation,
                                      frame.offset.translation, q)
        return SpatialTransform(R, p), J
    frames, S = _world_axes(model, q)
    pose = frames[frame.joint].compose(frame.offset)
    return pose, jacobian_from_axes(model, S, frame.joint, pose.translation)


def geometric_jacobian(model: RobotModel, q, frame_name: str):
    """6×n twist Jacobian of a frame in root coordinates, rows ``[angular, linear]``.

    The linear rows give the velocity of the frame origin, so ``J @ qd`` is
    ``[ω, ṗ]`` of that frame.
    """
    return frame_jacobian(model, q, frame_name)[1]


def manipulability(J):
    """Yoshikawa index ``sqrt(det(J Jᵀ))``; 0 at singular configurations."""
    d = np.linalg.det(J @ J.T)
    if d <= 0.0:
        return 0.0 * d
    return np.sqrt(d)
