"""Spatial (6-D) algebra in Plücker coordinates.

Conventions used everywhere in the package:

* Motion vectors are ``[angular, linear]`` and force vectors are
  ``[moment, force]``; both are plain ``(..., 6)`` arrays.
* A :class:`SpatialTransform` ``(R, p)`` is the pose of frame B expressed in
  frame A, so points map as ``x_A = R @ x_B + p``. ``transform_*`` functions
  re-express quantities given in B coordinates in A coordinates.
* Spatial inertias are ``(..., 6, 6)`` arrays about the frame origin.

All functions broadcast over leading axes and accept :class:`~vecrbd.autodiff.Dual`
arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError

__all__ = [
    "SpatialTransform",
    "skew",
    "cross_motion",
    "cross_force",
    "transform_motion",
    "transform_force",
    "transform_inertia",
    "inertia_from_params",
    "kinetic_energy",
    "power",
    "motion",
    "force",
    "rotation_about_axis",
]


def _levi_civita():
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


# skew(v) = v @ _SKEW reshaped to 3x3
_SKEW = -_levi_civita().reshape(3, 9)


def _crm_basis():
    basis = np.zeros((6, 6, 6))
    for i in range(6):
        e = np.zeros(6)
        e[i] = 1.0
        w = np.array([[0, -e[2], e[1]], [e[2], 0, -e[0]], [-e[1], e[0], 0]])
        v = np.array([[0, -e[5], e[4]], [e[5], 0, -e[3]], [-e[4], e[3], 0]])
        basis[i, :3, :3] = w
        basis[i, 3:, 3:] = w
        basis[i, 3:, :3] = v
    return basis


_CRM = _crm_basis().reshape(6, 36)
_CRF = (-_crm_basis().transpose(0, 2, 1)).reshape(6, 36)


_SINGLE = {}


def _basis(const, x):
    # keep single-precision inputs in single precision
    if getattr(x, "dtype", None) == np.float32:
        key = id(const)
        if key not in _SINGLE:
            _SINGLE[key] = const.astype(np.float32)
        return _SINGLE[key]
    return const


def skew(v):
    """``skew(v) @ u == cross(v, u)`` for ``(..., 3)`` inputs."""
    return (v @ _basis(_SKEW, v)).reshape(np.shape(v)[:-1] + (3, 3))


def _apply(mat, x):
    return (mat @ x[..., None])[..., 0]


def cross_motion(v, m):
    """Spatial motion cross product ``v × m``."""
    op = (v @ _basis(_CRM, v)).reshape(np.shape(v)[:-1] + (6, 6))
    return _apply(op, m)


def cross_force(v, f):
    """Spatial force cross product ``v ×* f = -(v×)ᵀ f``."""
    op = (v @ _basis(_CRF, v)).reshape(np.shape(v)[:-1] + (6, 6))
    return _apply(op, f)


def motion(angular, linear):
    return np.concatenate([np.asarray(angular, float), np.asarray(linear, float)], axis=-1)


def force(moment, linear_force):
    return np.concatenate([np.asarray(moment, float), np.asarray(linear_force, float)], axis=-1)


@dataclass(frozen=True, eq=False)
class SpatialTransform:
    """Rigid transform stored as ``(rotation, translation)``; may carry batch axes."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls, dtype=float):
        return cls(np.eye(3, dtype=dtype), np.zeros(3, dtype=dtype))

    @classmethod
    def checked(cls, rotation, translation, tol=1e-6):
        """Construct with validation of orthonormality and handedness."""
        rotation = np.asarray(rotation, dtype=float)
        translation = np.asarray(translation, dtype=float)
        if rotation.shape[-2:] != (3, 3) or translation.shape[-1:] != (3,):
            raise ModelError(
                f"bad transform shapes {rotation.shape} / {translation.shape}"
            )
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise ModelError("transform has non-finite entries")
        gram = np.swapaxes(rotation, -1, -2) @ rotation
        if np.max(np.abs(gram - np.eye(3))) > tol:
            raise ModelError("rotation is not orthonormal")
        if np.min(np.linalg.det(rotation)) < 1.0 - tol:
            raise ModelError("rotation is improper (det != +1)")
        return cls(rotation, translation)

    @classmethod
    def from_homogeneous(cls, matrix):
        matrix = np.asarray(matrix)
        return cls(matrix[..., :3, :3], matrix[..., :3, 3])

    def as_homogeneous(self):
        r = np.asarray(self.rotation)
        out = np.zeros(r.shape[:-2] + (4, 4), dtype=r.dtype)
        out[..., :3, :3] = r
        out[..., :3, 3] = self.translation
        out[..., 3, 3] = 1.0
        return out

    def compose(self, other: "SpatialTransform") -> "SpatialTransform":
        """``self ∘ other``: pose of other's child frame in self's parent frame."""
        return SpatialTransform(
            self.rotation @ other.rotation,
            self.translation + _apply(self.rotation, other.translation),
        )

    __matmul__ = compose

    def inverse(self) -> "SpatialTransform":
        rt = np.swapaxes(self.rotation, -1, -2)
        return SpatialTransform(rt, -_apply(rt, self.translation))

    def apply_point(self, point):
        return _apply(self.rotation, point) + self.translation

    def __getitem__(self, idx):
        return SpatialTransform(self.rotation[idx], self.translation[idx])


def transform_motion(T: SpatialTransform, m):
    """Re-express motion ``m`` (B coordinates) in A coordinates."""
    w = _apply(T.rotation, m[..., :3])
    v = _apply(T.rotation, m[..., 3:]) + _apply(skew(T.translation), w)
    return np.concatenate([w, v], axis=-1)


def transform_force(T: SpatialTransform, f):
    """Re-express force ``f`` (B coordinates) in A coordinates."""
    lin = _apply(T.rotation, f[..., 3:])
    mom = _apply(T.rotation, f[..., :3]) + _apply(skew(T.translation), lin)
    return np.concatenate([mom, lin], axis=-1)


def transform_inertia(T: SpatialTransform, inertia):
    """Re-express a spatial inertia given about B's origin in A coordinates.

    Equivalent to ``Xf @ I @ Xf.T`` with ``Xf = [[R, p×R], [0, R]]``, done
    blockwise so no 6×6 transform is formed.
    """
    R = T.rotation
    Rt = np.swapaxes(R, -1, -2)
    P = skew(T.translation)
    A = R @ inertia[..., :3, :3] @ Rt
    B = R @ inertia[..., :3, 3:] @ Rt
    D = R @ inertia[..., 3:, 3:] @ Rt
    top_right = B + P @ D
    top_left = A + P @ np.swapaxes(B, -1, -2) + top_right @ np.swapaxes(P, -1, -2)
    top = np.concatenate([top_left, top_right], axis=-1)
    bottom = np.concatenate([np.swapaxes(top_right, -1, -2), D], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def inertia_from_params(mass, com, rotational_inertia, tol=1e-6):
    """Spatial inertia about the frame origin from mass, CoM and CoM inertia.

    ``rotational_inertia`` is taken about the CoM with the frame's axes.
    Raises :class:`ModelError` for negative mass or an asymmetric tensor.
    """
    mass = float(mass)
    com = np.asarray(com, dtype=float).reshape(3)
    Ic = np.asarray(rotational_inertia, dtype=float).reshape(3, 3)
    if not np.isfinite(mass) or mass < 0.0:
        raise ModelError(f"mass must be a finite non-negative number, got {mass}")
    scale = max(np.max(np.abs(Ic)), 1e-300)
    if np.max(np.abs(Ic - Ic.T)) > tol * scale:
        raise ModelError("rotational inertia is not symmetric")
    Ic = 0.5 * (Ic + Ic.T)
    C = skew(com)
    out = np.zeros((6, 6))
    out[:3, :3] = Ic + mass * C @ C.T
    out[:3, 3:] = mass * C
    out[3:, :3] = mass * C.T
    out[3:, 3:] = mass * np.eye(3)
    return out


def kinetic_energy(inertia, v):
    """``½ vᵀ I v`` (broadcasts over leading axes)."""
    return 0.5 * (v * _apply(inertia, v)).sum(axis=-1)


def power(f, v):
    return (f * v).sum(axis=-1)


def rotation_about_axis(axis, angle):
    """Rodrigues rotation for a unit ``axis`` (3,) and scalar ``angle``."""
    K = skew(np.asarray(axis, dtype=float))
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
