"""Inverse dynamics (RNEA), mass matrix (CRBA) and forward dynamics.

The vectorized routines express every tree recursion as a product with the
ancestor mask ``U`` (lower triangular, ``U[i, j] = 1`` iff ``j`` is ``i`` or
an ancestor): spatial quantities in the root frame are summed *down* the tree
with ``U @ X`` and *up* the tree with ``U.T @ X``. After forward kinematics
there are no loops over joints.

``*_loop`` variants are the textbook body-frame recursions and serve as
independent oracles.

Gravity enters as a uniform base acceleration ``a_g = -g_field`` (default
``[0, 0, 0, 0, 0, +9.81]`` for gravity along ``-z``), which makes
:func:`gravity_vector` the ``+g(q)`` term of ``τ = M q̈ + c + g``.
External forces ``f_ext`` are ``(n, 6)`` spatial forces acting *on* each
joint's body, in root coordinates about the root origin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _backend
from .autodiff import Dual
from .errors import DimensionError, SingularInertiaError
from .kinematics import (
    FrameSet,
    coerce_vector,
    forward_kinematics_loop,
    is_plain,
    local_transforms,
    spatial_axes,
)
from .model import RobotModel
from .spatial import (
    SpatialTransform,
    cross_force,
    cross_motion,
    transform_force,
    transform_inertia,
    transform_motion,
)

__all__ = [
    "STANDARD_GRAVITY",
    "DynamicsWorkspace",
    "base_acceleration",
    "prepare_world_arrays",
    "rnea",
    "rnea_workspace",
    "rnea_loop",
    "crba",
    "crba_workspace",
    "crba_loop",
    "symmetrize_lower",
    "gravity_vector",
    "coriolis_vector",
    "forward_dynamics",
    "DynamicsTerms",
    "dynamics_terms",
    "point_force",
    "kinetic_energy_bodies",
]

STANDARD_GRAVITY = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 9.81])


def base_acceleration(gravity=(0.0, 0.0, -9.81)):
    """Spatial base acceleration ``a_g`` for a gravity field (m/s²)."""
    g = np.asarray(gravity, dtype=float).reshape(3)
    return np.concatenate([np.zeros(3), -g])


@dataclass(frozen=True, eq=False)
class DynamicsWorkspace:
    """Root-frame arrays of one evaluation; unused entries are ``None``.

    Shapes: ``S``, ``V``, ``A``, ``F`` are ``(n, 6)``; ``I`` and ``C`` are
    ``(n, 6, 6)``.
    """

    S: np.ndarray
    I: np.ndarray
    V: np.ndarray | None = None
    A: np.ndarray | None = None
    F: np.ndarray | None = None
    C: np.ndarray | None = None
    tau: np.ndarray | None = None
    M: np.ndarray | None = None
    frames: FrameSet | None = None


def _use_jit(*xs):
    return _backend.jit_active() and is_plain(*xs)


def _model_arrays(model):
    return (model.parents, model.joint_types, model.axes,
            model.fixed_rotations, model.fixed_translations, model.inertias)


def _gravity(model, a_g):
    if a_g is None:
        a_g = STANDARD_GRAVITY
    if isinstance(a_g, Dual):
        return a_g
    a_g = np.ascontiguousarray(a_g, dtype=model.dtype)
    if a_g.shape != (6,):
        raise DimensionError(f"a_g must have shape (6,), got {a_g.shape}")
    return a_g


def _external(model, f_ext):
    if f_ext is None:
        return np.zeros((model.n_dof, 6), dtype=model.dtype)
    if isinstance(f_ext, Dual):
        shape = f_ext.shape
    else:
        f_ext = np.ascontiguousarray(f_ext, dtype=model.dtype)
        shape = f_ext.shape
    if shape != (model.n_dof, 6):
        raise DimensionError(f"f_ext must have shape ({model.n_dof}, 6), got {shape}")
    return f_ext


def prepare_world_arrays(model: RobotModel, frames: FrameSet, q=None):
    """Spatial axes ``⁰S`` (n,6) and inertias ``⁰I`` (n,6,6) in the root frame."""
    S = spatial_axes(model, frames)
    I = transform_inertia(frames.transforms, model.inertias)
    return S, I


def _prepare(model, q):
    if _use_jit(q):
        from . import _jit

        R, p, S, I = _jit.fk_prepare(*_model_arrays(model), q)
        return FrameSet(R, p), S, I
    frames = forward_kinematics_loop(model, q)
    S, I = prepare_world_arrays(model, frames)
    return frames, S, I


def _rnea_arrays(U, S, I, qd, qdd, a_g, f_ext):
    # V = U(S qd); A = a_g + U(S qdd + V × S qd);
    # F = Uᵀ(I A + V ×* I V - F_ext); tau = S · F
    vJ = S * qd[:, None]
    V = U @ vJ
    A = a_g + U @ (S * qdd[:, None] + cross_motion(V, vJ))
    IAV = I @ np.stack([A, V], axis=-1)
    body = IAV[:, :, 0] + cross_force(V, IAV[:, :, 1]) - f_ext
    F = U.T @ body
    tau = (S * F).sum(axis=1)
    return tau, V, A, F


def rnea_workspace(model: RobotModel, q, qd, qdd, a_g=None, f_ext=None) -> DynamicsWorkspace:
    """Vectorized RNEA returning every intermediate root-frame array."""
    q = coerce_vector(model, q, "q")
    qd = coerce_vector(model, qd, "qd")
    qdd = coerce_vector(model, qdd, "qdd")
    a_g = _gravity(model, a_g)
    f_ext = _external(model, f_ext)
    frames, S, I = _prepare(model, q)
    if _use_jit(q, qd, qdd, a_g, f_ext):
        from . import _jit

        tau, V, A, F = _jit.rnea_vectorized(model.ancestor_mask, model.descendant_mask, S, I, qd, qdd, a_g, f_ext)
    else:
        tau, V, A, F = _rnea_arrays(model.ancestor_mask, S, I, qd, qdd, a_g, f_ext)
    return DynamicsWorkspace(S=S, I=I, V=V, A=A, F=F, tau=tau, frames=frames)


def rnea(model: RobotModel, q, qd, qdd, a_g=None, f_ext=None):
    """Generalized forces ``τ = M q̈ + c + g - Σ Jᵢᵀ f_ext,i`` (vectorized RNEA)."""
    if model.n_dof == 0:
        return np.zeros(0, dtype=model.dtype)
    q = coerce_vector(model, q, "q")
    qd = coerce_vector(model, qd, "qd")
    qdd = coerce_vector(model, qdd, "qdd")
    a_g = _gravity(model, a_g)
    f_ext = _external(model, f_ext)
    if _use_jit(q, qd, qdd, a_g, f_ext):
        from . import _jit

        return _jit.rnea_tau(model.ancestor_mask, model.descendant_mask, *_model_arrays(model), q, qd, qdd, a_g, f_ext)
    return rnea_workspace(model, q, qd, qdd, a_g, f_ext).tau


def symmetrize_lower(M_lower):
    """Full symmetric matrix from its lower triangle: ``L + Lᵀ - diag(L)``."""
    dtype = M_lower.dtype if np.issubdtype(M_lower.dtype, np.floating) else np.float64
    diag = np.eye(M_lower.shape[-1], dtype=dtype)
    return M_lower + M_lower.T - M_lower * diag


def _crba_arrays(U, S, I):
    n = S.shape[0]
    # C_i = sum of I_j over the subtree of i
    C = (U.T @ I.reshape(n, 36)).reshape(n, 6, 6)
    CS = (C @ S[:, :, None])[:, :, 0]
    # (i, j) entry S_iᵀ C_i S_j, masked to ancestor pairs
    M_lower = U * (CS @ S.T)
    return symmetrize_lower(M_lower), C


def crba_workspace(model: RobotModel, q) -> DynamicsWorkspace:
    q = coerce_vector(model, q)
    frames, S, I = _prepare(model, q)
    if _use_jit(q):
        from . import _jit

        M, C = _jit.crba_vectorized(model.ancestor_mask, model.descendant_mask, S, I)
    else:
        M, C = _crba_arrays(model.ancestor_mask, S, I)
    return DynamicsWorkspace(S=S, I=I, C=C, M=M, frames=frames)


def crba(model: RobotModel, q):
    """Joint-space mass matrix ``M(q)`` (vectorized CRBA)."""
    if model.n_dof == 0:
        return np.zeros((0, 0), dtype=model.dtype)
    q = coerce_vector(model, q)
    if _use_jit(q):
        from . import _jit

        return _jit.crba_matrix(model.ancestor_mask, model.descendant_mask, *_model_arrays(model), q)
    return crba_workspace(model, q).M


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    """Everything a model-based controller needs at one state, from one FK pass.

    ``S``/``I`` are the root-frame axes and inertias; ``M``, ``c`` (Coriolis
    and centrifugal) and ``g`` (gravity) are the usual joint-space terms.
    """

    frames: FrameSet
    S: np.ndarray
    I: np.ndarray
    M: np.ndarray
    c: np.ndarray
    g: np.ndarray


def _tau_from_arrays(model, S, I, qd, qdd, a_g, f_ext):
    if _use_jit(S, I, qd, qdd, a_g, f_ext):
        from . import _jit

        return _jit.rnea_vectorized(model.ancestor_mask, model.descendant_mask, S, I,
                                    qd, qdd, a_g, f_ext)[0]
    return _rnea_arrays(model.ancestor_mask, S, I, qd, qdd, a_g, f_ext)[0]


def _mass_from_arrays(model, S, I):
    if _use_jit(S, I):
        from . import _jit

        return _jit.crba_vectorized(model.ancestor_mask, model.descendant_mask, S, I)[0]
    return _crba_arrays(model.ancestor_mask, S, I)[0]


def dynamics_terms(model: RobotModel, q, qd, a_g=None) -> DynamicsTerms:
    """``M(q)``, ``c(q, q̇)`` and ``g(q)`` sharing a single kinematics pass."""
    q = coerce_vector(model, q, "q")
    qd = coerce_vector(model, qd, "qd")
    a_g = _gravity(model, a_g)
    frames, S, I = _prepare(model, q)
    zero = np.zeros(model.n_dof, dtype=model.dtype)
    no_force = np.zeros((model.n_dof, 6), dtype=model.dtype)
    no_gravity = np.zeros(6, dtype=model.dtype)
    M = _mass_from_arrays(model, S, I)
    c = _tau_from_arrays(model, S, I, qd, zero, no_gravity, no_force)
    g = _tau_from_arrays(model, S, I, zero, zero, a_g, no_force)
    return DynamicsTerms(frames, S, I, M, c, g)


def gravity_vector(model: RobotModel, q, a_g=None):
    """``g(q) = rnea(q, 0, 0, a_g)``."""
    zero = np.zeros(model.n_dof, dtype=model.dtype)
    return rnea(model, q, zero, zero, a_g)


def coriolis_vector(model: RobotModel, q, qd):
    """``c(q, q̇) = rnea(q, q̇, 0)`` with gravity switched off."""
    zero = np.zeros(model.n_dof, dtype=model.dtype)
    return rnea(model, q, qd, zero, np.zeros(6, dtype=model.dtype))


def spd_solve(M, b):
    """Solve ``M x = b`` with a Cholesky factorization; propagates Dual tangents."""
    Mv = M.value if isinstance(M, Dual) else M
    bv = b.value if isinstance(b, Dual) else b
    try:
        factor = scipy.linalg.cho_factor(Mv, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularInertiaError(f"matrix is not positive definite: {exc}") from exc
    x = scipy.linalg.cho_solve(factor, bv, check_finite=False)
    if not (isinstance(M, Dual) or isinstance(b, Dual)):
        return x
    rhs = b.tangent if isinstance(b, Dual) else np.zeros_like(x)
    if isinstance(M, Dual):
        rhs = rhs - M.tangent @ x
    return Dual(x, scipy.linalg.cho_solve(factor, rhs, check_finite=False))


def forward_dynamics(model: RobotModel, q, qd, tau, f_ext=None, a_g=None):
    """Joint accelerations ``q̈ = M⁻¹(τ - c - g + Σ Jᵢᵀ f_ext,i)`` via Cholesky.

    Raises :class:`SingularInertiaError` when ``M(q)`` is not positive definite.
    """
    tau = coerce_vector(model, tau, "tau")
    zero = np.zeros(model.n_dof, dtype=model.dtype)
    bias = rnea(model, q, qd, zero, a_g, f_ext)
    return spd_solve(crba(model, q), tau - bias)


def point_force(point, force_vector):
    """Spatial force (root frame, about the root origin) of a pure force at ``point``."""
    point = np.asarray(point, dtype=float)
    f = np.asarray(force_vector, dtype=float)
    return np.concatenate([np.cross(point, f), f])


def kinetic_energy_bodies(workspace: DynamicsWorkspace):
    """``Σᵢ ½ ⁰Vᵢᵀ ⁰Iᵢ ⁰Vᵢ`` from an RNEA workspace."""
    V = workspace.V
    return 0.5 * (V * (workspace.I @ V[:, :, None])[:, :, 0]).sum()


# ---------------------------------------------------------------------------
# body-frame recursive oracles


def _loop_inputs(model, q):
    Rl, pl = local_transforms(model, q)
    return Rl, pl, model.motion_subspaces


def rnea_loop(model: RobotModel, q, qd, qdd, a_g=None, f_ext=None):
    """Recursive Newton-Euler in body coordinates (O(n) forward/backward passes)."""
    q = coerce_vector(model, q, "q")
    qd = coerce_vector(model, qd, "qd")
    qdd = coerce_vector(model, qdd, "qdd")
    a_g = _gravity(model, a_g)
    f_ext = _external(model, f_ext)
    n = model.n_dof
    if n == 0:
        return np.zeros(0, dtype=model.dtype)
    if _use_jit(q, qd, qdd, a_g, f_ext):
        from . import _jit

        return _jit.rnea_loop(*_model_arrays(model), q, qd, qdd, a_g, f_ext)
    Rl, pl, s = _loop_inputs(model, q)
    v, a, f, world = [], [], [], []
    zero = np.zeros(6, dtype=model.dtype)
    for i in range(n):
        par = model.parents[i]
        to_parent = SpatialTransform(Rl[i], pl[i])
        to_child = to_parent.inverse()
        if par < 0:
            world.append(to_parent)
            v_par, a_par = zero, a_g
        else:
            world.append(world[par].compose(to_parent))
            v_par, a_par = v[par], a[par]
        vJ = s[i] * qd[i]
        vi = transform_motion(to_child, v_par) + vJ
        ai = transform_motion(to_child, a_par) + s[i] * qdd[i] + cross_motion(vi, vJ)
        I = model.inertias[i]
        fi = I @ ai + cross_force(vi, I @ vi) - transform_force(world[i].inverse(), f_ext[i])
        v.append(vi)
        a.append(ai)
        f.append(fi)
    tau = [None] * n
    for i in range(n - 1, -1, -1):
        tau[i] = s[i] @ f[i]
        par = model.parents[i]
        if par >= 0:
            f[par] = f[par] + transform_force(SpatialTransform(Rl[i], pl[i]), f[i])
    return np.stack(tau)


def crba_loop(model: RobotModel, q):
    """Composite-rigid-body algorithm with child-to-parent accumulation (O(nd))."""
    q = coerce_vector(model, q)
    n = model.n_dof
    if n == 0:
        return np.zeros((0, 0), dtype=model.dtype)
    if _use_jit(q):
        from . import _jit

        return _jit.crba_loop(*_model_arrays(model), q)
    Rl, pl, s = _loop_inputs(model, q)
    Ic = [model.inertias[i] for i in range(n)]
    for i in range(n - 1, -1, -1):
        par = model.parents[i]
        if par >= 0:
            Ic[par] = Ic[par] + transform_inertia(SpatialTransform(Rl[i], pl[i]), Ic[i])
    entries = {}
    for i in range(n):
        F = Ic[i] @ s[i]
        entries[i, i] = s[i] @ F
        j = i
        while model.parents[j] >= 0:
            F = transform_force(SpatialTransform(Rl[j], pl[j]), F)
            j = int(model.parents[j])
            entries[i, j] = entries[j, i] = s[j] @ F
    zero = 0.0 * entries[0, 0]
    rows = [np.stack([entries.get((i, j), zero) for j in range(n)]) for i in range(n)]
    return np.stack(rows)
