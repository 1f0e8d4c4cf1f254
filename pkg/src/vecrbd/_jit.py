"""numba kernels for plain floating-point inputs.

The vectorized kernels implement exactly the ancestor-mask formulation of the
numpy code in :mod:`vecrbd.kinematics` / :mod:`vecrbd.dynamics` (dense
products with ``U`` and ``Uᵀ``); the ``*_loop`` kernels are the classic
body-frame recursions and exist so that loop-vs-vectorized timings compare
like with like. Kernels take raw model arrays; validation happens in the
Python wrappers.
"""
import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True, fastmath=False)


@njit(**_OPTS)
def _rodrigues(axis, angle, out):
    s = np.sin(angle)
    c = np.cos(angle)
    t = 1.0 - c
    x, y, z = axis[0], axis[1], axis[2]
    out[0, 0] = c + t * x * x
    out[0, 1] = t * x * y - s * z
    out[0, 2] = t * x * z + s * y
    out[1, 0] = t * x * y + s * z
    out[1, 1] = c + t * y * y
    out[1, 2] = t * y * z - s * x
    out[2, 0] = t * x * z - s * y
    out[2, 1] = t * y * z + s * x
    out[2, 2] = c + t * z * z


@njit(**_OPTS)
def _mat3(a, b, out):
    for r in range(3):
        for c in range(3):
            out[r, c] = a[r, 0] * b[0, c] + a[r, 1] * b[1, c] + a[r, 2] * b[2, c]


@njit(**_OPTS)
def _local_transforms(types, axes, frot, ftrans, q):
    n = q.shape[0]
    Rl = np.empty((n, 3, 3), dtype=q.dtype)
    pl = np.empty((n, 3), dtype=q.dtype)
    Rj = np.empty((3, 3), dtype=q.dtype)
    for i in range(n):
        if types[i] == 0:
            _rodrigues(axes[i], q[i], Rj)
            _mat3(frot[i], Rj, Rl[i])
            for r in range(3):
                pl[i, r] = ftrans[i, r]
        else:
            for r in range(3):
                Rl[i, r, 0] = frot[i, r, 0]
                Rl[i, r, 1] = frot[i, r, 1]
                Rl[i, r, 2] = frot[i, r, 2]
                pl[i, r] = ftrans[i, r] + q[i] * (
                    frot[i, r, 0] * axes[i, 0] + frot[i, r, 1] * axes[i, 1] + frot[i, r, 2] * axes[i, 2]
                )
    return Rl, pl


@njit(**_OPTS)
def forward_kinematics(parents, types, axes, frot, ftrans, q):
    """World pose of every joint frame in one topological pass."""
    n = q.shape[0]
    Rl, pl = _local_transforms(types, axes, frot, ftrans, q)
    R = np.empty_like(Rl)
    p = np.empty_like(pl)
    for i in range(n):
        par = parents[i]
        if par < 0:
            R[i] = Rl[i]
            p[i] = pl[i]
        else:
            _mat3(R[par], Rl[i], R[i])
            for r in range(3):
                p[i, r] = p[par, r] + R[par, r, 0] * pl[i, 0] + R[par, r, 1] * pl[i, 1] + R[par, r, 2] * pl[i, 2]
    return R, p


@njit(**_OPTS)
def _transform_inertia(R, p, I, out):
    _transform_inertia_into(R, p, I, np.empty((3, 3), dtype=out.dtype), out)


@njit(**_OPTS)
def _transform_inertia_into(R, p, I, RI, out):
    # out = Xf I Xf^T, Xf = [[R, skew(p) R], [0, R]], for a rigid-body inertia
    # I = [[Io, skew(h)], [skew(h)^T, m 1]]. With h' = R h and Io' = R Io R^T:
    # [[Io' - (h' p^T + p h'^T) + 2 (p.h') 1 - m (p p^T - |p|^2 1), skew(h' + m p)], ...]
    m = I[3, 3]
    h0, h1, h2 = I[2, 4], I[0, 5], I[1, 3]
    hw0 = R[0, 0] * h0 + R[0, 1] * h1 + R[0, 2] * h2
    hw1 = R[1, 0] * h0 + R[1, 1] * h1 + R[1, 2] * h2
    hw2 = R[2, 0] * h0 + R[2, 1] * h1 + R[2, 2] * h2
    hw = (hw0, hw1, hw2)
    pp = (p[0], p[1], p[2])
    ph = pp[0] * hw0 + pp[1] * hw1 + pp[2] * hw2
    p2 = pp[0] * pp[0] + pp[1] * pp[1] + pp[2] * pp[2]
    # RI = R Io
    for r in range(3):
        for c in range(3):
            RI[r, c] = R[r, 0] * I[0, c] + R[r, 1] * I[1, c] + R[r, 2] * I[2, c]
    for r in range(3):
        for c in range(r, 3):
            acc = RI[r, 0] * R[c, 0] + RI[r, 1] * R[c, 1] + RI[r, 2] * R[c, 2]
            acc -= hw[r] * pp[c] + pp[r] * hw[c] + m * pp[r] * pp[c]
            if r == c:
                acc += 2.0 * ph + m * p2
            out[r, c] = acc
            out[c, r] = acc
    g0 = hw0 + m * pp[0]
    g1 = hw1 + m * pp[1]
    g2 = hw2 + m * pp[2]
    for r in range(3):
        for c in range(3):
            out[r + 3, c + 3] = m if r == c else 0.0
    out[0, 3] = 0.0
    out[0, 4] = -g2
    out[0, 5] = g1
    out[1, 3] = g2
    out[1, 4] = 0.0
    out[1, 5] = -g0
    out[2, 3] = -g1
    out[2, 4] = g0
    out[2, 5] = 0.0
    for r in range(3):
        for c in range(3):
            out[c + 3, r] = out[r, c + 3]


@njit(**_OPTS)
def _world_axes(R, p, types, axes):
    S = np.zeros((R.shape[0], 6), dtype=R.dtype)
    _world_axes_into(R, p, types, axes, S)
    return S


@njit(**_OPTS)
def _world_axes_into(R, p, types, axes, S):
    for i in range(R.shape[0]):
        w0 = R[i, 0, 0] * axes[i, 0] + R[i, 0, 1] * axes[i, 1] + R[i, 0, 2] * axes[i, 2]
        w1 = R[i, 1, 0] * axes[i, 0] + R[i, 1, 1] * axes[i, 1] + R[i, 1, 2] * axes[i, 2]
        w2 = R[i, 2, 0] * axes[i, 0] + R[i, 2, 1] * axes[i, 1] + R[i, 2, 2] * axes[i, 2]
        if types[i] == 0:
            S[i, 0] = w0
            S[i, 1] = w1
            S[i, 2] = w2
            S[i, 3] = p[i, 1] * w2 - p[i, 2] * w1
            S[i, 4] = p[i, 2] * w0 - p[i, 0] * w2
            S[i, 5] = p[i, 0] * w1 - p[i, 1] * w0
        else:
            S[i, 3] = w0
            S[i, 4] = w1
            S[i, 5] = w2


@njit(**_OPTS)
def fk_axes(parents, types, axes, frot, ftrans, q):
    """World poses plus world-frame spatial axes ``S`` (n,6)."""
    R, p = forward_kinematics(parents, types, axes, frot, ftrans, q)
    return R, p, _world_axes(R, p, types, axes)


@njit(**_OPTS)
def fk_prepare(parents, types, axes, frot, ftrans, inertias, q):
    """World poses, spatial axes ``S`` (n,6) and world inertias ``I`` (n,6,6)."""
    n = q.shape[0]
    R = np.empty((n, 3, 3), dtype=q.dtype)
    p = np.empty((n, 3), dtype=q.dtype)
    S = np.zeros((n, 6), dtype=q.dtype)
    I = np.empty((n, 6, 6), dtype=q.dtype)
    Rj = np.empty((3, 3), dtype=q.dtype)
    Rl = np.empty((3, 3), dtype=q.dtype)
    pl = np.empty(3, dtype=q.dtype)
    RI = np.empty((3, 3), dtype=q.dtype)
    for i in range(n):
        if types[i] == 0:
            _rodrigues(axes[i], q[i], Rj)
            _mat3(frot[i], Rj, Rl)
            for r in range(3):
                pl[r] = ftrans[i, r]
        else:
            for r in range(3):
                for c in range(3):
                    Rl[r, c] = frot[i, r, c]
                pl[r] = ftrans[i, r] + q[i] * (
                    frot[i, r, 0] * axes[i, 0] + frot[i, r, 1] * axes[i, 1] + frot[i, r, 2] * axes[i, 2]
                )
        par = parents[i]
        if par < 0:
            R[i] = Rl
            p[i] = pl
        else:
            _mat3(R[par], Rl, R[i])
            for r in range(3):
                p[i, r] = p[par, r] + R[par, r, 0] * pl[0] + R[par, r, 1] * pl[1] + R[par, r, 2] * pl[2]
        _transform_inertia_into(R[i], p[i], inertias[i], RI, I[i])
    _world_axes_into(R, p, types, axes, S)
    return R, p, S, I


@njit(**_OPTS)
def _world_inertia_params(R, p, I, RI, out):
    # 10-parameter form of Xf I Xf^T (see _transform_inertia_into):
    # out = [m, h0, h1, h2, Ixx, Iyy, Izz, Ixy, Ixz, Iyz] with h the first
    # moment and I the rotational inertia, both about the root origin.
    m = I[3, 3]
    h0, h1, h2 = I[2, 4], I[0, 5], I[1, 3]
    hw0 = R[0, 0] * h0 + R[0, 1] * h1 + R[0, 2] * h2
    hw1 = R[1, 0] * h0 + R[1, 1] * h1 + R[1, 2] * h2
    hw2 = R[2, 0] * h0 + R[2, 1] * h1 + R[2, 2] * h2
    p0, p1, p2 = p[0], p[1], p[2]
    ph = p0 * hw0 + p1 * hw1 + p2 * hw2
    pp = p0 * p0 + p1 * p1 + p2 * p2
    for r in range(3):
        for c in range(3):
            RI[r, c] = R[r, 0] * I[0, c] + R[r, 1] * I[1, c] + R[r, 2] * I[2, c]
    out[0] = m
    out[1] = hw0 + m * p0
    out[2] = hw1 + m * p1
    out[3] = hw2 + m * p2
    diag = 2.0 * ph + m * pp
    out[4] = RI[0, 0] * R[0, 0] + RI[0, 1] * R[0, 1] + RI[0, 2] * R[0, 2] \
        - (2.0 * hw0 * p0 + m * p0 * p0) + diag
    out[5] = RI[1, 0] * R[1, 0] + RI[1, 1] * R[1, 1] + RI[1, 2] * R[1, 2] \
        - (2.0 * hw1 * p1 + m * p1 * p1) + diag
    out[6] = RI[2, 0] * R[2, 0] + RI[2, 1] * R[2, 1] + RI[2, 2] * R[2, 2] \
        - (2.0 * hw2 * p2 + m * p2 * p2) + diag
    out[7] = RI[0, 0] * R[1, 0] + RI[0, 1] * R[1, 1] + RI[0, 2] * R[1, 2] \
        - (hw0 * p1 + p0 * hw1 + m * p0 * p1)
    out[8] = RI[0, 0] * R[2, 0] + RI[0, 1] * R[2, 1] + RI[0, 2] * R[2, 2] \
        - (hw0 * p2 + p0 * hw2 + m * p0 * p2)
    out[9] = RI[1, 0] * R[2, 0] + RI[1, 1] * R[2, 1] + RI[1, 2] * R[2, 2] \
        - (hw1 * p2 + p1 * hw2 + m * p1 * p2)


@njit(**_OPTS)
def fk_prepare_params(parents, types, axes, frot, ftrans, inertias, q):
    """Like :func:`fk_prepare` but with world inertias in 10-parameter form (n,10)."""
    n = q.shape[0]
    R = np.empty((n, 3, 3), dtype=q.dtype)
    p = np.empty((n, 3), dtype=q.dtype)
    S = np.zeros((n, 6), dtype=q.dtype)
    P = np.empty((n, 10), dtype=q.dtype)
    Rj = np.empty((3, 3), dtype=q.dtype)
    Rl = np.empty((3, 3), dtype=q.dtype)
    pl = np.empty(3, dtype=q.dtype)
    RI = np.empty((3, 3), dtype=q.dtype)
    for i in range(n):
        if types[i] == 0:
            _rodrigues(axes[i], q[i], Rj)
            _mat3(frot[i], Rj, Rl)
            for r in range(3):
                pl[r] = ftrans[i, r]
        else:
            for r in range(3):
                for c in range(3):
                    Rl[r, c] = frot[i, r, c]
                pl[r] = ftrans[i, r] + q[i] * (
                    frot[i, r, 0] * axes[i, 0] + frot[i, r, 1] * axes[i, 1] + frot[i, r, 2] * axes[i, 2]
                )
        par = parents[i]
        if par < 0:
            R[i] = Rl
            p[i] = pl
        else:
            _mat3(R[par], Rl, R[i])
            for r in range(3):
                p[i, r] = p[par, r] + R[par, r, 0] * pl[0] + R[par, r, 1] * pl[1] + R[par, r, 2] * pl[2]
        _world_inertia_params(R[i], p[i], inertias[i], RI, P[i])
    _world_axes_into(R, p, types, axes, S)
    return R, p, S, P


@njit(**_OPTS)
def crba_vectorized_params(U, Ut, S, P):
    """Vectorized CRBA on 10-parameter inertias: ``C = Uᵀ P``, ``M = U ⊙ (C S)·S``."""
    n = S.shape[0]
    C = np.dot(Ut, P)
    CS = np.empty((n, 6), dtype=S.dtype)
    for i in range(n):
        m = C[i, 0]
        h0, h1, h2 = C[i, 1], C[i, 2], C[i, 3]
        w0, w1, w2 = S[i, 0], S[i, 1], S[i, 2]
        v0, v1, v2 = S[i, 3], S[i, 4], S[i, 5]
        # [Io w + h x v ; m v - h x w]
        CS[i, 0] = C[i, 4] * w0 + C[i, 7] * w1 + C[i, 8] * w2 + h1 * v2 - h2 * v1
        CS[i, 1] = C[i, 7] * w0 + C[i, 5] * w1 + C[i, 9] * w2 + h2 * v0 - h0 * v2
        CS[i, 2] = C[i, 8] * w0 + C[i, 9] * w1 + C[i, 6] * w2 + h0 * v1 - h1 * v0
        CS[i, 3] = m * v0 - (h1 * w2 - h2 * w1)
        CS[i, 4] = m * v1 - (h2 * w0 - h0 * w2)
        CS[i, 5] = m * v2 - (h0 * w1 - h1 * w0)
    M = np.empty((n, n), dtype=S.dtype)
    for i in range(n):
        for j in range(i + 1):
            acc = 0.0
            for c in range(6):
                acc += CS[i, c] * S[j, c]
            acc *= U[i, j]
            M[i, j] = acc
            M[j, i] = acc
    return M


@njit(**_OPTS)
def _crm(v, m, out):
    # out = v x m (motion)
    out[0] = v[1] * m[2] - v[2] * m[1]
    out[1] = v[2] * m[0] - v[0] * m[2]
    out[2] = v[0] * m[1] - v[1] * m[0]
    out[3] = v[1] * m[5] - v[2] * m[4] + v[4] * m[2] - v[5] * m[1]
    out[4] = v[2] * m[3] - v[0] * m[5] + v[5] * m[0] - v[3] * m[2]
    out[5] = v[0] * m[4] - v[1] * m[3] + v[3] * m[1] - v[4] * m[0]


@njit(**_OPTS)
def _crf(v, f, out):
    # out = v x* f (force)
    out[0] = v[1] * f[2] - v[2] * f[1] + v[4] * f[5] - v[5] * f[4]
    out[1] = v[2] * f[0] - v[0] * f[2] + v[5] * f[3] - v[3] * f[5]
    out[2] = v[0] * f[1] - v[1] * f[0] + v[3] * f[4] - v[4] * f[3]
    out[3] = v[1] * f[5] - v[2] * f[4]
    out[4] = v[2] * f[3] - v[0] * f[5]
    out[5] = v[0] * f[4] - v[1] * f[3]


@njit(**_OPTS)
def _mat6vec(M, x, out):
    for r in range(6):
        acc = 0.0
        for k in range(6):
            acc += M[r, k] * x[k]
        out[r] = acc


@njit(**_OPTS)
def rnea_vectorized(U, Ut, S, I, qd, qdd, a_g, f_ext):
    # U and Ut = U.T (contiguous); all mask products are dense BLAS products
    n = S.shape[0]
    vJ = np.empty((n, 6), dtype=S.dtype)
    for i in range(n):
        for c in range(6):
            vJ[i, c] = S[i, c] * qd[i]
    V = np.dot(U, vJ)
    rhs = np.empty((n, 6), dtype=S.dtype)
    tmp = np.empty(6, dtype=S.dtype)
    for i in range(n):
        _crm(V[i], vJ[i], tmp)
        for c in range(6):
            rhs[i, c] = S[i, c] * qdd[i] + tmp[c]
    A = np.dot(U, rhs)
    for i in range(n):
        for c in range(6):
            A[i, c] += a_g[c]
    IA = np.empty(6, dtype=S.dtype)
    IV = np.empty(6, dtype=S.dtype)
    for i in range(n):
        _mat6vec(I[i], A[i], IA)
        _mat6vec(I[i], V[i], IV)
        _crf(V[i], IV, tmp)
        for c in range(6):
            rhs[i, c] = IA[c] + tmp[c] - f_ext[i, c]
    F = np.dot(Ut, rhs)
    tau = np.empty(n, dtype=S.dtype)
    for i in range(n):
        acc = 0.0
        for c in range(6):
            acc += S[i, c] * F[i, c]
        tau[i] = acc
    return tau, V, A, F


@njit(**_OPTS)
def crba_vectorized(U, Ut, S, I):
    n = S.shape[0]
    C = np.dot(Ut, np.ascontiguousarray(I).reshape(n, 36)).reshape(n, 6, 6)
    CS = np.empty((n, 6), dtype=S.dtype)
    for i in range(n):
        _mat6vec(C[i], S[i], CS[i])
    M = np.empty((n, n), dtype=S.dtype)
    for i in range(n):
        for j in range(i + 1):
            acc = 0.0
            for c in range(6):
                acc += CS[i, c] * S[j, c]
            acc *= U[i, j]
            M[i, j] = acc
            M[j, i] = acc
    return M, C


# ---------------------------------------------------------------------------
# body-frame recursions


@njit(**_OPTS)
def _motion_to_child(R, p, m, out):
    # out = [R^T w, R^T (v - p x w)]
    w = m[:3]
    v0 = m[3] - (p[1] * w[2] - p[2] * w[1])
    v1 = m[4] - (p[2] * w[0] - p[0] * w[2])
    v2 = m[5] - (p[0] * w[1] - p[1] * w[0])
    for r in range(3):
        out[r] = R[0, r] * w[0] + R[1, r] * w[1] + R[2, r] * w[2]
        out[r + 3] = R[0, r] * v0 + R[1, r] * v1 + R[2, r] * v2


@njit(**_OPTS)
def _force_to_parent(R, p, f, out):
    # out = [R n + p x (R f), R f]
    for r in range(3):
        out[r + 3] = R[r, 0] * f[3] + R[r, 1] * f[4] + R[r, 2] * f[5]
    for r in range(3):
        out[r] = R[r, 0] * f[0] + R[r, 1] * f[1] + R[r, 2] * f[2]
    out[0] += p[1] * out[5] - p[2] * out[4]
    out[1] += p[2] * out[3] - p[0] * out[5]
    out[2] += p[0] * out[4] - p[1] * out[3]


@njit(**_OPTS)
def _force_to_child(R, p, f, out):
    # inverse of _force_to_parent: [R^T (n - p x f), R^T f]
    n0 = f[0] - (p[1] * f[5] - p[2] * f[4])
    n1 = f[1] - (p[2] * f[3] - p[0] * f[5])
    n2 = f[2] - (p[0] * f[4] - p[1] * f[3])
    for r in range(3):
        out[r] = R[0, r] * n0 + R[1, r] * n1 + R[2, r] * n2
        out[r + 3] = R[0, r] * f[3] + R[1, r] * f[4] + R[2, r] * f[5]


@njit(**_OPTS)
def _subspaces(types, axes):
    n = types.shape[0]
    s = np.zeros((n, 6), dtype=axes.dtype)
    for i in range(n):
        off = 0 if types[i] == 0 else 3
        for r in range(3):
            s[i, off + r] = axes[i, r]
    return s


@njit(**_OPTS)
def rnea_loop(parents, types, axes, frot, ftrans, inertias, q, qd, qdd, a_g, f_ext):
    n = q.shape[0]
    Rl, pl = _local_transforms(types, axes, frot, ftrans, q)
    s = _subspaces(types, axes)
    v = np.zeros((n, 6), dtype=q.dtype)
    a = np.zeros((n, 6), dtype=q.dtype)
    f = np.zeros((n, 6), dtype=q.dtype)
    Rw = np.empty((n, 3, 3), dtype=q.dtype)
    pw = np.empty((n, 3), dtype=q.dtype)
    tmp = np.empty(6, dtype=q.dtype)
    tmp2 = np.empty(6, dtype=q.dtype)
    zero = np.zeros(6, dtype=q.dtype)
    for i in range(n):
        par = parents[i]
        if par < 0:
            Rw[i] = Rl[i]
            pw[i] = pl[i]
            _motion_to_child(Rl[i], pl[i], zero, v[i])
            _motion_to_child(Rl[i], pl[i], a_g, a[i])
        else:
            _mat3(Rw[par], Rl[i], Rw[i])
            for r in range(3):
                pw[i, r] = pw[par, r] + Rw[par, r, 0] * pl[i, 0] + Rw[par, r, 1] * pl[i, 1] + Rw[par, r, 2] * pl[i, 2]
            _motion_to_child(Rl[i], pl[i], v[par], v[i])
            _motion_to_child(Rl[i], pl[i], a[par], a[i])
        for c in range(6):
            v[i, c] += s[i, c] * qd[i]
            tmp[c] = s[i, c] * qd[i]
        _crm(v[i], tmp, tmp2)
        for c in range(6):
            a[i, c] += s[i, c] * qdd[i] + tmp2[c]
        _mat6vec(inertias[i], a[i], f[i])
        _mat6vec(inertias[i], v[i], tmp)
        _crf(v[i], tmp, tmp2)
        _force_to_child(Rw[i], pw[i], f_ext[i], tmp)
        for c in range(6):
            f[i, c] += tmp2[c] - tmp[c]
    tau = np.empty(n, dtype=q.dtype)
    for i in range(n - 1, -1, -1):
        acc = 0.0
        for c in range(6):
            acc += s[i, c] * f[i, c]
        tau[i] = acc
        par = parents[i]
        if par >= 0:
            _force_to_parent(Rl[i], pl[i], f[i], tmp)
            for c in range(6):
                f[par, c] += tmp[c]
    return tau


@njit(**_OPTS)
def crba_loop(parents, types, axes, frot, ftrans, inertias, q):
    n = q.shape[0]
    Rl, pl = _local_transforms(types, axes, frot, ftrans, q)
    s = _subspaces(types, axes)
    Ic = inertias.copy()
    tmp66 = np.empty((6, 6), dtype=q.dtype)
    RI = np.empty((3, 3), dtype=q.dtype)
    for i in range(n - 1, -1, -1):
        par = parents[i]
        if par >= 0:
            _transform_inertia_into(Rl[i], pl[i], Ic[i], RI, tmp66)
            Ic[par] += tmp66
    M = np.zeros((n, n), dtype=q.dtype)
    F = np.empty(6, dtype=q.dtype)
    tmp = np.empty(6, dtype=q.dtype)
    for i in range(n):
        _mat6vec(Ic[i], s[i], F)
        acc = 0.0
        for c in range(6):
            acc += s[i, c] * F[c]
        M[i, i] = acc
        j = i
        while parents[j] >= 0:
            _force_to_parent(Rl[j], pl[j], F, tmp)
            F[:] = tmp
            j = parents[j]
            acc = 0.0
            for c in range(6):
                acc += s[j, c] * F[c]
            M[i, j] = acc
            M[j, i] = acc
    return M


# ---------------------------------------------------------------------------
# single-dispatch entry points: FK + dynamics in one call


@njit(**_OPTS)
def rnea_tau(U, Ut, parents, types, axes, frot, ftrans, inertias, q, qd, qdd, a_g, f_ext):
    R, p, S, I = fk_prepare(parents, types, axes, frot, ftrans, inertias, q)
    return rnea_vectorized(U, Ut, S, I, qd, qdd, a_g, f_ext)[0]


@njit(**_OPTS)
def crba_matrix(U, Ut, parents, types, axes, frot, ftrans, inertias, q):
    R, p, S, P = fk_prepare_params(parents, types, axes, frot, ftrans, inertias, q)
    return crba_vectorized_params(U, Ut, S, P)


# ---------------------------------------------------------------------------
# task-space kernels used by the controllers


@njit(**_OPTS)
def jacobian_from_axes(S, mask_row, point):
    """6×n frame Jacobian: columns ``[ω_j; v_j + ω_j × point]`` on ancestor joints."""
    n = S.shape[0]
    J = np.zeros((6, n), dtype=S.dtype)
    for j in range(n):
        u = mask_row[j]
        w0, w1, w2 = S[j, 0], S[j, 1], S[j, 2]
        J[0, j] = u * w0
        J[1, j] = u * w1
        J[2, j] = u * w2
        J[3, j] = u * (S[j, 3] + w1 * point[2] - w2 * point[1])
        J[4, j] = u * (S[j, 4] + w2 * point[0] - w0 * point[2])
        J[5, j] = u * (S[j, 5] + w0 * point[1] - w1 * point[0])
    return J


@njit(**_OPTS)
def frame_jacobian(parents, types, axes, frot, ftrans, mask_row, joint, off_R, off_p, q):
    """World pose ``(R, p)`` of a frame rigidly attached to ``joint`` and its Jacobian."""
    R, p, S = fk_axes(parents, types, axes, frot, ftrans, q)
    Rf = np.empty((3, 3), dtype=q.dtype)
    _mat3(R[joint], off_R, Rf)
    pf = np.empty(3, dtype=q.dtype)
    for r in range(3):
        pf[r] = p[joint, r] + R[joint, r, 0] * off_p[0] + R[joint, r, 1] * off_p[1] + R[joint, r, 2] * off_p[2]
    return Rf, pf, jacobian_from_axes(S, mask_row, pf)


@njit(**_OPTS)
def rotation_log(R):
    cos = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    cos = min(1.0, max(-1.0, cos))
    theta = np.arccos(cos)
    w = np.empty(3, dtype=R.dtype)
    w[0] = 0.5 * (R[2, 1] - R[1, 2])
    w[1] = 0.5 * (R[0, 2] - R[2, 0])
    w[2] = 0.5 * (R[1, 0] - R[0, 1])
    if theta < 1e-6:
        return w * (1.0 + theta * theta / 6.0)
    if np.pi - theta > 1e-6:
        return w * (theta / np.sin(theta))
    k = 0
    for i in range(1, 3):
        if R[i, i] > R[k, k]:
            k = i
    axis = np.empty(3, dtype=R.dtype)
    for r in range(3):
        axis[r] = 0.5 * (R[r, k] + (1.0 if r == k else 0.0))
    axis /= np.sqrt(axis[k])
    if axis[0] * w[0] + axis[1] * w[1] + axis[2] * w[2] < 0.0:
        axis = -axis
    return theta * axis


@njit(**_OPTS)
def pose_error(Rc, pc, Rd, pd):
    err = np.empty(6, dtype=Rc.dtype)
    Rrel = np.empty((3, 3), dtype=Rc.dtype)
    for r in range(3):
        for c in range(3):
            Rrel[r, c] = Rd[r, 0] * Rc[c, 0] + Rd[r, 1] * Rc[c, 1] + Rd[r, 2] * Rc[c, 2]
    err[:3] = rotation_log(Rrel)
    for r in range(3):
        err[3 + r] = pd[r] - pc[r]
    return err


@njit(**_OPTS)
def dls_step(J, Rc, pc, Rd, pd, kp, twist_ff, damping):
    """``Jᵀ (J Jᵀ + λ² 1)⁻¹ (kp ⊙ e + twist_ff)``."""
    rhs = kp * pose_error(Rc, pc, Rd, pd) + twist_ff
    A = J @ J.T
    for r in range(6):
        A[r, r] += damping * damping
    return J.T @ np.linalg.solve(A, rhs)


@njit(**_OPTS)
def osc_torque(M, J, c, g, accel, tau_posture, eps):
    """Λ = (J M⁻¹ Jᵀ + eps 1)⁻¹; τ = Jᵀ Λ accel + (1 - Jᵀ J̄ᵀ) τ₀ + c + g."""
    L = np.linalg.cholesky(M)
    # M⁻¹ Jᵀ by two triangular solves
    MinvJt = np.linalg.solve(L.T, np.linalg.solve(L, np.ascontiguousarray(J.T)))
    Lambda_inv = J @ MinvJt
    for r in range(6):
        Lambda_inv[r, r] += eps
    Lambda = np.linalg.inv(Lambda_inv)
    Jbar = MinvJt @ Lambda
    tau_null = tau_posture - J.T @ (Jbar.T @ tau_posture)
    return J.T @ (Lambda @ accel) + tau_null + c + g
