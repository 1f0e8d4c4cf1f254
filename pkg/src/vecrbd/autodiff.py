"""Forward-mode differentiation with dual numbers.

A :class:`Dual` pairs a value with a tangent of the same shape. Values may be
scalars or numpy arrays; numpy ufuncs and a subset of array functions dispatch
to :class:`Dual` through ``__array_ufunc__`` / ``__array_function__``, so the
library's kinematics and dynamics (written against plain numpy) propagate
tangents without a separate code path.
"""
from __future__ import annotations

import numpy as np

__all__ = ["Dual", "jvp", "jacobian_fwd", "value_of", "tangent_of"]


def _val(x):
    return x.value if isinstance(x, Dual) else x


def _tan(x):
    return x.tangent if isinstance(x, Dual) else None


def _add_t(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class Dual:
    """Value/tangent pair; ``tangent`` is the directional derivative of ``value``."""

    __slots__ = ("value", "tangent")
    __array_priority__ = 100

    def __init__(self, value, tangent=None):
        value = np.asarray(value)
        if not np.issubdtype(value.dtype, np.inexact):
            value = value.astype(float)
        if tangent is None:
            tangent = np.zeros_like(value)
        else:
            tangent = np.asarray(tangent, dtype=value.dtype)
            if tangent.shape != value.shape:
                tangent = np.broadcast_to(tangent, value.shape).copy()
        self.value = value
        self.tangent = tangent

    @classmethod
    def _make(cls, value, tangent):
        # internal constructor; tangent None means identically zero
        out = object.__new__(cls)
        out.value = value
        if tangent is None:
            tangent = np.zeros_like(value)
        elif np.shape(tangent) != np.shape(value):
            tangent = np.broadcast_to(tangent, np.shape(value))
        out.tangent = tangent
        return out

    def __repr__(self):
        return f"Dual({self.value!r}, {self.tangent!r})"

    # array-like surface
    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def ndim(self):
        return np.ndim(self.value)

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def size(self):
        return np.size(self.value)

    @property
    def T(self):
        return Dual._make(self.value.T, self.tangent.T)

    def __len__(self):
        return len(self.value)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, idx):
        return Dual._make(self.value[idx], self.tangent[idx])

    def reshape(self, *shape):
        return Dual._make(self.value.reshape(*shape), self.tangent.reshape(*shape))

    def swapaxes(self, a, b):
        return Dual._make(self.value.swapaxes(a, b), self.tangent.swapaxes(a, b))

    def transpose(self, *axes):
        return Dual._make(self.value.transpose(*axes), self.tangent.transpose(*axes))

    def sum(self, axis=None, keepdims=False):
        return Dual._make(
            self.value.sum(axis=axis, keepdims=keepdims),
            self.tangent.sum(axis=axis, keepdims=keepdims),
        )

    def copy(self):
        return Dual._make(self.value.copy(), self.tangent.copy())

    def astype(self, dtype):
        return Dual._make(self.value.astype(dtype), self.tangent.astype(dtype))

    def __float__(self):
        return float(self.value)

    # comparisons act on values so that branching code keeps working
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    # arithmetic
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual._make(self.value + other.value, self.tangent + other.tangent)
        return Dual._make(self.value + other, self.tangent)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual._make(self.value - other.value, self.tangent - other.tangent)
        return Dual._make(self.value - other, self.tangent)

    def __rsub__(self, other):
        return Dual._make(other - self.value, -self.tangent)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual._make(
                self.value * other.value,
                self.tangent * other.value + self.value * other.tangent,
            )
        return Dual._make(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            v = self.value / other.value
            return Dual._make(v, (self.tangent - v * other.tangent) / other.value)
        return Dual._make(self.value / other, self.tangent / other)

    def __rtruediv__(self, other):
        v = other / self.value
        return Dual._make(v, -v * self.tangent / self.value)

    def __neg__(self):
        return Dual._make(-self.value, -self.tangent)

    def __pos__(self):
        return self

    def __pow__(self, other):
        return np.power(self, other)

    def __rpow__(self, other):
        return np.power(other, self)

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return Dual._make(
                self.value @ other.value,
                self.tangent @ other.value + self.value @ other.tangent,
            )
        return Dual._make(self.value @ other, self.tangent @ other)

    def __rmatmul__(self, other):
        return Dual._make(other @ self.value, other @ self.tangent)

    def __abs__(self):
        return np.absolute(self)

    # numpy protocols
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        rule = _UFUNC_RULES.get(ufunc)
        if rule is None:
            if ufunc in _VALUE_ONLY_UFUNCS:
                return ufunc(*[_val(x) for x in inputs], **kwargs)
            return NotImplemented
        return rule(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        impl = _FUNCTIONS.get(func)
        if impl is None:
            return NotImplemented
        return impl(*args, **kwargs)


# --------------------------------------------------------------------------
# ufunc derivative rules


def _unary(fn, deriv):
    def rule(x):
        v = x.value
        out = fn(v)
        return Dual._make(out, deriv(v, out) * x.tangent)

    return rule


def _binary_add(a, b):
    return Dual._make(_val(a) + _val(b), _add_t(_tan(a), _tan(b)))


def _binary_sub(a, b):
    tb = _tan(b)
    return Dual._make(_val(a) - _val(b), _add_t(_tan(a), None if tb is None else -tb))


def _binary_mul(a, b):
    va, vb = _val(a), _val(b)
    ta, tb = _tan(a), _tan(b)
    return Dual._make(
        va * vb,
        _add_t(None if ta is None else ta * vb, None if tb is None else va * tb),
    )


def _binary_div(a, b):
    va, vb = _val(a), _val(b)
    ta, tb = _tan(a), _tan(b)
    v = va / vb
    t = _add_t(None if ta is None else ta / vb, None if tb is None else -v * tb / vb)
    return Dual._make(v, t)


def _binary_matmul(a, b):
    va, vb = _val(a), _val(b)
    ta, tb = _tan(a), _tan(b)
    return Dual._make(
        va @ vb,
        _add_t(None if ta is None else ta @ vb, None if tb is None else va @ tb),
    )


def _power(a, b):
    va, vb = _val(a), _val(b)
    ta, tb = _tan(a), _tan(b)
    v = np.power(va, vb)
    t = None
    if ta is not None:
        t = vb * np.power(va, vb - 1) * ta
    if tb is not None:
        t = _add_t(t, v * np.log(va) * tb)
    return Dual._make(v, t)


def _arctan2(y, x):
    vy, vx = _val(y), _val(x)
    ty, tx = _tan(y), _tan(x)
    r2 = vx * vx + vy * vy
    t = _add_t(None if ty is None else vx * ty / r2, None if tx is None else -vy * tx / r2)
    return Dual._make(np.arctan2(vy, vx), t)


def _hypot(a, b):
    va, vb = _val(a), _val(b)
    v = np.hypot(va, vb)
    ta, tb = _tan(a), _tan(b)
    t = _add_t(None if ta is None else va * ta / v, None if tb is None else vb * tb / v)
    return Dual._make(v, t)


def _select(op):
    def rule(a, b):
        va, vb = _val(a), _val(b)
        pick_a = op(va, vb)
        ta = _tan(a)
        tb = _tan(b)
        ta = np.zeros(np.shape(va)) if ta is None else ta
        tb = np.zeros(np.shape(vb)) if tb is None else tb
        return Dual._make(np.where(pick_a, va, vb), np.where(pick_a, ta, tb))

    return rule


_UFUNC_RULES = {
    np.add: _binary_add,
    np.subtract: _binary_sub,
    np.multiply: _binary_mul,
    np.true_divide: _binary_div,
    np.matmul: _binary_matmul,
    np.power: _power,
    np.arctan2: _arctan2,
    np.hypot: _hypot,
    np.maximum: _select(np.greater_equal),
    np.minimum: _select(np.less_equal),
    np.negative: lambda x: -x,
    np.positive: lambda x: x,
    np.sin: _unary(np.sin, lambda v, out: np.cos(v)),
    np.cos: _unary(np.cos, lambda v, out: -np.sin(v)),
    np.tan: _unary(np.tan, lambda v, out: 1.0 + out * out),
    np.arcsin: _unary(np.arcsin, lambda v, out: 1.0 / np.sqrt(1.0 - v * v)),
    np.arccos: _unary(np.arccos, lambda v, out: -1.0 / np.sqrt(1.0 - v * v)),
    np.arctan: _unary(np.arctan, lambda v, out: 1.0 / (1.0 + v * v)),
    np.sinh: _unary(np.sinh, lambda v, out: np.cosh(v)),
    np.cosh: _unary(np.cosh, lambda v, out: np.sinh(v)),
    np.tanh: _unary(np.tanh, lambda v, out: 1.0 - out * out),
    np.exp: _unary(np.exp, lambda v, out: out),
    np.log: _unary(np.log, lambda v, out: 1.0 / v),
    np.sqrt: _unary(np.sqrt, lambda v, out: 0.5 / out),
    np.square: _unary(np.square, lambda v, out: 2.0 * v),
    np.absolute: _unary(np.absolute, lambda v, out: np.sign(v)),
}

_VALUE_ONLY_UFUNCS = {
    np.greater, np.greater_equal, np.less, np.less_equal, np.equal, np.not_equal,
    np.isfinite, np.isnan, np.isinf, np.sign, np.floor, np.ceil,
}


# --------------------------------------------------------------------------
# array functions


def _split(seq):
    values = [_val(x) for x in seq]
    if not any(isinstance(x, Dual) for x in seq):
        return values, None
    tangents = [
        x.tangent if isinstance(x, Dual) else np.zeros(np.shape(v), dtype=np.result_type(v, float))
        for x, v in zip(seq, values)
    ]
    return values, tangents


def _stack(arrays, axis=0, **kwargs):
    values, tangents = _split(list(arrays))
    return Dual._make(np.stack(values, axis=axis), np.stack(tangents, axis=axis))


def _concatenate(arrays, axis=0, **kwargs):
    values, tangents = _split(list(arrays))
    return Dual._make(np.concatenate(values, axis=axis), np.concatenate(tangents, axis=axis))


def _einsum(subscripts, *operands, **kwargs):
    values = [_val(x) for x in operands]
    value = np.einsum(subscripts, *values, **kwargs)
    tangent = None
    for k, x in enumerate(operands):
        if isinstance(x, Dual):
            args = list(values)
            args[k] = x.tangent
            tangent = _add_t(tangent, np.einsum(subscripts, *args, **kwargs))
    return Dual._make(value, tangent)


def _linear(func):
    # func is linear in its first argument
    def impl(x, *args, **kwargs):
        return Dual._make(func(x.value, *args, **kwargs), func(x.tangent, *args, **kwargs))

    return impl


def _bilinear(func):
    def impl(a, b, *args, **kwargs):
        va, vb = _val(a), _val(b)
        ta, tb = _tan(a), _tan(b)
        t = _add_t(
            None if ta is None else func(ta, vb, *args, **kwargs),
            None if tb is None else func(va, tb, *args, **kwargs),
        )
        return Dual._make(func(va, vb, *args, **kwargs), t)

    return impl


def _where(cond, a, b):
    cond = _val(cond)
    va, vb = _val(a), _val(b)
    ta = _tan(a)
    tb = _tan(b)
    ta = np.zeros(np.shape(va)) if ta is None else ta
    tb = np.zeros(np.shape(vb)) if tb is None else tb
    return Dual._make(np.where(cond, va, vb), np.where(cond, ta, tb))


def _det(a):
    v = np.linalg.det(a.value)
    # d det(A) = det(A) tr(A^-1 dA)
    t = v * np.trace(np.linalg.solve(a.value, a.tangent), axis1=-2, axis2=-1)
    return Dual._make(v, t)


def _inv(a):
    va = _val(a)
    v = np.linalg.inv(va)
    return Dual._make(v, -(v @ a.tangent @ v))


def _solve(a, b):
    va, vb = _val(a), _val(b)
    x = np.linalg.solve(va, vb)
    rhs = None
    tb = _tan(b)
    if tb is not None:
        rhs = tb
    ta = _tan(a)
    if ta is not None:
        dax = ta @ x[..., None] if vb.ndim == 1 else ta @ x
        if vb.ndim == 1:
            dax = dax[..., 0]
        rhs = _add_t(rhs, -dax)
    t = None if rhs is None else np.linalg.solve(va, rhs)
    return Dual._make(x, t)


def _norm(x, ord=None, axis=None, keepdims=False):
    if ord is not None:
        raise NotImplementedError("only the 2-norm is differentiable here")
    v = np.linalg.norm(x.value, axis=axis, keepdims=True)
    t = np.sum(x.value * x.tangent, axis=axis, keepdims=True) / v
    if not keepdims:
        v = np.squeeze(v, axis=axis)
        t = np.squeeze(t, axis=axis)
    return Dual._make(v, t)


def _like(func):
    def impl(x, *args, **kwargs):
        return func(_val(x), *args, **kwargs)

    return impl


_FUNCTIONS = {
    np.stack: _stack,
    np.concatenate: _concatenate,
    np.einsum: _einsum,
    np.where: _where,
    np.sum: _linear(np.sum),
    np.trace: _linear(np.trace),
    np.diagonal: _linear(np.diagonal),
    np.diag: _linear(np.diag),
    np.transpose: _linear(np.transpose),
    np.swapaxes: _linear(np.swapaxes),
    np.moveaxis: _linear(np.moveaxis),
    np.reshape: _linear(np.reshape),
    np.squeeze: _linear(np.squeeze),
    np.expand_dims: _linear(np.expand_dims),
    np.broadcast_to: _linear(np.broadcast_to),
    np.tril: _linear(np.tril),
    np.triu: _linear(np.triu),
    np.cumsum: _linear(np.cumsum),
    np.dot: _bilinear(np.dot),
    np.cross: _bilinear(np.cross),
    np.outer: _bilinear(np.outer),
    np.inner: _bilinear(np.inner),
    np.zeros_like: _like(np.zeros_like),
    np.ones_like: _like(np.ones_like),
    np.shape: _like(np.shape),
    np.ndim: _like(np.ndim),
    np.linalg.det: _det,
    np.linalg.inv: _inv,
    np.linalg.solve: _solve,
    np.linalg.norm: _norm,
}


# --------------------------------------------------------------------------
# public helpers


def value_of(x):
    """Strip tangents (recursively through tuples/lists)."""
    if isinstance(x, (tuple, list)):
        return type(x)(value_of(e) for e in x)
    return _val(x)


def tangent_of(x):
    """Tangent of ``x``; zeros for values that do not depend on the input."""
    if isinstance(x, (tuple, list)):
        return type(x)(tangent_of(e) for e in x)
    if isinstance(x, Dual):
        return x.tangent
    return np.zeros(np.shape(x))


def jvp(fn, x, v):
    """Evaluate ``fn(x)`` and its directional derivative along ``v`` in one pass.

    Returns ``(fn(x), Dfn(x) @ v)``. ``fn`` must be built from numpy
    operations that :class:`Dual` supports (all library kinematics and
    dynamics qualify). The Jacobian is never formed.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape:
        from .errors import DimensionError

        raise DimensionError(f"primal shape {x.shape} != tangent shape {v.shape}")
    out = fn(Dual(x, v))
    return value_of(out), tangent_of(out)


def jacobian_fwd(fn, x):
    """Dense Jacobian of ``fn`` at ``x`` from one JVP per input coordinate."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    cols = []
    y = None
    for j in range(flat.size):
        e = np.zeros_like(flat)
        e[j] = 1.0
        y, t = jvp(fn, x, e.reshape(x.shape))
        cols.append(np.reshape(t, -1))
    if not cols:
        return np.zeros((np.size(fn(x)), 0))
    return np.stack(cols, axis=-1).reshape(np.shape(y) + (flat.size,))
