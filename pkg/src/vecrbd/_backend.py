"""Execution backend selection.

``"jit"`` routes plain floating-point inputs to numba-compiled kernels;
``"numpy"`` always uses the scalar-generic numpy formulation. Inputs that
carry :class:`~vecrbd.autodiff.Dual` tangents use numpy regardless.
The default comes from ``VECRBD_BACKEND`` and can be overridden per
context (thread/task local) with :func:`use_backend`.
"""
from __future__ import annotations

import contextlib
import contextvars
import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

BACKENDS = ("jit", "numpy")

_default = os.environ.get("VECRBD_BACKEND", "jit")
if _default not in BACKENDS:
    raise ValueError(f"VECRBD_BACKEND must be one of {BACKENDS}, got {_default!r}")

_current = contextvars.ContextVar("vecrbd_backend", default=_default)


def get_backend() -> str:
    return _current.get()


@contextlib.contextmanager
def use_backend(name: str):
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    token = _current.set(name)
    try:
        yield
    finally:
        _current.reset(token)


def jit_active() -> bool:
    return HAVE_NUMBA and _current.get() == "jit"
