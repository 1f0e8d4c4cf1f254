"""Evaluate a state function over a batch of states, optionally across processes.

Each state is evaluated independently with exactly the same code path as a
direct call, so results are bitwise identical for any worker count.
"""
from __future__ import annotations

import inspect
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import RobotModel

__all__ = ["StateBatch", "BatchRunner", "batch_eval", "physical_cores"]

_FIELDS = ("q", "qd", "qdd", "tau")


@dataclass(frozen=True, eq=False)
class StateBatch:
    """``N`` states stacked along the leading axis; ``qd``/``qdd``/``tau`` optional."""

    q: np.ndarray
    qd: np.ndarray | None = None
    qdd: np.ndarray | None = None
    tau: np.ndarray | None = None

    def __post_init__(self):
        q = np.ascontiguousarray(self.q, dtype=float)
        if q.ndim != 2:
            raise DimensionError(f"q must be N×n, got shape {q.shape}")
        object.__setattr__(self, "q", q)
        for name in _FIELDS[1:]:
            value = getattr(self, name)
            if value is None:
                continue
            value = np.ascontiguousarray(value, dtype=float)
            if value.shape != q.shape:
                raise DimensionError(f"{name} has shape {value.shape}, expected {q.shape}")
            object.__setattr__(self, name, value)

    @property
    def N(self) -> int:
        return self.q.shape[0]

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def __len__(self):
        return self.N

    @classmethod
    def random(cls, model: RobotModel, N: int, seed=0, fields=_FIELDS):
        """States drawn uniformly in [-π, π] per coordinate."""
        rng = np.random.default_rng(seed)
        data = {name: rng.uniform(-np.pi, np.pi, size=(N, model.n_dof)) for name in _FIELDS}
        return cls(**{name: data[name] for name in _FIELDS if name in fields or name == "q"})


def physical_cores() -> int:
    """Best-effort count of CPUs usable by this process."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def _state_arguments(fn, batch: StateBatch):
    """Names of batch fields that ``fn`` takes after the model, in call order."""
    try:
        params = list(inspect.signature(fn).parameters.values())[1:]
    except (TypeError, ValueError):
        params = []
    names = []
    for p in params:
        if p.name not in _FIELDS:
            break
        if getattr(batch, p.name) is None:
            if p.default is inspect.Parameter.empty:
                raise DimensionError(f"{getattr(fn, '__name__', fn)!r} needs {p.name!r}, "
                                     "which the batch does not provide")
            break
        names.append(p.name)
    return names or ["q"]


def _run_chunk(fn, model, columns):
    return [np.asarray(fn(model, *row)) for row in zip(*columns)]


_WORKER = {}


def _init_worker(fn, model):
    _WORKER.update(fn=fn, model=model)


def _worker_chunk(columns):
    return _run_chunk(_WORKER["fn"], _WORKER["model"], columns)


def _chunks(N, parts):
    edges = np.linspace(0, N, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


class BatchRunner:
    """Reusable evaluator of ``fn`` over batches, holding its worker pool open.

    With ``workers > 1`` a pool of forked processes is started once; each call
    splits the batch into ``workers`` contiguous chunks (static partitioning).
    Use as a context manager or call :meth:`close`.
    """

    def __init__(self, fn, model: RobotModel, workers: int = 1):
        workers = int(workers)
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.fn = fn
        self.model = model
        self.workers = workers
        self._pool = None
        if workers > 1 and "fork" in mp.get_all_start_methods():
            self._pool = ProcessPoolExecutor(workers, mp_context=mp.get_context("fork"),
                                             initializer=_init_worker, initargs=(fn, model))

    def __call__(self, batch: StateBatch):
        if not isinstance(batch, StateBatch):
            batch = StateBatch(batch)
        if batch.n != self.model.n_dof:
            raise DimensionError(
                f"batch has {batch.n} coordinates, model has {self.model.n_dof}")
        columns = [getattr(batch, name) for name in _state_arguments(self.fn, batch)]
        N = batch.N
        if N == 0:
            return np.zeros((0,))
        parts = min(self.workers, N)
        if self._pool is None or parts == 1:
            rows = _run_chunk(self.fn, self.model, columns)
        else:
            work = [[col[a:b] for col in columns] for a, b in _chunks(N, parts)]
            rows = [row for part in self._pool.map(_worker_chunk, work) for row in part]
        return np.stack(rows)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def batch_eval(fn, model: RobotModel, batch: StateBatch, workers: int = 1):
    """Apply ``fn(model, q[i], ...)`` to every state and stack the results.

    ``fn`` receives the batch fields named by its parameters after ``model``
    (e.g. ``rnea(model, q, qd, qdd)`` gets ``q``, ``qd``, ``qdd``). Output row
    ``i`` is bitwise equal to the direct call on state ``i`` for any
    ``workers``; ``workers=1`` evaluates in the calling process.
    """
    with BatchRunner(fn, model, workers) as run:
        return run(batch)
