"""Benchmark harness: ``vecrbd-bench --suite {rbda,batch,control}``.

Single-call cases time each call individually on the monotonic
``perf_counter_ns`` clock after a warm-up phase and report mean, median and
p99 in microseconds. The batch suite times whole batches and reports
throughput. Processes are not pinned to cores, which is a source of variance.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, control, dynamics
from ._backend import get_backend
from .autodiff import Dual
from .batch import BatchRunner, StateBatch, physical_cores
from .errors import ModelError
from .kinematics import frame_transform
from .model import RobotModel
from .robots import BUILTIN_MODELS, load_builtin
from .urdf import load_urdf

__all__ = ["BenchRecord", "BenchReport", "run_bench", "sample_states", "main",
           "SCHEMA_VERSION", "BATCH_SIZES", "MIN_ITERATIONS"]

SCHEMA_VERSION = 1
MIN_ITERATIONS = 1000
BATCH_SIZES = (1, 4, 16, 64, 256, 1024, 4096)
MAX_TIMER_RESOLUTION_S = 100e-9
EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_TIMER = 0, 2, 3, 4
OUTPUT_DIR_ENV = "VECRBD_BENCH_DIR"

# default task frames for the bundled robots
TASK_FRAMES = {"chain7": "hand_tcp", "humanoid": "left_hand", "humanoid_floating": "left_hand"}


@dataclass
class BenchRecord:
    case: str
    robot: str
    method: str
    N: int
    iterations: int
    mean_us: float
    median_us: float
    p99_us: float
    throughput: float


COLUMNS = tuple(f.name for f in fields(BenchRecord))
_TYPES = {f.name: f.type for f in fields(BenchRecord)}


@dataclass
class BenchReport:
    header: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"header": self.header, "columns": list(COLUMNS),
                           "records": [asdict(r) for r in self.records]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        data = json.loads(text)
        return cls(data["header"], [BenchRecord(**r) for r in data["records"]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.header.items():
            buf.write(f"# {key}: {json.dumps(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        header, body = {}, []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                header[key] = json.loads(value)
            elif line:
                body.append(line)
        rows = list(csv.DictReader(body))
        conv = {"int": int, "float": float, "str": str}
        records = [BenchRecord(**{k: conv[_TYPES[k]](v) for k, v in row.items()}) for row in rows]
        return cls(header, records)

    def case(self, name: str) -> BenchRecord:
        for r in self.records:
            if r.case == name:
                return r
        raise KeyError(name)


def sample_states(model: RobotModel, count: int, seed: int = 0):
    """``count`` random ``(q, qd, qdd)`` triples, uniform in [-π, π] per joint."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, size=(3, count, model.n_dof))


def timer_resolution() -> float:
    return time.get_clock_info("perf_counter").resolution


def _stats(samples_ns, case, robot, method, N=1):
    us = np.asarray(samples_ns, dtype=float) / 1e3
    mean = float(us.mean())
    return BenchRecord(case=case, robot=robot, method=method, N=N, iterations=len(us),
                       mean_us=mean, median_us=float(np.median(us)),
                       p99_us=float(np.percentile(us, 99)),
                       throughput=N * 1e6 / mean if mean > 0 else math.inf)


def time_calls(fn, inputs, iterations, warmup):
    """Per-call wall times (ns) of ``fn(*inputs[k % len(inputs)])`` after ``warmup`` calls."""
    clock = time.perf_counter_ns
    for k in range(warmup):
        fn(*inputs[k % len(inputs)])
    samples = np.empty(iterations, dtype=np.int64)
    for k in range(iterations):
        args = inputs[k % len(inputs)]
        t0 = clock()
        fn(*args)
        samples[k] = clock() - t0
    return samples


def _rbda_cases(model, states, rng):
    q, qd, qdd = states
    tangents = rng.uniform(-1.0, 1.0, size=(3,) + q.shape)
    plain = [(q[i], qd[i], qdd[i]) for i in range(len(q))]
    duals = [tuple(Dual(x[i], t[i]) for x, t in zip(states, tangents)) for i in range(len(q))]
    return [
        ("rnea/vectorized", "rnea", lambda a, b, c: dynamics.rnea(model, a, b, c), plain),
        ("rnea/loop", "rnea_loop", lambda a, b, c: dynamics.rnea_loop(model, a, b, c), plain),
        ("crba/vectorized", "crba", lambda a, b, c: dynamics.crba(model, a), plain),
        ("crba/loop", "crba_loop", lambda a, b, c: dynamics.crba_loop(model, a), plain),
        ("rnea/vectorized/jvp", "rnea+jvp", lambda a, b, c: dynamics.rnea(model, a, b, c), duals),
        ("rnea/loop/jvp", "rnea_loop+jvp", lambda a, b, c: dynamics.rnea_loop(model, a, b, c), duals),
        ("crba/vectorized/jvp", "crba+jvp", lambda a, b, c: dynamics.crba(model, a), duals),
        ("crba/loop/jvp", "crba_loop+jvp", lambda a, b, c: dynamics.crba_loop(model, a), duals),
    ]


def default_task_frame(model: RobotModel, robot: str) -> str:
    if robot in TASK_FRAMES:
        return TASK_FRAMES[robot]
    # the frame attached deepest in the tree
    leaf = max(range(model.n_dof), key=lambda i: (model.ancestor_mask[i].sum(), i))
    for name, frame in model.frames.items():
        if frame.joint == leaf:
            return name
    return model.joint_names[leaf]


def _control_cases(model, robot, states, frame):
    q, qd, _ = states
    # targets: the frame pose at another sampled configuration
    targets = [frame_transform(model, q[(i + 1) % len(q)], frame) for i in range(len(q))]
    ik_targets = [control.TaskTarget(T, frame) for T in targets]
    osc_targets = [control.TaskTarget(T, frame, kp=np.full(6, 100.0), kd=np.full(6, 20.0))
                   for T in targets]
    ik_inputs = [(q[i], ik_targets[i]) for i in range(len(q))]
    osc_inputs = [(q[i], qd[i], osc_targets[i]) for i in range(len(q))]
    return [
        ("control/diff_ik", "diff_ik_step",
         lambda a, t: control.diff_ik_step(model, a, t, damping=1e-3), ik_inputs),
        ("control/osc", "osc_step",
         lambda a, b, t: control.osc_step(model, a, b, t, posture=a, posture_gains=(10.0, 1.0)),
         osc_inputs),
    ]


def run_bench(model: RobotModel, robot: str, suite: str, iterations: int = 10_000,
              sizes=BATCH_SIZES, workers: int = 1, seed: int = 0, warmup=None,
              frame=None, state_pool: int = 64) -> BenchReport:
    """Run one benchmark suite and return its report."""
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"iterations must be >= {MIN_ITERATIONS}")
    warmup = max(10, iterations // 10) if warmup is None else warmup
    rng = np.random.default_rng(seed)
    header = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "suite": suite,
        "robot": robot,
        "n_dof": model.n_dof,
        "backend": get_backend(),
        "seed": seed,
        "warmup": warmup,
        "clock": "perf_counter_ns",
        "timer_resolution_s": timer_resolution(),
        "cpus": physical_cores(),
        "python": platform.python_version(),
        "machine": platform.machine(),
        "notes": "compile/trace-time columns do not apply to ahead-of-time kernels and are "
                 "not reported; processes are not pinned to cores",
    }
    report = BenchReport(header)
    if suite == "rbda":
        states = sample_states(model, state_pool, seed)
        for case, method, fn, inputs in _rbda_cases(model, states, rng):
            samples = time_calls(fn, inputs, iterations, warmup)
            report.records.append(_stats(samples, case, robot, method))
    elif suite == "control":
        states = sample_states(model, state_pool, seed)
        frame = frame or default_task_frame(model, robot)
        header["frame"] = frame
        for case, method, fn, inputs in _control_cases(model, robot, states, frame):
            samples = time_calls(fn, inputs, iterations, warmup)
            report.records.append(_stats(samples, case, robot, method))
    elif suite == "batch":
        header["workers"] = workers
        with BatchRunner(dynamics.rnea, model, workers) as runner:
            for N in sizes:
                q, qd, qdd = sample_states(model, N, seed)
                batch = StateBatch(q, qd, qdd)
                repeats = max(3, math.ceil(iterations / N))
                samples = time_calls(runner, [(batch,)], repeats, warmup=1)
                rec = _stats(samples, f"batch/rnea/N={N}", robot, "rnea", N=N)
                rec.iterations = repeats * N
                rec.throughput = N * 1e6 / rec.median_us
                report.records.append(rec)
    else:
        raise ValueError(f"unknown suite {suite!r}")
    return report


def _parse_sizes(text):
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad batch sizes {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("batch sizes must be positive integers")
    return sizes


def _iterations(text):
    value = int(text)
    if value < MIN_ITERATIONS:
        raise argparse.ArgumentTypeError(f"iterations must be >= {MIN_ITERATIONS}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vecrbd-bench", description=__doc__.split("\n")[0])
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--robot", choices=sorted(BUILTIN_MODELS), default="chain7",
                        help="bundled robot model (default: chain7)")
    source.add_argument("--model", type=Path, help="URDF file to benchmark instead")
    parser.add_argument("--suite", choices=("rbda", "batch", "control"), default="rbda")
    parser.add_argument("--iterations", type=_iterations, default=10_000,
                        help=f"timed calls per case (>= {MIN_ITERATIONS})")
    parser.add_argument("--warmup", type=int, default=None,
                        help="untimed calls before each case (default: iterations/10)")
    parser.add_argument("--sizes", type=_parse_sizes, default=BATCH_SIZES,
                        help="comma-separated batch sizes for --suite batch")
    parser.add_argument("--workers", type=int, default=1, help="worker processes for batches")
    parser.add_argument("--frame", help="task frame for --suite control")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--output", help="output file, '-' for stdout (default: "
                        f"${OUTPUT_DIR_ENV} or the current directory)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    resolution = timer_resolution()
    if resolution >= MAX_TIMER_RESOLUTION_S:
        print(f"error: timer resolution {resolution:.3g} s is coarser than 100 ns",
              file=sys.stderr)
        return EXIT_TIMER
    try:
        if args.model is not None:
            model = load_urdf(args.model)
            robot = args.model.stem
        else:
            model = load_builtin(args.robot)
            robot = args.robot
    except (OSError, ModelError) as exc:
        print(f"error: could not load model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    try:
        report = run_bench(model, robot, args.suite, args.iterations, args.sizes,
                           args.workers, args.seed, args.warmup, args.frame)
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    text = report.to_json() if args.format == "json" else report.to_csv()
    if args.output == "-":
        sys.stdout.write(text)
        return EXIT_OK
    if args.output:
        path = Path(args.output)
    else:
        path = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"bench_{args.suite}_{robot}.{args.format}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    for r in report.records:
        print(f"{r.case:24s} N={r.N:<5d} median {r.median_us:10.2f} us  "
              f"p99 {r.p99_us:10.2f} us  {r.throughput:12.1f} evals/s")
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
