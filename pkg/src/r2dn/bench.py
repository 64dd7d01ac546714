"""Timing benchmarks: forward and gradient cost across model sizes.

Times full-sequence inference (`simulate`) and full-sequence gradient
computation for both architectures on a fixed workload, sweeps model sizes,
and compares the compiled equilibrium-sweep kernel against the pure-Python
fallback. Results export to CSV with the fixed column set
arch,size,phase,reps,mean_ms,std_ms,p50_ms,param_count,expressivity.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as kernels
from . import model as model_mod
from . import ren as ren_mod
from .errors import ParameterError
from .model import R2DNConfig, realize, realize_from_views
from .ren import RENConfig, ren_realize, ren_realize_from_views

CSV_COLUMNS = [
    "arch", "size", "phase", "reps",
    "mean_ms", "std_ms", "p50_ms", "param_count", "expressivity",
]

DEFAULT_BATCH = 64
DEFAULT_SEQ_LEN = 128

# desk-scale size grids
REN_SIZES = (20, 60, 100, 140)
R2DN_SIZES = (8, 32, 64, 96)


@dataclass
class BenchRecord:
    arch: str
    size: int
    phase: str
    reps: int
    mean_ms: float
    std_ms: float
    p50_ms: float
    param_count: int
    expressivity: float = float("nan")
    calls_per_rep: int = 1  # >1 when the timer resolution forced grouping
    error: Optional[str] = None

    def to_row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.to_row())


# ---------------------------------------------------------------------------
# parameter counting and size matching
# ---------------------------------------------------------------------------


def count_params(arch: str, cfg) -> int:
    """Exact length of the flat parameter vector."""
    specs = (
        model_mod.param_specs(cfg) if arch == "r2dn" else ren_mod.param_specs(cfg)
    )
    return int(sum(np.prod(shape) for _, shape in specs))


def matched_ren_q(target_count: int, n=1, m=1, p=1, q_max=512) -> int:
    """Baseline neuron count whose parameter total is closest to target."""
    best_q, best_diff = 1, float("inf")
    for q in range(1, q_max + 1):
        c = count_params("ren", RENConfig(n=n, m=m, p=p, q=q))
        diff = abs(c - target_count)
        if diff < best_diff:
            best_q, best_diff = q, diff
    return best_q


# ---------------------------------------------------------------------------
# timing core
# ---------------------------------------------------------------------------

_MIN_CALL_S = 1e-4  # group calls until one measurement exceeds this


def _time_calls(fn, reps: int, warmup: int):
    """Per-measurement wall times in ms; groups calls if one is too fast.

    Returns (times_ms, calls_per_rep). Grouping keeps each measurement well
    above the timer resolution; reported times are per call.
    """
    for _ in range(warmup):
        fn()
    t0 = time.perf_counter()
    fn()
    single = time.perf_counter() - t0
    calls = max(1, math.ceil(_MIN_CALL_S / max(single, 1e-9)))
    times = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        times[i] = (time.perf_counter() - t0) / calls
    return times * 1e3, calls


def _workload(cfg, batch, seq_len, seed):
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((batch, cfg.n))
    u_seq = rng.standard_normal((seq_len, batch, cfg.m))
    target = rng.standard_normal((seq_len, batch, cfg.p))
    return x0, u_seq, target


def time_phase(
    arch: str,
    params,
    cfg,
    phase: str,
    batch: int = DEFAULT_BATCH,
    seq_len: int = DEFAULT_SEQ_LEN,
    reps: int = 30,
    warmup: int = 3,
    seed: int = 0,
) -> BenchRecord:
    """Wall-clock statistics for one (architecture, size, phase) cell.

    phase "forward" times `simulate` on a realized model (realization
    excluded, matching inference use). phase "gradient" times realization
    plus simulation plus reverse pass on a sequence loss, matching the cost
    of one training step.
    """
    if phase not in ("forward", "gradient"):
        raise ParameterError(f"unknown phase {phase!r}")
    x0, u_seq, target = _workload(cfg, batch, seq_len, seed)
    size = cfg.width if arch == "r2dn" else cfg.q

    if phase == "forward":
        model = realize(params, cfg) if arch == "r2dn" else ren_realize(params, cfg)

        def fn():
            model.simulate(x0, u_seq)

    else:

        def fn():
            leaves = params.leaf_tensors()
            m = (
                realize_from_views(leaves, cfg)
                if arch == "r2dn"
                else ren_realize_from_views(leaves, cfg)
            )
            _, y = m.simulate(x0, u_seq)
            loss = ((y - target) ** 2).mean()
            loss.backward()

    times, calls = _time_calls(fn, reps, warmup)
    return BenchRecord(
        arch=arch,
        size=size,
        phase=phase,
        reps=reps,
        mean_ms=float(np.mean(times)),
        std_ms=float(np.std(times, ddof=1)) if reps > 1 else 0.0,
        p50_ms=float(np.median(times)),
        param_count=count_params(arch, cfg),
        calls_per_rep=calls,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def scaling_sweep(
    ren_sizes=REN_SIZES,
    r2dn_sizes=R2DN_SIZES,
    batch: int = DEFAULT_BATCH,
    seq_len: int = DEFAULT_SEQ_LEN,
    reps: int = 30,
    phases=("forward", "gradient"),
    seed: int = 0,
):
    """Time every (arch, size, phase) cell; failures are recorded, not fatal."""
    records = []
    cells = [("ren", s) for s in ren_sizes] + [("r2dn", s) for s in r2dn_sizes]
    for arch, size in cells:
        if arch == "ren":
            cfg = RENConfig(n=1, m=1, p=1, q=size)
            params = ren_mod.init_params(cfg, seed)
        else:
            cfg = R2DNConfig(n=1, m=1, p=1, q=16, l=16, depth=6, width=size)
            params = model_mod.init_params(cfg, seed)
        for phase in phases:
            try:
                records.append(
                    time_phase(arch, params, cfg, phase, batch, seq_len, reps, seed=seed)
                )
            except Exception as exc:  # record the failed cell and move on
                warnings.warn(f"bench cell ({arch}, {size}, {phase}) failed: {exc}")
                records.append(
                    BenchRecord(
                        arch, size, phase, 0,
                        float("nan"), float("nan"), float("nan"),
                        count_params(arch, cfg), error=str(exc),
                    )
                )
    return records


def backend_comparison(
    q: int = 100, batch: int = DEFAULT_BATCH, reps: int = 100, seed: int = 0
):
    """Compiled vs pure-Python equilibrium sweep on identical inputs."""
    rng = np.random.default_rng(seed)
    rows, cols = np.tril_indices(q, k=-1)
    D11 = np.zeros((q, q))
    D11[rows, cols] = rng.standard_normal(rows.size) / np.sqrt(q)
    bw = np.ascontiguousarray(rng.standard_normal((batch, q)))

    backends = [("sweep_python", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        backends.append(("sweep_cython", kernels.compiled_backend))

    records = []
    for name, backend in backends:
        times, calls = _time_calls(
            lambda b=backend: b.equilibrium_sweep(D11, bw, kernels.ACT_RELU),
            reps, warmup=5,
        )
        records.append(
            BenchRecord(
                arch=name, size=q, phase="forward", reps=reps,
                mean_ms=float(np.mean(times)),
                std_ms=float(np.std(times, ddof=1)) if reps > 1 else 0.0,
                p50_ms=float(np.median(times)),
                param_count=q * (q - 1) // 2,
                calls_per_rep=calls,
            )
        )
    return records
