"""Empirical verification of contraction, gain bounds, and dissipation.

All procedures work on any simulatable model (anything exposing `step`,
`simulate`, and `dims`). Trials draw from deterministic per-trial RNG
streams spawned from a single seed, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autodiff import value
from .errors import ParameterError
from .lti_param import LMISpec

GAP_FLOOR = 1e-12


@dataclass
class ContractionReport:
    """Outcome of the trajectory-pair contraction estimate."""

    alpha_hat: float
    K_hat: float
    slope_ci: tuple
    passed: bool
    degenerate: bool = False
    trials: int = 0

    def to_row(self):
        return {
            "check": "contraction",
            "alpha_hat": self.alpha_hat,
            "K_hat": self.K_hat,
            "slope_lo": self.slope_ci[0],
            "slope_hi": self.slope_ci[1],
            "passed": int(self.passed),
            "degenerate": int(self.degenerate),
            "trials": self.trials,
        }


@dataclass
class GainReport:
    """Empirical lower bound on the incremental l2 gain."""

    gamma_hat: float
    trials: int
    worst_seed: int

    def to_row(self):
        return {
            "check": "gain",
            "gamma_hat": self.gamma_hat,
            "trials": self.trials,
            "worst_seed": self.worst_seed,
        }


def _seq_norm(x):
    """Truncated l2 norm over a time-major sequence: sqrt(sum_t |x_t|^2)."""
    return float(np.sqrt(np.sum(np.asarray(x) ** 2)))


# ---------------------------------------------------------------------------
# contraction
# ---------------------------------------------------------------------------


def estimate_contraction(model, trials: int = 20, T: int = 300, rng_seed: int = 0):
    """Fit a geometric envelope to state gaps of random trajectory pairs.

    Pairs start from random initial states and share a random input
    sequence. The regression uses log gaps above the numerical floor;
    alpha_hat = exp(mean slope). Pairs whose gap hits the floor immediately
    are flagged degenerate and pass vacuously.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if T < 10:
        raise ParameterError("T must be >= 10")
    n, m, p, *_ = model.dims
    rng = np.random.default_rng(rng_seed)
    x0a = rng.standard_normal((trials, n))
    x0b = rng.standard_normal((trials, n))
    u = rng.standard_normal((T, 1, m)) * np.ones((T, trials, m))

    xa, _ = model.simulate(x0a, u)
    xb, _ = model.simulate(x0b, u)
    gaps = np.linalg.norm(value(xa) - value(xb), axis=-1)  # (T+1, trials)

    slopes = []
    k_hat = 0.0
    terminal_ok = True
    for k in range(trials):
        g = gaps[:, k]
        if g[0] < GAP_FLOOR:
            continue
        valid = np.nonzero(g > GAP_FLOOR)[0]
        if valid.size < 2:
            continue
        t_fit = valid
        slope = np.polyfit(t_fit, np.log(g[valid]), 1)[0]
        slopes.append(slope)
        if not (g[-1] <= 1e-6 * g[0] or g[-1] <= GAP_FLOOR):
            terminal_ok = False
        alpha_k = np.exp(slope)
        t_axis = np.arange(T + 1)
        with np.errstate(over="ignore", divide="ignore"):
            ratio = g / np.maximum(alpha_k**t_axis * g[0], 1e-300)
        k_hat = max(k_hat, float(np.max(ratio[valid])))

    if not slopes:
        return ContractionReport(0.0, 1.0, (0.0, 0.0), True, degenerate=True,
                                 trials=trials)
    slopes = np.asarray(slopes)
    mean = float(np.mean(slopes))
    half = 1.96 * float(np.std(slopes, ddof=1)) / np.sqrt(len(slopes)) if len(slopes) > 1 else 0.0
    ci = (mean - half, mean + half)
    passed = ci[1] < 0.0 and terminal_ok
    return ContractionReport(float(np.exp(mean)), k_hat, ci, passed, trials=trials)


# ---------------------------------------------------------------------------
# incremental gain
# ---------------------------------------------------------------------------


def estimate_gain(
    model,
    trials: int = 10_000,
    T: int = 64,
    ascent_steps: int = 50,
    rng_seed: int = 0,
    chunk: int = 2000,
):
    """Empirical lower bound on the incremental l2 gain from input pairs.

    Pairs share a zero initial state (so the certificate's transient slack
    vanishes) and differ by perturbations sampled at several scales. The
    worst ratio ||dy||_T / ||du||_T is refined by a local random ascent.
    """
    n, m, p, *_ = model.dims
    if m < 1:
        raise ParameterError("model must have at least one input")
    rng = np.random.default_rng(rng_seed)
    scales = np.array([1e-2, 1e-1, 1.0, 10.0])

    def batch_gain(ua, ub):
        x0 = np.zeros((ua.shape[1], n))
        _, ya = model.simulate(x0, ua)
        _, yb = model.simulate(x0, ub)
        dy = np.sqrt(np.sum((value(ya) - value(yb)) ** 2, axis=(0, 2)))
        du = np.sqrt(np.sum((ua - ub) ** 2, axis=(0, 2)))
        mask = du > 1e-14
        g = np.zeros_like(du)
        g[mask] = dy[mask] / du[mask]
        return g

    best = 0.0
    best_pair = None
    worst_seed = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        ua = rng.standard_normal((T, k, m))
        scale = scales[(done + np.arange(k)) % scales.size][None, :, None]
        ub = ua + scale * rng.standard_normal((T, k, m))
        g = batch_gain(ua, ub)
        idx = int(np.argmax(g))
        if g[idx] > best:
            best = float(g[idx])
            best_pair = (ua[:, idx : idx + 1], ub[:, idx : idx + 1])
            worst_seed = done + idx
        done += k

    if best_pair is None:
        return GainReport(0.0, trials, worst_seed)

    ua, ub = best_pair
    step = 0.1 * float(np.linalg.norm(ub - ua))
    for _ in range(ascent_steps):
        delta = ub - ua
        cands = [
            (ua, ua + delta + step * rng.standard_normal(delta.shape)),
            (ua + step * rng.standard_normal(ua.shape), ub),
            (ua, ua + 0.5 * delta),
            (ua, ua + 2.0 * delta),
        ]
        # evaluate all candidates in one batched simulation
        ca = np.concatenate([c[0] for c in cands], axis=1)
        cb = np.concatenate([c[1] for c in cands], axis=1)
        g = batch_gain(ca, cb)
        idx = int(np.argmax(g))
        if g[idx] > best:
            best = float(g[idx])
            ua, ub = cands[idx]
        else:
            step *= 0.7
    return GainReport(best, trials, worst_seed)


# ---------------------------------------------------------------------------
# dissipation
# ---------------------------------------------------------------------------


def check_dissipation(
    model,
    spec: LMISpec,
    trials: int = 100,
    T: int = 50,
    rng_seed: int = 0,
):
    """Max normalized violation of the per-step storage inequality.

    Along sampled trajectory pairs, checks

        V(dx+) - V(dx) <= qform(dy, du) + |dw|^2 - |dv|^2

    with V(dx) = dx^T E^T P^-1 E dx. The (dy, du) quadratic form is present
    only for the gain spec; contraction pairs share the same input. Returns
    the maximum of (LHS - RHS) / (1 + |dx|^2) over all steps and pairs
    (positive = certificate failure).
    """
    lti = model.lti
    n, m, p, q, l = lti.dims
    E = value(lti.E)
    P = value(lti.P)
    M = E.T @ np.linalg.solve(P, E)
    M = 0.5 * (M + M.T)
    rng = np.random.default_rng(rng_seed)
    gamma = spec.gamma

    xa = rng.standard_normal((trials, n))
    xb = rng.standard_normal((trials, n))
    ua_seq = rng.standard_normal((T, trials, m))
    if spec.kind == "lipschitz":
        ub_seq = ua_seq + rng.standard_normal((T, trials, m))
    else:
        ub_seq = ua_seq

    def internals(x, u):
        v = value(x) @ value(lti.C1).T + value(u) @ value(lti.D12).T + value(lti.bv)
        w = value(model.phi.forward(v))
        return v, w

    max_violation = -np.inf
    for t in range(T):
        va, wa = internals(xa, ua_seq[t])
        vb, wb = internals(xb, ub_seq[t])
        xa_next, ya = model.step(xa, ua_seq[t])
        xb_next, yb = model.step(xb, ub_seq[t])
        xa_next, ya = value(xa_next), value(ya)
        xb_next, yb = value(xb_next), value(yb)

        dx = xa - xb
        dx_next = xa_next - xb_next
        dv, dw = va - vb, wa - wb
        V0 = np.einsum("bi,ij,bj->b", dx, M, dx)
        V1 = np.einsum("bi,ij,bj->b", dx_next, M, dx_next)
        rhs = np.sum(dw**2, axis=-1) - np.sum(dv**2, axis=-1)
        if spec.kind == "lipschitz":
            dy = ya - yb
            du = ua_seq[t] - ub_seq[t]
            rhs += gamma * np.sum(du**2, axis=-1) - np.sum(dy**2, axis=-1) / gamma
        violation = (V1 - V0 - rhs) / (1.0 + np.sum(dx**2, axis=-1))
        max_violation = max(max_violation, float(np.max(violation)))
        xa, xb = xa_next, xb_next
    return max_violation
