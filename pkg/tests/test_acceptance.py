"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (routed past pytest's capture so it
always appears in the run log) and asserts the criterion at its stated
tolerance. The final criterion is an informational note: the paper-scale
experiments it covers need external datasets and are replaced by the checks
here.
"""

import sys
import time

import numpy as np
import pytest

from r2dn import _kernels as kernels
from r2dn.bench import count_params, matched_ren_q, time_phase
from r2dn.lti_param import (
    ContractionFreeParams,
    LipschitzFreeParams,
    cayley,
    construct_contracting,
    construct_lipschitz,
    contraction_spec,
    lipschitz_spec,
    lmi_residual,
)
from r2dn.model import R2DNConfig, init_params, realize
from r2dn.ren import RENConfig
from r2dn.ren import init_params as ren_init_params
from r2dn.ren import equilibrium_residual, solve_equilibrium
from r2dn.train import TrainSchedule, fit_expressivity, loss_grad, loss_value
from r2dn.verify import check_dissipation, estimate_contraction, estimate_gain


def report(line):
    print(line, file=sys.__stdout__, flush=True)


def _contraction_draw(rng, n, q, l, m=1, p=1, eps=1e-4):
    return ContractionFreeParams(
        X=rng.standard_normal((2 * n, 2 * n)),
        Y=rng.standard_normal((n, n)),
        B1c=rng.standard_normal((n, l)),
        C1=rng.standard_normal((q, n)),
        eps=eps,
        B2=rng.standard_normal((n, m)),
        D12=rng.standard_normal((q, m)),
        C2=rng.standard_normal((p, n)),
        D21=rng.standard_normal((p, l)),
        D22=rng.standard_normal((p, m)),
        b=rng.standard_normal(n + q + p),
    )


def _lipschitz_draw(rng, n, q, l, gamma, m=1, p=1, eps=1e-4, eps_R=0.01):
    def cay(rows, cols):
        small = min(rows, cols)
        return (
            rng.standard_normal((small, small)),
            rng.standard_normal((max(rows, cols) - small, small)),
        )

    X12, Y12 = cay(q, m)
    X21, Y21 = cay(p, l)
    return LipschitzFreeParams(
        X=rng.standard_normal((2 * n, 2 * n)),
        Y=rng.standard_normal((n, n)),
        B1c=rng.standard_normal((n, l)),
        C1=rng.standard_normal((q, n)),
        B2c=rng.standard_normal((n, m)),
        C2=rng.standard_normal((p, n)),
        X12=X12, Y12=Y12, X21=X21, Y21=Y21,
        gamma=gamma, eps=eps, eps_R=eps_R,
        b=rng.standard_normal(n + q + p),
        m=m, p=p,
    )


def test_criterion_1_parameterization_soundness():
    """200 random draws of each free-parameter family stay inside the class."""
    rng = np.random.default_rng(2024)
    ns = [1, 2, 4, 8]
    qls = [4, 8, 16]
    gammas = [0.5, 2.0, 10.0]
    worst_eig = np.inf
    worst_orth = 0.0
    for k in range(200):
        n, ql = ns[k % 4], qls[k % 3]
        sys_c = construct_contracting(_contraction_draw(rng, n, ql, ql))
        res = lmi_residual(sys_c, contraction_spec(ql, ql))
        worst_eig = min(worst_eig, res.eigmin)

        gamma = gammas[k % 3]
        params = _lipschitz_draw(rng, n, ql, ql, gamma)
        sys_l = construct_lipschitz(params)
        res = lmi_residual(sys_l, lipschitz_spec(gamma, ql, ql, 1, 1))
        assert res.r_posdef
        worst_eig = min(worst_eig, res.eigmin)

        D = cayley(rng.standard_normal((3, 3)), rng.standard_normal((ql, 3)),
                   ql + 3, 3)
        worst_orth = max(worst_orth, float(np.max(np.abs(D.T @ D - np.eye(3)))))

    ok = worst_eig >= -1e-9 and worst_orth <= 1e-10
    report(f"{'PASS' if ok else 'FAIL'} criterion 1 (parameterization soundness): "
           f"min LMI eigmin {worst_eig:.3e} >= -1e-9, "
           f"max Cayley orthogonality error {worst_orth:.3e} <= 1e-10")
    assert worst_eig >= -1e-9
    assert worst_orth <= 1e-10


def test_criterion_2_contraction():
    """20 random contracting models forget initial conditions geometrically."""
    failures = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        cfg = R2DNConfig(
            n=int(rng.integers(1, 5)), m=1, p=1, q=8, l=8,
            depth=int(rng.integers(2, 5)), width=int(rng.integers(4, 17)),
        )
        model = realize(init_params(cfg, seed), cfg)
        rep = estimate_contraction(model, trials=5, T=300, rng_seed=seed)
        if not rep.passed:
            failures.append((seed, rep.slope_ci))
    ok = not failures
    report(f"{'PASS' if ok else 'FAIL'} criterion 2 (contraction): "
           f"{20 - len(failures)}/20 models with negative log-gap slope and "
           f"terminal gap <= 1e-6 x initial (failures: {failures})")
    assert ok


def test_criterion_3_lipschitz_bound():
    """Empirical gain never exceeds the certified bound for any gamma."""
    worst_ratio = 0.0
    for gamma in (0.5, 2.0, 10.0):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            cfg = R2DNConfig(
                n=int(rng.integers(1, 4)), m=int(rng.integers(1, 3)),
                p=int(rng.integers(1, 3)), q=4, l=4,
                depth=int(rng.integers(2, 4)), width=6,
                mode="lipschitz", gamma=gamma,
            )
            model = realize(init_params(cfg, seed), cfg)
            rep = estimate_gain(model, trials=10_000, T=64, ascent_steps=50,
                                rng_seed=seed, chunk=10_000)
            worst_ratio = max(worst_ratio, rep.gamma_hat / gamma)
    ok = worst_ratio <= 1 + 1e-4
    report(f"{'PASS' if ok else 'FAIL'} criterion 3 (Lipschitz bound): "
           f"max empirical gain / gamma = {worst_ratio:.6f} <= 1 + 1e-4 "
           f"over 150 models x 1e4 input pairs")
    assert ok


def test_criterion_4_dissipation_certificate():
    """Per-step storage inequality holds; corrupted certificates fail it."""
    worst = -np.inf
    for seed in range(20):
        mode = "lipschitz" if seed % 2 else "contracting"
        cfg = R2DNConfig(n=3, m=1, p=1, q=6, l=6, depth=2, width=6,
                         mode=mode, gamma=2.0)
        model = realize(init_params(cfg, seed), cfg)
        v = check_dissipation(model, cfg.lmi_spec(), trials=100, T=40,
                              rng_seed=seed)
        worst = max(worst, v)

    # control: an expanding transition matrix must register as a violation
    cfg = R2DNConfig(n=3, m=1, p=1, q=6, l=6, depth=2, width=6)
    bad = realize(init_params(cfg, 0), cfg)
    bad.lti.A = bad.lti.A + 1.5 * np.eye(3)
    control = check_dissipation(bad, cfg.lmi_spec(), trials=100, T=10, rng_seed=0)

    ok = worst <= 1e-8 and control > 0
    report(f"{'PASS' if ok else 'FAIL'} criterion 4 (dissipation certificate): "
           f"max normalized violation {worst:.3e} <= 1e-8 over 20 models x 100 "
           f"pairs; corrupted control violation {control:.3e} > 0")
    assert worst <= 1e-8
    assert control > 0


def test_criterion_5_gradient_correctness():
    """Reverse-mode gradients match central finite differences everywhere."""
    # smooth activation throughout: central differences are only a valid
    # oracle away from activation kinks
    cases = [
        ("r2dn", R2DNConfig(n=1, m=1, p=1, q=2, l=2, depth=2, width=3,
                            activation="tanh")),
        ("r2dn", R2DNConfig(n=2, m=1, p=1, q=2, l=2, depth=2, width=2,
                            activation="tanh")),
        ("r2dn", R2DNConfig(n=1, m=1, p=1, q=2, l=2, depth=2, width=3,
                            mode="lipschitz", gamma=2.0, activation="tanh")),
        ("ren", RENConfig(n=1, m=1, p=1, q=6, activation="tanh")),
        ("ren", RENConfig(n=2, m=1, p=1, q=5, activation="tanh")),
    ]
    h = 1e-5
    worst = 0.0
    for i, (arch, cfg) in enumerate(cases):
        init = init_params if arch == "r2dn" else ren_init_params
        params = init(cfg, i)
        assert params.size <= 200
        rng = np.random.default_rng(i)
        x = rng.uniform(-30, 30, (16, cfg.n))
        u = rng.uniform(-1, 1, (16, cfg.m))
        target = rng.standard_normal((16, cfg.n))
        batch = (x, u, target)
        _, grad = loss_grad(params, batch, cfg, arch)
        for j in range(params.size):
            pp, pm = params.copy(), params.copy()
            pp.theta[j] += h
            pm.theta[j] -= h
            fd = (loss_value(pp, batch, cfg, arch)
                  - loss_value(pm, batch, cfg, arch)) / (2 * h)
            worst = max(worst, abs(fd - grad[j]) / max(1.0, abs(grad[j])))
    ok = worst <= 1e-5
    report(f"{'PASS' if ok else 'FAIL'} criterion 5 (gradient correctness): "
           f"max relative finite-difference error {worst:.3e} <= 1e-5 on every "
           f"coordinate of 5 models")
    assert ok


def test_criterion_6_equilibrium_exactness():
    """Exact fixed point in one sweep across 1000 random instances."""
    rng = np.random.default_rng(99)
    worst = 0.0
    for k in range(1000):
        q = int(rng.integers(1, 65))
        # 1/sqrt(q) scaling keeps the fixed point at unit size, so an
        # absolute 1e-12 residual genuinely measures solver round-off
        D = np.tril(rng.standard_normal((q, q)), -1) / np.sqrt(q)
        bw = rng.standard_normal((int(rng.integers(1, 5)), q))
        act = "relu" if k % 2 else "tanh"
        w = solve_equilibrium(D, bw, act)
        worst = max(worst, equilibrium_residual(D, bw, w, act))
    ok = worst <= 1e-12
    report(f"{'PASS' if ok else 'FAIL'} criterion 6 (equilibrium exactness): "
           f"max residual {worst:.3e} <= 1e-12 over 1000 instances, q <= 64")
    assert ok


@pytest.mark.slow
def test_criterion_7_expressivity_trend():
    """Training improves fit 5x and wider networks fit no worse."""
    widths = (8, 16, 32)
    seeds = (0, 1, 2)
    improvements = []
    medians = {}
    for width in widths:
        scores = []
        for seed in seeds:
            sched = TrainSchedule(epochs=300, batches_per_epoch=32,
                                  batch_size=256, rng_seed=seed)
            res = fit_expressivity("r2dn", width, sched)
            improvements.append(
                (width, seed, res.initial_nrmse, res.final_nrmse,
                 res.final_nrmse < res.initial_nrmse / 5)
            )
            scores.append(res.expressivity)
        medians[width] = float(np.median(scores))

    all_improved = all(row[4] for row in improvements)
    monotone = medians[8] <= medians[16] <= medians[32]
    ok = all_improved and monotone
    detail = ", ".join(f"w{w}: {medians[w]:.4f}" for w in widths)
    report(f"{'PASS' if ok else 'FAIL'} criterion 7 (expressivity trend): "
           f"final NRMSE < initial/5 in {sum(r[4] for r in improvements)}/9 runs; "
           f"median 1/NRMSE by width {{{detail}}} "
           f"{'nondecreasing' if monotone else 'NOT nondecreasing'}")
    assert all_improved, improvements
    assert monotone, medians


@pytest.mark.slow
def test_criterion_8_timing_scaling():
    """Baseline cost grows faster with size, and loses at matched count."""
    reps = 100
    ren_sizes = (20, 60, 100, 140)
    r2dn_sizes = (8, 32, 64, 96)

    def forward_mean(arch, size):
        if arch == "ren":
            cfg = RENConfig(n=1, m=1, p=1, q=size)
            params = ren_init_params(cfg, 0)
        else:
            cfg = R2DNConfig(n=1, m=1, p=1, q=16, l=16, depth=6, width=size)
            params = init_params(cfg, 0)
        return time_phase(arch, params, cfg, "forward", batch=64, seq_len=128,
                          reps=reps, warmup=10).mean_ms

    ren_means = {s: forward_mean("ren", s) for s in ren_sizes}
    r2dn_means = {s: forward_mean("r2dn", s) for s in r2dn_sizes}
    ren_ratio = ren_means[140] / ren_means[20]
    r2dn_ratio = r2dn_means[96] / r2dn_means[8]

    # matched parameter count (within 10%)
    cfg32 = R2DNConfig(n=1, m=1, p=1, q=16, l=16, depth=6, width=32)
    target = count_params("r2dn", cfg32)
    q_match = matched_ren_q(target)
    match_count = count_params("ren", RENConfig(n=1, m=1, p=1, q=q_match))
    count_gap = abs(match_count - target) / target
    ren_matched = forward_mean("ren", q_match)
    r2dn_matched = r2dn_means[32]

    scaling_ok = ren_ratio > r2dn_ratio
    matched_ok = count_gap <= 0.10 and r2dn_matched <= 0.5 * ren_matched
    ok = scaling_ok and matched_ok
    report(
        f"{'PASS' if ok else 'FAIL'} criterion 8 (timing scaling): "
        f"baseline max/min forward ratio {ren_ratio:.2f} > deep model "
        f"{r2dn_ratio:.2f}; at matched count ({target} vs {match_count} params, "
        f"gap {100 * count_gap:.1f}%), deep forward {r2dn_matched:.2f} ms <= "
        f"0.5 x baseline {ren_matched:.2f} ms"
    )
    assert scaling_ok, (ren_means, r2dn_means)
    assert matched_ok, (count_gap, r2dn_matched, ren_matched)


def test_criterion_9_out_of_scope_note():
    """Paper-scale case studies are explicitly not reproduced here."""
    report(
        "NOTE criterion 9: aircraft system identification, PDE observer, and "
        "feedback-control test errors and loss curves need external datasets "
        "and an RL stack; they are out of scope and substituted by criteria 1-8."
    )
