"""Command-line entry point: verify, train, bench, export.

Every subcommand reads a JSON config file and writes its results to --out.
The --seed flag overrides any seed given in the config.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import _kernels as kernels
from . import bench as bench_mod
from . import checkpoint as ckpt_mod
from . import model as model_mod
from . import ren as ren_mod
from . import train as train_mod
from . import verify as verify_mod
from .lti_param import lmi_residual
from .model import R2DNConfig, realize
from .ren import RENConfig, ren_realize

_CONFIG_TYPES = {"r2dn": R2DNConfig, "ren": RENConfig}


def _load_config(path):
    with open(path) as fh:
        return json.load(fh)


def _resolve_model(cfg_json, seed):
    """(arch, config, params) from a checkpoint path or a fresh init."""
    if "checkpoint" in cfg_json:
        return ckpt_mod.load(cfg_json["checkpoint"])
    arch = cfg_json.get("arch", "r2dn")
    config = _CONFIG_TYPES[arch].from_dict(cfg_json.get("config", {}))
    init = model_mod.init_params if arch == "r2dn" else ren_mod.init_params
    return arch, config, init(config, seed)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_verify(args):
    cfg_json = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg_json.get("seed", 0)
    arch, config, params = _resolve_model(cfg_json, seed)
    model = realize(params, config) if arch == "r2dn" else ren_realize(params, config)

    report = {"arch": arch, "seed": seed, "config": config.to_dict()}
    contraction = verify_mod.estimate_contraction(
        model,
        trials=cfg_json.get("contraction_trials", 20),
        T=cfg_json.get("T", 300),
        rng_seed=seed,
    )
    report["contraction"] = contraction.to_row()
    if arch == "r2dn":
        spec = config.lmi_spec()
        lmi = lmi_residual(model.lti, spec)
        report["lmi_eigmin"] = lmi.eigmin
        report["dissipation_max_violation"] = verify_mod.check_dissipation(
            model, spec, rng_seed=seed
        )
        if config.mode == "lipschitz":
            gain = verify_mod.estimate_gain(
                model,
                trials=cfg_json.get("gain_trials", 2000),
                rng_seed=seed,
            )
            report["gain"] = gain.to_row()
            report["gamma"] = config.gamma
    _write_json(args.out, report)
    print(f"verification report written to {args.out}")


def cmd_train(args):
    cfg_json = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg_json.get("seed", 0)
    arch = cfg_json.get("arch", "r2dn")
    size = cfg_json.get("size", 32 if arch == "r2dn" else 20)
    schedule = train_mod.TrainSchedule(
        **{**cfg_json.get("schedule", {}), "rng_seed": seed}
    )
    config = None
    if "config" in cfg_json:
        config = _CONFIG_TYPES[arch].from_dict(cfg_json["config"])
    result = train_mod.fit_expressivity(arch, size, schedule, cfg=config)
    result.history.to_csv(args.out)
    ckpt_path = args.out + ".ckpt"
    ckpt_mod.save(ckpt_path, arch, result.config, result.params)
    print(
        f"{arch} size={size}: NRMSE {result.initial_nrmse:.2f}% -> "
        f"{result.final_nrmse:.2f}% ({'diverged' if result.history.diverged else 'ok'})"
    )
    print(f"history written to {args.out}, checkpoint to {ckpt_path}")


def cmd_bench(args):
    cfg_json = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg_json.get("seed", 0)
    records = bench_mod.scaling_sweep(
        ren_sizes=cfg_json.get("ren_sizes", bench_mod.REN_SIZES),
        r2dn_sizes=cfg_json.get("r2dn_sizes", bench_mod.R2DN_SIZES),
        batch=cfg_json.get("batch", bench_mod.DEFAULT_BATCH),
        seq_len=cfg_json.get("seq_len", bench_mod.DEFAULT_SEQ_LEN),
        reps=cfg_json.get("reps", 30),
        seed=seed,
    )
    if cfg_json.get("backend_comparison", True):
        records += bench_mod.backend_comparison(
            q=cfg_json.get("backend_q", 100), seed=seed
        )
    bench_mod.write_csv(records, args.out)
    print(f"kernel backend in use: {kernels.BACKEND}")
    print(f"{len(records)} rows written to {args.out}")


def cmd_export(args):
    cfg_json = _load_config(args.config)
    arch, config, params = ckpt_mod.load(cfg_json["checkpoint"])
    if arch == "r2dn":
        model = realize(params, config)
        lmi = lmi_residual(model.lti, config.lmi_spec())
        cert = {"lmi_eigmin": lmi.eigmin, "mode": config.mode}
        if config.mode == "lipschitz":
            cert["gamma"] = config.gamma
    else:
        model = ren_realize(params, config)
        cert = {"note": "baseline model, no certificate"}
    lti = model.lti
    matrices = {
        name: np.asarray(getattr(lti, name)).tolist()
        for name in ("A", "B1", "B2", "C1", "C2", "D12", "D21", "D22",
                     "bx", "bv", "by", "E", "P")
    }
    _write_json(
        args.out,
        {"arch": arch, "config": config.to_dict(), "certificate": cert,
         "matrices": matrices},
    )
    print(f"explicit realization written to {args.out}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="r2dn",
        description="Contracting and Lipschitz-bounded recurrent models: "
        "verification, training, and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, out_help in [
        ("verify", cmd_verify, "JSON verification report"),
        ("train", cmd_train, "per-epoch history CSV (checkpoint saved alongside)"),
        ("bench", cmd_bench, "timing results CSV"),
        ("export", cmd_export, "JSON with explicit matrices and certificate"),
    ]:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", required=True, help=out_help)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
