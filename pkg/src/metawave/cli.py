"""Command-line interface: ``metawave {convergence,run,energy-audit,validate}``."""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ConfigError, load_config
from .fespace import PAIRINGS
from .material import validate

PAIRING_NAMES = ("bdm1", "rtn0", "bdm2", "rtn1")


def _levels(text):
    try:
        levels = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}")
    if not levels or any(n < 1 for n in levels):
        raise argparse.ArgumentTypeError("levels must be positive")
    return levels


def _study(args):
    from .mms import convergence_study
    pairing, levels, dt_policy = args
    return convergence_study(pairing, levels, dt_policy)


def cmd_convergence(args):
    pairings = PAIRING_NAMES if args.pairing == "all" else (args.pairing,)
    jobs = [(p, args.levels, args.dt_policy) for p in pairings]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            reports = list(pool.map(_study, jobs))
    else:
        reports = [_study(j) for j in jobs]
    for rep in reports:
        print(rep.to_table())
        print()
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"convergence_{rep.pairing}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(rep.to_csv())
            print(f"wrote {path}")
    return 0


def cmd_run(args):
    from .scenarios import run_config
    cfg = load_config(args.config)
    if args.format:
        cfg.output["formats"] = [args.format]
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    res = run_config(cfg, out_dir=args.out,
                     progress=lambda n, t: print(f"step {n} t={t:.6g}", file=sys.stderr))
    print(f"{cfg.name}: {cfg.n_steps} steps, {res.problem.spaces.n_dofs} dofs, {res.seconds:.1f} s")
    for path in res.files:
        print(f"wrote {path}")
    return 0


def cmd_energy_audit(args):
    from .audit import energy_audit
    from .output import write_trace_csv
    pairings = PAIRING_NAMES if args.pairing == "all" else (args.pairing,)
    status = 0
    for p in pairings:
        a = energy_audit(p, N=args.N, n_steps=args.steps, dt=args.dt, gamma=args.gamma, seed=args.seed)
        if args.gamma == 0:
            ok = a.max_relative_drift <= 1e-9
            print(f"{p}: max relative drift {a.max_relative_drift:.3e} {'ok' if ok else 'FAIL'}")
        else:
            ok = a.max_relative_increase <= 1e-12
            print(f"{p}: max relative increase {a.max_relative_increase:.3e}, "
                  f"E(T)/E(0) = {a.energy[-1] / a.energy[0]:.6f} {'ok' if ok else 'FAIL'}")
        status |= not ok
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"energy_{p}.csv")
            rows = [(n * a.dt, float(e)) for n, e in enumerate(a.energy)]
            write_trace_csv(path, ["t", "E0"], rows)
            print(f"wrote {path}")
    return int(status)


def cmd_validate(args):
    from .scenarios import build_problem
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        prob = build_problem(cfg)
    except ValueError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    issues = validate(prob.material)
    for v in issues:
        print(f"{v.kind}: {v.message} (cells {list(v.cells[:10])})")
    print(json.dumps({"name": cfg.name, "cells": prob.mesh.n_cells, "dofs": prob.spaces.n_dofs,
                      "steps": cfg.n_steps, "valid": not issues}))
    return 0 if not issues else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="metawave", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convergence", help="manufactured-solution convergence study")
    c.add_argument("--pairing", default="all", choices=PAIRING_NAMES + ("all",))
    c.add_argument("--levels", type=_levels, default=[8, 16, 32])
    c.add_argument("--dt-policy", choices=("h", "h2"), default=None,
                   help="dt = h or h^2 (default: h for k=0, h^2 for k=1)")
    c.add_argument("--out", help="directory for CSV tables")
    c.add_argument("--threads", type=int, default=1, help="worker processes for independent pairings")
    c.set_defaults(func=cmd_convergence)

    r = sub.add_parser("run", help="run a scenario from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory for snapshots and traces")
    r.add_argument("--format", choices=("vtk", "csv"), default=None)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("energy-audit", help="energy conservation / decay trace")
    e.add_argument("--pairing", default="all", choices=PAIRING_NAMES + ("all",))
    e.add_argument("--N", type=int, default=16)
    e.add_argument("--steps", type=int, default=200)
    e.add_argument("--dt", type=float, default=0.01)
    e.add_argument("--gamma", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_energy_audit)

    v = sub.add_parser("validate", help="check a config and its material")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
