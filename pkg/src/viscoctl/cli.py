"""Command line entry point.

Exit codes: 0 all thresholds met, 1 a threshold failed, 2 bad config or a
refused run.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from .admittance import ControlGains, error_pde_coeffs, passivity_check
from .backstepping import kernel_pde_residual, kernel_value
from .runner import (RunRefused, nominal_params, run_dual_loop, run_identify, run_oracle_check,
                     write_manifest, write_snapshots, RunReport)
from .scenario import ConfigError, Scenario, load
from .plant import CFLError


def _load(args) -> Scenario:
    sc = load(args.config) if args.config else Scenario()
    if args.seed is not None:
        sc.seed = args.seed
    return sc


def _print_report(rep: RunReport) -> None:
    print(f"[{rep.kind}] {rep.scenario}")
    for k, v in rep.values.items():
        print(f"  {k}: {v}")
    for flag in rep.flags:
        print(f"  FLAG: {flag}")
    for k, ok in rep.verdicts.items():
        print(f"  {'PASS' if ok else 'FAIL'} {k}")


def cmd_identify(args, sc):
    return run_identify(sc, args.out)


def cmd_dual_loop(args, sc):
    return run_dual_loop(sc, args.out, force=args.force)


def cmd_oracle_check(args, sc):
    return run_oracle_check(sc, args.out)


def cmd_kernel(args, sc):
    spec = sc.grid_spec()
    nom = nominal_params(sc.params(), sc.control.model_error)
    gains = ControlGains.for_material(sc.gains.lambda1, sc.gains.lambda2, nom)
    coeffs = error_pde_coeffs(nom, gains)
    c = coeffs.c if args.c is None else args.c
    delta = spec.delta if args.delta is None else args.delta
    xi = np.linspace(0.0, delta, args.n + 1)
    k = kernel_value(np.full_like(xi, delta), xi, c)
    res = kernel_pde_residual(c, delta, args.n)
    rep = RunReport("kernel", sc.name)
    rep.values = {"c": c, "delta": delta, "n": args.n, "max_residual": res.max_residual,
                  "max_relative_residual": res.max_relative,
                  "boundary_residual": res.boundary_zero, "diagonal_residual": res.diagonal}
    rep.thresholds = {"max_relative_residual": 1e-3, "diagonal_residual": 1e-10}
    rep.verdicts = {"kernel_pde": res.max_relative < 1e-3,
                    "boundary_conditions": res.boundary_zero == 0 and res.diagonal < 1e-10}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "kernel.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "k_delta_xi"])
            for a, b in zip(xi, k):
                w.writerow([repr(float(a)), repr(float(b))])
        with open(os.path.join(args.out, "kernel_residual.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["c", "delta", "n", "max_residual", "max_relative", "boundary", "diagonal"])
            w.writerow([repr(float(v)) for v in (c, delta, args.n, res.max_residual,
                                                 res.max_relative, res.boundary_zero, res.diagonal)])
        write_manifest(args.out, sc, rep)
    return rep


def cmd_passivity(args, sc):
    nom = nominal_params(sc.params(), sc.control.model_error)
    gains = ControlGains.for_material(sc.gains.lambda1, sc.gains.lambda2, nom)
    v = passivity_check(gains)
    rep = RunReport("passivity", sc.name)
    rep.values = {"lambda1": gains.lambda1, "lambda2": gains.lambda2, "a1": gains.a1,
                  "a2": gains.a2, "margin": v.margin}
    rep.flags = list(v.reasons)
    rep.verdicts = {"passive": v.passed}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_manifest(args.out, sc, rep)
    return rep


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML file (defaults when omitted)")
    common.add_argument("--out", help="output directory for CSV/SVG/manifest")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--svg", action="store_true", help="also write SVG slices of final fields")
    common.add_argument("--force", action="store_true", help="run even if passivity fails")

    parser = argparse.ArgumentParser(prog="viscoctl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("identify", parents=[common], help="online parameter identification")
    sub.add_parser("dual-loop", parents=[common], help="admittance + boundary control run")
    sub.add_parser("oracle-check", parents=[common], help="plant vs eigen-series solution")
    kp = sub.add_parser("kernel", parents=[common], help="dump k(delta, xi) and residuals")
    kp.add_argument("--c", type=float, default=None, help="override lambda*/eps*")
    kp.add_argument("--delta", type=float, default=None, help="override the domain depth")
    kp.add_argument("--n", type=int, default=256, help="grid points per axis")
    sub.add_parser("passivity", parents=[common], help="check positive realness of G(s)")
    return parser


COMMANDS = {
    "identify": cmd_identify,
    "dual-loop": cmd_dual_loop,
    "oracle-check": cmd_oracle_check,
    "kernel": cmd_kernel,
    "passivity": cmd_passivity,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _load(args)
        rep = COMMANDS[args.command](args, sc)
    except (ConfigError, RunRefused, CFLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out and rep.final_fields:
        write_snapshots(rep, args.out, svg=args.svg)
    _print_report(rep)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
