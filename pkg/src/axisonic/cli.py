"""Command line entry point.

    axisonic <subcommand> --config <path> [--out <dir>] [--eps <val>] [--seed <u64>]

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 certificate failure.
"""
from __future__ import annotations

import argparse
import sys
import time

from . import pipeline
from .config import load_config
from .errors import CertificateError, ConfigError, ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_CERTIFICATE = 0, 2, 3, 4
SUBCOMMANDS = ("background", "basis", "linear", "solve", "sweep", "verify")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="axisonic",
                                     description="Axisymmetric transonic flow solver suite.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    helps = {
        "background": "solve the 1D background flow and certify the multiplier",
        "basis": "build the radial eigenbasis",
        "linear": "manufactured and extended linear solves",
        "solve": "nonlinear fixed point, sonic front and reports",
        "sweep": "eps-scaling study",
        "verify": "run the invariant suites and print a pass/fail table",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="key=value configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
        p.add_argument("--eps", type=float, default=None, help="perturbation amplitude (overrides fixed_point.eps)")
        p.add_argument("--seed", type=_u64, default=0, help="seed for the random verification suites")
    return parser


def _dispatch(args) -> int:
    cfg = load_config(args.config)
    start = time.perf_counter()
    if args.command == "background":
        rep = pipeline.run_background(cfg, args.out)
        print(f"background: M={rep['M']} case={rep['classification']['case']} "
              f"mass residual {rep['max_mass_residual']:.2e}")
    elif args.command == "basis":
        rep = pipeline.run_basis(cfg, args.out)
        print(f"basis: N={rep['N']} Q={rep['Q']} gram deviation {rep['gram_deviation']:.2e}")
    elif args.command == "linear":
        rep = pipeline.run_linear(cfg, args.out)
        print(f"linear: manufactured L2r error {rep['manufactured']['l2r_error']:.3e}, "
              f"extended gap {rep['extended']['l2r_gap_on_D']:.3e}")
    elif args.command == "solve":
        rep, _ = pipeline.run_solve(cfg, args.out, args.eps)
        fp = rep["fixed_point"]
        print(f"solve: eps={fp['eps']:g} iterations={fp['iterations']} max ratio {fp['max_ratio']:.2e} "
              f"front C1 {rep['sonic_front']['c1_norm']:.3e}")
    elif args.command == "sweep":
        study = pipeline.run_sweep(cfg, args.out)
        for row in study["rows"]:
            print(f"eps={row['eps']:<10g} H2={row['h2']:.4e} C1={row['c1_norm']:.4e} its={row['iterations']}")
        print(f"slope H2 {study['slope_h2']:.4f}  slope C1 {study['slope_c1']:.4f}")
    else:
        results = pipeline.run_verify(cfg, args.out, args.seed)
        for r in results:
            print(r.line())
        if not all(r.passed for r in results):
            print(f"done in {time.perf_counter() - start:.2f} s")
            return EXIT_CERTIFICATE
    print(f"done in {time.perf_counter() - start:.2f} s")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except CertificateError as exc:
        print(f"certificate failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE


if __name__ == "__main__":
    sys.exit(main())
