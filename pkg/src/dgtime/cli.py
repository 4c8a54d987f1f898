"""Command-line experiment driver.

Subcommands:
  converge      convergence sweep from a config file; writes the report CSV,
                a rates CSV, and optional plot data; asserts the order and
                two-sided-estimate properties
  maxreg        stability-ratio sweep from a config file (zero initial value)
  oracle-check  solver-path equivalence plus the exactness, collocation and
                norm-toolkit identities on randomized problems
  interp-check  reproduction property and interpolation-order fits

Exit codes: 0 all asserted properties passed, 2 a property failed,
1 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    interp_battery,
    oracle_battery,
    parse_config,
    run_convergence,
    run_maxreg_sweep,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; we reserve 2 for property
    # failures, so route usage problems through our own exception.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dgtime", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("converge", "maxreg"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run config (INI format)")
        sp.add_argument("--out", default=None, help="redirect output files into this directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--quiet", action="store_true")
    sp = sub.add_parser("oracle-check")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--quiet", action="store_true")
    sp = sub.add_parser("interp-check")
    sp.add_argument("--seed", type=int, default=5)
    sp.add_argument("--quiet", action="store_true")
    return parser


def _emit(checks, quiet: bool) -> int:
    failed = [c for c in checks if not c.passed]
    for c in checks:
        if quiet and c.passed:
            continue
        tag = "PASS" if c.passed else "FAIL"
        detail = f"  ({c.detail})" if c.detail else ""
        print(f"{tag} {c.name}{detail}")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 2 if failed else 0


def _load_config(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.output.seed = args.seed
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg.output.csv_path = str(out / Path(cfg.output.csv_path).name)
        if cfg.output.plotdata_path:
            cfg.output.plotdata_path = str(out / Path(cfg.output.plotdata_path).name)
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "converge":
            cfg = _load_config(args)
            report = run_convergence(cfg)
            if not args.quiet:
                print(f"report written to {cfg.output.csv_path}")
            return _emit(report.checks, args.quiet)
        if args.command == "maxreg":
            cfg = _load_config(args)
            _, checks = run_maxreg_sweep(cfg)
            if not args.quiet:
                print(f"report written to {cfg.output.csv_path}")
            return _emit(checks, args.quiet)
        if args.command == "oracle-check":
            return _emit(oracle_battery(seed=args.seed, trials=args.trials), args.quiet)
        if args.command == "interp-check":
            return _emit(interp_battery(seed=args.seed), args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
