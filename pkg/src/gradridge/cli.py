"""Command-line front end.

Four subcommands, one JSON config each:

    gradridge curve    --config cfg.json [--out DIR] [--seed N] [--threads N]
    gradridge audit    --config cfg.json ...
    gradridge spectrum --config cfg.json ...
    gradridge sobol    --config cfg.json ...

Exit codes: 0 success, 2 configuration problems, 3 numerical failures.
``--threads`` changes wall time only; outputs are byte-identical for any
worker count.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, GradRidgeError, NonDiagonalCovariance
from .experiments import (
    resolve_config,
    run_error_curve,
    run_projector_audit,
    run_sobol,
    run_spectrum,
)

_RUNNERS = {
    "curve": run_error_curve,
    "audit": run_projector_audit,
    "spectrum": run_spectrum,
    "sobol": run_sobol,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gradridge",
        description="Gradient-based ridge approximation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("curve", "error bounds and validated ridge errors per rank"),
        ("audit", "projector quality across gradient sample budgets"),
        ("spectrum", "eigenvalue tables and leading mode exports"),
        ("sobol", "Sobol' indices with derivative-based bounds"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", default=".", help="output directory (default: cwd)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads; affects speed, never results")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = resolve_config(raw, seed_override=args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON ({exc})", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        path = _RUNNERS[args.command](cfg, args.out, threads=args.threads)
    except NonDiagonalCovariance as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GradRidgeError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
