"""Command-line front end.

One subcommand per scenario plus ``validate``.  Exit codes: 0 on success,
1 on configuration errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from .scenarios import (
    SCENARIOS,
    ConfigError,
    default_config,
    run_scenario,
    validate_config,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinbang",
        description="Bang-bang spin-chain transfer benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        _common_flags(p)
    v = sub.add_parser("validate", help="validate a config file and exit")
    v.add_argument("--config", required=True, help="path to a JSON config")
    return parser


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config path (defaults are built in)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes (default 1, serial)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            validate_config(args.config)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return 1
        print("config ok")
        return 0

    try:
        if args.config:
            config = validate_config(args.config, scenario=args.command)
        else:
            config = default_config(args.command)
        if args.seed is not None:
            config["seed"] = args.seed
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1

    try:
        run = run_scenario(config, out_dir=args.out, jobs=args.jobs,
                           quiet=args.quiet)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if run.failures:
        print(f"{len(run.failures)} cell(s) failed; see {run.manifest_path}",
              file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {len(run.outputs)} output file(s) to {run.out_dir}")
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
