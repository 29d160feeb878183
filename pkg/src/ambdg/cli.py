"""Command line entry point: ``ambdg run | compare | bounds``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, InvariantError, NumericalError
from .experiment import compare_records, evaluate_bounds, run_experiment, write_outputs
from .trace import read_csv


def _targets(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad target list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ambdg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out-dir", default="out")
    run.add_argument("--seed", type=int, help="override the root seed")
    run.add_argument("--replications", type=int)

    cmp_ = sub.add_parser("compare", help="time to target error and speedups")
    cmp_.add_argument("traces", nargs="+")
    cmp_.add_argument("--targets", type=_targets, default=(0.5, 0.35, 0.2))

    bnd = sub.add_parser("bounds", help="evaluate the regret and gap bounds")
    bnd.add_argument("--config", required=True)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["root_seed"] = args.seed
    if args.replications is not None:
        changes["replications"] = args.replications
    if changes:
        cfg = cfg.with_(**changes)
    out_dir = Path(args.out_dir)
    try:
        result = run_experiment(cfg)
    except InvariantError:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "FAILED").write_text("a replication violated a simulation invariant\n")
        raise
    summary = write_outputs(result, out_dir)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    if len(args.traces) < 2:
        raise ConfigError("compare needs at least two trace files")
    named = {}
    for k, path in enumerate(args.traces):
        name = str(path) if str(path) not in named else f"{path}#{k}"
        named[name] = read_csv(path)
    print(json.dumps(compare_records(named, args.targets), indent=2))
    return 0


def _cmd_bounds(args) -> int:
    print(json.dumps(evaluate_bounds(load_config(args.config)), indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "bounds": _cmd_bounds}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvariantError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
