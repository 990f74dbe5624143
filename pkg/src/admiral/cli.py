"""Command line entry point: ``admiral <command> --config FILE [--out DIR] [--seeds a,b,c]``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import sys

from . import harness
from .game import ConfigurationError

COMMANDS = ("train", "evaluate-advisor", "pipeline", "oracle", "plot")


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="admiral", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="JSON config file, or the name of a shipped preset")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seeds", type=_seeds, help="comma-separated seeds (overrides the config)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = harness.load_config(args.config, out=args.out, seeds=args.seeds)
    except ConfigurationError as exc:
        print(f"admiral: invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "train":
            for path in harness.cmd_train(cfg):
                print(path)
        elif args.command == "evaluate-advisor":
            rows = harness.cmd_evaluate_advisor(cfg)
            print("advisor,cr,rcr,mcr,epsilon0")
            for r in rows:
                print(f"{r.advisor},{r.cr:.6g},{r.rcr:.6g},{r.mcr:.6g},{r.epsilon0:.1f}")
        elif args.command == "pipeline":
            summary = harness.cmd_pipeline(cfg)
            print(f"selected {summary['advisor']} with epsilon0 = {summary['epsilon0']:.1f}")
        elif args.command == "oracle":
            result = harness.cmd_oracle(cfg)
            if "bellman_residual" in result:
                print(f"bellman residual: {result['bellman_residual']:.3e}")
            for path in result["files"]:
                print(path)
        else:
            print(harness.cmd_plot(cfg))
    except ConfigurationError as exc:
        print(f"admiral: invalid config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit code 1
        print(f"admiral: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
