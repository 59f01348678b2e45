"""Command-line entry points: sweep, weights, validate."""

from __future__ import annotations

import argparse
import sys

from .bench import ConfigError, cmd_sweep, cmd_validate, cmd_weights


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pauliprop",
        description="Truncated Pauli back-propagation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a (depth, k) sweep from a JSON config")
    sweep.add_argument("config", help="path to the experiment config")
    sweep.add_argument("--out", default=None, help="output directory override")
    sweep.add_argument("--threads", type=int, default=1, help="worker pool size")

    weights = sub.add_parser("weights", help="weight histogram of the back-propagated observable")
    weights.add_argument("config", help="path to the experiment config")
    weights.add_argument("--out", default=None, help="output directory override")

    validate = sub.add_parser("validate", help="run the oracle cross-check suite")
    validate.add_argument("--n", type=int, required=True, help="qubit count (<= 14)")
    validate.add_argument("--trials", type=int, required=True, help="circuits per check")
    validate.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            csv_path, json_path, code = cmd_sweep(args.config, args.out, args.threads)
            print(f"wrote {csv_path} and {json_path}")
            return code
        if args.command == "weights":
            csv_path, json_path, code = cmd_weights(args.config, args.out)
            print(f"wrote {csv_path} and {json_path}")
            return code
        return cmd_validate(args.n, args.trials, args.seed)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
