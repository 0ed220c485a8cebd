"""Command-line entry point.

    truncgauss <command> [--config PATH] [--seed U64] [--out DIR] [--dotted.key VALUE ...]

Commands: estimate, fig1, lower-bound, moment-check, recover-set,
tournament. Every command has a built-in default config, so only a seed
is required. Dotted flags override config leaves, e.g. ``--sgd.T 5000``;
values are parsed as JSON when possible.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import experiments as ex
from .errors import NumericalError, TruncGaussError, ValidationError
from .io import read_json
from .presets import fig1_config

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def default_config(command: str) -> dict:
    if command in ("estimate", "recover-set"):
        return fig1_config("A")
    if command == "fig1":
        return {"preset": "A"}
    if command == "lower-bound":
        return {}
    if command == "moment-check":
        return {
            "first": {"mean": [0.0], "covariance": [[1.0]], "set": {"kind": "AxisBox", "lo": [0.0], "hi": [1.0]}},
            "second": {"mean": [0.0], "covariance": [[1.0]], "set": {"kind": "AxisBox", "lo": [-1.0], "hi": [0.0]}},
        }
    if command == "tournament":
        return ex.default_tournament_config()
    raise ValidationError(f"unknown command {command!r}")


COMMANDS = {
    "estimate": lambda cfg, out: ex.cmd_estimate(cfg, out=out),
    "fig1": lambda cfg, out: ex.cmd_fig1(cfg, out=out),
    "lower-bound": lambda cfg, out: ex.cmd_lower_bound(cfg, out=out),
    "moment-check": lambda cfg, out: ex.cmd_moment_check(cfg, out=out),
    "recover-set": lambda cfg, out: ex.cmd_recover_set(cfg, out=out),
    "tournament": lambda cfg, out: ex.cmd_tournament(cfg, out=out),
}


def _parse_overrides(extra: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        key = extra[i]
        if not key.startswith("--") or len(key) <= 2:
            raise ValidationError(f"unexpected argument {key!r}")
        key = key[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ValidationError(f"missing value for --{key}")
            value = extra[i + 1]
            i += 2
        out[key] = ex.parse_value(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truncgauss", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file; defaults to the built-in config")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = read_json(args.config) if args.config else default_config(args.command)
        cfg = ex.apply_overrides(cfg, _parse_overrides(extra))
        if args.seed is not None:
            cfg["seed"] = args.seed
        result = COMMANDS[args.command](cfg, args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TruncGaussError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.out is None:
        obj = result.to_json() if hasattr(result, "to_json") else result
        print(json.dumps(obj, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
