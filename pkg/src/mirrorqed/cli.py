"""Command-line entry point.

    mirrorqed simulate --config run.json [--out out.csv]
    mirrorqed figure fig4a --outdir results/
    mirrorqed sweep --config run.json --axis gamma0_t --values 0.0628,0.628 [--out sweep.csv]
    mirrorqed compare --a a.json --b b.json --metric linf

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error. Failures print one JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analytic import SeriesBreakdownError
from .dde import NumericalError
from .scenarios import (
    FIGURES,
    ConfigError,
    compare_trajectories,
    parse_config,
    run_config,
    run_sweep,
    write_figure,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class IOFailure(Exception):
    pass


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc


def _emit(traj, dest: str | None) -> None:
    if dest is None:
        traj.write_csv(sys.stdout)
        return
    try:
        traj.write_csv(dest)
    except OSError as exc:
        raise IOFailure(f"{dest}: {exc.strerror or exc}") from exc


def cmd_simulate(args) -> int:
    cfg = parse_config(_load(args.config))
    traj = run_config(cfg)
    _emit(traj, args.out or cfg.output.path)
    return EXIT_OK


def cmd_figure(args) -> int:
    if args.name not in FIGURES:
        raise ConfigError(f"unknown figure {args.name!r}; valid: {', '.join(FIGURES)}")
    try:
        paths = write_figure(args.name, args.outdir)
    except OSError as exc:
        raise IOFailure(f"{args.outdir}: {exc.strerror or exc}") from exc
    for p in paths:
        print(p)
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    if text.strip() == "":
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated numbers, got {text!r}") from exc


def cmd_sweep(args) -> int:
    doc = _load(args.config)
    traj = run_sweep(doc, args.axis, _parse_values(args.values))
    _emit(traj, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    a = run_config(parse_config(_load(args.a)))
    b = run_config(parse_config(_load(args.b)))
    value = compare_trajectories(a, b, args.metric, args.column)
    print(json.dumps({"metric": args.metric, "column": args.column, "value": value}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirrorqed", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration and write its trajectory CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figure", help="write every curve of a figure scenario")
    p.add_argument("name", help=f"one of {', '.join(FIGURES)}")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("sweep", help="summary statistics over one spec parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="distance between two runs on a shared grid")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=("linf", "l2"), default="linf")
    p.add_argument("--column", default="e_norm")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except (NumericalError, SeriesBreakdownError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", str(exc))
    except IOFailure as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))


if __name__ == "__main__":
    sys.exit(main())
