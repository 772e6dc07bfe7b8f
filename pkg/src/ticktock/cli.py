"""Command-line entry point: ``run``, ``reproduce``, ``sweep`` and ``check``."""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys

from . import __version__
from .checks import run_checks
from .scenarios import (
    DISCREPANCY_LIMIT,
    ConfigError,
    emit,
    expand_grid,
    parse_scenario,
    reproduce_figure,
    run_scenario,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DISCREPANCY = 2
EXIT_IO = 3


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="override the scenario field")
    p.add_argument("--q", type=float, help="override the survival probability")
    p.add_argument("--steps", type=int, help="override the number of steps")
    p.add_argument("--prune-epsilon", dest="prune_epsilon", type=float, default=None,
                   help="drop amplitudes below this magnitude (default off)")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", help="destination file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ticktock", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario document")
    run.add_argument("config", nargs="?", help="JSON scenario file, '-' for stdin")
    _add_overrides(run)
    _add_output(run)

    rep = sub.add_parser("reproduce", help="emit the data behind a figure")
    rep.add_argument("figure", choices=("fig1", "fig2", "fig3"))
    _add_output(rep)

    sweep = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    sweep.add_argument("config", help="JSON scenario file with a \"grid\" object")
    _add_overrides(sweep)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.add_argument("--output", help="directory for one file per grid point")
    sweep.add_argument("--workers", type=int, default=None)

    sub.add_parser("check", help="run the oracle-equivalence and invariant suite")
    return parser


def _read(path: str | None) -> str:
    if path is None:
        return "{}"
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _overrides(args) -> dict:
    return {"scenario": args.scenario, "q": args.q, "steps": args.steps,
            "prune_epsilon": args.prune_epsilon}


def _discrepancy_code(outputs) -> int:
    bad = [o for o in outputs if (o.max_discrepancy or 0.0) > DISCREPANCY_LIMIT]
    for o in bad:
        print(f"discrepancy {o.max_discrepancy:.3e} exceeds {DISCREPANCY_LIMIT:.0e}", file=sys.stderr)
    return EXIT_DISCREPANCY if bad else EXIT_OK


def _cmd_run(args) -> int:
    cfg = parse_scenario(_read(args.config), _overrides(args))
    out = run_scenario(cfg)
    emit(out, args.format, args.output)
    return _discrepancy_code([out])


def _cmd_reproduce(args) -> int:
    out = reproduce_figure(args.figure)
    emit(out, args.format, args.output)
    return _discrepancy_code([out])


def _cmd_sweep(args) -> int:
    configs = expand_grid(_read(args.config), _overrides(args))
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
        outputs = list(pool.map(run_scenario, configs))
    if args.output:
        os.makedirs(args.output, exist_ok=True)
    for i, (cfg, out) in enumerate(zip(configs, outputs)):
        if args.output:
            emit(out, args.format, os.path.join(args.output, f"{cfg.scenario}_{i:03d}.{args.format}"))
        else:
            disc = out.max_discrepancy
            shown = "-" if disc is None else f"{disc:.3e}"
            print(f"{i:03d} {cfg.scenario} q={cfg.q:.12g} steps={cfg.steps} max_discrepancy={shown}")
    return _discrepancy_code(outputs)


def _cmd_check(args) -> int:
    results = run_checks()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_DISCREPANCY


_COMMANDS = {"run": _cmd_run, "reproduce": _cmd_reproduce, "sweep": _cmd_sweep, "check": _cmd_check}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
