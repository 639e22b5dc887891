"""Command-line entry point: ``specmine simulate|mine|tune|run``."""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
import logging
from pathlib import Path
import sys
from typing import Any

from .config import (
    build_run_config,
    load_config_file,
    validate_output_dir,
    validate_output_file,
)
from .const import (
    CONF_BOUND,
    CONF_DUMP_RECIPE,
    CONF_EMIT_DEPGRAPH,
    CONF_HISTORIES,
    CONF_K_EVAL,
    CONF_LOAD_RECIPE,
    CONF_MAX_MOVES,
    CONF_ORDERING_CAP,
    CONF_OUT,
    CONF_PRESET,
    CONF_RNG_SEED,
    CONF_SCENARIO,
    CONF_SCRIPT,
    CONF_SEED_TX,
    CONF_TIMEOUT,
    CONF_TRACE,
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    FILE_DEPGRAPH,
    PRESETS,
)
from .coordinator import PipelineCoordinator
from .diagnostics import format_summary
from .exceptions import ConfigError, SpecMineError
from .trace_model import serialize_trace

_LOGGER = logging.getLogger(__name__)

_FLAG_KEYS = (
    CONF_TRACE,
    CONF_SCENARIO,
    CONF_SCRIPT,
    CONF_HISTORIES,
    CONF_SEED_TX,
    CONF_ORDERING_CAP,
    CONF_PRESET,
    CONF_BOUND,
    CONF_RNG_SEED,
    CONF_TIMEOUT,
    CONF_MAX_MOVES,
    CONF_K_EVAL,
    CONF_DUMP_RECIPE,
    CONF_LOAD_RECIPE,
    CONF_OUT,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file; flags override it")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def _add_simulation(parser: argparse.ArgumentParser) -> None:
    # no argparse choices: unknown scenarios go through the error hierarchy
    parser.add_argument("--scenario", help="built-in workload (rps, rps2, token)")
    parser.add_argument("--script", type=Path, help="line-delimited script of steps")


def _add_mining(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trace", type=Path, help="line-delimited trace file")
    parser.add_argument("--seed-tx", help="id of the seed transaction")
    parser.add_argument("--ordering-cap", type=int, help="orderings kept per final transaction")
    parser.add_argument(
        "--emit-depgraph",
        action="store_const",
        const=True,
        help="also write the filtered dependency graph as DOT",
    )


def _add_tuning(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS))
    parser.add_argument("--bound", type=int, help="number of recipes to evaluate")
    parser.add_argument("--rng-seed", type=int)
    parser.add_argument("--timeout", type=float, help="wall-clock limit in seconds, 0 for none")
    parser.add_argument("--max-moves", type=int, help="maximum moves in a recipe")
    parser.add_argument("--k-eval", type=int, help="word length bound for the cost")
    parser.add_argument("--dump-recipe", type=Path, help="where to write the best recipe")
    parser.add_argument("--load-recipe", type=Path, help="apply this recipe instead of searching")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specmine",
        description="Mine call histories from contract traces and tune an automaton over them.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="execute a workload into a trace")
    _add_common(simulate)
    _add_simulation(simulate)
    simulate.add_argument("--out", type=Path, help="trace file; stdout when omitted")

    mine = commands.add_parser("mine", help="extract histories from a trace")
    _add_common(mine)
    _add_mining(mine)
    mine.add_argument("--out", type=Path, help="histories file")

    tune = commands.add_parser("tune", help="search for a recipe over mined histories")
    _add_common(tune)
    tune.add_argument("--histories", type=Path, help="histories file")
    _add_tuning(tune)
    tune.add_argument("--out", type=Path, help="output directory")

    run = commands.add_parser("run", help="simulate or load, mine and tune")
    _add_common(run)
    _add_simulation(run)
    _add_mining(run)
    _add_tuning(run)
    run.add_argument("--out", type=Path, help="output directory")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _coordinator(args: argparse.Namespace) -> PipelineCoordinator:
    file_values: dict[str, Any] = {}
    if args.config is not None:
        file_values = load_config_file(args.config)
    flags = {key: getattr(args, key, None) for key in _FLAG_KEYS}
    flags[CONF_EMIT_DEPGRAPH] = getattr(args, CONF_EMIT_DEPGRAPH, None)
    return PipelineCoordinator(build_run_config(file_values, flags))


# -------------------------------------------------------------------------------------
# Subcommands
# -------------------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    coordinator = _coordinator(args)
    out = coordinator.config.out
    if out is None:
        sys.stdout.write(serialize_trace(coordinator.simulate()))
        return EXIT_OK
    ledger = coordinator.simulate(validate_output_file(out))
    print(f"wrote {len(ledger)} transactions to {out}")
    return EXIT_OK


def cmd_mine(args: argparse.Namespace) -> int:
    coordinator = _coordinator(args)
    out = coordinator.config.out
    if out is None:
        raise ConfigError("mine needs --out for the histories file")
    out = validate_output_file(out)
    depgraph = out.parent / FILE_DEPGRAPH if coordinator.config.emit_depgraph else None
    coordinator.mine(coordinator.load_ledger(), out, depgraph)
    print(format_summary("History mining", coordinator.summary["mining"]))
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    coordinator = _coordinator(args)
    if coordinator.config.out is None:
        raise ConfigError("tune needs --out for the output directory")
    out_dir = validate_output_dir(coordinator.config.out)
    coordinator.tune(coordinator.load_corpus(), out_dir)
    coordinator.write_summary(out_dir)
    print(format_summary("Automaton tuning", coordinator.summary["tuning"]))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    coordinator = _coordinator(args)
    coordinator.run()
    print(format_summary("History mining", coordinator.summary["mining"]))
    print(format_summary("Automaton tuning", coordinator.summary["tuning"]))
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "mine": cmd_mine,
    "tune": cmd_tune,
    "run": cmd_run,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except SpecMineError as err:
        print(f"specmine: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        _LOGGER.exception("Unexpected failure in %s", args.command)
        return EXIT_FAILURE
