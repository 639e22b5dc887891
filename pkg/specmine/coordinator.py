"""Pipeline orchestration shared by the command-line stages.

The coordinator owns a validated :class:`RunConfig` and runs the stages
simulate, mine and tune, writing their artifacts. The CLI only parses flags,
builds the configuration and maps errors to exit codes.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

from .automaton import to_dot as automaton_to_dot
from .config import RunConfig, dump_recipe, load_recipe, validate_output_dir
from .const import (
    DEFAULT_SCENARIO,
    FILE_AUTOMATON,
    FILE_COST_TRACE,
    FILE_DEPGRAPH,
    FILE_HISTORIES,
    FILE_RECIPE,
    FILE_SUMMARY,
    FILE_TRACE,
)
from .contract_sim import builtin_script, get_scenario, load_script, run_scenario
from .dependency import to_dot as graph_to_dot
from .diagnostics import mining_summary, tuning_summary
from .exceptions import ConfigError, EmptyCorpus
from .sessions import History, MiningResult, load_histories, mine_histories, write_histories
from .trace_model import TraceLedger, load_trace, write_trace
from .tuner import TraceRecord, TunerResult, TunerTrace, evaluate, tune

_LOGGER = logging.getLogger(__name__)


class PipelineCoordinator:
    """Runs the mining and tuning stages for one configuration.

    Attributes:
        config: The validated run configuration
        summary: Summary sections collected from the stages run so far
    """

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.summary: dict[str, Any] = {}

    # ---------------------------------------------------------------------------------
    # Stages
    # ---------------------------------------------------------------------------------

    def simulate(self, out: Path | None = None) -> TraceLedger:
        """Execute a built-in workload or a script file.

        The resulting ledger is anchored at its first transaction, the
        contract creation, so it can be mined without an explicit seed.
        """
        if self.config.script is not None:
            script = load_script(self.config.script)
            scenario = get_scenario(
                self.config.scenario or script.scenario or DEFAULT_SCENARIO
            )
        else:
            scenario, script = builtin_script(self.config.scenario or DEFAULT_SCENARIO)
        ledger = run_scenario(scenario, script)
        if len(ledger):
            ledger = TraceLedger(ledger.transactions, ledger.transactions[0].id)
        if out is not None:
            write_trace(ledger, out)
            _LOGGER.info("Wrote %d transactions to %s", len(ledger), out)
        return ledger

    def load_ledger(self) -> TraceLedger:
        if self.config.trace is None:
            raise ConfigError("no trace file given")
        return load_trace(self.config.trace)

    def mine(
        self,
        ledger: TraceLedger,
        out: Path | None = None,
        depgraph: Path | None = None,
    ) -> MiningResult:
        seed = self.config.seed_tx or ledger.seed_id
        if seed is None:
            raise ConfigError("no seed transaction given and the trace names none")
        result = mine_histories(ledger, seed, self.config.ordering_cap)
        if out is not None:
            write_histories(result.histories, out)
        if depgraph is not None:
            depgraph.write_text(graph_to_dot(result.filtered, result.ledger), encoding="utf-8")
        self.summary["mining"] = mining_summary(result)
        return result

    def load_corpus(self) -> list[History]:
        if self.config.histories is None:
            raise ConfigError("no histories file given")
        return load_histories(self.config.histories)

    def tune(self, corpus: list[History], out_dir: Path | None = None) -> TunerResult:
        """Search for a recipe, or replay a saved one when configured."""
        if self.config.load_recipe is not None:
            result = self._replay(corpus)
        else:
            result = tune(corpus, self.config.cost)
        self.summary["tuning"] = tuning_summary(result)
        if out_dir is not None:
            self.write_tuning(result, out_dir)
        return result

    def _replay(self, corpus: list[History]) -> TunerResult:
        if not corpus:
            raise EmptyCorpus("cannot build an automaton without histories")
        assert self.config.load_recipe is not None
        recipe = load_recipe(self.config.load_recipe)
        candidate = evaluate(corpus, recipe, self.config.cost)
        _LOGGER.info("Replayed recipe %s: cost %.3f", self.config.load_recipe, candidate.cost)
        return TunerResult(
            automaton=candidate.automaton,
            recipe=recipe,
            trace=TunerTrace((TraceRecord(0, candidate.cost, True, candidate.cost),)),
            cost=candidate.cost,
            initial_cost=candidate.cost,
            initial_states=len(candidate.automaton.states),
            initial_transitions=len(candidate.automaton.transitions),
            accepted=1,
            side_table=candidate.side_table,
        )

    def write_tuning(self, result: TunerResult, out_dir: Path) -> None:
        (out_dir / FILE_AUTOMATON).write_text(automaton_to_dot(result.automaton), encoding="utf-8")
        (out_dir / FILE_COST_TRACE).write_text(result.trace.to_csv(), encoding="utf-8")
        dump_recipe(result.recipe, self.config.dump_recipe or out_dir / FILE_RECIPE)

    def write_summary(self, out_dir: Path) -> None:
        (out_dir / FILE_SUMMARY).write_text(
            json.dumps(self.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    # ---------------------------------------------------------------------------------
    # Full pipeline
    # ---------------------------------------------------------------------------------

    def run(self) -> TunerResult:
        """Simulate (unless a trace is given), mine, tune and write every artifact."""
        if self.config.out is None:
            raise ConfigError("run needs an output directory")
        out_dir = validate_output_dir(self.config.out)
        if self.config.trace is not None:
            ledger = self.load_ledger()
        else:
            ledger = self.simulate(out_dir / FILE_TRACE)
        mined = self.mine(
            ledger,
            out_dir / FILE_HISTORIES,
            out_dir / FILE_DEPGRAPH if self.config.emit_depgraph else None,
        )
        result = self.tune(list(mined.histories), out_dir)
        self.write_summary(out_dir)
        _LOGGER.info("Pipeline finished; artifacts in %s", out_dir)
        return result
