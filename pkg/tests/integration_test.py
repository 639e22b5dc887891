#!/usr/bin/env python3
"""End-to-end run of the full pipeline on the built-in workloads.

This script simulates each scenario, mines its histories, tunes an automaton
and checks the artifacts written to a temporary directory.

Usage:
    uv run python tests/integration_test.py

Optional environment:
    SPECMINE_BOUND=<recipes to evaluate> (defaults to 2000)
    SPECMINE_RNG_SEED=<seed> (defaults to 42)
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
import json
import os
from pathlib import Path
import sys
import tempfile
import time

from specmine.automaton import accepts
from specmine.config import build_run_config, load_recipe
from specmine.const import (
    FILE_AUTOMATON,
    FILE_COST_TRACE,
    FILE_DEPGRAPH,
    FILE_HISTORIES,
    FILE_RECIPE,
    FILE_SUMMARY,
    FILE_TRACE,
)
from specmine.coordinator import PipelineCoordinator
from specmine.exceptions import SpecMineError
from specmine.sessions import load_histories
from specmine.trace_model import load_trace

# scenario -> (transactions, histories)
EXPECTED = {"rps": (16, 4), "token": (7, 2)}


@dataclass
class IntegrationCheckResult:
    """Outcome of one named pipeline check."""

    name: str
    passed: bool
    message: str
    duration_ms: float = 0


class IntegrationChecker:
    """Runs the pipeline per scenario and records what held."""

    def __init__(self, bound: int, rng_seed: int) -> None:
        self.bound = bound
        self.rng_seed = rng_seed
        self.results: list[IntegrationCheckResult] = []
        self.start_time: datetime | None = None

    def log(self, emoji: str, message: str) -> None:
        print(f"{emoji} {message}")

    def add_result(self, name: str, passed: bool, message: str, duration_ms: float = 0) -> None:
        self.results.append(IntegrationCheckResult(name, passed, message, duration_ms))
        status = "✅ PASS" if passed else "❌ FAIL"
        duration = f" ({duration_ms:.0f}ms)" if duration_ms > 0 else ""
        self.log("  ", f"{status}: {name}{duration}")
        if not passed:
            self.log("  ", f"       {message}")

    def _run(self, scenario: str, out: Path) -> PipelineCoordinator | None:
        config = build_run_config(
            {
                "scenario": scenario,
                "out": str(out),
                "bound": self.bound,
                "rng_seed": self.rng_seed,
                "emit_depgraph": True,
            }
        )
        coordinator = PipelineCoordinator(config)
        start = time.perf_counter()
        try:
            coordinator.run()
        except SpecMineError as err:
            self.add_result(f"{scenario}.Pipeline", False, f"Pipeline failed: {err}")
            return None
        duration = (time.perf_counter() - start) * 1000
        self.add_result(f"{scenario}.Pipeline", True, "Pipeline finished", duration)
        return coordinator

    def check_scenario(self, scenario: str, workdir: Path) -> bool:
        """Run one scenario and inspect its artifacts."""
        self.log("⛓️", f"Checking scenario {scenario}...")
        out = workdir / scenario
        coordinator = self._run(scenario, out)
        if coordinator is None:
            return False

        files = (
            FILE_TRACE,
            FILE_HISTORIES,
            FILE_AUTOMATON,
            FILE_RECIPE,
            FILE_COST_TRACE,
            FILE_SUMMARY,
            FILE_DEPGRAPH,
        )
        missing = [name for name in files if not (out / name).is_file()]
        self.add_result(f"{scenario}.Artifacts", not missing, f"Missing: {missing}")
        if missing:
            return False

        transactions, history_count = EXPECTED[scenario]
        ledger = load_trace(out / FILE_TRACE)
        corpus = load_histories(out / FILE_HISTORIES)
        recipe = load_recipe(out / FILE_RECIPE)
        summary = json.loads((out / FILE_SUMMARY).read_text(encoding="utf-8"))
        tuning = summary["tuning"]
        result = coordinator.tune(corpus)

        checks = [
            ("Transactions", len(ledger), len(ledger) == transactions),
            ("Histories", len(corpus), len(corpus) == history_count),
            (
                "CostReduction",
                f"{tuning['cost_reduction_percent']}%",
                tuning["cost_reduction_percent"] >= 0,
            ),
            ("Steps", tuning["steps"], tuning["steps"] == self.bound),
            ("RecipeReplays", recipe == result.recipe, recipe == result.recipe),
            (
                "AcceptsHistories",
                len(corpus),
                all(accepts(result.automaton, history, recipe) for history in corpus),
            ),
        ]
        all_passed = True
        for name, value, passed in checks:
            self.add_result(f"{scenario}.{name}", passed, f"Value: {value}")
            all_passed &= passed

        self.log(
            "  ",
            f"       Transitions: {tuning['initial_transitions']} -> {tuning['transitions']}",
        )
        return all_passed

    def print_summary(self) -> None:
        total = len(self.results)
        passed = sum(1 for r in self.results if r.passed)
        failed = total - passed

        print("\n" + "=" * 60)
        print("📊 INTEGRATION CHECK SUMMARY")
        print("=" * 60)
        print(f"   Bound: {self.bound}, seed: {self.rng_seed}")
        print(f"   Total Checks: {total}")
        print(f"   ✅ Passed: {passed}")
        print(f"   ❌ Failed: {failed}")
        if total:
            print(f"   Success Rate: {passed / total * 100:.1f}%")
        print("=" * 60)

        if failed > 0:
            print("\n❌ Failed Checks:")
            for r in self.results:
                if not r.passed:
                    print(f"   - {r.name}: {r.message}")

        print()

    def run_all_checks(self) -> bool:
        self.start_time = datetime.now()

        print("=" * 60)
        print("⛏️  SPECMINE PIPELINE CHECK")
        print("=" * 60)
        print(f"   Started: {self.start_time.strftime('%Y-%m-%d %H:%M:%S')}")
        print("=" * 60)
        print()

        with tempfile.TemporaryDirectory() as workdir:
            for scenario in EXPECTED:
                self.check_scenario(scenario, Path(workdir))

        self.print_summary()
        return all(r.passed for r in self.results)


def main() -> int:
    bound = int(os.environ.get("SPECMINE_BOUND", "2000"))
    rng_seed = int(os.environ.get("SPECMINE_RNG_SEED", "42"))
    checker = IntegrationChecker(bound, rng_seed)
    return 0 if checker.run_all_checks() else 1


if __name__ == "__main__":
    sys.exit(main())
