"""Fixtures for specmine tests."""

from __future__ import annotations

from pathlib import Path

import pytest

from specmine.contract_sim import builtin_script, run_scenario
from specmine.sessions import History, MiningResult, mine_histories
from specmine.trace_model import TraceLedger

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    """Return the directory holding static test files."""
    return FIXTURES


@pytest.fixture(scope="session")
def rps_ledger() -> TraceLedger:
    """Return the simulated rock-paper-scissors ledger."""
    scenario, script = builtin_script("rps")
    return run_scenario(scenario, script)


@pytest.fixture(scope="session")
def rps_mined(rps_ledger: TraceLedger) -> MiningResult:
    """Return the mining result for the rps ledger seeded at its creation."""
    return mine_histories(rps_ledger, "1")


@pytest.fixture(scope="session")
def rps_corpus(rps_mined: MiningResult) -> list[History]:
    """Return the four rps histories."""
    return list(rps_mined.histories)


@pytest.fixture(scope="session")
def token_ledger() -> TraceLedger:
    """Return the simulated token ledger."""
    scenario, script = builtin_script("token")
    return run_scenario(scenario, script)


@pytest.fixture(scope="session")
def token_corpus(token_ledger: TraceLedger) -> list[History]:
    """Return the two token histories."""
    return list(mine_histories(token_ledger, "1").histories)
