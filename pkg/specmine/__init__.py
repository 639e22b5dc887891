"""Specification mining for smart contracts.

Traces of contract calls are cut into per-session histories using a
read/write dependency graph, then folded into a finite automaton whose
abstraction recipe is tuned by simulated annealing.
"""

from __future__ import annotations

from .coordinator import PipelineCoordinator
from .exceptions import SpecMineError
from .sessions import History, mine_histories
from .trace_model import TraceLedger, load_trace, parse_trace
from .tuner import CostConfig, tune

__version__ = "0.1.0"

__all__ = [
    "CostConfig",
    "History",
    "PipelineCoordinator",
    "SpecMineError",
    "TraceLedger",
    "load_trace",
    "mine_histories",
    "parse_trace",
    "tune",
]
