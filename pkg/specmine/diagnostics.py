"""Summary tables for mining and tuning runs.

Both summaries are plain JSON-serializable dictionaries. The CLI prints them
and the run pipeline stores them in ``summary.json``.
"""

from __future__ import annotations

import math
from typing import Any

from .sessions import MiningResult
from .tuner import TunerResult


def _rounded(value: float) -> float | None:
    """JSON has no infinity; unknown costs become null."""
    return round(value, 6) if math.isfinite(value) else None


def mining_summary(result: MiningResult) -> dict[str, Any]:
    """History-mining columns: transactions, finals, histories, lengths."""
    transactions = [tx for tx in result.ledger if not tx.ghost]
    lengths = [len(history) for history in result.histories]
    return {
        "seed": result.ledger.seed_id,
        "transactions": len(transactions),
        "ghosts": len(result.ledger) - len(transactions),
        "filtered_nodes": len(result.filtered),
        "final_transactions": len(result.finals),
        "histories": len(result.histories),
        "average_history_length": round(sum(lengths) / len(lengths), 2) if lengths else 0.0,
        "truncated": result.truncated,
    }


def tuning_summary(result: TunerResult) -> dict[str, Any]:
    """Tuning columns: transitions before and after, accepted share, cost reduction."""
    steps = result.steps
    reduction = 0.0
    if math.isfinite(result.initial_cost) and result.initial_cost > 0:
        reduction = 100.0 * (result.initial_cost - result.cost) / result.initial_cost
    return {
        "steps": steps,
        "initial_states": result.initial_states,
        "initial_transitions": result.initial_transitions,
        "states": len(result.automaton.states),
        "transitions": len(result.automaton.transitions),
        "accepted_recipes_percent": round(100.0 * result.accepted / steps, 2) if steps else 0.0,
        "initial_cost": _rounded(result.initial_cost),
        "best_cost": _rounded(result.cost),
        "cost_reduction_percent": round(reduction, 2),
    }


def format_summary(title: str, summary: dict[str, Any]) -> str:
    width = max(len(key) for key in summary)
    lines = [title]
    lines.extend(f"  {key.ljust(width)}  {value}" for key, value in summary.items())
    return "\n".join(lines)
