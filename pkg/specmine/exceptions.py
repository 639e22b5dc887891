"""Errors raised by the specmine toolkit."""

from __future__ import annotations


class SpecMineError(Exception):
    """Base class for all specmine errors."""


# -------------------------------------------------------------------------------------
# Trace model
# -------------------------------------------------------------------------------------


class TraceError(SpecMineError):
    """Error raised while reading or transforming a trace."""


class MalformedRecord(TraceError):
    """A trace record violates the wire format or a record invariant."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DuplicateTransactionId(TraceError):
    """Two transactions in one ledger share an id."""


class NonMonotonicBlockNumber(TraceError):
    """Block numbers decrease along the ledger."""


class AlreadyGhosted(TraceError):
    """Ghost transactions were inserted twice."""


class UnknownSeed(TraceError):
    """The seed transaction is not part of the ledger."""


# -------------------------------------------------------------------------------------
# Contract simulation
# -------------------------------------------------------------------------------------


class SimulationError(SpecMineError):
    """Error raised while executing a script."""


class UnknownSignature(SimulationError):
    """A script step names a function the scenario does not define."""


class InvalidInputs(SimulationError):
    """A script step passes the wrong number or types of inputs."""


class UnknownScenario(SimulationError):
    """No scenario is registered under the given name."""


# -------------------------------------------------------------------------------------
# Dependency graph and sessions
# -------------------------------------------------------------------------------------


class GraphError(SpecMineError):
    """Error raised by dependency-graph operations."""


class UnknownNode(GraphError):
    """A transaction id is not a node of the graph."""


class CycleDetected(GraphError):
    """Ordering constraints contain a cycle."""


class UnknownTransaction(GraphError):
    """A session member has no transaction in the ledger."""


# -------------------------------------------------------------------------------------
# Automaton and tuning
# -------------------------------------------------------------------------------------


class AutomatonError(SpecMineError):
    """Error raised by automaton operations."""


class UnknownState(AutomatonError):
    """A state id is not part of the automaton."""


class UnknownVariable(AutomatonError):
    """A variable named by a move does not occur in the automaton."""


class InvalidMove(AutomatonError):
    """A move carries invalid parameters."""


class TuningError(SpecMineError):
    """Error raised by the tuner."""


class EmptyCorpus(TuningError):
    """The tuner was given no histories."""


class ConfigError(SpecMineError):
    """Configuration values are missing or out of range."""
