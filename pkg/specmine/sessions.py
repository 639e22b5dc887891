"""Sessions, their admissible orderings, and the event histories they yield."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from itertools import islice
import json
import logging
from pathlib import Path

import networkx as nx

from .const import DEFAULT_ORDERING_CAP
from .dependency import DependencyGraph, build_graph, filter_graph
from .exceptions import CycleDetected, MalformedRecord, UnknownTransaction
from .trace_model import (
    EventRecord,
    TraceLedger,
    TraceSource,
    event_to_dict,
    events_from_list,
    insert_ghosts,
    iter_lines,
    slice_from_seed,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Session:
    """One admissible ordering of the transactions leading to a final one."""

    final: str
    members: tuple[str, ...]
    index: int = 0


@dataclass(frozen=True, slots=True)
class SessionSet:
    """All orderings emitted for one final transaction."""

    final: str
    sessions: tuple[Session, ...]
    truncated: bool = False

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def __len__(self) -> int:
        return len(self.sessions)


@dataclass(frozen=True, slots=True)
class History:
    """Concrete events of one session; equality ignores where it came from."""

    events: tuple[EventRecord, ...]
    origin: tuple[str, int] | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.events)


def final_transactions(graph: DependencyGraph) -> tuple[str, ...]:
    """Strong sinks of the graph, in blockchain order."""
    strong = graph.strong_graph
    return tuple(node for node in graph.order if strong.out_degree(node) == 0)


def _orderings(
    members: Sequence[str], successors: dict[str, set[str]]
) -> Iterator[tuple[str, ...]]:
    """Topological orderings, lexicographic in the given member order.

    Backtracking keeps one frame per placed member on an explicit stack: the
    members that were ready at that depth and the next one to try.
    """
    indegree = dict.fromkeys(members, 0)
    for targets in successors.values():
        for target in targets:
            indegree[target] += 1
    placed: list[str] = []
    remaining = set(members)

    def ready() -> list[str]:
        nodes = [node for node in members if node in remaining and indegree[node] == 0]
        if not nodes:
            raise CycleDetected(f"ordering constraints among {sorted(remaining)} are cyclic")
        return nodes

    def place(node: str) -> None:
        remaining.discard(node)
        placed.append(node)
        for target in successors[node]:
            indegree[target] -= 1

    def unplace() -> None:
        node = placed.pop()
        remaining.add(node)
        for target in successors[node]:
            indegree[target] += 1

    if not remaining:
        yield ()
        return
    stack: list[tuple[list[str], int]] = [(ready(), 0)]
    while stack:
        nodes, index = stack.pop()
        if len(placed) > len(stack):
            # undo the choice this frame made last time
            unplace()
        if index == len(nodes):
            continue
        stack.append((nodes, index + 1))
        place(nodes[index])
        if remaining:
            stack.append((ready(), 0))
        else:
            yield tuple(placed)
            for target in successors[node]:
                indegree[target] += 1
            placed.pop()
            remaining.add(node)

    yield from extend()


def sessions_for(
    graph: DependencyGraph, final: str, cap: int = DEFAULT_ORDERING_CAP
) -> SessionSet:
    """Enumerate up to ``cap`` orderings of the final's strong ancestors."""
    graph.check_node(final)
    member_set = nx.ancestors(graph.strong_graph, final) | {final}
    members = sorted(member_set, key=graph.position)
    # paths through non-members still constrain the order
    successors = {
        node: nx.descendants(graph.nx_graph, node) & member_set for node in members
    }
    found = list(islice(_orderings(members, successors), cap + 1))
    truncated = len(found) > cap
    if truncated:
        _LOGGER.warning(
            "Orderings for final transaction %s truncated at %d", final, cap
        )
    return SessionSet(
        final,
        tuple(
            Session(final, ordering, index)
            for index, ordering in enumerate(found[:cap])
        ),
        truncated,
    )


def histories(ledger: TraceLedger, sessions: Iterable[Session]) -> list[History]:
    """Concatenate member events per session, dropping duplicate histories."""
    result: list[History] = []
    seen: set[tuple[EventRecord, ...]] = set()
    for session in sessions:
        events: list[EventRecord] = []
        for member in session.members:
            tx = ledger.get(member)
            if tx is None:
                raise UnknownTransaction(f"session member {member!r} not in ledger")
            events.extend(tx.events)
        key = tuple(events)
        if key in seen:
            continue
        seen.add(key)
        result.append(History(key, (session.final, session.index)))
    return result


@dataclass(frozen=True, slots=True)
class MiningResult:
    """Everything the mining stage produces, for summaries and exports."""

    ledger: TraceLedger
    graph: DependencyGraph
    filtered: DependencyGraph
    finals: tuple[str, ...]
    session_sets: tuple[SessionSet, ...]
    histories: tuple[History, ...]

    @property
    def truncated(self) -> bool:
        return any(session_set.truncated for session_set in self.session_sets)


def mine_histories(
    ledger: TraceLedger, seed_id: str, cap: int = DEFAULT_ORDERING_CAP
) -> MiningResult:
    """Ghost, slice, build, filter, and decompose into histories."""
    ghosted = ledger if ledger.ghosted else insert_ghosts(ledger)
    sliced = slice_from_seed(ghosted, seed_id)
    graph = build_graph(sliced)
    filtered = filter_graph(graph, seed_id)
    finals = final_transactions(filtered)
    session_sets = tuple(sessions_for(filtered, final, cap) for final in finals)
    mined = histories(
        sliced,
        (session for session_set in session_sets for session in session_set),
    )
    _LOGGER.info(
        "Mined %d histories from %d final transactions (seed %s)",
        len(mined),
        len(finals),
        seed_id,
    )
    return MiningResult(
        sliced, graph, filtered, finals, session_sets, tuple(mined)
    )


# -------------------------------------------------------------------------------------
# Hand-off format
# -------------------------------------------------------------------------------------


def serialize_histories(corpus: Iterable[History]) -> str:
    return "".join(
        json.dumps([event_to_dict(event) for event in history.events]) + "\n"
        for history in corpus
    )


def parse_histories(source: TraceSource) -> list[History]:
    """Read one JSON list of events per line."""
    corpus: list[History] = []
    for line_number, text in iter_lines(source):
        if not text.strip():
            continue
        try:
            events = events_from_list(json.loads(text))
        except json.JSONDecodeError as err:
            raise MalformedRecord(f"invalid JSON: {err.msg}", line_number) from err
        except MalformedRecord as err:
            raise MalformedRecord(str(err), line_number) from err
        corpus.append(History(events))
    return corpus


def load_histories(path: Path) -> list[History]:
    with path.open(encoding="utf-8") as handle:
        return parse_histories(handle)


def write_histories(corpus: Iterable[History], path: Path) -> None:
    path.write_text(serialize_histories(corpus), encoding="utf-8")
