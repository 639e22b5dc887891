"""Read/write effects, the strong/weak dependency graph and seed filtering."""

from __future__ import annotations

from collections import defaultdict, deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from enum import StrEnum
import logging

import graphviz
import networkx as nx

from .exceptions import UnknownNode
from .trace_model import (
    AccessMode,
    Location,
    LocationKind,
    TraceLedger,
    TransactionRecord,
)

_LOGGER = logging.getLogger(__name__)


class EdgeKind(StrEnum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True, slots=True)
class EffectSets:
    """Locations a transaction reads before writing, and locations it writes."""

    reads: frozenset[Location]
    writes: frozenset[Location]


@dataclass(frozen=True, slots=True)
class Edge:
    """A dependency between two transactions, with one location witnessing it."""

    source: str
    target: str
    kind: EdgeKind
    witness: Location | None = None


def effects(tx: TransactionRecord) -> EffectSets:
    """Compute r(T) and w(T); balances are ignored, reverted writes dropped."""
    reads: set[Location] = set()
    writes: set[Location] = set()
    seen: set[Location] = set()
    for access in tx.accesses:
        location = access.location
        if location.kind is LocationKind.BALANCE:
            continue
        if access.mode is AccessMode.READ:
            if location not in seen:
                reads.add(location)
        else:
            writes.add(location)
        seen.add(location)
    if tx.reverted:
        writes.clear()
    return EffectSets(frozenset(reads), frozenset(writes))


class DependencyGraph:
    """Transactions in blockchain order linked by strong and weak edges.

    The graph is immutable once built. Node attributes carry the blockchain
    position; edge attributes carry the edge kind and its witness location.
    """

    def __init__(self, order: Iterable[str], edges: Iterable[Edge] = ()) -> None:
        graph = nx.DiGraph()
        self._order = tuple(order)
        for position, node in enumerate(self._order):
            graph.add_node(node, position=position)
        for edge in edges:
            if edge.source not in graph or edge.target not in graph:
                raise UnknownNode(f"edge {edge.source}->{edge.target} leaves the graph")
            if graph.nodes[edge.source]["position"] >= graph.nodes[edge.target]["position"]:
                raise ValueError(f"edge {edge.source}->{edge.target} goes backwards")
            existing = graph.get_edge_data(edge.source, edge.target)
            if existing is not None and existing["kind"] is EdgeKind.STRONG:
                continue
            graph.add_edge(edge.source, edge.target, kind=edge.kind, witness=edge.witness)
        self._graph = nx.freeze(graph)
        self._strong = nx.subgraph_view(
            self._graph,
            filter_edge=lambda u, v: self._graph[u][v]["kind"] is EdgeKind.STRONG,
        )

    @property
    def order(self) -> tuple[str, ...]:
        return self._order

    @property
    def nx_graph(self) -> nx.DiGraph:
        return self._graph

    @property
    def strong_graph(self) -> nx.DiGraph:
        return self._strong

    def __contains__(self, node: object) -> bool:
        return node in self._graph

    def __len__(self) -> int:
        return len(self._order)

    def position(self, node: str) -> int:
        self.check_node(node)
        return int(self._graph.nodes[node]["position"])

    def check_node(self, node: str) -> None:
        if node not in self._graph:
            raise UnknownNode(f"transaction {node!r} is not in the graph")

    def edges(self, kind: EdgeKind | None = None) -> Iterator[Edge]:
        """Edges sorted by (source position, target position)."""
        ordered = sorted(
            self._graph.edges(data=True),
            key=lambda item: (self.position(item[0]), self.position(item[1])),
        )
        for source, target, data in ordered:
            if kind is None or data["kind"] is kind:
                yield Edge(source, target, data["kind"], data["witness"])

    def edge_kind(self, source: str, target: str) -> EdgeKind | None:
        data = self._graph.get_edge_data(source, target)
        return None if data is None else data["kind"]

    def strong_successors(self, node: str) -> list[str]:
        return sorted(self._strong.successors(node), key=self.position)

    def subgraph(self, keep: Iterable[str]) -> DependencyGraph:
        kept = set(keep)
        return DependencyGraph(
            (node for node in self._order if node in kept),
            (edge for edge in self.edges() if edge.source in kept and edge.target in kept),
        )


def build_graph(ledger: TraceLedger) -> DependencyGraph:
    """Fold over the ledger keeping a last-writer index per location."""
    last_writer: dict[Location, str] = {}
    readers_since_write: dict[Location, list[str]] = defaultdict(list)
    edges: list[Edge] = []
    for tx in ledger.transactions:
        effect = effects(tx)
        strong: dict[str, Location] = {}
        for location in sorted(effect.reads):
            writer = last_writer.get(location)
            if writer is not None:
                strong.setdefault(writer, location)
        weak: dict[str, Location] = {}
        for location in sorted(effect.writes):
            sources = list(readers_since_write[location])
            if location in last_writer:
                sources.append(last_writer[location])
            for source in sources:
                if source not in strong:
                    weak.setdefault(source, location)
        edges.extend(Edge(src, tx.id, EdgeKind.STRONG, loc) for src, loc in strong.items())
        edges.extend(Edge(src, tx.id, EdgeKind.WEAK, loc) for src, loc in weak.items())
        for location in effect.reads:
            readers_since_write[location].append(tx.id)
        for location in effect.writes:
            last_writer[location] = tx.id
            readers_since_write[location] = []
    graph = DependencyGraph(ledger.ids, edges)
    _LOGGER.debug(
        "Built dependency graph: %d nodes, %d strong, %d weak edges",
        len(graph),
        sum(1 for _ in graph.edges(EdgeKind.STRONG)),
        sum(1 for _ in graph.edges(EdgeKind.WEAK)),
    )
    return graph


def strong_reachable(graph: DependencyGraph, source: str) -> frozenset[str]:
    """Nodes reachable from source along one or more strong edges."""
    graph.check_node(source)
    return frozenset(nx.descendants(graph.strong_graph, source))


def _weak_path_reachable(graph: DependencyGraph, seed: str) -> set[str]:
    """Nodes reached from seed by a path using at least one weak edge."""
    seen = {(seed, False)}
    queue = deque(seen)
    while queue:
        node, used_weak = queue.popleft()
        for target in graph.nx_graph.successors(node):
            weak = graph.edge_kind(node, target) is EdgeKind.WEAK
            state = (target, used_weak or weak)
            if state not in seen:
                seen.add(state)
                queue.append(state)
    return {node for node, used_weak in seen if used_weak}


def _relevant(graph: DependencyGraph, seed: str) -> set[str]:
    reachable = set(strong_reachable(graph, seed))
    feeds_reachable: set[str] = set()
    for node in reachable:
        feeds_reachable |= nx.ancestors(graph.strong_graph, node)
    weak = _weak_path_reachable(graph, seed) & feeds_reachable
    return {seed} | reachable | weak


def filter_graph(graph: DependencyGraph, seed: str) -> DependencyGraph:
    """Keep the seed, its strong descendants and weakly reached contributors.

    Both conditions are evaluated once against ``graph``. A weak path may run
    through a transaction that is itself dropped, so filtering the result again
    can remove more nodes.
    """
    graph.check_node(seed)
    filtered = graph.subgraph(_relevant(graph, seed))
    _LOGGER.debug("Filtered graph from %s: kept %d of %d", seed, len(filtered), len(graph))
    return filtered


# -------------------------------------------------------------------------------------
# Rendering
# -------------------------------------------------------------------------------------


def node_label(tx: TransactionRecord | None, node: str) -> str:
    if tx is None or tx.ghost or not tx.events:
        return node
    event = tx.events[0]
    args = ", ".join(str(value) for value in event.inputs)
    return f"{node}: {event.signature}({args})"


def to_dot(graph: DependencyGraph, ledger: TraceLedger) -> str:
    """DOT source with implied edges suppressed; weak edges dashed."""
    reduced = nx.transitive_reduction(graph.nx_graph)
    dot = graphviz.Digraph("dependencies", graph_attr={"rankdir": "LR"})
    for node in graph.order:
        tx = ledger.get(node)
        shape = "box" if tx is not None and tx.ghost else "ellipse"
        dot.node(node, node_label(tx, node), shape=shape)
    for edge in graph.edges():
        if not reduced.has_edge(edge.source, edge.target):
            continue
        style = "solid" if edge.kind is EdgeKind.STRONG else "dashed"
        dot.edge(edge.source, edge.target, style=style)
    return str(dot.source)
