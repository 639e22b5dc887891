"""Tree-shaped automata over abstract events, and the moves that generalize them.

Every state is accepting. Automata are label-deterministic: a state has at most
one outgoing transition per label. Each concrete event occurrence, identified
by (history index, event position), lies on exactly one transition; moves keep
this partition intact, which lets variable merges replay every history along
its own path.
"""

from __future__ import annotations

from collections import defaultdict, deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
import html
import logging

import graphviz

from .abstraction import (
    AbstractCorpus,
    AbstractEvent,
    Concrete,
    Field,
    FieldAbstraction,
    LabelKey,
    Occurrence,
    Recipe,
    SideTable,
    TopValue,
    Var,
    event_fields,
    field_variant,
)
from .exceptions import InvalidMove, UnknownState, UnknownVariable
from .sessions import History
from .trace_model import EventRecord, Scalar

_LOGGER = logging.getLogger(__name__)


# -------------------------------------------------------------------------------------
# Moves
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class MergeSameFuture:
    """Merge states whose futures of length at most k coincide."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise InvalidMove(f"k must be non-negative, got {self.k}")


@dataclass(frozen=True, slots=True)
class MergeSimilarFuture:
    """Merge states whose bounded futures are strictly nested."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise InvalidMove(f"k must be non-negative, got {self.k}")


@dataclass(frozen=True, slots=True)
class MergeVars:
    """Replace every occurrence of v2 by v1."""

    v1: str
    v2: str

    def __post_init__(self) -> None:
        if self.v1 == self.v2:
            raise InvalidMove(f"cannot merge variable {self.v1} with itself")


type Move = MergeSameFuture | MergeSimilarFuture | MergeVars


# -------------------------------------------------------------------------------------
# Automaton
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Transition:
    source: int
    event: AbstractEvent
    target: int

    @property
    def provenance(self) -> frozenset[Occurrence]:
        return self.event.provenance

    @property
    def sort_key(self) -> tuple[int, LabelKey, int]:
        return (self.source, self.event.sort_key, self.target)


class Automaton:
    """An immutable automaton whose states are all accepting."""

    __slots__ = ("_initial", "_out", "_states", "_transitions")

    def __init__(
        self,
        initial: int,
        transitions: Iterable[Transition] = (),
        states: Iterable[int] = (),
    ) -> None:
        self._initial = initial
        self._transitions = tuple(sorted(transitions, key=lambda t: t.sort_key))
        known = {initial, *states}
        out: dict[int, list[Transition]] = defaultdict(list)
        for transition in self._transitions:
            known.update((transition.source, transition.target))
            out[transition.source].append(transition)
        self._states = frozenset(known)
        self._out = {state: tuple(edges) for state, edges in out.items()}

    @property
    def initial(self) -> int:
        return self._initial

    @property
    def states(self) -> frozenset[int]:
        return self._states

    @property
    def transitions(self) -> tuple[Transition, ...]:
        return self._transitions

    @property
    def size(self) -> int:
        return len(self._states) + len(self._transitions)

    def outgoing(self, state: int) -> tuple[Transition, ...]:
        if state not in self._states:
            raise UnknownState(f"state {state} is not in the automaton")
        return self._out.get(state, ())

    def successor(self, state: int, label: AbstractEvent) -> int | None:
        for transition in self.outgoing(state):
            if transition.event == label:
                return transition.target
        return None

    def variables(self) -> list[str]:
        """Variable names occurring in labels, in numeric order."""
        names = {name for t in self._transitions for name in t.event.variables}
        return sorted(names, key=_var_order)

    def is_deterministic(self) -> bool:
        return all(
            len({t.event.sort_key for t in edges}) == len(edges)
            for edges in self._out.values()
        )

    def canonical(self) -> Automaton:
        """Renumber states breadth-first from the initial state."""
        numbering = {self._initial: 0}
        queue = deque([self._initial])
        while queue:
            state = queue.popleft()
            for transition in sorted(
                self._out.get(state, ()), key=lambda t: (t.event.sort_key, t.target)
            ):
                if transition.target not in numbering:
                    numbering[transition.target] = len(numbering)
                    queue.append(transition.target)
        return Automaton(
            0,
            (
                Transition(numbering[t.source], t.event, numbering[t.target])
                for t in self._transitions
                if t.source in numbering
            ),
            numbering.values(),
        )

    def _identity(self) -> tuple:
        return (
            self._initial,
            self._states,
            tuple((t.sort_key, t.provenance) for t in self._transitions),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Automaton):
            return NotImplemented
        return self._identity() == other._identity()

    def __hash__(self) -> int:
        return hash(self._identity())

    def __repr__(self) -> str:
        return f"Automaton(states={len(self._states)}, transitions={len(self._transitions)})"


def _var_order(name: str) -> tuple[int, str]:
    digits = name[1:]
    return (int(digits), name) if digits.isdigit() else (-1, name)


class DisjointSet:
    """Union by rank with path compression; the smaller id wins rank ties."""

    def __init__(self, items: Iterable[int]) -> None:
        self._parent = {item: item for item in items}
        self._rank = dict.fromkeys(self._parent, 0)

    def find(self, item: int) -> int:
        root = item
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[item] != root:
            self._parent[item], item = root, self._parent[item]
        return root

    def union(self, first: int, second: int) -> bool:
        a, b = self.find(first), self.find(second)
        if a == b:
            return False
        if self._rank[a] < self._rank[b] or (self._rank[a] == self._rank[b] and b < a):
            a, b = b, a
        self._parent[b] = a
        if self._rank[a] == self._rank[b]:
            self._rank[a] += 1
        return True


def _fold(
    initial: int, transitions: Sequence[Transition], classes: DisjointSet
) -> Automaton:
    """Quotient by the classes, then merge targets of equal labels until deterministic."""
    while True:
        targets: dict[tuple[int, LabelKey], int] = {}
        changed = False
        for transition in transitions:
            key = (classes.find(transition.source), transition.event.sort_key)
            target = classes.find(transition.target)
            if key in targets:
                changed |= classes.union(targets[key], target)
                targets[key] = classes.find(target)
            else:
                targets[key] = target
        if not changed:
            break
    merged: dict[tuple[int, LabelKey, int], tuple[AbstractEvent, set[Occurrence]]] = {}
    for transition in transitions:
        source = classes.find(transition.source)
        target = classes.find(transition.target)
        key = (source, transition.event.sort_key, target)
        if key not in merged:
            merged[key] = (transition.event, set())
        merged[key][1].update(transition.provenance)
    return Automaton(
        classes.find(initial),
        (
            Transition(source, event.with_provenance(provenance), target)
            for (source, _, target), (event, provenance) in merged.items()
        ),
    ).canonical()


def quotient(automaton: Automaton, pairs: Iterable[tuple[int, int]]) -> Automaton:
    """Merge the given state pairs and restore label-determinism."""
    classes = DisjointSet(automaton.states)
    for first, second in pairs:
        classes.union(first, second)
    return _fold(automaton.initial, automaton.transitions, classes)


# -------------------------------------------------------------------------------------
# Construction and languages
# -------------------------------------------------------------------------------------


def build_automaton(
    corpus: AbstractCorpus | Iterable[Sequence[AbstractEvent]],
) -> Automaton:
    """Prefix-tree acceptor over the abstract histories."""
    children: dict[tuple[int, LabelKey], int] = {}
    events: dict[tuple[int, LabelKey], AbstractEvent] = {}
    provenance: dict[tuple[int, LabelKey], set[Occurrence]] = defaultdict(set)
    state_count = 1
    for history in corpus:
        state = 0
        for event in history:
            key = (state, event.sort_key)
            if key not in children:
                children[key] = state_count
                events[key] = event
                state_count += 1
            provenance[key].update(event.provenance)
            state = children[key]
    return Automaton(
        0,
        (
            Transition(key[0], events[key].with_provenance(provenance[key]), target)
            for key, target in children.items()
        ),
    ).canonical()


def bounded_language(
    automaton: Automaton, state: int, k: int
) -> frozenset[tuple[AbstractEvent, ...]]:
    """Label sequences of length at most k readable from a state, including ε."""
    words: set[tuple[AbstractEvent, ...]] = set()

    def walk(current: int, prefix: tuple[AbstractEvent, ...]) -> None:
        words.add(prefix)
        if len(prefix) == k:
            return
        for transition in automaton.outgoing(current):
            walk(transition.target, (*prefix, transition.event.with_provenance(())))

    walk(state, ())
    return frozenset(words)


def _label_maps(automaton: Automaton) -> dict[int, dict[LabelKey, int]]:
    return {
        state: {t.event.sort_key: t.target for t in automaton.outgoing(state)}
        for state in automaton.states
    }


def future_classes(automaton: Automaton, k: int) -> dict[int, int]:
    """Partition states by their bounded futures via k rounds of refinement."""
    labels = _label_maps(automaton)
    classes = dict.fromkeys(automaton.states, 0)
    for _ in range(k):
        signatures = {
            state: tuple(
                sorted((label, classes[target]) for label, target in out.items())
            )
            for state, out in labels.items()
        }
        numbering = {sig: i for i, sig in enumerate(sorted(set(signatures.values())))}
        refined = {state: numbering[sig] for state, sig in signatures.items()}
        if len(set(refined.values())) == len(set(classes.values())):
            classes = refined
            break
        classes = refined
    return classes


def future_inclusion(automaton: Automaton, k: int) -> dict[tuple[int, int], bool]:
    """For every state pair (q, r), whether the k-future of q is within that of r."""
    labels = _label_maps(automaton)
    states = sorted(automaton.states)
    included = {(q, r): True for q in states for r in states}
    for _ in range(k):
        included = {
            (q, r): labels[q].keys() <= labels[r].keys()
            and all(
                included[(target, labels[r][label])]
                for label, target in labels[q].items()
            )
            for q in states
            for r in states
        }
    return included


def merge_same_future(automaton: Automaton, k: int) -> Automaton:
    classes = future_classes(automaton, k)
    representative: dict[int, int] = {}
    pairs = []
    for state in sorted(automaton.states):
        first = representative.setdefault(classes[state], state)
        pairs.append((first, state))
    result = quotient(automaton, pairs)
    _LOGGER.debug("Same-future merge (k=%d): %r -> %r", k, automaton, result)
    return result


def merge_similar_future(automaton: Automaton, k: int) -> Automaton:
    included = future_inclusion(automaton, k)
    states = sorted(automaton.states)
    pairs = [
        (q, r)
        for i, q in enumerate(states)
        for r in states[i + 1 :]
        if included[(q, r)] != included[(r, q)]
    ]
    result = quotient(automaton, pairs)
    _LOGGER.debug("Similar-future merge (k=%d): %r -> %r", k, automaton, result)
    return result


def _rename(event: AbstractEvent, v1: str, v2: str) -> AbstractEvent:
    return event.map_values(
        {
            of: Var(v1)
            for of, value in event.fields
            if isinstance(value, Var) and value.name in (v1, v2)
        }
    )


def merge_vars(
    automaton: Automaton, v1: str, v2: str, side_table: SideTable
) -> Automaton:
    """Rename v2 to v1, then recompute which occurrences of v1 must be fresh.

    Each history is replayed along its own path. An occurrence whose concrete
    value differs from the current binding of v1 is fresh and rebinds it. A
    transition covering both kinds of occurrence is split in two.
    """
    present = set(automaton.variables())
    missing = [name for name in (v1, v2) if name not in present]
    if missing:
        raise UnknownVariable(f"variables {missing} do not occur in the automaton")

    renamed = [
        Transition(t.source, _rename(t.event, v1, v2), t.target)
        for t in automaton.transitions
    ]
    uses: dict[int, list[tuple[int, Occurrence, Transition]]] = defaultdict(list)
    for transition in renamed:
        if v1 in transition.event.variables:
            for occurrence in transition.provenance:
                uses[occurrence[0]].append((occurrence[1], occurrence, transition))

    freshness: dict[Occurrence, tuple[bool, ...]] = {}
    for history in sorted(uses):
        bound = False
        binding: Scalar | None = None
        for _, occurrence, transition in sorted(uses[history], key=lambda use: use[0]):
            flags = []
            for of, value in transition.event.fields:
                if not (isinstance(value, Var) and value.name == v1):
                    continue
                concrete = side_table.value_at(occurrence, of)
                fresh = bound and concrete != binding
                flags.append(fresh)
                bound, binding = True, concrete
            freshness[occurrence] = tuple(flags)

    split: list[Transition] = []
    for transition in renamed:
        if v1 not in transition.event.variables:
            split.append(transition)
            continue
        groups: dict[tuple[bool, ...], set[Occurrence]] = defaultdict(set)
        for occurrence in transition.provenance:
            groups[freshness[occurrence]].add(occurrence)
        for flags, occurrences in sorted(groups.items()):
            split.append(
                Transition(
                    transition.source,
                    _mark_fresh(transition.event, v1, flags).with_provenance(occurrences),
                    transition.target,
                )
            )
    result = _fold(automaton.initial, split, DisjointSet(automaton.states))
    _LOGGER.debug("Merged variable %s into %s: %r -> %r", v2, v1, automaton, result)
    return result


def _mark_fresh(event: AbstractEvent, name: str, flags: Sequence[bool]) -> AbstractEvent:
    pending = iter(flags)
    update: dict[Field, Var] = {}
    for of, value in event.fields:
        if isinstance(value, Var) and value.name == name:
            update[of] = Var(name, next(pending))
    return event.map_values(update)


def apply_move(automaton: Automaton, move: Move, side_table: SideTable) -> Automaton:
    match move:
        case MergeSameFuture(k):
            return merge_same_future(automaton, k)
        case MergeSimilarFuture(k):
            return merge_similar_future(automaton, k)
        case MergeVars(v1, v2):
            return merge_vars(automaton, v1, v2, side_table)
    raise InvalidMove(f"unknown move {move!r}")


def apply_moves(
    automaton: Automaton, moves: Iterable[Move], side_table: SideTable
) -> Automaton:
    """Fold moves left to right; stale variable merges are skipped."""
    for move in moves:
        try:
            automaton = apply_move(automaton, move, side_table)
        except UnknownVariable as err:
            _LOGGER.warning("Skipping %s: %s", move, err)
    return automaton


# -------------------------------------------------------------------------------------
# Acceptance
# -------------------------------------------------------------------------------------

type Binding = tuple[tuple[str, Scalar | None], ...]


def _match(
    label: AbstractEvent,
    concrete: Sequence[tuple[Field, Scalar | None, FieldAbstraction]],
    env: Mapping[str, Scalar | None],
) -> dict[str, Scalar | None] | None:
    """Match one concrete event against a label; the extended binding or None."""
    if len(label.fields) != len(concrete):
        return None
    updated = dict(env)
    for (of, abstract), (field_, value, variant) in zip(
        label.fields, concrete, strict=True
    ):
        if of != field_:
            return None
        match variant, abstract:
            case FieldAbstraction.IDENTITY, Concrete(expected):
                if expected != value or type(expected) is not type(value):
                    return None
            case FieldAbstraction.TOP, TopValue():
                pass
            case FieldAbstraction.VARIABLE, Var(name, fresh):
                if name in updated:
                    if (updated[name] == value) == fresh:
                        return None
                updated[name] = value
            case _:
                return None
    return updated


def _live_variables(automaton: Automaton) -> dict[int, frozenset[str]]:
    """Variables on some transition reachable from each state."""
    live = {
        state: {name for t in automaton.outgoing(state) for name in t.event.variables}
        for state in automaton.states
    }
    changed = True
    while changed:
        changed = False
        for transition in automaton.transitions:
            missing = live[transition.target] - live[transition.source]
            if missing:
                live[transition.source] |= missing
                changed = True
    return {state: frozenset(names) for state, names in live.items()}


def provenance_runs(automaton: Automaton) -> dict[int, list[Transition]]:
    """Transitions along each history's provenance path, in event order."""
    placed: dict[int, dict[int, Transition]] = defaultdict(dict)
    for transition in automaton.transitions:
        for history, position in transition.provenance:
            placed[history][position] = transition
    return {
        history: [steps[position] for position in sorted(steps)]
        for history, steps in sorted(placed.items())
    }


def _replays(
    automaton: Automaton,
    run: Sequence[Transition],
    concrete: Sequence[Sequence[tuple[Field, Scalar | None, FieldAbstraction]]],
) -> bool:
    if len(run) != len(concrete):
        return False
    state = automaton.initial
    env: dict[str, Scalar | None] = {}
    for transition, fields in zip(run, concrete, strict=True):
        if transition.source != state:
            return False
        updated = _match(transition.event, fields, env)
        if updated is None:
            return False
        env, state = updated, transition.target
    return True


def accepts(
    automaton: Automaton, history: History | Iterable[EventRecord], recipe: Recipe
) -> bool:
    """Whether some run reads the whole history under binding semantics.

    Histories of the corpus the automaton was built from are first replayed
    along their provenance paths. Otherwise (state, binding) configurations are
    searched, keeping only bindings of variables still reachable from the state.
    """
    concrete = [
        [
            (of, value, field_variant(recipe, event.signature, of))
            for of, value in event_fields(event)
        ]
        for event in history
    ]
    if any(
        _replays(automaton, run, concrete) for run in provenance_runs(automaton).values()
    ):
        return True
    live = _live_variables(automaton)
    configurations: set[tuple[int, Binding]] = {(automaton.initial, ())}
    for fields in concrete:
        following: set[tuple[int, Binding]] = set()
        for state, binding in configurations:
            env = dict(binding)
            for transition in automaton.outgoing(state):
                updated = _match(transition.event, fields, env)
                if updated is not None:
                    keep = live[transition.target]
                    following.add(
                        (
                            transition.target,
                            tuple(sorted(item for item in updated.items() if item[0] in keep)),
                        )
                    )
        if not following:
            return False
        configurations = following
    return True


def observed_paths(automaton: Automaton) -> dict[int, list[AbstractEvent]]:
    """Label sequence along each history's provenance path."""
    return {
        history: [transition.event for transition in run]
        for history, run in provenance_runs(automaton).items()
    }


# -------------------------------------------------------------------------------------
# Rendering
# -------------------------------------------------------------------------------------


def _label_table(event: AbstractEvent) -> str:
    rows = "".join(
        f'<tr><td align="left">{html.escape(name)}</td>'
        f'<td align="left">{html.escape(value)}</td></tr>'
        for name, value in event.rows()
    )
    return f'<<table border="0" cellborder="0" cellspacing="0">{rows}</table>>'


def to_dot(automaton: Automaton) -> str:
    """Deterministic DOT source; states numbered in canonical order."""
    canonical = automaton.canonical()
    dot = graphviz.Digraph("automaton", graph_attr={"rankdir": "LR"})
    dot.node("start", "", shape="point")
    for state in sorted(canonical.states):
        dot.node(str(state), str(state), shape="circle")
    dot.edge("start", str(canonical.initial))
    for transition in canonical.transitions:
        dot.edge(
            str(transition.source),
            str(transition.target),
            label=_label_table(transition.event),
        )
    return str(dot.source)
