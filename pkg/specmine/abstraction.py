"""Event abstractions and recipes.

A recipe chooses, for every (signature, field) pair, whether a value is kept
(identity), replaced by a variable, or dropped (top). Variables are created
one per field occurrence and named ``v0``, ``v1``, ... in corpus order; a side
table remembers the concrete value behind each one.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
import logging
from typing import TYPE_CHECKING

from .trace_model import EventRecord, EventStatus, Scalar

if TYPE_CHECKING:
    from .automaton import Move
    from .sessions import History

_LOGGER = logging.getLogger(__name__)

type Occurrence = tuple[int, int]  # (history index, event position)


class FieldKind(StrEnum):
    CALLER = "caller"
    CALLEE = "callee"
    SIGNATURE = "signature"
    INPUT = "input"
    OUTPUT = "output"
    VALUE = "value"
    STATUS = "status"


_FIELD_RANK = {kind: rank for rank, kind in enumerate(FieldKind)}
_FIELD_TITLE = {
    FieldKind.CALLER: "Caller",
    FieldKind.CALLEE: "Callee",
    FieldKind.SIGNATURE: "Signature",
    FieldKind.INPUT: "Input",
    FieldKind.OUTPUT: "Output",
    FieldKind.VALUE: "Value",
    FieldKind.STATUS: "Status",
}


@dataclass(frozen=True, slots=True)
class Field:
    """An event field; ``index`` is only meaningful for inputs."""

    kind: FieldKind
    index: int = 0

    @property
    def sort_key(self) -> tuple[int, int]:
        return (_FIELD_RANK[self.kind], self.index)

    def __str__(self) -> str:
        title = _FIELD_TITLE[self.kind]
        return f"{title}({self.index})" if self.kind is FieldKind.INPUT else title


CALLER = Field(FieldKind.CALLER)
CALLEE = Field(FieldKind.CALLEE)
SIGNATURE = Field(FieldKind.SIGNATURE)
OUTPUT = Field(FieldKind.OUTPUT)
VALUE = Field(FieldKind.VALUE)
STATUS = Field(FieldKind.STATUS)


def input_field(index: int) -> Field:
    return Field(FieldKind.INPUT, index)


@dataclass(frozen=True, slots=True)
class FieldKey:
    """A field of every event with a given signature."""

    signature: str
    field: Field

    @property
    def sort_key(self) -> tuple[str, tuple[int, int]]:
        return (self.signature, self.field.sort_key)

    def __str__(self) -> str:
        return f"{self.signature}.{self.field}"


class FieldAbstraction(StrEnum):
    IDENTITY = "identity"
    VARIABLE = "variable"
    TOP = "top"


def event_fields(event: EventRecord) -> tuple[tuple[Field, Scalar | None], ...]:
    """Field layout of an event in canonical order."""
    return (
        (CALLER, event.caller),
        (CALLEE, event.callee),
        (SIGNATURE, event.signature),
        *((input_field(i), value) for i, value in enumerate(event.inputs)),
        (OUTPUT, event.output),
        (VALUE, event.value),
        (STATUS, event.status.value),
    )


# -------------------------------------------------------------------------------------
# Abstract values and events
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Concrete:
    value: Scalar | None

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return ("c", type(self.value).__name__, str(self.value))

    def render(self) -> str:
        return "null" if self.value is None else str(self.value)


@dataclass(frozen=True, slots=True)
class Var:
    """A variable; ``fresh`` means it takes a value different from its binding."""

    name: str
    fresh: bool = False

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return ("v", self.name, "1" if self.fresh else "0")

    def render(self) -> str:
        return f"*{self.name}" if self.fresh else self.name


@dataclass(frozen=True, slots=True)
class TopValue:
    @property
    def sort_key(self) -> tuple[str, str, str]:
        return ("t", "", "")

    def render(self) -> str:
        return "T"


TOP = TopValue()

type AbstractValue = Concrete | Var | TopValue
type LabelKey = tuple[tuple[int, int, tuple[str, str, str]], ...]


@dataclass(frozen=True, slots=True)
class AbstractEvent:
    """A label: abstract field values, plus where the label was observed."""

    fields: tuple[tuple[Field, AbstractValue], ...]
    provenance: frozenset[Occurrence] = field(default=frozenset(), compare=False)

    @property
    def sort_key(self) -> LabelKey:
        return tuple((*f.sort_key, value.sort_key) for f, value in self.fields)

    def value(self, of: Field) -> AbstractValue:
        for candidate, value in self.fields:
            if candidate == of:
                return value
        return TOP

    @property
    def signature(self) -> str:
        value = self.value(SIGNATURE)
        return value.render() if not isinstance(value, TopValue) else "?"

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v.name for _, v in self.fields if isinstance(v, Var))

    def with_provenance(self, provenance: Iterable[Occurrence]) -> AbstractEvent:
        return replace(self, provenance=frozenset(provenance))

    def map_values(self, update: Mapping[Field, AbstractValue]) -> AbstractEvent:
        return replace(
            self, fields=tuple((f, update.get(f, value)) for f, value in self.fields)
        )

    def rows(self) -> list[tuple[str, str]]:
        """Displayable (field, value) rows; top fields are omitted."""
        return [
            (str(f), value.render())
            for f, value in self.fields
            if not isinstance(value, TopValue)
        ]


# -------------------------------------------------------------------------------------
# Recipes
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Recipe:
    """Field abstractions (identity by default) plus an ordered move list."""

    abstractions: tuple[tuple[FieldKey, FieldAbstraction], ...] = ()
    moves: tuple[Move, ...] = ()

    def __post_init__(self) -> None:
        cleaned = {
            key: variant
            for key, variant in self.abstractions
            if variant is not FieldAbstraction.IDENTITY
        }
        object.__setattr__(
            self,
            "abstractions",
            tuple(sorted(cleaned.items(), key=lambda item: item[0].sort_key)),
        )

    @classmethod
    def from_mapping(
        cls, abstractions: Mapping[FieldKey, FieldAbstraction], moves: Sequence[Move] = ()
    ) -> Recipe:
        return cls(tuple(abstractions.items()), tuple(moves))

    def abstraction_for(self, key: FieldKey) -> FieldAbstraction:
        for candidate, variant in self.abstractions:
            if candidate == key:
                return variant
        return FieldAbstraction.IDENTITY

    def with_abstraction(self, key: FieldKey, variant: FieldAbstraction) -> Recipe:
        updated = dict(self.abstractions)
        updated[key] = variant
        return Recipe(tuple(updated.items()), self.moves)

    def with_move(self, move: Move) -> Recipe:
        return Recipe(self.abstractions, (*self.moves, move))

    def without_move(self, index: int) -> Recipe:
        return Recipe(self.abstractions, self.moves[:index] + self.moves[index + 1 :])


def identity_recipe() -> Recipe:
    return Recipe()


# -------------------------------------------------------------------------------------
# Applying abstractions
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class VarSite:
    """Where a variable was created and the concrete value it stands for."""

    occurrence: Occurrence
    field: Field
    value: Scalar | None


@dataclass(frozen=True, slots=True)
class SideTable:
    """Concrete values behind the variables created by an abstraction pass."""

    sites: Mapping[str, VarSite] = field(default_factory=dict)
    _by_site: dict[tuple[Occurrence, Field], Scalar | None] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        for site in self.sites.values():
            self._by_site[(site.occurrence, site.field)] = site.value

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, name: object) -> bool:
        return name in self.sites

    def value_of(self, name: str) -> Scalar | None:
        return self.sites[name].value

    def value_at(self, occurrence: Occurrence, of: Field) -> Scalar | None:
        """Concrete value of a field at an event occurrence."""
        return self._by_site[(occurrence, of)]


@dataclass(frozen=True, slots=True)
class AbstractCorpus:
    histories: tuple[tuple[AbstractEvent, ...], ...]
    side_table: SideTable

    def __iter__(self) -> Iterator[tuple[AbstractEvent, ...]]:
        return iter(self.histories)

    def __len__(self) -> int:
        return len(self.histories)


def abstract_value(
    variant: FieldAbstraction, value: Scalar | None, name: str | None = None
) -> AbstractValue:
    match variant:
        case FieldAbstraction.TOP:
            return TOP
        case FieldAbstraction.VARIABLE if name is not None:
            return Var(name)
        case _:
            return Concrete(value)


def field_variant(recipe: Recipe, signature: str, of: Field) -> FieldAbstraction:
    if of.kind is FieldKind.STATUS:
        return FieldAbstraction.IDENTITY
    return recipe.abstraction_for(FieldKey(signature, of))


def abstract_histories(corpus: Sequence[History], recipe: Recipe) -> AbstractCorpus:
    """Apply the recipe's field abstractions pointwise."""
    sites: dict[str, VarSite] = {}
    abstracted: list[tuple[AbstractEvent, ...]] = []
    for h, history in enumerate(corpus):
        events: list[AbstractEvent] = []
        for i, event in enumerate(history.events):
            values: list[tuple[Field, AbstractValue]] = []
            for of, concrete in event_fields(event):
                variant = field_variant(recipe, event.signature, of)
                name = None
                if variant is FieldAbstraction.VARIABLE:
                    name = f"v{len(sites)}"
                    sites[name] = VarSite((h, i), of, concrete)
                values.append((of, abstract_value(variant, concrete, name)))
            events.append(AbstractEvent(tuple(values), frozenset({(h, i)})))
        abstracted.append(tuple(events))
    _LOGGER.debug("Abstracted %d histories, %d variables", len(corpus), len(sites))
    return AbstractCorpus(tuple(abstracted), SideTable(sites))


def concretize_event(
    event: AbstractEvent, occurrence: Occurrence, side_table: SideTable
) -> EventRecord:
    """Rebuild a concrete event; fails on fields abstracted to top."""
    values: dict[Field, Scalar | None] = {}
    for of, value in event.fields:
        match value:
            case Concrete(concrete):
                values[of] = concrete
            case Var():
                values[of] = side_table.value_at(occurrence, of)
            case _:
                raise ValueError(f"{of} of event {occurrence} was abstracted away")
    inputs = tuple(
        value for of, value in values.items() if of.kind is FieldKind.INPUT
    )
    return EventRecord(
        caller=str(values[CALLER]),
        callee=str(values[CALLEE]),
        signature=str(values[SIGNATURE]),
        inputs=tuple(value for value in inputs if value is not None),
        output=values[OUTPUT],
        value=int(values[VALUE] or 0),
        status=EventStatus(str(values[STATUS])),
    )


def corpus_field_keys(corpus: Iterable[History]) -> list[FieldKey]:
    """All abstractable field keys of the corpus; status is never included."""
    keys: set[FieldKey] = set()
    for history in corpus:
        for event in history.events:
            for of, _ in event_fields(event):
                if of.kind is not FieldKind.STATUS:
                    keys.add(FieldKey(event.signature, of))
    return sorted(keys, key=lambda key: key.sort_key)
