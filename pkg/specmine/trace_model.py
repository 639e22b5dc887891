"""Trace data model: locations, events, transactions and ledgers.

A trace file is UTF-8 JSON lines. Each line is either a transaction record
(``{"type": "tx", ...}``) or a meta record (``{"type": "meta", "seed": "1"}``).
Ghost transactions, which model the block attributes written at the start of
every block, are never read from or written to files; they are inserted by
:func:`insert_ghosts` before dependency analysis.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from enum import StrEnum
import json
import logging
from pathlib import Path
from typing import IO, Any

import voluptuous as vol

from .const import BLOCK_ATTRIBUTES, GHOST_PREFIX, RECORD_META, RECORD_TX
from .exceptions import (
    AlreadyGhosted,
    DuplicateTransactionId,
    MalformedRecord,
    NonMonotonicBlockNumber,
    UnknownSeed,
)

_LOGGER = logging.getLogger(__name__)

type Scalar = int | str
type TraceSource = bytes | str | IO[bytes] | IO[str] | Iterable[bytes | str]


class LocationKind(StrEnum):
    """Kind of a state location; values are the wire names."""

    STORAGE = "storage"
    BLOCK = "block"
    BALANCE = "balance"


class AccessMode(StrEnum):
    """Whether an access reads or writes its location."""

    READ = "r"
    WRITE = "w"


class EventStatus(StrEnum):
    """Outcome of an invocation event."""

    SUCCESS = "ok"
    ERROR = "error"


@dataclass(frozen=True, slots=True, order=True)
class Location:
    """A named piece of state touched by a transaction."""

    kind: LocationKind
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise MalformedRecord("location name must be non-empty")

    @classmethod
    def storage(cls, name: str) -> Location:
        return cls(LocationKind.STORAGE, name)

    @classmethod
    def block(cls, name: str) -> Location:
        return cls(LocationKind.BLOCK, name)

    @classmethod
    def balance(cls, account: str) -> Location:
        return cls(LocationKind.BALANCE, f"balance[{account}]")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class AccessRecord:
    """One read or write in a transaction's execution order."""

    mode: AccessMode
    location: Location
    ordinal: int


@dataclass(frozen=True, slots=True)
class EventRecord:
    """A concrete invocation event as observed in a transaction."""

    caller: str
    callee: str
    signature: str
    inputs: tuple[Scalar, ...] = ()
    output: Scalar | None = None
    value: int = 0
    status: EventStatus = EventStatus.SUCCESS

    def __post_init__(self) -> None:
        if not self.signature:
            raise MalformedRecord("event signature must be non-empty")
        if any(isinstance(v, bool) or not isinstance(v, int | str) for v in self.inputs):
            raise MalformedRecord(f"non-scalar input in {self.signature}: {self.inputs!r}")
        if self.value < 0:
            raise MalformedRecord(f"negative value {self.value} in {self.signature}")
        if self.status is EventStatus.ERROR and self.output is not None:
            raise MalformedRecord(f"failed {self.signature} event carries an output")

    @property
    def failed(self) -> bool:
        return self.status is EventStatus.ERROR


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    """A transaction: its ordered access log and the events it emitted."""

    id: str
    block_number: int
    ghost: bool = False
    accesses: tuple[AccessRecord, ...] = ()
    events: tuple[EventRecord, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise MalformedRecord("transaction id must be non-empty")
        if self.block_number < 0:
            raise MalformedRecord(f"transaction {self.id} has a negative block number")
        ordinals = [access.ordinal for access in self.accesses]
        if any(b <= a for a, b in zip(ordinals, ordinals[1:], strict=False)):
            raise MalformedRecord(
                f"transaction {self.id} has non-increasing access ordinals"
            )
        if self.ghost:
            if self.events:
                raise MalformedRecord(f"ghost {self.id} carries events")
            if any(
                access.mode is not AccessMode.WRITE
                or access.location.kind is not LocationKind.BLOCK
                for access in self.accesses
            ):
                raise MalformedRecord(
                    f"ghost {self.id} may only write block attributes"
                )
        elif not self.events:
            raise MalformedRecord(f"transaction {self.id} has no events")

    @property
    def reverted(self) -> bool:
        """True when the top-level invocation failed."""
        return bool(self.events) and self.events[0].failed


@dataclass(frozen=True, slots=True)
class TraceLedger:
    """Transactions in blockchain order, optionally anchored at a seed."""

    transactions: tuple[TransactionRecord, ...] = ()
    seed_id: str | None = None
    _index: dict[str, int] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        previous: TransactionRecord | None = None
        for position, tx in enumerate(self.transactions):
            if tx.id in self._index:
                raise DuplicateTransactionId(f"duplicate transaction id {tx.id!r}")
            if previous is not None and tx.block_number < previous.block_number:
                raise NonMonotonicBlockNumber(
                    f"transaction {tx.id} in block {tx.block_number} follows "
                    f"{previous.id} in block {previous.block_number}"
                )
            self._index[tx.id] = position
            previous = tx

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self) -> Iterator[TransactionRecord]:
        return iter(self.transactions)

    def __contains__(self, tx_id: object) -> bool:
        return tx_id in self._index

    def get(self, tx_id: str) -> TransactionRecord | None:
        position = self._index.get(tx_id)
        return None if position is None else self.transactions[position]

    def position(self, tx_id: str) -> int:
        return self._index[tx_id]

    @property
    def ghosted(self) -> bool:
        return any(tx.ghost for tx in self.transactions)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(tx.id for tx in self.transactions)


# -------------------------------------------------------------------------------------
# Wire format
# -------------------------------------------------------------------------------------


def iter_lines(source: TraceSource) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, text) pairs from any supported source."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    lines: Iterable[bytes | str] = (
        source.splitlines() if isinstance(source, str) else source
    )
    for number, raw in enumerate(lines, start=1):
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        yield number, text


def scalar(value: Any) -> Scalar:
    """Voluptuous validator for event values: an int or a string, never a bool."""
    if isinstance(value, bool) or not isinstance(value, int | str):
        raise vol.Invalid(f"invalid scalar {value!r}")
    return value


def natural(value: Any) -> int:
    """Voluptuous validator for non-negative ints; floats and bools are refused."""
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise vol.Invalid(f"expected a non-negative integer, got {value!r}")
    return value


TEXT = vol.All(str, vol.Length(min=1))

ACCESS_SCHEMA = vol.Schema(
    {
        vol.Required("m"): vol.In([mode.value for mode in AccessMode]),
        vol.Required("k"): vol.In([kind.value for kind in LocationKind]),
        vol.Required("loc"): TEXT,
    }
)

EVENT_SCHEMA = vol.Schema(
    {
        vol.Required("caller"): TEXT,
        vol.Required("callee"): TEXT,
        vol.Required("sig"): TEXT,
        vol.Required("in"): [scalar],
        vol.Optional("out", default=None): vol.Any(None, scalar),
        vol.Optional("value", default=0): natural,
        vol.Optional("status", default=EventStatus.SUCCESS.value): vol.In(
            [status.value for status in EventStatus]
        ),
    }
)

EVENTS_SCHEMA = vol.Schema([EVENT_SCHEMA])

TX_SCHEMA = vol.Schema(
    {
        vol.Required("type"): RECORD_TX,
        vol.Required("id"): TEXT,
        vol.Required("block"): natural,
        vol.Required("accesses"): [ACCESS_SCHEMA],
        vol.Required("events"): [EVENT_SCHEMA],
    }
)

TRACE_META_SCHEMA = vol.Schema(
    {
        vol.Required("type"): RECORD_META,
        vol.Optional("seed", default=None): vol.Any(None, TEXT),
    }
)


def validate_record(schema: vol.Schema, record: Any, kind: str) -> Any:
    """Run a record schema, turning voluptuous errors into MalformedRecord."""
    try:
        return schema(record)
    except vol.Invalid as err:
        raise MalformedRecord(f"invalid {kind} record: {err}") from err


def _access(record: dict[str, Any], ordinal: int) -> AccessRecord:
    location = Location(LocationKind(record["k"]), record["loc"])
    return AccessRecord(AccessMode(record["m"]), location, ordinal)


def access_to_dict(access: AccessRecord) -> dict[str, Any]:
    return {
        "m": access.mode.value,
        "k": access.location.kind.value,
        "loc": access.location.name,
    }


def _event(record: dict[str, Any]) -> EventRecord:
    return EventRecord(
        caller=record["caller"],
        callee=record["callee"],
        signature=record["sig"],
        inputs=tuple(record["in"]),
        output=record["out"],
        value=record["value"],
        status=EventStatus(record["status"]),
    )


def events_from_list(records: Any) -> tuple[EventRecord, ...]:
    """Validate and build a JSON list of event records."""
    return tuple(_event(event) for event in validate_record(EVENTS_SCHEMA, records, "history"))


def event_to_dict(event: EventRecord) -> dict[str, Any]:
    return {
        "caller": event.caller,
        "callee": event.callee,
        "sig": event.signature,
        "in": list(event.inputs),
        "out": event.output,
        "value": event.value,
        "status": event.status.value,
    }


def transaction_from_dict(record: Any) -> TransactionRecord:
    if isinstance(record, dict) and "ghost" in record:
        raise MalformedRecord("ghost transactions are not allowed in trace files")
    valid = validate_record(TX_SCHEMA, record, "transaction")
    return TransactionRecord(
        id=valid["id"],
        block_number=valid["block"],
        accesses=tuple(
            _access(access, ordinal) for ordinal, access in enumerate(valid["accesses"])
        ),
        events=tuple(_event(event) for event in valid["events"]),
    )


def transaction_to_dict(tx: TransactionRecord) -> dict[str, Any]:
    return {
        "type": RECORD_TX,
        "id": tx.id,
        "block": tx.block_number,
        "accesses": [access_to_dict(access) for access in tx.accesses],
        "events": [event_to_dict(event) for event in tx.events],
    }


def _as_object(value: Any) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise MalformedRecord(f"expected an object, got {value!r}")
    return value


def load_json_line(text: str, line_number: int) -> dict[str, Any] | None:
    """Decode one JSON-lines record; blank lines yield None."""
    if not text.strip():
        return None
    try:
        return _as_object(json.loads(text))
    except json.JSONDecodeError as err:
        raise MalformedRecord(f"invalid JSON: {err.msg}", line_number) from err
    except MalformedRecord as err:
        raise MalformedRecord(str(err), line_number) from err


def parse_trace(source: TraceSource) -> TraceLedger:
    """Parse a JSON-lines trace into a validated ledger."""
    transactions: list[TransactionRecord] = []
    seed_id: str | None = None
    for line_number, text in iter_lines(source):
        record = load_json_line(text, line_number)
        if record is None:
            continue
        try:
            match record.get("type"):
                case "tx":
                    transactions.append(transaction_from_dict(record))
                case "meta":
                    seed_id = validate_record(TRACE_META_SCHEMA, record, "meta")["seed"]
                case other:
                    raise MalformedRecord(f"unknown record type {other!r}")
        except MalformedRecord as err:
            if err.line_number is not None:
                raise
            raise MalformedRecord(str(err), line_number) from err
    ledger = TraceLedger(tuple(transactions), seed_id)
    _LOGGER.debug("Parsed %d transactions", len(ledger))
    return ledger


def serialize_trace(ledger: TraceLedger) -> str:
    """Render a ledger as JSON lines; ghosts are omitted."""
    lines: list[str] = []
    if ledger.seed_id is not None:
        lines.append(json.dumps({"type": RECORD_META, "seed": ledger.seed_id}))
    lines.extend(
        json.dumps(transaction_to_dict(tx)) for tx in ledger.transactions if not tx.ghost
    )
    return "".join(f"{line}\n" for line in lines)


def load_trace(path: Path) -> TraceLedger:
    with path.open(encoding="utf-8") as handle:
        return parse_trace(handle)


def write_trace(ledger: TraceLedger, path: Path) -> None:
    path.write_text(serialize_trace(ledger), encoding="utf-8")


# -------------------------------------------------------------------------------------
# Ghosts and seeds
# -------------------------------------------------------------------------------------


def ghost_id(block_number: int) -> str:
    return f"{GHOST_PREFIX}{block_number}"


def make_ghost(block_number: int) -> TransactionRecord:
    return TransactionRecord(
        id=ghost_id(block_number),
        block_number=block_number,
        ghost=True,
        accesses=tuple(
            AccessRecord(AccessMode.WRITE, Location.block(name), ordinal)
            for ordinal, name in enumerate(BLOCK_ATTRIBUTES)
        ),
    )


def insert_ghosts(ledger: TraceLedger) -> TraceLedger:
    """Insert one ghost before the first transaction of every populated block."""
    if ledger.ghosted:
        raise AlreadyGhosted("ledger already contains ghost transactions")
    transactions: list[TransactionRecord] = []
    current_block: int | None = None
    for tx in ledger.transactions:
        if tx.block_number != current_block:
            current_block = tx.block_number
            transactions.append(make_ghost(current_block))
        transactions.append(tx)
    _LOGGER.debug("Inserted %d ghosts", len(transactions) - len(ledger))
    return TraceLedger(tuple(transactions), ledger.seed_id)


def slice_from_seed(ledger: TraceLedger, seed_id: str) -> TraceLedger:
    """Return the suffix starting where the seed's block begins."""
    seed = ledger.get(seed_id)
    if seed is None or seed.ghost:
        raise UnknownSeed(f"seed transaction {seed_id!r} not found")
    start = next(
        position
        for position, tx in enumerate(ledger.transactions)
        if tx.block_number == seed.block_number
    )
    return TraceLedger(ledger.transactions[start:], seed_id)
