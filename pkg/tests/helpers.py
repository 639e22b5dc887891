"""Builders shared by the test modules."""

from __future__ import annotations

from collections.abc import Sequence

from specmine.trace_model import (
    AccessMode,
    AccessRecord,
    EventRecord,
    EventStatus,
    Location,
    TransactionRecord,
)


def make_tx(
    tx_id: str,
    block: int,
    accesses: Sequence[tuple[str, str]] = (),
    signature: str = "f",
    reverted: bool = False,
) -> TransactionRecord:
    """Build a transaction from (mode, storage name) pairs."""
    event = EventRecord(
        caller="0xC",
        callee="0xA",
        signature=signature,
        inputs=(tx_id,),
        output=None if reverted else 1,
        status=EventStatus.ERROR if reverted else EventStatus.SUCCESS,
    )
    return TransactionRecord(
        id=tx_id,
        block_number=block,
        accesses=tuple(
            AccessRecord(AccessMode(mode), Location.storage(name), ordinal)
            for ordinal, (mode, name) in enumerate(accesses)
        ),
        events=(event,),
    )
