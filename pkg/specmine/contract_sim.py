"""Deterministic toy interpreter for hand-coded contract behaviors.

Scenarios are native state-transition functions over a key-value store. Each
handler reads and writes through an :class:`ExecutionContext`, which logs every
access with its resolved location name. A failing ``require`` aborts the
handler: accesses made so far stay in the log, the event gets status Error and
pending writes never reach the store.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import BLOCK_NUMBER, RECORD_META, RECORD_STEP, SIG_CREATION
from .exceptions import (
    InvalidInputs,
    MalformedRecord,
    NonMonotonicBlockNumber,
    UnknownScenario,
    UnknownSignature,
)
from .trace_model import (
    TEXT,
    AccessMode,
    AccessRecord,
    EventRecord,
    EventStatus,
    Location,
    Scalar,
    TraceLedger,
    TraceSource,
    TransactionRecord,
    iter_lines,
    load_json_line,
    natural,
    scalar,
    validate_record,
)

_LOGGER = logging.getLogger(__name__)

OWNER = "0xOWNER"
INITIAL_BALANCE = 1_000


class Revert(Exception):
    """Raised inside a handler when a require check fails."""


# -------------------------------------------------------------------------------------
# Scripts
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Step:
    """One scripted invocation."""

    block: int
    caller: str
    signature: str
    inputs: tuple[Scalar, ...] = ()
    value: int = 0
    callee: str | None = None


@dataclass(frozen=True, slots=True)
class Script:
    """An ordered invocation sequence with non-decreasing block numbers."""

    steps: tuple[Step, ...] = ()
    scenario: str | None = None

    def __post_init__(self) -> None:
        for previous, step in zip(self.steps, self.steps[1:], strict=False):
            if step.block < previous.block:
                raise NonMonotonicBlockNumber(
                    f"step in block {step.block} follows block {previous.block}"
                )

    def __len__(self) -> int:
        return len(self.steps)


STEP_SCHEMA = vol.Schema(
    {
        vol.Required("type"): RECORD_STEP,
        vol.Required("block"): natural,
        vol.Required("caller"): TEXT,
        vol.Required("sig"): TEXT,
        vol.Optional("in", default=list): [scalar],
        vol.Optional("value", default=0): natural,
        vol.Optional("callee", default=None): vol.Any(None, TEXT),
    }
)

SCRIPT_META_SCHEMA = vol.Schema(
    {
        vol.Required("type"): RECORD_META,
        vol.Optional("scenario", default=None): vol.Any(None, TEXT),
    }
)


def step_from_dict(record: Any) -> Step:
    valid = validate_record(STEP_SCHEMA, record, "step")
    return Step(
        block=valid["block"],
        caller=valid["caller"],
        signature=valid["sig"],
        inputs=tuple(valid["in"]),
        value=valid["value"],
        callee=valid["callee"],
    )


def step_to_dict(step: Step) -> dict[str, Any]:
    record: dict[str, Any] = {
        "type": RECORD_STEP,
        "block": step.block,
        "caller": step.caller,
        "sig": step.signature,
        "in": list(step.inputs),
        "value": step.value,
    }
    if step.callee is not None:
        record["callee"] = step.callee
    return record


def parse_script(source: TraceSource) -> Script:
    """Parse ``step`` records plus an optional ``meta`` scenario record."""
    steps: list[Step] = []
    scenario: str | None = None
    for line_number, text in iter_lines(source):
        record = load_json_line(text, line_number)
        if record is None:
            continue
        try:
            match record.get("type"):
                case "step":
                    steps.append(step_from_dict(record))
                case "meta":
                    scenario = validate_record(SCRIPT_META_SCHEMA, record, "meta")["scenario"]
                case other:
                    raise MalformedRecord(f"unknown record type {other!r}")
        except MalformedRecord as err:
            raise MalformedRecord(str(err), line_number) from err
    return Script(tuple(steps), scenario)


def serialize_script(script: Script) -> str:
    lines = []
    if script.scenario is not None:
        lines.append(json.dumps({"type": RECORD_META, "scenario": script.scenario}))
    lines.extend(json.dumps(step_to_dict(step)) for step in script.steps)
    return "".join(f"{line}\n" for line in lines)


def load_script(path: Path) -> Script:
    with path.open(encoding="utf-8") as handle:
        return parse_script(handle)


# -------------------------------------------------------------------------------------
# Execution
# -------------------------------------------------------------------------------------


@dataclass(slots=True)
class ContractState:
    """Committed storage and balances shared across transactions."""

    storage: dict[str, Scalar] = field(default_factory=dict)
    balances: dict[str, int] = field(default_factory=dict)


class ExecutionContext:
    """Logs accesses of one transaction and buffers its writes."""

    def __init__(
        self, state: ContractState, step: Step, callee: str, block_number: int
    ) -> None:
        self._state = state
        self._storage: dict[str, Scalar] = {}
        self._balances: dict[str, int] = {}
        self.accesses: list[AccessRecord] = []
        self.caller = step.caller
        self.callee = callee
        self.value = step.value
        self.prefix = callee.removeprefix("0x")
        self._block_number = block_number

    def _log(self, mode: AccessMode, location: Location) -> None:
        self.accesses.append(AccessRecord(mode, location, len(self.accesses)))

    def slot(self, name: str) -> str:
        return f"{self.prefix}.{name}"

    def read(self, name: str) -> Scalar:
        key = self.slot(name)
        self._log(AccessMode.READ, Location.storage(key))
        if key in self._storage:
            return self._storage[key]
        return self._state.storage.get(key, 0)

    def write(self, name: str, value: Scalar) -> None:
        key = self.slot(name)
        self._log(AccessMode.WRITE, Location.storage(key))
        self._storage[key] = value

    def block_number(self) -> int:
        self._log(AccessMode.READ, Location.block(BLOCK_NUMBER))
        return self._block_number

    def _balance(self, account: str) -> int:
        self._log(AccessMode.READ, Location.balance(account))
        if account in self._balances:
            return self._balances[account]
        return self._state.balances.get(account, INITIAL_BALANCE)

    def transfer(self, source: str, target: str, amount: int) -> None:
        """Move currency between accounts, logging balance accesses."""
        available = self._balance(source)
        self.require(available >= amount)
        self._balances[source] = available - amount
        self._log(AccessMode.WRITE, Location.balance(source))
        self._balances[target] = self._balance(target) + amount
        self._log(AccessMode.WRITE, Location.balance(target))

    def pay_out(self, target: str, amount: int) -> None:
        self.transfer(self.callee, target, amount)

    @staticmethod
    def require(condition: bool) -> None:
        if not condition:
            raise Revert

    def commit(self) -> None:
        self._state.storage.update(self._storage)
        self._state.balances.update(self._balances)


type Handler = Callable[[ExecutionContext, tuple[Scalar, ...]], Scalar | None]


@dataclass(frozen=True, slots=True)
class Scenario:
    """A named contract behavior: one handler per function signature.

    ``inputs`` lists one voluptuous validator per parameter; signatures
    missing from it take no inputs.
    """

    name: str
    address: str
    handlers: Mapping[str, Handler]
    inputs: Mapping[str, Sequence[Any]] = field(default_factory=dict)

    def handler(self, signature: str) -> Handler:
        try:
            return self.handlers[signature]
        except KeyError:
            raise UnknownSignature(
                f"scenario {self.name!r} has no function {signature!r}"
            ) from None

    def check_inputs(self, step: Step) -> None:
        schema = vol.Schema(vol.ExactSequence(list(self.inputs.get(step.signature, ()))))
        try:
            schema(step.inputs)
        except vol.Invalid as err:
            raise InvalidInputs(
                f"{step.signature} in block {step.block} got inputs {list(step.inputs)!r}: {err}"
            ) from err


def run_scenario(scenario: Scenario, script: Script) -> TraceLedger:
    """Execute a script and record one transaction per step."""
    state = ContractState()
    transactions: list[TransactionRecord] = []
    for number, step in enumerate(script.steps, start=1):
        handler = scenario.handler(step.signature)
        scenario.check_inputs(step)
        callee = step.callee or scenario.address
        ctx = ExecutionContext(state, step, callee, step.block)
        status = EventStatus.SUCCESS
        output: Scalar | None = None
        try:
            output = handler(ctx, step.inputs)
        except Revert:
            status = EventStatus.ERROR
            _LOGGER.debug("Step %d (%s) reverted", number, step.signature)
        else:
            ctx.commit()
        event = EventRecord(
            caller=step.caller,
            callee=callee,
            signature=step.signature,
            inputs=step.inputs,
            output=output,
            value=step.value,
            status=status,
        )
        transactions.append(
            TransactionRecord(
                id=str(number),
                block_number=step.block,
                accesses=tuple(ctx.accesses),
                events=(event,),
            )
        )
    _LOGGER.info(
        "Simulated %d transactions of scenario %s", len(transactions), scenario.name
    )
    return TraceLedger(tuple(transactions))


# -------------------------------------------------------------------------------------
# Rock-paper-scissors
# -------------------------------------------------------------------------------------

RPS_AMOUNT = 42  # wager per bet
RPS_DURATION = 4  # blocks between betting close and claim close
RPS_ROCK, RPS_PAPER, RPS_SCISSORS = 1, 2, 3


def winning_hand(hand_a: int, hand_b: int) -> int:
    """Paper beats rock, scissors beat paper, rock beats scissors."""
    return hand_b if hand_a % 3 + 1 == hand_b else hand_a


def _rps_create(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> None:
    ctx.write("gC", 0)
    return None


def _rps_start_game(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> Scalar:
    game_id = int(ctx.read("gC")) + 1
    ctx.write("gC", game_id)
    closes_at = ctx.block_number() + RPS_DURATION
    game = f"games[{game_id}]"
    ctx.write(game, 1)
    for name, value in (("pA", 0), ("pB", 0), ("hA", 0), ("hB", 0)):
        ctx.write(f"{game}.{name}", value)
    ctx.write(f"{game}.cS", closes_at)
    return game_id


def _rps_bet(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> None:
    game_id, position, hand = (int(value) for value in inputs)
    ctx.require(0 < hand < 4 and position < 2)
    ctx.require(ctx.value == RPS_AMOUNT)
    ctx.transfer(ctx.caller, ctx.callee, ctx.value)
    game = f"games[{game_id}]"
    ctx.read(game)
    closes_at = int(ctx.read(f"{game}.cS"))
    ctx.require(closes_at > 0)
    ctx.require(ctx.block_number() < closes_at)
    if ctx.read(f"{game}.hA") == 0 and position == 0:
        ctx.write(f"{game}.pA", ctx.caller)
        ctx.write(f"{game}.hA", hand)
    elif ctx.read(f"{game}.hB") == 0 and position == 1:
        ctx.write(f"{game}.pB", ctx.caller)
        ctx.write(f"{game}.hB", hand)
    else:
        ctx.require(False)
    return None


def _rps_claim(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> None:
    game = f"games[{int(inputs[0])}]"
    ctx.read(game)
    closes_at = int(ctx.read(f"{game}.cS"))
    ctx.require(closes_at > 0)
    now = ctx.block_number()
    ctx.require(closes_at <= now < closes_at + RPS_DURATION)
    ctx.write(f"{game}.cS", 0)

    hand_a = int(ctx.read(f"{game}.hA"))
    hand_b = int(ctx.read(f"{game}.hB"))
    if hand_a == 0:
        # no player A: refund B if present
        if hand_b != 0:
            ctx.pay_out(str(ctx.read(f"{game}.pB")), RPS_AMOUNT)
        return None
    if hand_b == 0:
        ctx.pay_out(str(ctx.read(f"{game}.pA")), RPS_AMOUNT)
        return None
    if hand_a == hand_b:
        ctx.pay_out(str(ctx.read(f"{game}.pA")), RPS_AMOUNT)
        ctx.pay_out(str(ctx.read(f"{game}.pB")), RPS_AMOUNT)
        return None
    winner = "pB" if winning_hand(hand_a, hand_b) == hand_b else "pA"
    ctx.pay_out(str(ctx.read(f"{game}.{winner}")), 2 * RPS_AMOUNT)
    return None


RPS_SCENARIO = Scenario(
    name="rps",
    address="0xA",
    handlers={
        SIG_CREATION: _rps_create,
        "StartGame": _rps_start_game,
        "Bet": _rps_bet,
        "Claim": _rps_claim,
    },
    inputs={"Bet": (natural, natural, natural), "Claim": (natural,)},
)


def _player(game: int, position: int) -> str:
    return f"0xP{game}{'AB'[position]}"


def _bet(block: int, game: int, position: int, hand: int, callee: str | None = None) -> Step:
    return Step(block, _player(game, position), "Bet", (game, position, hand), RPS_AMOUNT, callee)


def _rps_steps(callee: str | None = None) -> list[Step]:
    return [
        Step(7, OWNER, SIG_CREATION, callee=callee),
        Step(9, _player(1, 0), "StartGame", callee=callee),
        Step(10, _player(2, 1), "StartGame", callee=callee),
        _bet(10, 2, 1, RPS_SCISSORS, callee),
        _bet(11, 1, 0, RPS_ROCK, callee),
        _bet(12, 1, 1, RPS_PAPER, callee),
        Step(13, _player(1, 1), "Claim", (1,), callee=callee),
        Step(14, _player(3, 0), "StartGame", callee=callee),
        Step(14, _player(2, 1), "Claim", (2,), callee=callee),
        _bet(15, 3, 0, RPS_SCISSORS, callee),
        _bet(15, 3, 1, RPS_ROCK, callee),
        Step(16, _player(4, 1), "StartGame", callee=callee),
        _bet(17, 4, 1, RPS_ROCK, callee),
        _bet(17, 4, 0, RPS_ROCK, callee),
        Step(20, _player(4, 0), "Claim", (4,), callee=callee),
        Step(20, _player(4, 1), "Claim", (4,), callee=callee),
    ]


def builtin_rps_script() -> tuple[Scenario, Script]:
    """The 16-step rock-paper-scissors workload over blocks 7 to 20."""
    return RPS_SCENARIO, Script(tuple(_rps_steps()), RPS_SCENARIO.name)


def builtin_rps_two_instances_script() -> tuple[Scenario, Script]:
    """The rps workload interleaved with a game on a second instance ``0xB``."""
    second = "0xB"
    extra = [
        Step(7, OWNER, SIG_CREATION, callee=second),
        Step(9, _player(1, 0), "StartGame", callee=second),
        _bet(11, 1, 0, RPS_PAPER, second),
        _bet(12, 1, 1, RPS_PAPER, second),
        Step(13, _player(1, 0), "Claim", (1,), callee=second),
    ]
    # stable sort keeps instance-A steps first within a block
    steps = sorted(_rps_steps() + extra, key=lambda step: step.block)
    return RPS_SCENARIO, Script(tuple(steps), RPS_SCENARIO.name)


# -------------------------------------------------------------------------------------
# ERC20-style token
# -------------------------------------------------------------------------------------

TOKEN_HOLDERS = ("0xU1", "0xU2")
TOKEN_GRANT = 100


def _token_create(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> None:
    ctx.write("totalSupply", TOKEN_GRANT * len(TOKEN_HOLDERS))
    for holder in TOKEN_HOLDERS:
        ctx.write(f"balances[{holder}]", TOKEN_GRANT)
    return None


def _token_approve(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> Scalar:
    spender, amount = str(inputs[0]), int(inputs[1])
    ctx.require(int(ctx.read(f"balances[{ctx.caller}]")) >= amount)
    ctx.write(f"allowed[{ctx.caller}][{spender}]", amount)
    return 1


def _token_transfer_from(ctx: ExecutionContext, inputs: tuple[Scalar, ...]) -> Scalar:
    source, target, amount = str(inputs[0]), str(inputs[1]), int(inputs[2])
    allowance = f"allowed[{source}][{ctx.caller}]"
    allowed = int(ctx.read(allowance))
    held = int(ctx.read(f"balances[{source}]"))
    ctx.require(allowed >= amount and held >= amount)
    ctx.write(f"balances[{source}]", held - amount)
    received = int(ctx.read(f"balances[{target}]"))
    ctx.write(f"balances[{target}]", received + amount)
    ctx.write(allowance, allowed - amount)
    return 1


TOKEN_SCENARIO = Scenario(
    name="token",
    address="0xT",
    handlers={
        SIG_CREATION: _token_create,
        "approve": _token_approve,
        "transferFrom": _token_transfer_from,
    },
    inputs={"approve": (TEXT, natural), "transferFrom": (TEXT, TEXT, natural)},
)


def builtin_token_script() -> tuple[Scenario, Script]:
    """Approve/transferFrom rounds over distinct pairs, one chained hand-off."""
    steps = [
        Step(1, OWNER, SIG_CREATION),
        Step(2, "0xU1", "approve", ("0xV1", 50)),
        Step(2, "0xU2", "approve", ("0xV2", 30)),
        Step(3, "0xV1", "transferFrom", ("0xU1", "0xV1", 50)),
        Step(3, "0xV2", "transferFrom", ("0xU2", "0xV2", 30)),
        # V1 passes on what it received
        Step(4, "0xV1", "approve", ("0xV3", 20)),
        Step(5, "0xV3", "transferFrom", ("0xV1", "0xV3", 20)),
    ]
    return TOKEN_SCENARIO, Script(tuple(steps), TOKEN_SCENARIO.name)


SCENARIOS: dict[str, Scenario] = {
    RPS_SCENARIO.name: RPS_SCENARIO,
    TOKEN_SCENARIO.name: TOKEN_SCENARIO,
}

BUILTIN_SCRIPTS: dict[str, Callable[[], tuple[Scenario, Script]]] = {
    RPS_SCENARIO.name: builtin_rps_script,
    "rps2": builtin_rps_two_instances_script,
    TOKEN_SCENARIO.name: builtin_token_script,
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(
            f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}"
        ) from None


def builtin_script(name: str) -> tuple[Scenario, Script]:
    if name not in BUILTIN_SCRIPTS:
        raise UnknownScenario(
            f"no built-in script {name!r}; expected one of {sorted(BUILTIN_SCRIPTS)}"
        )
    return BUILTIN_SCRIPTS[name]()


def scenario_names() -> Iterable[str]:
    return sorted(BUILTIN_SCRIPTS)
