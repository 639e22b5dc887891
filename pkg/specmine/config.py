"""Configuration loading and validation.

Values come from three layers: built-in defaults, an optional JSON config file
and command-line flags, later layers overriding earlier ones. The merged
mapping is validated with voluptuous before any work starts.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any

import voluptuous as vol

from .abstraction import Field, FieldAbstraction, FieldKey, FieldKind, Recipe
from .automaton import MergeSameFuture, MergeSimilarFuture, MergeVars, Move
from .const import (
    CONF_BOUND,
    CONF_COOLING,
    CONF_DUMP_RECIPE,
    CONF_EMIT_DEPGRAPH,
    CONF_HISTORIES,
    CONF_K_EVAL,
    CONF_LOAD_RECIPE,
    CONF_MAX_MOVES,
    CONF_ORDERING_CAP,
    CONF_OUT,
    CONF_PRESET,
    CONF_RNG_SEED,
    CONF_SCENARIO,
    CONF_SCRIPT,
    CONF_SEED_TX,
    CONF_T0,
    CONF_TIMEOUT,
    CONF_TRACE,
    CONF_W_GENERALITY,
    CONF_W_PRECISION,
    CONF_W_SIZE,
    DEFAULT_BOUND,
    DEFAULT_COOLING,
    DEFAULT_K_EVAL,
    DEFAULT_MAX_MOVES,
    DEFAULT_ORDERING_CAP,
    DEFAULT_PRESET,
    DEFAULT_RNG_SEED,
    DEFAULT_T0,
    DEFAULT_TIMEOUT,
    MAX_BOUND,
    MAX_K_EVAL,
    MAX_ORDERING_CAP,
    MIN_BOUND,
    MIN_K_EVAL,
    MIN_ORDERING_CAP,
    PRESETS,
)
from .exceptions import ConfigError, InvalidMove
from .tuner import CostConfig

_LOGGER = logging.getLogger(__name__)

_WEIGHT = vol.All(vol.Coerce(float), vol.Range(min=0))

RUN_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_TRACE): vol.Coerce(Path),
        vol.Optional(CONF_SCENARIO): str,
        vol.Optional(CONF_SCRIPT): vol.Coerce(Path),
        vol.Optional(CONF_HISTORIES): vol.Coerce(Path),
        vol.Optional(CONF_SEED_TX): vol.Coerce(str),
        vol.Optional(CONF_OUT): vol.Coerce(Path),
        vol.Optional(CONF_DUMP_RECIPE): vol.Coerce(Path),
        vol.Optional(CONF_LOAD_RECIPE): vol.Coerce(Path),
        vol.Optional(CONF_EMIT_DEPGRAPH, default=False): bool,
        vol.Optional(CONF_ORDERING_CAP, default=DEFAULT_ORDERING_CAP): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_ORDERING_CAP, max=MAX_ORDERING_CAP)
        ),
        vol.Optional(CONF_PRESET, default=DEFAULT_PRESET): vol.In(sorted(PRESETS)),
        vol.Optional(CONF_BOUND, default=DEFAULT_BOUND): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_BOUND, max=MAX_BOUND)
        ),
        vol.Optional(CONF_RNG_SEED, default=DEFAULT_RNG_SEED): vol.Coerce(int),
        vol.Optional(CONF_TIMEOUT, default=DEFAULT_TIMEOUT): vol.All(
            vol.Coerce(float), vol.Range(min=0)
        ),
        vol.Optional(CONF_MAX_MOVES, default=DEFAULT_MAX_MOVES): vol.All(
            vol.Coerce(int), vol.Range(min=0)
        ),
        vol.Optional(CONF_K_EVAL, default=DEFAULT_K_EVAL): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_K_EVAL, max=MAX_K_EVAL)
        ),
        vol.Optional(CONF_W_SIZE): _WEIGHT,
        vol.Optional(CONF_W_PRECISION): _WEIGHT,
        vol.Optional(CONF_W_GENERALITY): _WEIGHT,
        vol.Optional(CONF_T0, default=DEFAULT_T0): vol.All(
            vol.Coerce(float), vol.Range(min=0, min_included=False)
        ),
        vol.Optional(CONF_COOLING, default=DEFAULT_COOLING): vol.All(
            vol.Coerce(float),
            vol.Range(min=0, max=1, min_included=False, max_included=False),
        ),
    }
)

_FIELD_KEY_SCHEMA = vol.Schema(
    {
        vol.Required("signature"): vol.All(str, vol.Length(min=1)),
        vol.Required("field"): vol.In([kind.value for kind in FieldKind]),
        vol.Optional("index", default=0): vol.All(int, vol.Range(min=0)),
        vol.Required("abstraction"): vol.In([variant.value for variant in FieldAbstraction]),
    }
)

_K = vol.All(int, vol.Range(min=0))

_MOVE_SCHEMA = vol.Any(
    vol.Schema({vol.Required("move"): "merge_same_future", vol.Required("k"): _K}),
    vol.Schema({vol.Required("move"): "merge_similar_future", vol.Required("k"): _K}),
    vol.Schema(
        {
            vol.Required("move"): "merge_vars",
            vol.Required("v1"): str,
            vol.Required("v2"): str,
        }
    ),
)

RECIPE_SCHEMA = vol.Schema(
    {
        vol.Optional("abstractions", default=list): [_FIELD_KEY_SCHEMA],
        vol.Optional("moves", default=list): [_MOVE_SCHEMA],
    }
)


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Validated settings for one pipeline invocation."""

    trace: Path | None = None
    scenario: str | None = None
    script: Path | None = None
    histories: Path | None = None
    seed_tx: str | None = None
    out: Path | None = None
    dump_recipe: Path | None = None
    load_recipe: Path | None = None
    emit_depgraph: bool = False
    ordering_cap: int = DEFAULT_ORDERING_CAP
    preset: str = DEFAULT_PRESET
    cost: CostConfig = field(default_factory=CostConfig)


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON config file into a plain mapping."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise ConfigError(f"config file {path} not found") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err.msg}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return data


def build_run_config(
    file_values: Mapping[str, Any] | None = None,
    flag_values: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Merge defaults, file values and flags, then validate."""
    merged = dict(file_values or {})
    merged.update({key: value for key, value in (flag_values or {}).items() if value is not None})
    try:
        values = RUN_CONFIG_SCHEMA(merged)
    except vol.Invalid as err:
        raise ConfigError(f"invalid configuration: {err}") from err

    for key in (CONF_TRACE, CONF_SCRIPT, CONF_HISTORIES, CONF_LOAD_RECIPE):
        path = values.get(key)
        if path is not None and not path.is_file():
            raise ConfigError(f"{key} file {path} does not exist")

    overrides = {
        key: values[key]
        for key in (CONF_W_SIZE, CONF_W_PRECISION, CONF_W_GENERALITY)
        if key in values
    }
    cost = CostConfig.from_preset(
        values[CONF_PRESET],
        k_eval=values[CONF_K_EVAL],
        t0=values[CONF_T0],
        cooling=values[CONF_COOLING],
        bound=values[CONF_BOUND],
        rng_seed=values[CONF_RNG_SEED],
        timeout=values[CONF_TIMEOUT],
        max_moves=values[CONF_MAX_MOVES],
        **overrides,
    )
    config = RunConfig(
        trace=values.get(CONF_TRACE),
        scenario=values.get(CONF_SCENARIO),
        script=values.get(CONF_SCRIPT),
        histories=values.get(CONF_HISTORIES),
        seed_tx=values.get(CONF_SEED_TX),
        out=values.get(CONF_OUT),
        dump_recipe=values.get(CONF_DUMP_RECIPE),
        load_recipe=values.get(CONF_LOAD_RECIPE),
        emit_depgraph=values[CONF_EMIT_DEPGRAPH],
        ordering_cap=values[CONF_ORDERING_CAP],
        preset=values[CONF_PRESET],
        cost=cost,
    )
    _LOGGER.debug("Run configuration: %s", config)
    return config


def validate_output_dir(path: Path) -> Path:
    """Create the output directory if needed; its parent must exist."""
    if path.exists() and not path.is_dir():
        raise ConfigError(f"output path {path} exists and is not a directory")
    if not path.exists():
        if not path.parent.is_dir():
            raise ConfigError(f"parent directory of {path} does not exist")
        path.mkdir()
    return path


def validate_output_file(path: Path) -> Path:
    if path.is_dir():
        raise ConfigError(f"output path {path} is a directory")
    if not path.parent.is_dir():
        raise ConfigError(f"parent directory of {path} does not exist")
    return path


# -------------------------------------------------------------------------------------
# Recipe files
# -------------------------------------------------------------------------------------


def _move_to_dict(move: Move) -> dict[str, Any]:
    match move:
        case MergeSameFuture(k):
            return {"move": "merge_same_future", "k": k}
        case MergeSimilarFuture(k):
            return {"move": "merge_similar_future", "k": k}
        case MergeVars(v1, v2):
            return {"move": "merge_vars", "v1": v1, "v2": v2}
    raise ConfigError(f"cannot serialize move {move!r}")


def _move_from_dict(record: Mapping[str, Any]) -> Move:
    match record["move"]:
        case "merge_same_future":
            return MergeSameFuture(record["k"])
        case "merge_similar_future":
            return MergeSimilarFuture(record["k"])
        case _:
            return MergeVars(record["v1"], record["v2"])


def recipe_to_dict(recipe: Recipe) -> dict[str, Any]:
    return {
        "abstractions": [
            {
                "signature": key.signature,
                "field": key.field.kind.value,
                "index": key.field.index,
                "abstraction": variant.value,
            }
            for key, variant in recipe.abstractions
        ],
        "moves": [_move_to_dict(move) for move in recipe.moves],
    }


def recipe_from_dict(data: Mapping[str, Any]) -> Recipe:
    try:
        values = RECIPE_SCHEMA(dict(data))
    except vol.Invalid as err:
        raise ConfigError(f"invalid recipe: {err}") from err
    abstractions = []
    for entry in values["abstractions"]:
        kind = FieldKind(entry["field"])
        if kind is FieldKind.STATUS:
            raise ConfigError("the status field cannot be abstracted")
        index = entry["index"] if kind is FieldKind.INPUT else 0
        key = FieldKey(entry["signature"], Field(kind, index))
        abstractions.append((key, FieldAbstraction(entry["abstraction"])))
    try:
        moves = tuple(_move_from_dict(record) for record in values["moves"])
    except InvalidMove as err:
        raise ConfigError(f"invalid recipe move: {err}") from err
    return Recipe(tuple(abstractions), moves)


def load_recipe(path: Path) -> Recipe:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read recipe {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"recipe {path} must contain a JSON object")
    return recipe_from_dict(data)


def dump_recipe(recipe: Recipe, path: Path) -> None:
    path.write_text(json.dumps(recipe_to_dict(recipe), indent=2) + "\n", encoding="utf-8")
