"""Constants for the specmine toolkit."""

from __future__ import annotations

from typing import Final

# Synthetic transaction that models the start of a block
GHOST_PREFIX = "B"
BLOCK_NUMBER = "block.number"
BLOCK_TIMESTAMP = "block.timestamp"
BLOCK_ATTRIBUTES: Final = (BLOCK_NUMBER, BLOCK_TIMESTAMP)

# Signature used for contract creation events
SIG_CREATION = "contract creation"

# JSON-lines record types
RECORD_META = "meta"
RECORD_TX = "tx"
RECORD_STEP = "step"

# Configuration option keys
CONF_TRACE = "trace"
CONF_SEED_TX = "seed_tx"
CONF_ORDERING_CAP = "ordering_cap"
CONF_PRESET = "preset"
CONF_BOUND = "bound"
CONF_RNG_SEED = "rng_seed"
CONF_TIMEOUT = "timeout"
CONF_MAX_MOVES = "max_moves"
CONF_K_EVAL = "k_eval"
CONF_W_SIZE = "w_size"
CONF_W_PRECISION = "w_precision"
CONF_W_GENERALITY = "w_generality"
CONF_T0 = "t0"
CONF_COOLING = "cooling"
CONF_SCENARIO = "scenario"
CONF_SCRIPT = "script"
CONF_HISTORIES = "histories"
CONF_OUT = "out"
CONF_EMIT_DEPGRAPH = "emit_depgraph"
CONF_DUMP_RECIPE = "dump_recipe"
CONF_LOAD_RECIPE = "load_recipe"

# Cost-weight presets: (w_size, w_precision, w_generality)
PRESET_DEFAULT = "default"
PRESET_GENERAL = "general"
PRESET_PRECISE = "precise"
PRESETS: Final[dict[str, tuple[float, float, float]]] = {
    PRESET_DEFAULT: (1.0, 5.0, 1.0),
    PRESET_GENERAL: (1.0, 1.0, 5.0),
    PRESET_PRECISE: (0.2, 10.0, 0.0),
}

# Default values for configuration options
DEFAULT_PRESET = PRESET_DEFAULT
DEFAULT_ORDERING_CAP = 16
DEFAULT_BOUND = 10_000
DEFAULT_RNG_SEED = 42
DEFAULT_TIMEOUT = 0.0  # seconds, 0 disables
DEFAULT_MAX_MOVES = 12
DEFAULT_CACHE_SIZE = 4096  # evaluated recipes kept during one search
DEFAULT_K_EVAL = 4
DEFAULT_T0 = 10.0
DEFAULT_COOLING = 0.999
DEFAULT_SCENARIO = "rps"

# Minimum/maximum values for configuration options
MIN_ORDERING_CAP = 1
MAX_ORDERING_CAP = 1024
MIN_BOUND = 1
MAX_BOUND = 1_000_000
MIN_K_EVAL = 0
MAX_K_EVAL = 12
MAX_MERGE_K = 8  # largest k drawn for future-merging moves

# Output files written by the run pipeline
FILE_TRACE = "trace.jsonl"
FILE_HISTORIES = "histories.jsonl"
FILE_AUTOMATON = "automaton.dot"
FILE_RECIPE = "recipe.json"
FILE_COST_TRACE = "cost_trace.csv"
FILE_SUMMARY = "summary.json"
FILE_DEPGRAPH = "depgraph.dot"

# CLI exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
