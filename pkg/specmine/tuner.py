"""Simulated-annealing search over abstraction recipes.

Each step builds the candidate automaton for the current recipe, scores it,
keeps the best recipe seen so far, and decides with the Metropolis rule whether
the candidate becomes the base for the next mutation.
"""

from __future__ import annotations

from collections.abc import Sequence
import csv
from dataclasses import dataclass, field
import functools
import io
import logging
import math
import random
import time
from typing import Protocol, Self

from .abstraction import (
    FieldAbstraction,
    FieldKey,
    Recipe,
    SideTable,
    abstract_histories,
    corpus_field_keys,
    identity_recipe,
)
from .automaton import (
    Automaton,
    MergeSameFuture,
    MergeSimilarFuture,
    MergeVars,
    accepts,
    apply_moves,
    build_automaton,
    observed_paths,
)
from .const import (
    DEFAULT_BOUND,
    DEFAULT_CACHE_SIZE,
    DEFAULT_COOLING,
    DEFAULT_K_EVAL,
    DEFAULT_MAX_MOVES,
    DEFAULT_PRESET,
    DEFAULT_RNG_SEED,
    DEFAULT_T0,
    DEFAULT_TIMEOUT,
    MAX_MERGE_K,
    PRESETS,
)
from .exceptions import ConfigError, EmptyCorpus
from .sessions import History

_LOGGER = logging.getLogger(__name__)


class RandomSource(Protocol):
    """The slice of :class:`random.Random` the tuner draws from."""

    def random(self) -> float: ...

    def randrange(self, stop: int) -> int: ...

    def randint(self, a: int, b: int) -> int: ...


@dataclass(frozen=True, slots=True)
class CostConfig:
    """Cost weights and annealing schedule."""

    w_size: float = PRESETS[DEFAULT_PRESET][0]
    w_precision: float = PRESETS[DEFAULT_PRESET][1]
    w_generality: float = PRESETS[DEFAULT_PRESET][2]
    k_eval: int = DEFAULT_K_EVAL
    t0: float = DEFAULT_T0
    cooling: float = DEFAULT_COOLING
    bound: int = DEFAULT_BOUND
    rng_seed: int = DEFAULT_RNG_SEED
    timeout: float = DEFAULT_TIMEOUT
    max_moves: int = DEFAULT_MAX_MOVES
    cache_size: int = DEFAULT_CACHE_SIZE

    def __post_init__(self) -> None:
        for name in ("w_size", "w_precision", "w_generality"):
            weight = getattr(self, name)
            if not math.isfinite(weight) or weight < 0:
                raise ConfigError(f"{name} must be finite and non-negative, got {weight}")
        if self.k_eval < 0:
            raise ConfigError(f"k_eval must be non-negative, got {self.k_eval}")
        if not self.t0 > 0:
            raise ConfigError(f"t0 must be positive, got {self.t0}")
        if not 0 < self.cooling < 1:
            raise ConfigError(f"cooling must lie in (0, 1), got {self.cooling}")
        if self.bound < 1:
            raise ConfigError(f"bound must be at least 1, got {self.bound}")
        if self.timeout < 0:
            raise ConfigError(f"timeout must be non-negative, got {self.timeout}")
        if self.max_moves < 0:
            raise ConfigError(f"max_moves must be non-negative, got {self.max_moves}")
        if self.cache_size < 1:
            raise ConfigError(f"cache_size must be at least 1, got {self.cache_size}")

    @classmethod
    def from_preset(cls, preset: str = DEFAULT_PRESET, **overrides: float) -> Self:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        w_size, w_precision, w_generality = PRESETS[preset]
        values: dict = {
            "w_size": w_size,
            "w_precision": w_precision,
            "w_generality": w_generality,
        }
        values.update(overrides)
        return cls(**values)


# -------------------------------------------------------------------------------------
# Cost
# -------------------------------------------------------------------------------------


def bounded_word_count(automaton: Automaton, k: int) -> int:
    """|L^k| from the initial state; paths and words coincide on deterministic automata."""
    counts = dict.fromkeys(automaton.states, 1)
    for _ in range(k):
        counts = {
            state: 1 + sum(counts[t.target] for t in automaton.outgoing(state))
            for state in automaton.states
        }
    return counts[automaton.initial]


def observed_prefix_count(automaton: Automaton, k: int) -> int:
    """Distinct label prefixes of length at most k along the history paths, with ε."""
    prefixes: set[tuple] = {()}
    for labels in observed_paths(automaton).values():
        keys = tuple(label.sort_key for label in labels[:k])
        prefixes.update(keys[:length] for length in range(1, len(keys) + 1))
    return len(prefixes)


def compute_cost(
    automaton: Automaton, corpus: Sequence[History], recipe: Recipe, cfg: CostConfig
) -> float:
    """Size penalty plus precision penalty minus generality reward, floored at 0."""
    if not all(accepts(automaton, history, recipe) for history in corpus):
        return math.inf
    language = bounded_word_count(automaton, cfg.k_eval)
    observed = observed_prefix_count(automaton, cfg.k_eval)
    unobserved = max(0, language - observed)
    novelty = unobserved / max(1, language)
    coverage_gain = min(1.0, unobserved / observed)
    cost = (
        cfg.w_size * automaton.size
        + cfg.w_precision * novelty
        - cfg.w_generality * coverage_gain
    )
    return max(0.0, cost)


@dataclass(frozen=True, slots=True)
class Candidate:
    recipe: Recipe
    automaton: Automaton
    side_table: SideTable
    cost: float


def apply_recipe(corpus: Sequence[History], recipe: Recipe) -> tuple[Automaton, SideTable]:
    """Abstract the corpus, build the tree and fold the recipe's moves."""
    abstracted = abstract_histories(corpus, recipe)
    tree = build_automaton(abstracted)
    return apply_moves(tree, recipe.moves, abstracted.side_table), abstracted.side_table


def evaluate(corpus: Sequence[History], recipe: Recipe, cfg: CostConfig) -> Candidate:
    automaton, side_table = apply_recipe(corpus, recipe)
    return Candidate(recipe, automaton, side_table, compute_cost(automaton, corpus, recipe, cfg))


# -------------------------------------------------------------------------------------
# Mutation and acceptance
# -------------------------------------------------------------------------------------

VARIANTS = tuple(FieldAbstraction)


def modify_recipe(
    recipe: Recipe,
    rng: RandomSource,
    field_keys: Sequence[FieldKey],
    variables: Sequence[str] = (),
    max_moves: int = DEFAULT_MAX_MOVES,
) -> Recipe:
    """Apply one mutation, re-drawing until an applicable one comes up."""
    can_append = len(recipe.moves) < max_moves
    applicable = (
        bool(field_keys),
        can_append,
        can_append,
        can_append and len(variables) >= 2,
        bool(recipe.moves),
    )
    if not any(applicable):
        return recipe
    option = rng.randrange(len(applicable))
    while not applicable[option]:
        option = rng.randrange(len(applicable))
    match option:
        case 0:
            key = field_keys[rng.randrange(len(field_keys))]
            current = recipe.abstraction_for(key)
            others = [variant for variant in VARIANTS if variant is not current]
            return recipe.with_abstraction(key, others[rng.randrange(len(others))])
        case 1:
            return recipe.with_move(MergeSameFuture(rng.randint(0, MAX_MERGE_K)))
        case 2:
            return recipe.with_move(MergeSimilarFuture(rng.randint(0, MAX_MERGE_K)))
        case 3:
            first = rng.randrange(len(variables))
            second = rng.randrange(len(variables) - 1)
            if second >= first:
                second += 1
            return recipe.with_move(MergeVars(variables[first], variables[second]))
        case _:
            return recipe.without_move(rng.randrange(len(recipe.moves)))


def temperature(step: int, cfg: CostConfig) -> float:
    return cfg.t0 * cfg.cooling**step


def acceptance_probability(
    c_cand: float, c_lst: float, step: int, cfg: CostConfig
) -> float:
    # also covers inf == inf
    if c_cand <= c_lst:
        return 1.0
    if math.isinf(c_cand):
        return 0.0
    heat = temperature(step, cfg)
    if heat <= 0:
        return 0.0
    return math.exp(-(c_cand - c_lst) / heat)


def accept(
    c_cand: float, c_lst: float, step: int, cfg: CostConfig, rng: RandomSource
) -> bool:
    """Metropolis rule; the rng is only consulted for uphill moves."""
    probability = acceptance_probability(c_cand, c_lst, step, cfg)
    if probability >= 1.0:
        return True
    if probability <= 0.0:
        return False
    return rng.random() < probability


# -------------------------------------------------------------------------------------
# Search
# -------------------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TraceRecord:
    step: int
    cost: float
    accepted: bool
    best_cost: float


@dataclass(frozen=True, slots=True)
class TunerTrace:
    records: tuple[TraceRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["step", "cost", "accepted", "best_cost"])
        for record in self.records:
            writer.writerow(
                [
                    record.step,
                    f"{record.cost:.6f}",
                    int(record.accepted),
                    f"{record.best_cost:.6f}",
                ]
            )
        return buffer.getvalue()


@dataclass(frozen=True, slots=True)
class TunerResult:
    automaton: Automaton
    recipe: Recipe
    trace: TunerTrace
    cost: float
    initial_cost: float
    initial_states: int
    initial_transitions: int
    accepted: int = 0
    side_table: SideTable = field(default_factory=SideTable, compare=False)

    @property
    def steps(self) -> int:
        return len(self.trace)


def tune(
    corpus: Sequence[History],
    cfg: CostConfig | None = None,
    initial: Recipe | None = None,
) -> TunerResult:
    """Anneal from the identity recipe for cfg.bound steps (or until timeout)."""
    if not corpus:
        raise EmptyCorpus("cannot tune an automaton without histories")
    cfg = cfg or CostConfig()
    rng = random.Random(cfg.rng_seed)
    field_keys = corpus_field_keys(corpus)
    @functools.lru_cache(maxsize=cfg.cache_size)
    def candidate_for(recipe: Recipe) -> Candidate:
        return evaluate(corpus, recipe, cfg)

    recipe = initial or identity_recipe()
    best: Candidate | None = None
    last: Candidate | None = None
    first: Candidate | None = None
    records: list[TraceRecord] = []
    accepted_count = 0
    deadline = time.monotonic() + cfg.timeout if cfg.timeout > 0 else math.inf

    for step in range(cfg.bound):
        if step > 0 and time.monotonic() >= deadline:
            _LOGGER.info("Tuning stopped by timeout after %d steps", step)
            break
        candidate = candidate_for(recipe)
        if first is None:
            first = candidate
        if best is None or candidate.cost < best.cost:
            best = candidate
        previous = math.inf if last is None else last.cost
        accepted = accept(candidate.cost, previous, step, cfg, rng)
        if accepted:
            last = candidate
            accepted_count += 1
        records.append(TraceRecord(step, candidate.cost, accepted, best.cost))
        base = last or candidate
        recipe = modify_recipe(
            base.recipe, rng, field_keys, base.automaton.variables(), cfg.max_moves
        )
        if step % 1000 == 0:
            _LOGGER.debug("Step %d: cost %.3f, best %.3f", step, candidate.cost, best.cost)

    assert first is not None and best is not None
    _LOGGER.info(
        "Tuning finished: cost %.3f -> %.3f in %d steps (%d accepted)",
        first.cost,
        best.cost,
        len(records),
        accepted_count,
    )
    _LOGGER.debug("Candidate cache: %s", candidate_for.cache_info())
    return TunerResult(
        automaton=best.automaton,
        recipe=best.recipe,
        trace=TunerTrace(tuple(records)),
        cost=best.cost,
        initial_cost=first.cost,
        initial_states=len(first.automaton.states),
        initial_transitions=len(first.automaton.transitions),
        accepted=accepted_count,
        side_table=best.side_table,
    )
