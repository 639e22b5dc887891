"""Test automaton construction, generalizing moves and acceptance."""

from __future__ import annotations

from collections import Counter
from dataclasses import replace
import time

from hypothesis import given, settings
from hypothesis import strategies as st
import pytest

from specmine.abstraction import (
    CALLER,
    OUTPUT,
    STATUS,
    Concrete,
    FieldAbstraction,
    FieldKey,
    Recipe,
    Var,
    abstract_histories,
    corpus_field_keys,
    identity_recipe,
    input_field,
)
from specmine.automaton import (
    Automaton,
    DisjointSet,
    MergeSameFuture,
    MergeSimilarFuture,
    MergeVars,
    accepts,
    apply_move,
    apply_moves,
    bounded_language,
    build_automaton,
    merge_same_future,
    merge_similar_future,
    merge_vars,
    observed_paths,
    to_dot,
)
from specmine.const import SIG_CREATION
from specmine.exceptions import InvalidMove, UnknownState, UnknownVariable
from specmine.sessions import History
from specmine.trace_model import EventRecord, EventStatus
from specmine.tuner import apply_recipe

RPS_SIGNATURES = (SIG_CREATION, "StartGame", "Bet", "Claim")


def generalizing_recipe() -> Recipe:
    """Hide callers and hands, tie game ids together, then merge by one-step futures."""
    abstractions = {
        FieldKey(signature, CALLER): FieldAbstraction.TOP for signature in RPS_SIGNATURES
    }
    abstractions.update(
        {
            FieldKey("StartGame", OUTPUT): FieldAbstraction.VARIABLE,
            FieldKey("Bet", input_field(0)): FieldAbstraction.VARIABLE,
            FieldKey("Bet", input_field(1)): FieldAbstraction.TOP,
            FieldKey("Bet", input_field(2)): FieldAbstraction.TOP,
            FieldKey("Claim", input_field(0)): FieldAbstraction.VARIABLE,
        }
    )
    moves = [MergeVars("v0", f"v{i}") for i in range(1, 21)]
    return Recipe.from_mapping(abstractions, [*moves, MergeSameFuture(1)])


def _tree(corpus: list[History], recipe: Recipe | None = None) -> Automaton:
    return build_automaton(abstract_histories(corpus, recipe or identity_recipe()))


def _assert_partition(automaton: Automaton, corpus: list[History]) -> None:
    placed = Counter(
        occurrence for t in automaton.transitions for occurrence in t.provenance
    )
    expected = {(h, i) for h, history in enumerate(corpus) for i in range(len(history))}
    assert set(placed) == expected
    assert all(count == 1 for count in placed.values())


def test_identity_tree_shape(rps_corpus: list[History]) -> None:
    """Test the prefix tree of the rps histories."""
    tree = _tree(rps_corpus)
    leaves = [state for state in tree.states if not tree.outgoing(state)]

    assert len(tree.states) == 17
    assert len(tree.transitions) == 16
    assert tree.size == 33
    assert len(leaves) == 4
    assert tree.initial == 0
    assert len(tree.outgoing(0)) == 1
    assert tree.is_deterministic()
    _assert_partition(tree, rps_corpus)


def test_build_is_canonical(rps_corpus: list[History]) -> None:
    """Test rebuilding gives an equal automaton and equal hash."""
    first, second = _tree(rps_corpus), _tree(rps_corpus)

    assert first == second
    assert hash(first) == hash(second)
    assert first.canonical() == first


def test_outgoing_rejects_unknown_state(rps_corpus: list[History]) -> None:
    """Test asking for a missing state fails."""
    with pytest.raises(UnknownState):
        _tree(rps_corpus).outgoing(99)


def test_bounded_language_counts_prefixes(rps_corpus: list[History]) -> None:
    """Test the two-step language of the tree root."""
    tree = _tree(rps_corpus)

    assert len(bounded_language(tree, tree.initial, 0)) == 1
    assert len(bounded_language(tree, tree.initial, 2)) == 3
    assert len(bounded_language(tree, tree.initial, 3)) == 5


def test_identity_tree_accepts_exactly_its_histories(rps_corpus: list[History]) -> None:
    """Test the tree accepts each history and rejects a changed hand."""
    tree = _tree(rps_corpus)
    recipe = identity_recipe()
    changed = replace(rps_corpus[0].events[2], inputs=(1, 0, 3))
    variant = History((*rps_corpus[0].events[:2], changed))

    assert all(accepts(tree, history, recipe) for history in rps_corpus)
    assert accepts(tree, rps_corpus[0].events[:3], recipe)
    assert not accepts(tree, variant, recipe)


def test_top_accepts_any_value(rps_corpus: list[History]) -> None:
    """Test a hand abstracted to top matches every hand."""
    recipe = Recipe.from_mapping({FieldKey("Bet", input_field(2)): FieldAbstraction.TOP})
    tree = _tree(rps_corpus, recipe)
    changed = replace(rps_corpus[0].events[2], inputs=(1, 0, 3))

    assert accepts(tree, (*rps_corpus[0].events[:2], changed), recipe)


def test_merge_same_future_zero_collapses_everything(rps_corpus: list[History]) -> None:
    """Test k=0 merges every state into one with a loop per label."""
    merged = merge_same_future(_tree(rps_corpus), 0)

    assert len(merged.states) == 1
    assert len(merged.transitions) == 16
    assert all(t.source == t.target == 0 for t in merged.transitions)
    assert all(accepts(merged, history, identity_recipe()) for history in rps_corpus)


def test_merge_same_future_joins_the_leaves(rps_corpus: list[History]) -> None:
    """Test only states with equal bounded futures merge."""
    merged = merge_same_future(_tree(rps_corpus), 8)

    assert len(merged.states) == 14
    assert len(merged.transitions) == 16
    _assert_partition(merged, rps_corpus)


def test_merge_similar_future(rps_corpus: list[History]) -> None:
    """Test k=0 keeps the tree and k=1 folds leaves into every other state."""
    tree = _tree(rps_corpus)

    assert merge_similar_future(tree, 0) == tree
    folded = merge_similar_future(tree, 1)
    assert len(folded.states) == 1
    assert all(accepts(folded, history, identity_recipe()) for history in rps_corpus)


def test_merge_vars_marks_rebinding_occurrences(token_corpus: list[History]) -> None:
    """Test chaining one variable through the token histories."""
    recipe = Recipe.from_mapping(
        {
            FieldKey("approve", CALLER): FieldAbstraction.VARIABLE,
            FieldKey("transferFrom", input_field(0)): FieldAbstraction.VARIABLE,
        },
        [MergeVars("v0", f"v{i}") for i in range(1, 6)],
    )
    automaton, side_table = apply_recipe(token_corpus, recipe)

    assert len(side_table) == 6
    assert automaton.variables() == ["v0"]
    fresh = [
        t
        for t in automaton.transitions
        if any(isinstance(v, Var) and v.fresh for _, v in t.event.fields)
    ]
    assert len(fresh) == 1
    assert fresh[0].provenance == {(1, 3)}
    assert fresh[0].event.signature == "approve"
    assert all(accepts(automaton, history, recipe) for history in token_corpus)
    _assert_partition(automaton, token_corpus)


def test_merge_vars_requires_both_variables(token_corpus: list[History]) -> None:
    """Test merging a missing variable fails, and is skipped inside a recipe."""
    recipe = Recipe.from_mapping({FieldKey("approve", CALLER): FieldAbstraction.VARIABLE})
    corpus = abstract_histories(token_corpus, recipe)
    tree = build_automaton(corpus)

    with pytest.raises(UnknownVariable):
        merge_vars(tree, "v0", "v9", corpus.side_table)
    assert apply_moves(tree, [MergeVars("v0", "v9")], corpus.side_table) == tree


def test_generalizing_recipe_on_rps(rps_corpus: list[History]) -> None:
    """Test tied game ids and one-step merging give a small sound automaton."""
    recipe = generalizing_recipe()
    automaton, _ = apply_recipe(rps_corpus, recipe)
    labels = [t.event for t in automaton.transitions]
    start_games = [t for t in automaton.transitions if t.event.signature == "StartGame"]

    assert automaton.variables() == ["v0"]
    # initial, created, then one state looping over games, bets and claims
    assert len(automaton.states) == 3
    assert len(automaton.transitions) == 6
    assert automaton.is_deterministic()
    assert all(accepts(automaton, history, recipe) for history in rps_corpus)
    # the first game binds v0, every later one rebinds it
    assert [t.event.value(OUTPUT) for t in start_games if t.source != t.target] == [Var("v0")]
    assert [t.event.value(OUTPUT) for t in start_games if t.source == t.target] == [
        Var("v0", fresh=True)
    ]
    assert any(
        label.signature == "Claim" and label.value(STATUS) == Concrete(EventStatus.ERROR.value)
        for label in labels
    )
    _assert_partition(automaton, rps_corpus)


def test_acceptance_with_many_variables_on_one_state(rps_corpus: list[History]) -> None:
    """Test acceptance stays fast when every field is its own variable on one state."""
    recipe = Recipe.from_mapping(
        dict.fromkeys(corpus_field_keys(rps_corpus), FieldAbstraction.VARIABLE),
        [MergeSameFuture(0)],
    )
    automaton, _ = apply_recipe(rps_corpus, recipe)
    prefix = History(rps_corpus[3].events[:3])

    start = time.perf_counter()
    assert len(automaton.states) == 1
    assert len(automaton.variables()) > 30
    assert all(accepts(automaton, history, recipe) for history in rps_corpus)
    # no provenance path has this length, so the configuration search decides it
    assert accepts(automaton, prefix, recipe)
    assert time.perf_counter() - start < 5.0


def test_observed_paths_follow_histories(rps_corpus: list[History]) -> None:
    """Test each history's labels can be read back from provenance."""
    tree = _tree(rps_corpus)
    paths = observed_paths(tree)

    assert sorted(paths) == [0, 1, 2, 3]
    assert [len(path) for path in paths.values()] == [5, 5, 6, 9]
    assert paths[0][0] == paths[3][0]


def test_moves_validate_parameters() -> None:
    """Test negative bounds and self merges are rejected."""
    with pytest.raises(InvalidMove):
        MergeSameFuture(-1)
    with pytest.raises(InvalidMove):
        MergeSimilarFuture(-2)
    with pytest.raises(InvalidMove):
        MergeVars("v1", "v1")


def test_disjoint_set() -> None:
    """Test unions, representatives and repeated unions."""
    classes = DisjointSet(range(5))

    assert classes.union(3, 4)
    assert classes.union(1, 3)
    assert not classes.union(4, 1)
    assert classes.find(4) == classes.find(1)
    assert classes.find(0) == 0
    assert classes.find(2) != classes.find(3)


def test_automaton_dot(rps_corpus: list[History]) -> None:
    """Test the DOT output marks the initial state and lists label rows."""
    automaton, _ = apply_recipe(rps_corpus, generalizing_recipe())
    dot = to_dot(automaton)

    assert "doublecircle" not in dot
    assert "start [label=\"\" shape=point]" in dot
    assert "start -> 0" in dot
    assert "label=<<table" in dot
    assert "*v0" in dot
    assert "Caller" not in dot
    assert dot == to_dot(automaton)


# -------------------------------------------------------------------------------------
# Soundness
# -------------------------------------------------------------------------------------

MOVES = st.one_of(
    st.builds(MergeSameFuture, st.integers(min_value=0, max_value=3)),
    st.builds(MergeSimilarFuture, st.integers(min_value=0, max_value=3)),
    st.tuples(st.integers(0, 25), st.integers(0, 25))
    .filter(lambda pair: pair[0] != pair[1])
    .map(lambda pair: MergeVars(f"v{pair[0]}", f"v{pair[1]}")),
)


@settings(max_examples=1000, deadline=None)
@given(data=st.data())
def test_every_recipe_accepts_its_corpus(
    rps_corpus: list[History], data: st.DataObject
) -> None:
    """Test any recipe yields an automaton accepting every history."""
    keys = corpus_field_keys(rps_corpus)
    chosen = data.draw(
        st.dictionaries(st.sampled_from(keys), st.sampled_from(FieldAbstraction), max_size=8)
    )
    moves = data.draw(st.lists(MOVES, max_size=6))
    recipe = Recipe.from_mapping(chosen, moves)
    automaton, _ = apply_recipe(rps_corpus, recipe)

    assert automaton.is_deterministic()
    assert all(accepts(automaton, history, recipe) for history in rps_corpus)
    _assert_partition(automaton, rps_corpus)


@st.composite
def corpora(draw: st.DrawFn) -> list[History]:
    event = st.builds(
        EventRecord,
        caller=st.sampled_from(("0xU1", "0xU2")),
        callee=st.just("0xA"),
        signature=st.sampled_from(("f", "g")),
        inputs=st.tuples(st.integers(0, 2)),
        output=st.integers(0, 2),
    )
    histories = st.lists(event, min_size=1, max_size=5).map(lambda events: History(tuple(events)))
    return draw(st.lists(histories, min_size=1, max_size=4))


@settings(max_examples=1000, deadline=None)
@given(data=st.data())
def test_moves_never_lose_histories(data: st.DataObject) -> None:
    """Test every single move keeps each history of a random corpus accepted."""
    corpus = data.draw(corpora())
    keys = corpus_field_keys(corpus)
    chosen = data.draw(
        st.dictionaries(st.sampled_from(keys), st.sampled_from(FieldAbstraction), max_size=4)
    )
    recipe = Recipe.from_mapping(chosen)
    abstracted = abstract_histories(corpus, recipe)
    automaton = build_automaton(abstracted)

    for move in data.draw(st.lists(MOVES, min_size=1, max_size=4)):
        try:
            automaton = apply_move(automaton, move, abstracted.side_table)
        except UnknownVariable:
            continue
        assert all(accepts(automaton, history, recipe) for history in corpus)
        _assert_partition(automaton, corpus)
