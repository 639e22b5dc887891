"""Test field abstractions, recipes and the side table."""

from __future__ import annotations

import pytest

from specmine.abstraction import (
    CALLER,
    OUTPUT,
    STATUS,
    TOP,
    AbstractEvent,
    Concrete,
    FieldAbstraction,
    FieldKey,
    FieldKind,
    Recipe,
    Var,
    abstract_histories,
    concretize_event,
    corpus_field_keys,
    event_fields,
    field_variant,
    identity_recipe,
    input_field,
)
from specmine.automaton import MergeSameFuture, MergeVars
from specmine.sessions import History

START_OUTPUT = FieldKey("StartGame", OUTPUT)
BET_HAND = FieldKey("Bet", input_field(2))


def test_field_names() -> None:
    """Test fields and keys render the way they are displayed."""
    assert str(CALLER) == "Caller"
    assert str(input_field(1)) == "Input(1)"
    assert str(BET_HAND) == "Bet.Input(2)"
    assert CALLER.sort_key < input_field(0).sort_key < OUTPUT.sort_key


def test_recipe_normalizes_abstractions() -> None:
    """Test identity entries vanish and keys are sorted."""
    recipe = Recipe.from_mapping(
        {
            START_OUTPUT: FieldAbstraction.VARIABLE,
            BET_HAND: FieldAbstraction.TOP,
            FieldKey("Claim", CALLER): FieldAbstraction.IDENTITY,
        }
    )

    assert [key for key, _ in recipe.abstractions] == [BET_HAND, START_OUTPUT]
    assert recipe.abstraction_for(FieldKey("Claim", CALLER)) is FieldAbstraction.IDENTITY
    assert recipe == Recipe.from_mapping(
        {BET_HAND: FieldAbstraction.TOP, START_OUTPUT: FieldAbstraction.VARIABLE}
    )
    assert hash(recipe) == hash(
        Recipe.from_mapping(
            {START_OUTPUT: FieldAbstraction.VARIABLE, BET_HAND: FieldAbstraction.TOP}
        )
    )


def test_recipe_edits_return_new_recipes() -> None:
    """Test abstraction and move edits leave the original untouched."""
    base = identity_recipe()
    edited = base.with_abstraction(START_OUTPUT, FieldAbstraction.VARIABLE)
    moved = edited.with_move(MergeSameFuture(1)).with_move(MergeVars("v0", "v1"))

    assert base == Recipe()
    assert edited.abstraction_for(START_OUTPUT) is FieldAbstraction.VARIABLE
    assert moved.moves == (MergeSameFuture(1), MergeVars("v0", "v1"))
    assert moved.without_move(0).moves == (MergeVars("v0", "v1"),)
    assert edited.with_abstraction(START_OUTPUT, FieldAbstraction.IDENTITY) == base


def test_status_is_never_abstracted() -> None:
    """Test the status field ignores the recipe."""
    recipe = Recipe.from_mapping({FieldKey("Claim", STATUS): FieldAbstraction.TOP})
    assert field_variant(recipe, "Claim", STATUS) is FieldAbstraction.IDENTITY


def test_event_fields_layout(rps_corpus: list[History]) -> None:
    """Test fields come in canonical order with one entry per input."""
    bet = rps_corpus[0].events[2]
    kinds = [of.kind for of, _ in event_fields(bet)]

    assert kinds == [
        FieldKind.CALLER,
        FieldKind.CALLEE,
        FieldKind.SIGNATURE,
        FieldKind.INPUT,
        FieldKind.INPUT,
        FieldKind.INPUT,
        FieldKind.OUTPUT,
        FieldKind.VALUE,
        FieldKind.STATUS,
    ]


def test_abstract_histories_names_variables_in_corpus_order(
    rps_corpus: list[History],
) -> None:
    """Test one new variable per occurrence, numbered through the corpus."""
    recipe = Recipe.from_mapping({START_OUTPUT: FieldAbstraction.VARIABLE})
    corpus = abstract_histories(rps_corpus, recipe)
    table = corpus.side_table

    # StartGame occurs 1 + 2 + 3 + 4 times across the histories
    assert len(table) == 10
    assert corpus.histories[0][1].value(OUTPUT) == Var("v0")
    assert corpus.histories[1][2].value(OUTPUT) == Var("v2")
    assert table.value_of("v2") == 2
    assert table.sites["v2"].occurrence == (1, 2)
    assert table.value_at((3, 4), OUTPUT) == 4
    assert corpus.histories[0][0].variables == frozenset()


def test_abstract_histories_top_and_provenance(rps_corpus: list[History]) -> None:
    """Test top hides a field and every event knows its occurrence."""
    recipe = Recipe.from_mapping({BET_HAND: FieldAbstraction.TOP})
    corpus = abstract_histories(rps_corpus, recipe)
    bet = corpus.histories[0][2]

    assert bet.value(input_field(2)) is TOP
    assert bet.value(input_field(0)) == Concrete(1)
    assert bet.provenance == {(0, 2)}
    assert "Input(2)" not in [name for name, _ in bet.rows()]
    assert ("Input(0)", "1") in bet.rows()


def test_labels_compare_without_provenance(rps_corpus: list[History]) -> None:
    """Test the same event in two histories gives equal labels."""
    corpus = abstract_histories(rps_corpus, identity_recipe())
    first, second = corpus.histories[0][1], corpus.histories[1][1]

    assert first == second
    assert first.provenance != second.provenance


def test_concretize_event_restores_the_original(rps_corpus: list[History]) -> None:
    """Test variables are resolved through the side table."""
    recipe = Recipe.from_mapping(
        {
            START_OUTPUT: FieldAbstraction.VARIABLE,
            FieldKey("Bet", input_field(0)): FieldAbstraction.VARIABLE,
        }
    )
    corpus = abstract_histories(rps_corpus, recipe)
    for h, history in enumerate(rps_corpus):
        for i, event in enumerate(history.events):
            restored = concretize_event(corpus.histories[h][i], (h, i), corpus.side_table)
            assert restored == event


def test_concretize_event_rejects_top(rps_corpus: list[History]) -> None:
    """Test a field abstracted to top cannot be restored."""
    recipe = Recipe.from_mapping({BET_HAND: FieldAbstraction.TOP})
    corpus = abstract_histories(rps_corpus, recipe)
    with pytest.raises(ValueError, match="Input"):
        concretize_event(corpus.histories[0][2], (0, 2), corpus.side_table)


def test_value_rendering() -> None:
    """Test how abstract values appear in labels."""
    event = AbstractEvent(((CALLER, Var("v3", fresh=True)), (OUTPUT, Concrete(None))))

    assert event.rows() == [("Caller", "*v3"), ("Output", "null")]
    assert Var("v3").render() == "v3"
    assert TOP.render() == "T"


def test_corpus_field_keys_skip_status(rps_corpus: list[History]) -> None:
    """Test every abstractable key appears once and status never does."""
    keys = corpus_field_keys(rps_corpus)

    assert BET_HAND in keys
    assert START_OUTPUT in keys
    assert FieldKey("Bet", input_field(3)) not in keys
    assert all(key.field.kind is not FieldKind.STATUS for key in keys)
    assert len(keys) == len(set(keys))
    # five fixed fields each, plus the inputs of Bet and Claim
    assert len(keys) == 5 + 5 + (5 + 3) + (5 + 1)
