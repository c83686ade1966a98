import random

import pytest
from hypothesis import given, settings

from ltlnav.buchi import BuchiAutomaton, Edge, Guard, accepts_lasso, complement_formula, translate
from ltlnav.ltl import TRUE, Always, Atom, Not, Until, eval_word, lasso, normalize, parse_formula
from ltlnav.sweep import (
    LassoFamily,
    acceptance_table,
    enumerate_formulas,
    enumerate_lassos,
    oracle_sweep,
    semantic_table,
)
from strategies import formulas, words

a, b, obs = Atom("a"), Atom("b"), Atom("obs")


def test_true_is_one_universal_state():
    ba = translate(TRUE)
    assert ba.states == (0,)
    assert ba.initial == {0} and ba.accepting == {0}
    assert [(e.src, str(e.guard), e.dst) for e in ba.edges] == [(0, "true", 0)]


def test_atom_matches_first_letter():
    ba = translate(a, ["a"])
    for w in enumerate_lassos(("a",), 2, 2):
        assert accepts_lasso(ba, w) == ("a" in w.at(0))


def test_always_not_obs_rejects_any_obs():
    ba = translate(Always(Not(obs)), ["obs"])
    for w in enumerate_lassos(("obs",), 2, 2):
        assert accepts_lasso(ba, w) == all("obs" not in x for x in w.letters)


def test_true_accepts_anything():
    ba = translate(TRUE, ["a", "b"])
    for w in enumerate_lassos(("a", "b"), 1, 2):
        assert accepts_lasso(ba, w)


def test_until_without_b_is_rejected():
    assert not accepts_lasso(translate(Until(a, b)), lasso([], [{"a"}]))


def test_guards_stay_in_alphabet():
    ba = translate(parse_formula("[]!obs && []<>a"), ["obs", "a", "zz"])
    assert ba.alphabet == {"obs", "a", "zz"}
    for e in ba.edges:
        assert e.guard.atoms() <= ba.alphabet
        assert e.src in ba.states and e.dst in ba.states


def test_translation_is_deterministic():
    f = parse_formula("[](<>(res_a && X base) && <>(res_b && X base))")
    assert translate(f).to_json() == translate(parse_formula(str(f))).to_json()


def test_json_round_trip():
    ba = translate(parse_formula("[]!obs && []<>(a && X(c && X b))"))
    again = BuchiAutomaton.from_json(ba.to_json())
    assert again == ba
    assert again.dumps() == ba.dumps()


def test_dot_mentions_every_state():
    ba = translate(parse_formula("a U b"))
    dot = ba.to_dot()
    assert dot.startswith("digraph")
    for q in ba.states:
        assert f"q{q} [" in dot


def test_invalid_automata_rejected():
    with pytest.raises(ValueError):
        BuchiAutomaton((0,), frozenset({1}), frozenset(), (), frozenset())
    with pytest.raises(ValueError):
        BuchiAutomaton((0,), frozenset({0}), frozenset(), (Edge(0, Guard((("x", True),)), 0),), frozenset({"a"}))


def test_guard_parse():
    g = Guard.parse("!b & a")
    assert g.holds(frozenset({"a"})) and not g.holds(frozenset({"a", "b"}))
    assert str(Guard.parse("true")) == "true"
    with pytest.raises(ValueError):
        Guard.parse("a & 3")


@settings(max_examples=300, deadline=None)
@given(formulas(), words())
def test_random_pairs_agree(f, w):
    assert accepts_lasso(translate(f, ["a", "b"]), w) == eval_word(f, w)


def test_complement_disagrees_everywhere():
    fam = LassoFamily.bounded(("a", "b"), 2, 3)
    rng = random.Random(7)
    fs = list(enumerate_formulas(("a", "b"), 5))
    for f in rng.sample(fs, 150):
        pos = acceptance_table(translate(f, fam.names), fam)
        neg = acceptance_table(translate(complement_formula(f), fam.names), fam)
        assert (pos != neg).all(), str(f)


def test_batched_tables_match_scalar_functions():
    # the exhaustive sweep uses vectorised versions of eval_word and accepts_lasso;
    # they must agree with the scalar definitions pair by pair
    fam = LassoFamily.bounded(("a", "b"), 2, 3)
    rng = random.Random(3)
    fs = rng.sample(list(enumerate_formulas(("a", "b"), 6)), 60)
    cells = [(rng.randrange(len(fam.prefixes)), rng.randrange(len(fam.cycles))) for _ in range(40)]
    for f in fs:
        ba = translate(f, fam.names)
        sem, acc = semantic_table(f, fam), acceptance_table(ba, fam)
        for i, j in cells:
            w = fam.word(i, j)
            assert sem[i, j] == eval_word(f, w)
            assert acc[i, j] == accepts_lasso(ba, w)


def test_sweep_reports_mismatches():
    fam = LassoFamily.bounded(("a",), 1, 2)
    res = oracle_sweep([a, Not(a)], fam)
    assert res.mismatches == 0 and res.checks == 2 * len(fam)


def test_sweep_small_family_exhaustive():
    fam = LassoFamily.bounded(("a", "b"), 2, 3)
    res = oracle_sweep(enumerate_formulas(("a", "b"), 4), fam)
    assert res.mismatches == 0, res.examples[:3]


def test_composite_formula_automaton():
    f = parse_formula("[]!obs && [](<>ins_a && <>ins_b && <>ins_c && <>ins_d)")
    ba = translate(f)
    good = lasso([{"ins_b"}], [{"ins_a"}, {"ins_d"}, {"ins_c"}, {"ins_b"}])
    bad = lasso([{"ins_b"}], [{"ins_a"}, {"ins_d"}, {"ins_c"}])
    assert accepts_lasso(ba, good) and eval_word(f, good)
    assert not accepts_lasso(ba, bad) and not eval_word(f, bad)
    assert normalize(f) == parse_formula(ba.formula)
