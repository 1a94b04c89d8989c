from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from ketl.syntax import (TRUE, And, Common, Everyone, FormulaSyntaxError, Know, Next, Not, Prop,
                         Until, absorb, absorptive_concat, alternation_depth, basic_closure,
                         canonical_disjunction, level_closure, parse, to_text)

p, q = Prop("p"), Prop("q")


def test_parse_knowledge_of_until():
    assert parse("K1 (p U q)") == Know(1, Until(p, q))


def test_true_is_reserved_abbreviation():
    assert parse("true") == TRUE == Not(And(Prop("p0"), Not(Prop("p0"))))


def test_agent_zero_rejected():
    with pytest.raises(FormulaSyntaxError):
        parse("K0 p")


@pytest.mark.parametrize("text", ["p &", "(p", "K p", "p U", "X", ""])
def test_malformed_text_rejected(text):
    with pytest.raises(FormulaSyntaxError):
        parse(text)


@pytest.mark.parametrize("text,depth", [("K1 ~K2 K1 p", 3), ("K1 G K1 p", 1), ("p U q", 0)])
def test_alternation_depth(text, depth):
    assert alternation_depth(parse(text)) == depth


def test_sugar_round_trip_on_examples():
    for text in ["F p", "G (p -> q)", "L1 p", "p | q", "E p & C q", "X (p U q)"]:
        f = parse(text)
        assert parse(to_text(f)) == f
        assert parse(to_text(f, sugar=False)) == f


formulas = st.recursive(
    st.sampled_from([p, q]),
    lambda sub: st.one_of(
        sub.map(Not), st.tuples(sub, sub).map(lambda t: And(*t)),
        st.tuples(st.integers(1, 3), sub).map(lambda t: Know(*t)),
        sub.map(Next), sub.map(Everyone), sub.map(Common),
        st.tuples(sub, sub).map(lambda t: Until(*t))),
    max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(formulas)
def test_text_round_trip(f):
    assert parse(to_text(f)) == f
    assert parse(to_text(f, sugar=False)) == f


def test_basic_closure_of_atom():
    assert set(basic_closure(p).formulas) == {p, Not(p)}


def test_basic_closure_of_knowledge():
    assert set(basic_closure(Know(1, p)).formulas) == {Know(1, p), Not(Know(1, p)), p, Not(p)}


def test_basic_closure_of_common_knowledge():
    cl = basic_closure(Common(p), m=2).formulas
    cp = Common(p)
    for f in (Everyone(cp), Know(1, cp), Know(2, cp)):
        assert f in cl and Not(f) in cl


@settings(max_examples=60, deadline=None)
@given(formulas)
def test_closure_is_closed_under_negation(f):
    cl = basic_closure(f, m=3).formulas
    for g in cl:
        assert Not(g) in cl or (isinstance(g, Not) and g.sub in cl)


def _level_oracle(psi, agent):
    base = list(basic_closure(psi).formulas)
    out = set(base)
    for r in range(1, len(base) + 1):
        for group in combinations(base, r):
            k = Know(agent, canonical_disjunction(group))
            out |= {k, Not(k)}
    return out


@pytest.mark.parametrize("text", ["p", "p U q", "K1 p", "X p"])
def test_agent_level_closure_matches_enumeration(text):
    psi = parse(text)
    assert set(level_closure(psi, 0, 1).formulas) == _level_oracle(psi, 1)


@pytest.mark.parametrize("text", ["p", "p U q"])
def test_agent_level_closure_size(text):
    # no disjunction coincides with a member of the basic closure here
    n = len(basic_closure(parse(text)).formulas)
    assert len(level_closure(parse(text), 0, 1).formulas) == n + 2 * (2 ** n - 1)


def test_level_closure_contains_excluded_middle_knowledge():
    assert Know(1, canonical_disjunction([p, Not(p)])) in level_closure(p, 0, 1).formulas


def test_next_level_is_union_of_agent_levels():
    psi = Know(1, p)
    union = level_closure(psi, 0, 1, m=2).formulas | level_closure(psi, 0, 2, m=2).formulas
    assert level_closure(psi, 1, m=2).formulas == union


def test_absorptive_concat():
    assert absorptive_concat(("l",), "l") == ("l",)
    assert absorptive_concat(("l",), "m") == ("l", "m")
    assert absorptive_concat((), "x") == ("x",)
    assert absorb("llmll") == ("l", "m", "l")
