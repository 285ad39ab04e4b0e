import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rscount.alphamap import (
    AlphaMap,
    StructureMode,
    UnrestrictedAlpha,
    alpha_space_size,
    apply,
    apply_decoded,
    count_by_enumeration,
    count_closed_form,
    enumerate_alphas,
    is_optimal,
    rs_affected,
)
from rscount.errors import CapacityError
from rscount.formula import And, Atom, Not, Or, Xor
from rscount.knowledge import ConceptSpace, Support, knowledge_from_concept_exprs, knowledge_from_function

PERM, COMPLETE, UNRES = StructureMode.PERMUTATION, StructureMode.COMPLETE, StructureMode.UNRESTRICTED


def kb(k, expr):
    return knowledge_from_concept_exprs(ConceptSpace(k, 2), [expr])


def XOR3():
    return kb(3, Xor(Atom(1), Atom(2), Atom(3)))


def AND3():
    return kb(3, And(Atom(1), Atom(2), Atom(3)))


def test_space_sizes():
    s = ConceptSpace(3, 2)
    assert alpha_space_size(s, PERM) == 6 * 64
    assert alpha_space_size(s, COMPLETE) == 27 * 64
    assert alpha_space_size(s, UNRES) == 8**8


def test_identity_map():
    s = ConceptSpace(2, 3)
    ident = AlphaMap.identity(s)
    assert (ident.A == np.eye(6, dtype=bool)).all()
    assert (ident.O == np.eye(2, dtype=bool)).all()
    assert ident.satisfies(PERM) and ident.satisfies(COMPLETE)
    for c in s.vectors():
        assert apply_decoded(ident, c) == c


def test_from_blocks_routing_and_values():
    s = ConceptSpace(2, 2)
    # gt concept 0 goes to predicted concept 1 negated; gt concept 1 to predicted 0 unchanged
    a = AlphaMap.from_blocks(s, (1, 0), [(1, 0), (0, 1)])
    assert apply_decoded(a, (0, 1)) == (1, 1)
    assert apply_decoded(a, (1, 0)) == (0, 0)
    assert a.O.tolist() == [[False, True], [True, False]]


def test_complete_map_may_break_one_hot():
    s = ConceptSpace(2, 2)
    a = AlphaMap.from_blocks(s, (0, 0), [(0, 1), (0, 1)])
    assert a.satisfies(COMPLETE) and not a.satisfies(PERM)
    assert apply(a, (0, 1)) == (1, 1, 0, 0)
    assert apply_decoded(a, (0, 1)) is None


def test_matrix_round_trip():
    s = ConceptSpace(2, 2)
    a = AlphaMap.from_blocks(s, (1, 0), [(1, 1), (0, 1)])
    assert AlphaMap.from_matrix(s, a.A) == a


def test_enumeration_yields_each_map_once():
    s = ConceptSpace(2, 2)
    for mode in (PERM, COMPLETE):
        maps = list(enumerate_alphas(s, mode))
        assert len(maps) == alpha_space_size(s, mode)
        assert len({m.targets for m in maps}) == len(maps)
        assert all(m.satisfies(mode) for m in maps)
    un = list(enumerate_alphas(ConceptSpace(1, 2), UNRES))
    assert len(un) == 4


def test_enumeration_cap():
    with pytest.raises(CapacityError):
        list(enumerate_alphas(ConceptSpace(3, 2), UNRES, cap=1000))
    with pytest.raises(CapacityError):
        count_by_enumeration(XOR3(), Support.exhaustive(XOR3()), PERM, cap=10)


# --- reference counts ---------------------------------------------------------


@pytest.mark.parametrize(
    "make, support, mode, expected",
    [
        (AND3, "all", PERM, 6),
        (XOR3, "all", PERM, 24),
        (XOR3, [(0, 1, 1)], PERM, 192),
        (AND3, [(1, 1, 1)], PERM, 48),
        (AND3, [(0, 1, 1)], PERM, 336),
    ],
)
def test_reference_counts(make, support, mode, expected):
    K = make()
    supp = Support.exhaustive(K) if support == "all" else Support(K, support)
    assert count_by_enumeration(K, supp, mode) == expected


def test_single_example_count_does_not_depend_on_which_example():
    K = XOR3()
    counts = {count_by_enumeration(K, Support(K, [c]), PERM) for c in K.space.vectors()}
    assert counts == {192}


# --- small hand oracles ---------------------------------------------------------


def test_hand_oracle_one_concept():
    # k=1, b=2: four block functions, one routing
    ident = kb(1, Atom(1))
    neg = kb(1, Not(Atom(1)))
    ex = Support.exhaustive(ident)
    assert count_by_enumeration(ident, ex, PERM) == 1
    assert count_by_enumeration(neg, Support.exhaustive(neg), PERM) == 1
    const = knowledge_from_function(ConceptSpace(1, 2), lambda c: (0,), [(0, 1)])
    assert count_by_enumeration(const, Support.exhaustive(const), PERM) == 4


def test_hand_oracle_label_reads_first_concept():
    # y = c1 over two binary concepts; identity routing forces f0 = id and
    # leaves f1 free (4 ways); the swap fails on the full support but works
    # when c1 == c2 on every training example
    K = kb(2, Atom(1))
    assert count_by_enumeration(K, Support.exhaustive(K), PERM) == 4
    assert count_by_enumeration(K, Support(K, [(0, 0), (1, 1)]), PERM) == 8


def test_per_map_check_matches_vectorized_count():
    K = kb(3, Or(And(Atom(1), Atom(2)), Not(Atom(3))))
    supp = Support(K, [(1, 1, 0), (0, 0, 1), (1, 0, 1)])
    for mode in (PERM, COMPLETE):
        slow = sum(is_optimal(a, K, supp) for a in enumerate_alphas(K.space, mode))
        assert slow == count_by_enumeration(K, supp, mode)


def test_per_map_check_unrestricted_small():
    K = kb(2, Xor(Atom(1), Atom(2)))
    supp = Support(K, [(0, 1)])
    slow = sum(is_optimal(a, K, supp) for a in enumerate_alphas(K.space, UNRES))
    assert slow == count_by_enumeration(K, supp, UNRES) == count_closed_form(K, supp)


def test_per_map_check_without_formula():
    space = ConceptSpace(2, 2)
    K = knowledge_from_function(space, lambda c: (c[0] ^ c[1],), [(0, 1)], with_formula=False)
    supp = Support.exhaustive(K)
    slow = sum(is_optimal(a, K, supp) for a in enumerate_alphas(space, PERM))
    assert slow == count_by_enumeration(K, supp, PERM)


# --- closed form ----------------------------------------------------------------


def test_closed_form_known_values():
    assert count_closed_form(XOR3(), Support.exhaustive(XOR3())) == 4**8
    assert count_closed_form(AND3(), Support.exhaustive(AND3())) == 7**7
    K = AND3()
    assert count_closed_form(K, Support(K, [(0, 1, 1)])) == 7 * 8**7


def test_closed_form_trivial_cases():
    space = ConceptSpace(3, 2)
    injective = knowledge_from_function(space, lambda c: (space.code(c),), [tuple(range(8))])
    assert count_closed_form(injective, Support.exhaustive(injective)) == 1
    constant = knowledge_from_function(space, lambda c: (1,), [(0, 1)])
    assert count_closed_form(constant, Support.exhaustive(constant)) == 8**8
    assert not rs_affected(1) and rs_affected(2)


def test_unrestricted_alpha_callable():
    s = ConceptSpace(1, 2)
    a = UnrestrictedAlpha(s, (1, 0))
    assert a((0,)) == (1,) and a((1,)) == (0,)


# --- properties -----------------------------------------------------------------


@st.composite
def k2_cases(draw):
    space = ConceptSpace(2, 2)
    table = draw(st.lists(st.integers(0, 1), min_size=4, max_size=4))
    K = knowledge_from_function(space, lambda c: (table[space.code(c)],), [(0, 1)])
    codes = draw(st.lists(st.integers(0, 3), min_size=1, max_size=4, unique=True))
    return K, codes


@settings(max_examples=40, deadline=None)
@given(k2_cases())
def test_identity_always_counted(case):
    K, codes = case
    supp = Support.from_codes(K, codes)
    assert is_optimal(AlphaMap.identity(K.space), K, supp)
    for mode in (PERM, COMPLETE, UNRES):
        assert count_by_enumeration(K, supp, mode) >= 1


@settings(max_examples=40, deadline=None)
@given(k2_cases())
def test_mode_ordering(case):
    K, codes = case
    supp = Support.from_codes(K, codes)
    p = count_by_enumeration(K, supp, PERM)
    c = count_by_enumeration(K, supp, COMPLETE)
    u = count_by_enumeration(K, supp, UNRES)
    assert p <= c <= u


@settings(max_examples=40, deadline=None)
@given(k2_cases(), st.integers(0, 3))
def test_adding_examples_never_adds_shortcuts(case, extra):
    K, codes = case
    small = Support.from_codes(K, codes)
    big = Support.from_codes(K, sorted(set(codes) | {extra}))
    for mode in (PERM, COMPLETE, UNRES):
        assert count_by_enumeration(K, big, mode) <= count_by_enumeration(K, small, mode)


@settings(max_examples=40, deadline=None)
@given(k2_cases())
def test_closed_form_equals_unrestricted_enumeration(case):
    K, codes = case
    supp = Support.from_codes(K, codes)
    assert count_closed_form(K, supp) == count_by_enumeration(K, supp, UNRES)
