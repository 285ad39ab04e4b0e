import itertools

import pytest

from rscount.alphamap import AlphaMap, StructureMode, count_by_enumeration, enumerate_alphas, is_optimal
from rscount.counter import count_exhaustive, count_models
from rscount.encode import build_counting_cnf, exactly_one, export_problem
from rscount.errors import EncodingError
from rscount.formula import And, Atom, CnfFormula, Xor, parse_dimacs
from rscount.knowledge import ConceptSpace, Support, knowledge_from_concept_exprs, knowledge_from_function

PERM, COMPLETE = StructureMode.PERMUTATION, StructureMode.COMPLETE


def xor3():
    return knowledge_from_concept_exprs(ConceptSpace(3, 2), [Xor(Atom(1), Atom(2), Atom(3))])


def and3():
    return knowledge_from_concept_exprs(ConceptSpace(3, 2), [And(Atom(1), Atom(2), Atom(3))])


def test_exactly_one_models():
    clauses = exactly_one([1, 2, 3])
    models = [
        bits
        for bits in itertools.product([False, True], repeat=3)
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses)
    ]
    assert sorted(models) == sorted([(True, False, False), (False, True, False), (False, False, True)])
    with pytest.raises(EncodingError):
        exactly_one([])
    with pytest.raises(EncodingError):
        exactly_one([1, 1])


def test_variable_layout_xor3_exhaustive():
    p = build_counting_cnf(xor3(), Support.exhaustive(xor3()), PERM)
    bk = p.book
    assert bk.o_range == (1, 9)
    assert bk.a_range == (10, 45)
    # k*b = 6 predicted bits for each of the 8 examples
    assert bk.chat_range == (46, 93)
    assert bk.o_var(0, 0) == 1 and bk.o_var(2, 2) == 9
    assert bk.a_var(0, 0) == 10 and bk.a_var(5, 5) == 45
    assert bk.chat_var(0, 0) == 46 and bk.chat_var(7, 5) == 93
    assert p.projection == tuple(range(10, 46))
    assert p.cnf.num_variables == bk.aux_range[1]


def test_export_header_and_projection():
    p = build_counting_cnf(xor3(), Support.exhaustive(xor3()), PERM)
    text = export_problem(p)
    first = text.splitlines()[0]
    assert first == "c ind " + " ".join(str(v) for v in range(10, 46)) + " 0"
    f = parse_dimacs(text)
    assert f == p.cnf
    assert f.projection() == list(range(10, 46))
    assert export_problem(build_counting_cnf(xor3(), Support.exhaustive(xor3()), PERM)) == text


@pytest.mark.parametrize(
    "make, support, expected",
    [
        (and3, None, 6),
        (xor3, None, 24),
        (xor3, [(0, 1, 1)], 192),
        (and3, [(1, 1, 1)], 48),
        (and3, [(0, 1, 1)], 336),
    ],
)
def test_encoded_counts_match_reference(make, support, expected):
    K = make()
    supp = Support.exhaustive(K) if support is None else Support(K, support)
    p = build_counting_cnf(K, supp, PERM)
    assert count_models(p.cnf).value == expected


def test_complete_mode_counts_match_enumeration():
    for make, support in [(xor3, [(0, 1, 1)]), (and3, [(0, 1, 1)]), (xor3, None)]:
        K = make()
        supp = Support.exhaustive(K) if support is None else Support(K, support)
        p = build_counting_cnf(K, supp, COMPLETE)
        assert count_models(p.cnf).value == count_by_enumeration(K, supp, COMPLETE)


def _model_from_alpha(p, K, supp, alpha):
    """Extend an A matrix to the O and chat variables it determines."""
    bk = p.book
    a = {}
    A = alpha.A
    O = alpha.O
    for i in range(bk.k):
        for j in range(bk.k):
            a[bk.o_var(i, j)] = bool(O[i, j])
    for x in range(bk.width):
        for y in range(bk.width):
            a[bk.a_var(x, y)] = bool(A[x, y])
    for d, c in enumerate(supp):
        onehot = K.space.onehot(c)
        for x in range(bk.width):
            a[bk.chat_var(d, x)] = any(A[x, y] and onehot[y] for y in range(bk.width))
    return a


def test_models_correspond_to_optimal_maps():
    # with the A variables fixed to a valid map, the rest of the formula is
    # satisfiable iff the map reproduces every training label
    K = and3()
    supp = Support(K, [(0, 1, 1), (1, 1, 1)])
    p = build_counting_cnf(K, supp, PERM)
    maps = list(enumerate_alphas(K.space, PERM))[::7]
    for alpha in maps:
        fixed = _model_from_alpha(p, K, supp, alpha)
        units = [(v if val else -v,) for v, val in fixed.items()]
        sub = CnfFormula(p.cnf.num_variables, p.cnf.clauses + tuple(units))
        assert (count_models(sub).value == 1) == is_optimal(alpha, K, supp)


def test_functional_determination_by_brute_force():
    # every non-A variable is fixed by A: the exhaustive count over all
    # variables equals the number of admissible A matrices
    K = knowledge_from_concept_exprs(ConceptSpace(2, 2), [Xor(Atom(1), Atom(2))])
    supp = Support(K, [(0, 1)])
    p = build_counting_cnf(K, supp, PERM)
    assert p.cnf.num_variables <= 26
    assert count_exhaustive(p.cnf).value == count_by_enumeration(K, supp, PERM)


def test_rejects_unsupported_inputs():
    K = xor3()
    with pytest.raises(EncodingError):
        build_counting_cnf(K, Support.exhaustive(K), StructureMode.UNRESTRICTED)
    with pytest.raises(EncodingError):
        build_counting_cnf(K, Support(K, []), PERM)
    plain = knowledge_from_function(ConceptSpace(2, 2), lambda c: (c[0],), [(0, 1)], with_formula=False)
    with pytest.raises(EncodingError):
        build_counting_cnf(plain, Support.exhaustive(plain), PERM)


def test_categorical_knowledge_encodes():
    space = ConceptSpace(2, 3)
    K = knowledge_from_function(space, lambda c: (c[0] + c[1],), [tuple(range(5))])
    supp = Support(K, [(0, 1), (2, 2)])
    p = build_counting_cnf(K, supp, PERM)
    assert count_models(p.cnf).value == count_by_enumeration(K, supp, PERM)
    assert AlphaMap.identity(space).satisfies(PERM)
