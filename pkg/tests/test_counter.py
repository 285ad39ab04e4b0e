import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rscount.counter import CounterConfig, count_exhaustive, count_models
from rscount.errors import BudgetExceeded, CapacityError
from rscount.formula import CnfFormula, parse_dimacs, random_lcnf
from rscount.rng import SplitMix64


def brute(f: CnfFormula) -> int:
    n = 0
    for bits in itertools.product([False, True], repeat=f.num_variables):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in f.clauses):
            n += 1
    return n


def test_empty_formula_counts_all_assignments():
    assert count_models(parse_dimacs("p cnf 2 0\n")).value == 4
    assert count_exhaustive(parse_dimacs("p cnf 2 0\n")).value == 4


def test_contradiction():
    f = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n")
    assert count_models(f).value == 0
    assert count_exhaustive(f).value == 0


def test_free_variables_double_the_count():
    f = CnfFormula(5, ((1, 2),))
    assert count_models(f).value == 3 * 8


def test_tautologies_are_ignored():
    f = CnfFormula(2, ((1, -1), (2,)))
    assert count_models(f).value == 2


def test_disjoint_components_multiply():
    a = CnfFormula(3, ((1, 2), (-2, 3)))
    b = CnfFormula(3, ((1, -2, 3), (-1,)))
    shifted = tuple(tuple(l + 3 if l > 0 else l - 3 for l in c) for c in b.clauses)
    joint = CnfFormula(6, a.clauses + shifted)
    assert count_models(joint).value == count_models(a).value * count_models(b).value


def test_xor_chain_count():
    # x1 xor x2 xor ... xor xn encoded directly: half of all assignments
    n = 4
    clauses = [
        tuple(v if bits[v - 1] else -v for v in range(1, n + 1))
        for bits in itertools.product([0, 1], repeat=n)
        if sum(bits) % 2 == 0
    ]
    f = CnfFormula(n, tuple(clauses))
    assert count_models(f).value == 8


@pytest.mark.parametrize(
    "cfg",
    [
        CounterConfig(),
        CounterConfig(branching="fixed-order"),
        CounterConfig(component_caching=False),
        CounterConfig(exhaustive_fallback_threshold=0),
        CounterConfig(exhaustive_fallback_threshold=20),
    ],
)
def test_configurations_agree_on_random_formulas(cfg):
    rng = SplitMix64(99)
    for _ in range(25):
        n = 3 + rng.randbelow(10)
        l = 1 + rng.randbelow(3)
        m = 1 + rng.randbelow(3 * n)
        m = min(m, 2**l * len(list(itertools.combinations(range(n), l))))
        f = random_lcnf(n, m, l, rng.next_u64())
        assert count_models(f, cfg).value == count_exhaustive(f).value


def test_budget_exceeded_carries_stats():
    f = random_lcnf(18, 30, 3, seed=5)
    with pytest.raises(BudgetExceeded) as exc:
        count_models(f, CounterConfig(max_decisions=2, exhaustive_fallback_threshold=0))
    assert exc.value.stats.decisions >= 2
    assert isinstance(exc.value, CapacityError)


def test_exhaustive_capacity():
    with pytest.raises(CapacityError):
        count_exhaustive(CnfFormula(30, ()), max_variables=26)


def test_bad_config():
    with pytest.raises(ValueError):
        CounterConfig(branching="random")


def test_stats_are_reported():
    f = random_lcnf(12, 20, 3, seed=1)
    res = count_models(f)
    d = res.stats.as_dict()
    assert set(d) == {"decisions", "propagations", "cache_hits", "cached_components", "wall_time_ms"}
    assert int(res) == res.value


cnf_st = st.integers(1, 9).flatmap(
    lambda n: st.lists(
        st.lists(st.integers(1, n), min_size=1, max_size=min(n, 4), unique=True).flatmap(
            lambda vs: st.tuples(*[st.sampled_from([v, -v]) for v in vs])
        ),
        max_size=14,
    ).map(lambda cs: CnfFormula(n, tuple(cs)))
)


@settings(max_examples=150, deadline=None)
@given(cnf_st)
def test_counter_matches_brute_force(f):
    assert count_models(f).value == brute(f)
    assert count_exhaustive(f).value == brute(f)
