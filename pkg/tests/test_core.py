import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convcsp.core import (
    INF,
    BudgetError,
    CostFunction,
    Instance,
    Language,
    StructuralError,
    brute_force_solve,
    eval_instance,
    format_cost,
    is_finite,
    objective_table,
    to_cost,
)
from convcsp.gadgets import CORPUS_NAMES, corpus, random_instance, xor_language

from oracles import naive_minimum

costs = st.one_of(
    st.just(INF),
    st.builds(Fraction, st.integers(0, 50), st.integers(1, 12)),
)


@given(costs, costs, costs)
def test_addition_associative_commutative(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a


@given(costs)
def test_infinity_absorbs_and_is_maximal(a):
    assert a + INF == INF
    assert INF + a == INF
    assert a <= INF
    assert not INF < a


def test_cost_parsing_round_trip():
    for text in ["0", "3/2", "6/4", "inf", "7"]:
        c = to_cost(text)
        assert to_cost(format_cost(c)) == c
    assert format_cost(to_cost("6/4")) == "3/2"
    assert to_cost("1.5") == Fraction(3, 2)
    for bad in ["-1", 1.5, True, "x"]:
        with pytest.raises((ValueError, TypeError)):
            to_cost(bad)


def test_cost_function_table_and_dom():
    f = CostFunction(2, 2, (0, INF, 1, 0))
    assert f(0, 1) == INF and f(1, 0) == 1
    assert f.dom() == ((0, 0), (1, 0), (1, 1))
    assert not f.is_crisp and not f.is_finite_valued
    assert CostFunction(2, 1, (0, INF)).is_crisp
    with pytest.raises(StructuralError):
        CostFunction(2, 2, (0, 0, 0))


def test_language_rejects_domain_mismatch():
    with pytest.raises(StructuralError):
        Language(("a", "b", "c"), {"f": CostFunction(2, 1, (0, 1))})
    with pytest.raises(StructuralError):
        Language(("a", "a"), {})


def test_instance_rejects_bad_scope():
    L = xor_language()
    with pytest.raises(StructuralError):
        Instance(L, 2, [("h", (0, 2))])
    with pytest.raises(StructuralError):
        Instance(L, 2, [("h", (0,))])
    with pytest.raises(StructuralError):
        Instance(L, 2, [("g", (0, 1))])


def test_eval_xor_examples():
    L = xor_language()
    inst = Instance(L, 2, [("h", (0, 1))])
    assert eval_instance(inst, (0, 1)) == 0
    assert eval_instance(inst, (0, 0)) == 1
    assert eval_instance(Instance(L, 2, []), (1, 0)) == 0


def test_eval_infinite_term_dominates():
    L = Language(("0", "1"), {"ne": CostFunction(2, 2, (INF, 0, 0, INF)), "u": CostFunction(2, 1, (5, 0))})
    inst = Instance(L, 2, [("u", (0,)), ("ne", (0, 1))])
    assert eval_instance(inst, (0, 0)) == INF


def _two_var():
    L = Language(
        ("0", "1"),
        {
            "u1": CostFunction(2, 1, (0, 2)),
            "u2": CostFunction(2, 1, (1, 0)),
            "diff": CostFunction(2, 2, (0, 1, 1, 0)),
        },
    )
    return Instance(L, 2, [("u1", (0,)), ("u2", (1,)), ("diff", (0, 1))])


def test_brute_force_examples():
    assert brute_force_solve(_two_var()) == ((0, 0), 1)
    ne = Language(("0", "1"), {"ne": CostFunction(2, 2, (INF, 0, 0, INF))})
    tri = Instance(ne, 3, [("ne", (0, 1)), ("ne", (1, 2)), ("ne", (0, 2))])
    assert brute_force_solve(tri) == ((0, 0, 0), INF)
    assert brute_force_solve(Instance(ne, 0, [])) == ((), 0)


def test_brute_force_guard():
    L = xor_language()
    with pytest.raises(BudgetError):
        brute_force_solve(Instance(L, 30, []), guard=1000)
    with pytest.raises(BudgetError):
        objective_table(Instance(L, 30, []), guard=1000)


def test_repeated_scope_variables():
    L = Language(("0", "1"), {"d": CostFunction(2, 2, (3, 1, 1, 2))})
    inst = Instance(L, 1, [("d", (0, 0))])
    assert brute_force_solve(inst) == ((1,), 2)


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_brute_force_matches_naive_oracle(name):
    L = corpus(name)
    for seed in range(40):
        rng = random.Random(seed)
        inst = random_instance(L, rng.randint(3, 5), rng.randint(0, 6), seed)
        assert brute_force_solve(inst) == naive_minimum(inst)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_brute_force_lower_bounds_every_assignment(seed):
    L = corpus("chain-mixed")
    rng = random.Random(seed)
    inst = random_instance(L, rng.randint(3, 5), rng.randint(0, 8), seed)
    _, best = brute_force_solve(inst)
    for _ in range(100):
        x = tuple(rng.randrange(L.n) for _ in range(inst.n_vars))
        assert best <= eval_instance(inst, x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_eval_independent_of_term_order(seed):
    L = corpus("swap-mixed")
    rng = random.Random(seed)
    inst = random_instance(L, 4, 6, seed)
    shuffled = list(inst.terms)
    rng.shuffle(shuffled)
    other = Instance(L, inst.n_vars, tuple(shuffled))
    for x in itertools.product(range(L.n), repeat=inst.n_vars):
        assert eval_instance(inst, x) == eval_instance(other, x)


def test_objective_table_agrees_with_eval():
    inst = random_instance(corpus("chain-mixed"), 4, 7, 3)
    values, infinite, scale = objective_table(inst)
    for k, x in enumerate(itertools.product(range(3), repeat=4)):
        c = eval_instance(inst, x)
        assert bool(infinite[k]) == (not is_finite(c))
        if is_finite(c):
            assert Fraction(int(values[k]), scale) == c
