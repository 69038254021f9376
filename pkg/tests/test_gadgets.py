import pytest
from hypothesis import given
from hypothesis import strategies as st

from convcsp.core import INF, StructuralError, brute_force_solve
from convcsp.gadgets import (
    CORPUS_NAMES,
    SimpleGraph,
    corpus,
    format_edge_list,
    mis_instance,
    mis_language,
    parse_edge_list,
    random_instance,
    xor_language,
)
from convcsp.mmorph import classify

from oracles import independence_number


def test_xor_table():
    h = xor_language().functions["h"]
    assert [h(x, y) for x in range(2) for y in range(2)] == [1, 0, 0, 1]
    assert classify(xor_language()).verdict == "np-hard"


def test_mis_language_tables():
    L = mis_language()
    assert L.labels == ("a", "b")
    g, h = L.functions["g"], L.functions["h"]
    assert g(1, 1) == INF and g(0, 1) == g(1, 0) == g(0, 0) == 0
    assert (h(0), h(1)) == (1, 0)


@pytest.mark.parametrize(
    "graph, cost",
    [
        (SimpleGraph(3, ((0, 1), (1, 2), (0, 2))), 2),
        (SimpleGraph(1, ()), 0),
        (SimpleGraph(2, ((0, 1),)), 1),
    ],
)
def test_mis_examples(graph, cost):
    assert brute_force_solve(mis_instance(graph))[1] == cost


def test_random_instance_deterministic():
    L = corpus("chain-mixed")
    a = random_instance(L, 5, 9, 42)
    assert a == random_instance(L, 5, 9, 42)
    assert a != random_instance(L, 5, 9, 43)
    assert random_instance(L, 5, 0, 1).terms == ()


@given(st.sampled_from(CORPUS_NAMES), st.integers(3, 7), st.integers(0, 12), st.integers(0, 10**6))
def test_random_scopes_in_range_and_distinct(name, n, t, seed):
    L = corpus(name)
    inst = random_instance(L, n, t, seed)
    assert len(inst.terms) == t
    for term in inst.terms:
        assert len(set(term.scope)) == len(term.scope) == L.functions[term.function].arity
        assert all(0 <= v < n for v in term.scope)


def test_random_instance_rejects_small_n():
    with pytest.raises(ValueError):
        random_instance(corpus("chain-mixed"), 2, 50, 0)


def test_edge_list_round_trip():
    g = SimpleGraph(4, ((2, 1), (0, 3)))
    assert g.edges == ((0, 3), (1, 2))
    assert parse_edge_list(format_edge_list(g)) == g


@pytest.mark.parametrize(
    "text",
    ["", "3\n", "3 2\n0 1\n", "3 1\n0 0\n", "3 1\n0 5\n", "3 2\n0 1\n1 0\n", "3 1\n0 1 2\n"],
)
def test_edge_list_errors(text):
    with pytest.raises(StructuralError):
        parse_edge_list(text)


@given(st.integers(1, 6), st.data())
def test_mis_cost_is_complement_of_independence(n, data):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    g = SimpleGraph(n, tuple(edges))
    assert brute_force_solve(mis_instance(g))[1] == n - independence_number(n, g.edges)


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_corpus_languages_tractable(name):
    assert classify(corpus(name)).verdict == "tractable"
