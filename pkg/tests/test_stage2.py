import itertools
import random

import pytest

from convcsp.consistency import INFEASIBLE, Microstructure, bits, build_microstructure, enforce_strong3, mask
from convcsp.core import INF
from convcsp.gadgets import corpus, random_instance
from convcsp.mmorph import PROJ_FIRST, BinaryPair, all_pairs, classify
from convcsp.stage2 import (
    Stage2Error,
    apply_update,
    find_blocks,
    initial_state,
    block_violations,
    pair_inequality_violations,
    cross_pair_violations,
    run_stage2,
)


def _projection_state(m):
    return initial_state(m, BinaryPair.projections(m.n))


def test_full_relations_give_singleton_block():
    m = Microstructure(3, 2)
    blocks = find_blocks(_projection_state(m), 0, (0, 1))
    assert blocks.U == [0]
    assert blocks.A == {0: mask([0])} and blocks.B == {0: mask([1])}


def test_two_variable_block():
    m = Microstructure(2, 2)
    m.restrict(0, 1, {(0, 1), (1, 0)})
    blocks = find_blocks(_projection_state(m), 0, (0, 1))
    assert blocks.U == [0, 1]
    assert blocks.A[1] == mask([1]) and blocks.B[1] == mask([0])


def test_closure_adds_label_to_seed_side():
    # D_k = {a, b, c} = {0, 1, 2}, D_i = {x, y} = {0, 1}
    m = Microstructure(2, 3, domains=[mask([0, 1, 2]), mask([0, 1])])
    m.restrict(0, 1, {(0, 0), (2, 0), (1, 1)})
    blocks = find_blocks(_projection_state(m), 0, (0, 1))
    assert blocks.U == [0, 1]
    assert blocks.A[0] == mask([0, 2]) and blocks.B[0] == mask([1])
    assert block_violations(_projection_state(m), blocks) == []


def test_seed_must_be_non_commutative():
    m = Microstructure(1, 2)
    state = initial_state(m, BinaryPair.min_max(2))
    with pytest.raises(ValueError):
        find_blocks(state, 0, (0, 1))


def test_update_on_singleton_block():
    m = Microstructure(2, 3)
    state = _projection_state(m)
    blocks = find_blocks(state, 0, (0, 2))
    new = apply_update(state, blocks)
    assert new.M[0] - state.M[0] == {(0, 2)}
    assert new.meet[0][0][2] == new.meet[0][2][0] == 0
    assert new.join[0][0][2] == new.join[0][2][0] == 2
    assert new.M[1] == state.M[1]
    assert state.M[0] == set()


def test_already_tournament_pair_is_unchanged():
    m = Microstructure(3, 3)
    state = initial_state(m, BinaryPair.min_max(3))
    out = run_stage2(state)
    assert out.iterations == 0
    assert out.M == state.M and out.meet == state.meet


def test_single_boolean_pair_needs_one_iteration():
    m = Microstructure(1, 2)
    out = run_stage2(_projection_state(m))
    assert out.iterations == 1 and out.is_stp()


def test_violated_clause_is_reported():
    m = Microstructure(2, 2)
    state = _projection_state(m)
    blocks = find_blocks(state, 0, (0, 1))
    blocks.A[0] = mask([0, 1])
    problems = block_violations(state, blocks)
    assert any(p.startswith("(a)") for p in problems)
    with pytest.raises(Stage2Error):
        apply_update(state, blocks, debug=True)


def _consistent_instances(name, count, seed0=0):
    L = corpus(name)
    seed = seed0
    while count:
        rng = random.Random(seed)
        inst = random_instance(L, rng.randint(3, 6), rng.randint(1, 10), seed)
        seed += 1
        m = enforce_strong3(build_microstructure(inst))
        if m is INFEASIBLE:
            continue
        count -= 1
        yield inst, m


@pytest.mark.parametrize("name", ["disequality", "swap-mixed", "permutations"])
def test_growth_properties(name):
    w = classify(corpus(name))
    for inst, m in _consistent_instances(name, 40):
        state = initial_state(m, w.pair, w.triple)
        bound = sum(len(state.P(i)) for i in range(m.n_vars))
        signature = m.signature()
        while not state.is_stp():
            assert cross_pair_violations(state) == []
            k, seed = next((k, p) for k in range(m.n_vars) for p in state.Mbar(k))
            blocks = find_blocks(state, k, seed)
            assert block_violations(state, blocks) == []
            new = apply_update(state, blocks)
            for i in range(m.n_vars):
                assert state.M[i] <= new.M[i]
            assert sum(map(len, new.M)) > sum(map(len, state.M))
            state = new
        assert state.iterations <= bound
        assert m.signature() == signature
        assert pair_inequality_violations(state, inst) == []


@pytest.mark.parametrize("name", ["disequality", "swap-mixed", "permutations"])
def test_final_pair_holds_termwise_on_domains(name):
    w = classify(corpus(name))
    for inst, m in _consistent_instances(name, 30, seed0=500):
        out = run_stage2(initial_state(m, w.pair, w.triple))
        doms = [list(bits(d)) for d in m.domains]
        for f, scope in inst.term_functions():
            tuples = [x for x in itertools.product(*(doms[v] for v in scope)) if f(*x) != INF]
            for x, y in itertools.product(tuples, repeat=2):
                lo = tuple(out.meet[v][a][b] for v, a, b in zip(scope, x, y))
                hi = tuple(out.join[v][a][b] for v, a, b in zip(scope, x, y))
                assert f(*lo) + f(*hi) <= f(*x) + f(*y)


def test_projection_witness_needs_full_growth():
    # with every pair non-commutative the loop adds each pair of every variable
    m = Microstructure(2, 3)
    state = initial_state(m, BinaryPair.from_behaviours(3, {p: PROJ_FIRST for p in all_pairs(3)}))
    out = run_stage2(state, debug=True)
    assert out.is_stp()
    assert all(out.M[i] == set(all_pairs(3)) for i in range(2))
