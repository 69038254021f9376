import dataclasses
import random
import threading

import pytest

from convcsp.consistency import INFEASIBLE
from convcsp.core import INF, CostFunction, Instance, Language, StructuralError
from convcsp.gadgets import CORPUS_NAMES, corpus, random_instance, xor_language
from convcsp.mmorph import BinaryPair, TernaryTriple, Tractable
from convcsp.pipeline import (
    ClassificationError,
    clear_witness_cache,
    solve,
    verify_solution,
    witness_for,
)

from oracles import naive_minimum

NE = CostFunction(2, 2, (INF, 0, 0, INF))


def _ne_language():
    return Language(("0", "1"), {"ne": NE, "u": CostFunction(2, 1, (0, 1))})


def test_disequality_path_with_unary():
    inst = Instance(_ne_language(), 3, [("ne", (0, 1)), ("ne", (1, 2)), ("u", (0,)), ("u", (1,))])
    sol = solve(inst)
    assert sol.cost == 1 == naive_minimum(inst)[1]
    assert sol.assignment in {(0, 1, 0), (1, 0, 1)}
    assert verify_solution(inst, sol)


def test_odd_cycle_infeasible():
    inst = Instance(_ne_language(), 3, [("ne", (0, 1)), ("ne", (1, 2)), ("ne", (0, 2))])
    assert solve(inst) is INFEASIBLE
    assert solve(inst, backend="brute") is INFEASIBLE


def test_empty_instance_costs_zero():
    sol = solve(Instance(_ne_language(), 2, []))
    assert sol.cost == 0 and sol.assignment == (0, 0)


def test_tampered_solution_fails_verification():
    inst = Instance(_ne_language(), 2, [("ne", (0, 1)), ("u", (1,))])
    sol = solve(inst)
    assert verify_solution(inst, sol)
    assert not verify_solution(inst, dataclasses.replace(sol, cost=sol.cost + 1))
    assert not verify_solution(inst, dataclasses.replace(sol, assignment=(0, 0)))
    assert not verify_solution(inst, dataclasses.replace(sol, assignment=(0,)))


def test_deterministic_including_trace():
    L = corpus("swap-mixed")
    inst = random_instance(L, 5, 8, 17)
    a, b = solve(inst), solve(inst)
    assert a == b and a.trace == b.trace
    assert set(a.trace) == {"domain_sizes", "stage2", "stage3"}


def test_np_hard_language_raises():
    inst = Instance(xor_language(), 2, [("h", (0, 1))])
    with pytest.raises(ClassificationError) as exc:
        solve(inst)
    assert exc.value.result.verdict == "np-hard"
    assert solve(inst, backend="brute").cost == 0


def test_undecomposable_ternary_rejected():
    parity = CostFunction.from_callable(2, 3, lambda x, y, z: 0 if (x + y + z) % 2 == 0 else INF)
    L = Language(("0", "1"), {"p": parity})
    # a supplied (unchecked) witness must not let a non-decomposable relation through
    w = Tractable(M=frozenset({(0, 1)}), pair=BinaryPair.min_max(2), triple=TernaryTriple.boolean_like(2))
    with pytest.raises(StructuralError):
        solve(Instance(L, 3, [("p", (0, 1, 2))]), witness=w)


def test_foreign_language_rejected():
    inst = Instance(_ne_language(), 1, [])
    with pytest.raises(StructuralError):
        solve(inst, language=xor_language())


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_matches_oracle_and_debug_mode(name):
    L = corpus(name)
    for seed in range(30):
        rng = random.Random(seed)
        inst = random_instance(L, rng.randint(3, 5), rng.randint(0, 7), seed)
        want = naive_minimum(inst)[1]
        for debug in (False, True):
            sol = solve(inst, debug=debug)
            if want == INF:
                assert sol is INFEASIBLE
            else:
                assert sol.cost == want and verify_solution(inst, sol)


def test_witness_cache_is_shared_across_threads():
    clear_witness_cache()
    L = corpus("interval")
    results = []
    threads = [threading.Thread(target=lambda: results.append(witness_for(L))) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(results) == 4 and all(r is results[0] for r in results)
    assert witness_for(L) is results[0]
