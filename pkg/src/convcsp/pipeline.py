"""End-to-end exact solver for instances over tractable conservative languages.

witness -> microstructure + strong 3-consistency -> pair-set growth ->
chain minimisation, with the answer re-evaluated before it is returned.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

from .consistency import INFEASIBLE, bits, build_microstructure, check_decomposition, enforce_strong3
from .core import DEFAULT_GUARD, INF, Instance, Language, StructuralError, brute_force_solve, eval_instance
from .mmorph import Tractable, build_majority, classify
from .stage2 import initial_state, run_stage2
from .submod import solve_stage3

__all__ = [
    "Solution",
    "ClassificationError",
    "solve",
    "verify_solution",
    "witness_for",
    "clear_witness_cache",
]


class ClassificationError(RuntimeError):
    """The language has no witness (or none was found within budget)."""

    def __init__(self, result):
        super().__init__(f"language is not solvable here: verdict {result.verdict}")
        self.result = result


@dataclass(frozen=True)
class Solution:
    assignment: tuple
    cost: object
    provenance: str
    trace: dict = field(default_factory=dict, compare=False)


_cache: dict = {}
_cache_lock = threading.Lock()


def clear_witness_cache() -> None:
    with _cache_lock:
        _cache.clear()


def witness_for(language: Language):
    """Classify once per language; later calls reuse the result."""
    found = _cache.get(language)
    if found is not None:
        return found
    result = classify(language)
    with _cache_lock:
        return _cache.setdefault(language, result)


def _check_decompositions(language: Language, witness: Tractable) -> None:
    mu = build_majority(witness.pair, witness.triple)
    for name, f in sorted(language.functions.items()):
        if f.arity > 2 and not check_decomposition(f, mu):
            raise StructuralError(f"function {name!r}: feasible set is not the join of its binary projections")


def solve(
    instance: Instance,
    language: Optional[Language] = None,
    witness=None,
    backend: str = "auto",
    debug: bool = False,
    guard: int = DEFAULT_GUARD,
):
    """Minimise ``instance`` exactly; returns a :class:`Solution` or :data:`INFEASIBLE`.

    ``backend`` selects ``"auto"`` (min cut where the encoding applies,
    enumeration otherwise), ``"mincut"`` (no fallback) or ``"brute"`` (plain
    exhaustive search, no witness needed).  ``debug`` asserts the growth
    invariants and re-sweeps the binary inequality after every update.
    """
    language = instance.language if language is None else language
    if language != instance.language:
        raise StructuralError("instance is over a different language")
    if backend == "brute":
        x, cost = brute_force_solve(instance, guard)
        if cost == INF:
            return INFEASIBLE
        return Solution(tuple(x), cost, "brute", {"backend": "brute"})
    if witness is None:
        witness = witness_for(language)
    if not isinstance(witness, Tractable):
        raise ClassificationError(witness)
    _check_decompositions(language, witness)

    trace: dict = {}
    micro = build_microstructure(instance)
    before = [len(list(bits(d))) for d in micro.domains]
    micro = enforce_strong3(micro)
    if micro is INFEASIBLE:
        return INFEASIBLE
    trace["domain_sizes"] = {"built": before, "consistent": [len(list(bits(d))) for d in micro.domains]}

    state = initial_state(micro, witness.pair, witness.triple)
    blocks: list = []
    state = run_stage2(state, debug=debug, instance=instance if debug else None, trace=blocks)
    trace["stage2"] = {
        "iterations": state.iterations,
        "steps": [
            {
                "seed": [b.seed[0], list(b.seed[1])],
                "U": list(b.U),
                "A": {str(i): list(bits(b.A[i])) for i in b.U},
                "B": {str(i): list(bits(b.B[i])) for i in b.U},
            }
            for b in blocks
        ],
    }

    pairs = [state.pair_for(i) for i in range(instance.n_vars)]
    info: dict = {}
    x, cost = solve_stage3(instance, pairs, micro.domains, micro, backend=backend, guard=guard, trace=info)
    trace["stage3"] = info
    if cost == INF:
        return INFEASIBLE
    check = eval_instance(instance, x)
    if check != cost:
        raise AssertionError(f"stage 3 reported {cost} but the assignment evaluates to {check}")
    return Solution(tuple(x), cost, info["backend"], trace)


def verify_solution(instance: Instance, s: Solution) -> bool:
    """Cost-level check: the assignment evaluates to exactly the reported cost."""
    try:
        return eval_instance(instance, s.assignment) == s.cost
    except StructuralError:
        return False
