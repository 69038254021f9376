"""Growing the commutative pair sets until the pair is a tournament pair everywhere.

Each iteration picks the least variable ``k`` with a non-commutative pair
``{a, b}``, grows a variable set ``U`` with label blocks ``A_i`` / ``B_i``
from it, and makes every cross pair ``A_i x B_i`` commutative with the
``A`` label as meet.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .consistency import Microstructure, bits
from .core import Instance, objective_table
from .mmorph import BinaryPair, TernaryTriple

__all__ = [
    "Stage2State",
    "BlockResult",
    "Stage2Error",
    "initial_state",
    "find_blocks",
    "apply_update",
    "run_stage2",
    "block_violations",
    "cross_pair_violations",
    "pair_inequality_violations",
]


class Stage2Error(AssertionError):
    """An invariant the construction relies on failed."""


def _key(a, b):
    return (a, b) if a < b else (b, a)


@dataclass
class Stage2State:
    micro: Microstructure
    M: list  # per variable: set of commutative pairs within its domain
    meet: list  # per variable: n x n table
    join: list
    triple: Optional[TernaryTriple] = None
    iterations: int = 0

    def P(self, i: int) -> list:
        return list(itertools.combinations(bits(self.micro.domains[i]), 2))

    def Mbar(self, i: int) -> list:
        return [p for p in self.P(i) if p not in self.M[i]]

    def copy(self) -> "Stage2State":
        return Stage2State(
            self.micro,
            [set(m) for m in self.M],
            [[list(r) for r in t] for t in self.meet],
            [[list(r) for r in t] for t in self.join],
            self.triple,
            self.iterations,
        )

    def pair_for(self, i: int) -> BinaryPair:
        M = set(self.M[i])
        n = self.micro.n
        return BinaryPair(n, self.meet[i], self.join[i], frozenset(M))

    def is_stp(self) -> bool:
        return all(not self.Mbar(i) for i in range(self.micro.n_vars))


@dataclass
class BlockResult:
    seed: tuple  # (k, (a, b))
    U: list
    A: dict  # variable -> label mask
    B: dict

    def labels(self, side: dict, i: int) -> list:
        return list(bits(side[i]))


def initial_state(micro: Microstructure, pair: BinaryPair, triple: Optional[TernaryTriple] = None) -> Stage2State:
    """Per-variable copies of the witness pair, restricted to each domain."""
    nv = micro.n_vars
    M = []
    for i in range(nv):
        P = set(itertools.combinations(bits(micro.domains[i]), 2))
        M.append(P & set(pair.M))
    meet = [[list(r) for r in pair.meet] for _ in range(nv)]
    join = [[list(r) for r in pair.join] for _ in range(nv)]
    return Stage2State(micro, M, meet, join, triple)


def find_blocks(state: Stage2State, k: int, seed) -> BlockResult:
    m = state.micro
    a, b = seed
    if _key(a, b) not in state.Mbar(k):
        raise ValueError(f"seed {seed} is not a non-commutative pair of variable {k}")
    U = [k]
    A = {k: 1 << a}
    B = {k: 1 << b}
    while True:
        grow = None
        for i in range(m.n_vars):
            if i not in U and not (m.image(k, i, A[k]) & m.image(k, i, B[k])):
                grow = i
                break
        if grow is None:
            break
        U.append(grow)
        A[grow] = m.image(k, grow, A[k])
        B[grow] = m.image(k, grow, B[k])
        for side in (A, B):
            while True:
                extra = None
                for c in bits(m.domains[k] & ~side[k]):
                    if any(m.rel[k][i][c] & side[i] for i in U if i != k):
                        extra = c
                        break
                if extra is None:
                    break
                side[k] |= 1 << extra
                for j in U:
                    if j != k:
                        side[j] = m.image(k, j, side[k])
    return BlockResult((k, _key(a, b)), U, A, B)


def block_violations(state: Stage2State, blocks: BlockResult) -> list:
    """Clauses (a)-(d) of the block invariants that fail, as strings."""
    m = state.micro
    k = blocks.seed[0]
    U, A, B = blocks.U, blocks.A, blocks.B
    out = []
    for i in U:
        if A[i] & B[i]:
            out.append(f"(a) A and B intersect at variable {i}")
        for x in bits(A[i]):
            for y in bits(B[i]):
                if _key(x, y) in state.M[i]:
                    out.append(f"(b) cross pair {_key(x, y)} of variable {i} is commutative")
    for i in U:
        if i == k:
            continue
        if m.image(k, i, A[k]) != A[i] or m.image(k, i, B[k]) != B[i]:
            out.append(f"(c) forward images differ at variable {i}")
        if m.preimage(k, i, A[i]) != A[k] or m.preimage(k, i, B[i]) != B[k]:
            out.append(f"(c) backward images differ at variable {i}")
    for i in U:
        block = A[i] | B[i]
        for j in range(m.n_vars):
            if j in U:
                continue
            for x in bits(m.domains[j]):
                support = m.rel[j][i][x] & block
                if support and support != block:
                    out.append(f"(d) label {x} of variable {j} sees only part of the block at {i}")
    return out


def cross_pair_violations(state: Stage2State) -> list:
    """Quadruples where neither alternative of the cross-pair dichotomy holds."""
    m = state.micro
    out = []
    for i, j in itertools.permutations(range(m.n_vars), 2):
        for a, b in state.Mbar(i):
            for a2 in bits(m.rel[i][j][a]):
                for b2 in bits(m.rel[i][j][b]):
                    if a2 == b2:
                        continue
                    cross_ab = bool(m.rel[i][j][a] >> b2 & 1)
                    cross_ba = bool(m.rel[i][j][b] >> a2 & 1)
                    both = cross_ab and cross_ba
                    neither = not cross_ab and not cross_ba and _key(a2, b2) not in state.M[j]
                    if both == neither:
                        out.append((i, j, (a, b), (a2, b2)))
    return out


def pair_inequality_violations(state: Stage2State, instance: Instance, limit: int = 1) -> list:
    """Pairs of feasible assignments breaking the binary inequality for the instance objective.

    Assignments range over the product of the current domains; the meet and
    join act per variable.  Returns at most ``limit`` index pairs.
    """
    values, infinite, _ = objective_table(instance)
    n, nv = instance.language.n, instance.n_vars
    if nv == 0:
        return []
    total = n**nv
    idx = np.arange(total, dtype=np.int64)
    digits = np.empty((total, nv), dtype=np.int64)
    rest = idx.copy()
    for v in range(nv - 1, -1, -1):
        digits[:, v] = rest % n
        rest //= n
    inside = ~infinite
    for v in range(nv):
        allowed = np.array([bool(state.micro.domains[v] >> a & 1) for a in range(n)])
        inside &= allowed[digits[:, v]]
    feasible = np.flatnonzero(inside)
    X = digits[feasible]
    meet = [np.array(t, dtype=np.int64) for t in state.meet]
    join = [np.array(t, dtype=np.int64) for t in state.join]
    weights = [n ** (nv - 1 - v) for v in range(nv)]
    found = []
    rows = max(1, 4_000_000 // max(len(feasible), 1))
    for start in range(0, len(feasible), rows):
        xs = X[start:start + rows]
        lo = np.zeros((xs.shape[0], len(feasible)), dtype=np.int64)
        hi = np.zeros_like(lo)
        for v in range(nv):
            lo += meet[v][xs[:, v][:, None], X[:, v][None, :]] * weights[v]
            hi += join[v][xs[:, v][:, None], X[:, v][None, :]] * weights[v]
        fx = values[feasible[start:start + rows]]
        rhs = fx[:, None] + values[feasible][None, :]
        lhs = values[lo] + values[hi]
        bad = infinite[lo] | infinite[hi] | (lhs > rhs)
        for r, c in zip(*np.nonzero(bad)):
            found.append((int(feasible[start + r]), int(feasible[c])))
            if len(found) >= limit:
                return found
    return found


def apply_update(state: Stage2State, blocks: BlockResult, debug: bool = False) -> Stage2State:
    if debug:
        problems = block_violations(state, blocks)
        if problems:
            raise Stage2Error("; ".join(problems))
    new = state.copy()
    k = blocks.seed[0]
    before = len(new.M[k])
    for i in blocks.U:
        for a in bits(blocks.A[i]):
            for b in bits(blocks.B[i]):
                new.M[i].add(_key(a, b))
                new.meet[i][a][b] = new.meet[i][b][a] = a
                new.join[i][a][b] = new.join[i][b][a] = b
    if len(new.M[k]) <= before:
        raise Stage2Error(f"update did not grow the pair set of variable {k}")
    new.iterations = state.iterations + 1
    return new


def run_stage2(state: Stage2State, debug: bool = False, instance: Optional[Instance] = None, trace=None) -> Stage2State:
    """Iterate seed / blocks / update until every pair is commutative.

    With ``debug`` the block invariants are asserted before each update and,
    when ``instance`` is given, the binary inequality for the whole objective
    is re-swept after it.
    """
    bound = sum(len(state.P(i)) for i in range(state.micro.n_vars))
    start = state.iterations
    while True:
        seed = next(((k, p) for k in range(state.micro.n_vars) for p in state.Mbar(k)), None)
        if seed is None:
            return state
        if state.iterations - start >= bound:
            raise Stage2Error(f"no termination within {bound} iterations")
        if debug:
            quads = cross_pair_violations(state)
            if quads:
                raise Stage2Error(f"cross-pair dichotomy fails at {quads[0]}")
        blocks = find_blocks(state, *seed)
        if trace is not None:
            trace.append(blocks)
        state = apply_update(state, blocks, debug=debug)
        if debug and instance is not None:
            bad = pair_inequality_violations(state, instance)
            if bad:
                raise Stage2Error(f"binary inequality fails after update for assignments {bad[0]}")
