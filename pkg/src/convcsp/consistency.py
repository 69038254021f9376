"""Microstructure construction and strong 3-consistency.

Label sets are int bitmasks over label ids.  ``rel[i][j][x]`` is the mask of
labels ``y`` with ``(x, y)`` in the relation between variables ``i`` and
``j``; ``rel[j][i]`` is kept as its transpose.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import CostFunction, Instance

__all__ = [
    "Microstructure",
    "Infeasible",
    "INFEASIBLE",
    "build_microstructure",
    "enforce_strong3",
    "check_decomposition",
    "bits",
    "mask",
]


def bits(m: int):
    """Label ids in mask ``m``, ascending."""
    x = 0
    while m:
        if m & 1:
            yield x
        m >>= 1
        x += 1


def mask(labels) -> int:
    out = 0
    for a in labels:
        out |= 1 << a
    return out


class Infeasible:
    def __repr__(self):
        return "INFEASIBLE"

    def __bool__(self):
        return False


INFEASIBLE = Infeasible()


class Microstructure:
    __slots__ = ("n_vars", "n", "domains", "rel")

    def __init__(self, n_vars: int, n: int, domains=None, rel=None):
        self.n_vars = n_vars
        self.n = n
        full = (1 << n) - 1
        self.domains = list(domains) if domains is not None else [full] * n_vars
        if rel is None:
            rel = [[None if i == j else [full] * n for j in range(n_vars)] for i in range(n_vars)]
        self.rel = [[None if r is None else list(r) for r in row] for row in rel]

    def copy(self) -> "Microstructure":
        return Microstructure(self.n_vars, self.n, self.domains, self.rel)

    def image(self, i: int, j: int, xs: int) -> int:
        """Labels of ``j`` related to some label of ``xs`` at ``i``."""
        out = 0
        row = self.rel[i][j]
        for x in bits(xs):
            out |= row[x]
        return out & self.domains[j]

    def preimage(self, i: int, j: int, ys: int) -> int:
        """Labels of ``i`` related to some label of ``ys`` at ``j``."""
        return self.image(j, i, ys)

    def pairs(self, i: int, j: int) -> set:
        return {(x, y) for x in bits(self.domains[i]) for y in bits(self.rel[i][j][x] & self.domains[j])}

    def restrict(self, i: int, j: int, allowed: set):
        for x in range(self.n):
            row = 0
            for y in range(self.n):
                if (x, y) in allowed:
                    row |= 1 << y
            self.rel[i][j][x] &= row
        self._sync_transpose(i, j)

    def _sync_transpose(self, i, j):
        for y in range(self.n):
            col = 0
            for x in range(self.n):
                if self.rel[i][j][x] >> y & 1:
                    col |= 1 << x
            self.rel[j][i][y] = col

    def domain(self, i: int) -> list:
        return list(bits(self.domains[i]))

    def signature(self):
        return (tuple(self.domains), tuple(tuple(tuple(r) if r else None for r in row) for row in self.rel))

    def __eq__(self, other):
        return isinstance(other, Microstructure) and self.signature() == other.signature()

    def dump(self, labels: Optional[Sequence[str]] = None) -> dict:
        name = (lambda a: labels[a]) if labels else (lambda a: a)
        doc = {"domains": [[name(a) for a in bits(d)] for d in self.domains], "relations": []}
        for i, j in itertools.combinations(range(self.n_vars), 2):
            doc["relations"].append(
                {"vars": [i, j], "pairs": [[name(x), name(y)] for x, y in sorted(self.pairs(i, j))]}
            )
        return doc


def _term_projections(f: CostFunction, scope: Sequence[int]):
    """Unary and pairwise projections of ``dom f`` onto the distinct scope variables."""
    variables = sorted(set(scope))
    unary = {v: 0 for v in variables}
    pairwise = {(u, v): set() for u, v in itertools.combinations(variables, 2)}
    for x in f.dom():
        assignment = {}
        ok = True
        for v, a in zip(scope, x):
            if assignment.setdefault(v, a) != a:
                ok = False
                break
        if not ok:
            continue
        for v, a in assignment.items():
            unary[v] |= 1 << a
        for u, v in pairwise:
            pairwise[(u, v)].add((assignment[u], assignment[v]))
    return unary, pairwise


def build_microstructure(instance: Instance, language=None) -> Microstructure:
    """Domains and pairwise relations projected from every term's feasibility set."""
    n = instance.language.n
    m = Microstructure(instance.n_vars, n)
    for f, scope in instance.term_functions():
        unary, pairwise = _term_projections(f, scope)
        for v, allowed in unary.items():
            m.domains[v] &= allowed
        for (u, v), allowed in pairwise.items():
            m.restrict(u, v, allowed)
    for i, j in itertools.permutations(range(instance.n_vars), 2):
        for x in range(n):
            m.rel[i][j][x] = m.rel[i][j][x] & m.domains[j] if m.domains[i] >> x & 1 else 0
    return m


def _revise_domains(m: Microstructure, order) -> bool:
    changed = False
    for i in order:
        for j in order:
            if i == j:
                continue
            keep = 0
            for x in bits(m.domains[i]):
                if m.rel[i][j][x] & m.domains[j]:
                    keep |= 1 << x
            if keep != m.domains[i]:
                m.domains[i] = keep
                changed = True
    for i in order:
        for j in order:
            if i == j:
                continue
            for x in range(m.n):
                row = m.rel[i][j][x] & m.domains[j] if m.domains[i] >> x & 1 else 0
                if row != m.rel[i][j][x]:
                    m.rel[i][j][x] = row
                    changed = True
    return changed


def _revise_paths(m: Microstructure, triples) -> bool:
    changed = False
    rel, dom = m.rel, m.domains
    for i, j, k in triples:
        rij = rel[i][j]
        rik, rjk = rel[i][k], rel[j][k]
        for x in bits(dom[i]):
            for y in bits(rij[x]):
                if not (rik[x] & rjk[y] & dom[k]):
                    rij[x] &= ~(1 << y)
                    rel[j][i][y] &= ~(1 << x)
                    changed = True
    return changed


def enforce_strong3(m: Microstructure, order=None, rng=None):
    """Arc plus path consistency by naive fixpoint iteration.

    Returns a new :class:`Microstructure`, or :data:`INFEASIBLE` when some
    domain or relation empties.  ``order`` fixes the variable order; ``rng``
    shuffles the processing order of variable triples (the fixpoint does not
    depend on either).
    """
    m = m.copy()
    nv = m.n_vars
    order = list(range(nv)) if order is None else list(order)
    triples = [
        (i, j, k)
        for i, j in itertools.combinations(order, 2)
        for k in order
        if k != i and k != j
    ]
    while True:
        if rng is not None:
            rng.shuffle(triples)
        changed = _revise_domains(m, order)
        if any(d == 0 for d in m.domains):
            return INFEASIBLE
        changed |= _revise_paths(m, triples)
        if not changed:
            break
    if any(d == 0 for d in m.domains):
        return INFEASIBLE
    for i, j in itertools.combinations(range(nv), 2):
        if not any(m.rel[i][j][x] for x in bits(m.domains[i])):
            return INFEASIBLE
    return m


def check_decomposition(f: CostFunction, mu=None) -> bool:
    """Whether ``dom f`` is exactly the join of its unary and pairwise projections.

    ``mu`` (a majority polymorphism of ``dom f``) is accepted for interface
    symmetry with the pipeline; the check itself is exhaustive.
    """
    m = f.arity
    dom = set(f.dom())
    unary = [{x[k] for x in dom} for k in range(m)]
    pairwise = {(k, l): {(x[k], x[l]) for x in dom} for k, l in itertools.combinations(range(m), 2)}
    for x in f.tuples():
        joined = all(x[k] in unary[k] for k in range(m)) and all(
            (x[k], x[l]) in allowed for (k, l), allowed in pairwise.items()
        )
        if joined != (x in dom):
            return False
    return True
