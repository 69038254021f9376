"""Diagnostic approximation of the pair graph of a conservative language.

Nodes are ordered label pairs ``(a, b)``, ``a != b``.  Nodes ``p = (a, b)``
and ``q = (a2, b2)`` are joined when some binary ``f`` has

    f(a, a2) + f(b, b2) > f(a, b2) + f(b, a2),   (a, b2), (b, a2) finite,

and the edge is soft when ``(a, a2)`` or ``(b, b2)`` is finite as well.  The
closure computed here is bounded, so a missing edge proves nothing; every
stored edge does carry a concrete witness table that re-checks exactly.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .core import INF, CostFunction, Language
from .mmorph import BinaryPair, PROJ_FIRST, MEET_LOW, MEET_HIGH

__all__ = [
    "Closure",
    "Edge",
    "GammaGraph",
    "SoftSelfLoop",
    "OddCycle",
    "close_binary",
    "edge_holds",
    "detect_and_saturate",
    "stp_from_graph",
    "DEFAULT_DEPTH",
    "DEFAULT_SIZE_CAP",
]

DEFAULT_DEPTH = 2
DEFAULT_SIZE_CAP = 10_000


class SoftSelfLoop(Exception):
    """The graph has a soft self-loop; the language is NP-hard."""

    def __init__(self, node):
        super().__init__(f"soft self-loop at {node}")
        self.node = node


class OddCycle(Exception):
    """The commutative part of the graph is not bipartite."""


@dataclass
class Closure:
    functions: list
    truncated: bool = False


def _normalise(f: CostFunction) -> CostFunction:
    finite = [v for v in f.table if v is not INF]
    if not finite:
        return f
    low = min(finite)
    if low == 0:
        return f
    return CostFunction(f.n, f.arity, [v if v is INF else v - low for v in f.table])


def _symmetrise(f):
    n = f.n
    return CostFunction.from_callable(n, 2, lambda x, y: f(x, y) + f(y, x))


def _add(f, g):
    return CostFunction(f.n, 2, [u + v for u, v in zip(f.table, g.table)])


def _compose(f, g, middle=None, weights=None):
    """``h(x, z) = min_y f(x, y) + w(y) + g(y, z)`` over ``y`` in ``middle``."""
    n = f.n
    middle = range(n) if middle is None else middle
    weights = weights or {}

    def h(x, z):
        return min(f(x, y) + weights.get(y, 0) + g(y, z) for y in middle)

    return CostFunction.from_callable(n, 2, h)


def _unaries(n):
    seen = []
    for bits in itertools.product((0, 1), repeat=n):
        seen.append(tuple(Fraction(b) for b in bits))
        seen.append(tuple(INF if b else Fraction(0) for b in bits))
    out = []
    for u in seen:
        if u not in out and any(v != 0 for v in u):
            out.append(u)
    return out


def _with_unary(f, u, argument):
    if argument == 0:
        return CostFunction.from_callable(f.n, 2, lambda x, y: f(x, y) + u[x])
    return CostFunction.from_callable(f.n, 2, lambda x, y: f(x, y) + u[y])


def close_binary(language: Language, depth: int = DEFAULT_DEPTH, size_cap: int = DEFAULT_SIZE_CAP) -> Closure:
    """Binary functions reachable within ``depth`` rounds of the expressibility moves.

    Round zero holds the language's binary functions and their symmetrisations.
    Each further round adds symmetrisations, pairwise sums, additions of
    {0,1}- and {0,inf}-valued unaries to either argument, and chain
    compositions of the current members.  Tables are normalised by
    subtracting their least finite value; tables with no finite entry are
    dropped since they witness nothing.
    """
    members, seen = [], set()
    truncated = False

    def admit(f):
        nonlocal truncated
        f = _normalise(f)
        if not f.dom() or f in seen:
            return True
        if len(members) >= size_cap:
            truncated = True
            return False
        seen.add(f)
        members.append(f)
        return True

    base = language.binary_functions()
    for f in base:
        if not admit(f):
            return Closure(members, True)
    for f in base:
        if not admit(_symmetrise(f)):
            return Closure(members, True)
    unaries = _unaries(language.n)
    for _ in range(depth):
        current = list(members)

        def generate():
            for f in current:
                yield _symmetrise(f)
            for i, f in enumerate(current):
                for g in current[i:]:
                    yield _add(f, g)
            for f in current:
                for u in unaries:
                    yield _with_unary(f, u, 0)
                    yield _with_unary(f, u, 1)
            for f in current:
                for g in current:
                    yield _compose(f, g)

        for h in generate():
            if not admit(h):
                return Closure(members, True)
    return Closure(members, truncated)


def _bar(p):
    return (p[1], p[0])


def _edge_key(p, q):
    return (p, q) if p <= q else (q, p)


def edge_holds(f: CostFunction, p, q):
    """``(holds, soft, values)`` for the edge ``{p, q}`` witnessed by ``f`` with ``p`` on the first argument."""
    (a, b), (a2, b2) = p, q
    values = (f(a, a2), f(b, b2), f(a, b2), f(b, a2))
    diag1, diag2, off1, off2 = values
    if off1 is INF or off2 is INF:
        return False, False, values
    holds = diag1 + diag2 > off1 + off2
    soft = diag1 is not INF or diag2 is not INF
    return holds, holds and soft, values


def _transpose(f):
    return CostFunction.from_callable(f.n, 2, lambda x, y: f(y, x))


@dataclass
class Edge:
    """An edge ``{p, q}``; ``witness`` is read with ``p`` on its first argument."""

    p: tuple
    q: tuple
    soft: bool
    witness: Optional[CostFunction] = None
    values: tuple = ()
    origin: str = "scan"

    def oriented(self, start):
        """Witness with ``start`` on the first argument, and the opposite endpoint."""
        if start == self.p:
            return self.witness, self.q
        return _transpose(self.witness), self.p

    def verify(self) -> bool:
        if self.witness is None:
            return False
        holds, soft, _ = edge_holds(self.witness, self.p, self.q)
        return holds and soft == self.soft


@dataclass
class GammaGraph:
    n: int
    edges: dict = field(default_factory=dict)

    @property
    def nodes(self) -> list:
        return [(a, b) for a in range(self.n) for b in range(self.n) if a != b]

    def add(self, edge: Edge) -> bool:
        """Insert or upgrade (hard to soft); returns whether anything changed."""
        key = _edge_key(edge.p, edge.q)
        old = self.edges.get(key)
        if old is not None and (old.soft or not edge.soft):
            return False
        self.edges[key] = edge
        return True

    def edge(self, p, q) -> Optional[Edge]:
        return self.edges.get(_edge_key(p, q))

    def has_self_loop(self, p) -> bool:
        return (p, p) in self.edges

    def soft_self_loops(self) -> list:
        return sorted(k[0] for k, e in self.edges.items() if k[0] == k[1] and e.soft)

    def M(self) -> list:
        return [p for p in self.nodes if not self.has_self_loop(p)]

    def incident(self, p):
        for (u, v), e in self.edges.items():
            if u == p:
                yield v, e
            elif v == p:
                yield u, e

    def witness_functions(self) -> list:
        out = []
        for key in sorted(self.edges):
            e = self.edges[key]
            if e.witness is not None and e.witness not in out:
                out.append(e.witness)
        return out


def _breakpoints(f, g, p, q, r):
    (a1, b1), (a2, b2), (a3, b3) = p, q, r
    points = []
    for x in (a1, b1):
        for z in (a3, b3):
            via_a = f(x, a2) + g(a2, z)
            via_b = f(x, b2) + g(b2, z)
            if via_a is not INF and via_b is not INF:
                points.append(via_b - via_a)
    return sorted(set(points))


def _chain_witness(f, g, p, q, r):
    """A table witnessing ``{p, bar(r)}`` from ``f`` on ``(p, q)`` and ``g`` on ``(q, r)``.

    The composition runs the middle variable over ``q``'s two labels and adds
    a unary shift ``delta`` on it; ``delta`` is chosen among the breakpoints of
    the piecewise-linear margin (and points beyond them).
    """
    a2, b2 = q
    target = _bar(r)

    def attempt(delta):
        w = {a2: max(delta, 0), b2: max(-delta, 0)}
        h = _compose(f, g, middle=(a2, b2), weights=w)
        holds, soft, values = edge_holds(h, p, target)
        return h, holds, soft, values

    def margin(values):
        lhs = values[0] + values[1]
        rhs = values[2] + values[3]
        return None if lhs is INF or rhs is INF else lhs - rhs

    points = _breakpoints(f, g, p, q, r)
    candidates = [Fraction(0)] + points
    candidates += [(u + v) / 2 for u, v in zip(points, points[1:])]
    lo = (points[0] if points else Fraction(0)) - 1
    hi = (points[-1] if points else Fraction(0)) + 1
    candidates += [lo, hi]
    for delta in candidates:
        h, holds, soft, values = attempt(delta)
        if holds:
            return h, soft, values
    # unbounded end pieces are linear; step far enough along a rising one
    for start, step in ((hi, 1), (lo, -1)):
        _, _, _, v1 = attempt(start)
        _, _, _, v2 = attempt(start + step)
        m1, m2 = margin(v1), margin(v2)
        if m1 is not None and m2 is not None and m2 > m1:
            delta = start + step * ((-m1) / (m2 - m1) + 1)
            h, holds, soft, values = attempt(delta)
            if holds:
                return h, soft, values
    return None


def detect_and_saturate(fns: Iterable[CostFunction]) -> GammaGraph:
    """Scan binary tables for edges, then close under the bar and chain rules.

    Bar rule: ``{p, q}`` gives ``{bar p, bar q}`` with the same softness.
    Chain rule: ``{p, q}`` and ``{q, r}`` give ``{p, bar r}``, soft if either
    premise is.  Derived edges carry their own witness tables.
    """
    fns = [f for f in fns if f.arity == 2]
    if not fns:
        raise ValueError("no binary functions to scan")
    n = fns[0].n
    graph = GammaGraph(n)
    nodes = graph.nodes
    for f in fns:
        for p in nodes:
            for q in nodes:
                if q < p:
                    continue
                holds, soft, values = edge_holds(f, p, q)
                if holds:
                    graph.add(Edge(p, q, soft, f, values, "scan"))
    changed = True
    while changed:
        changed = False
        for key in sorted(graph.edges):
            e = graph.edges[key]
            bar = Edge(_bar(e.p), _bar(e.q), e.soft, e.witness, e.values, "bar")
            if graph.add(bar):
                changed = True
        for key1 in sorted(graph.edges):
            e1 = graph.edges[key1]
            for p, q in {(e1.p, e1.q), (e1.q, e1.p)}:
                for key2 in sorted(graph.edges):
                    e2 = graph.edges[key2]
                    if q not in (e2.p, e2.q):
                        continue
                    r = e2.q if e2.p == q else e2.p
                    target = _bar(r)
                    soft = e1.soft or e2.soft
                    old = graph.edge(p, target)
                    if old is not None and (old.soft or not soft):
                        continue
                    f, _ = e1.oriented(p)
                    g, _ = e2.oriented(q)
                    built = _chain_witness(f, g, p, q, r)
                    if built is None:
                        raise RuntimeError(f"chain rule produced no witness for {p}, {q}, {r}")
                    h, h_soft, values = built
                    if graph.add(Edge(p, target, h_soft, h, values, "chain")):
                        changed = True
    return graph


def stp_from_graph(g: GammaGraph) -> BinaryPair:
    """A pair that is commutative on loop-free nodes and projects on looped ones.

    Loop-free nodes are 2-coloured by a sign with opposite signs across edges
    and across ``p`` / ``bar p``; each component starts at its least node with
    ``+1``.  On a loop-free pair the meet is the first label of the ``+1``
    orientation; on a looped pair the meet is the first argument.
    """
    loops = g.soft_self_loops()
    if loops:
        raise SoftSelfLoop(loops[0])
    M = set(g.M())
    adjacency = {p: set() for p in M}
    for (u, v), e in g.edges.items():
        if u != v and u in M and v in M:
            adjacency[u].add(v)
            adjacency[v].add(u)
    for p in M:
        adjacency[p].add(_bar(p))
    sign = {}
    for start in sorted(M):
        if start in sign:
            continue
        sign[start] = 1
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in sorted(adjacency[u]):
                if v not in sign:
                    sign[v] = -sign[u]
                    queue.append(v)
                elif sign[v] == sign[u]:
                    raise OddCycle(f"conflicting signs on {u} and {v}")
    behaviours = {}
    for a, b in itertools.combinations(range(g.n), 2):
        if (a, b) in M:
            behaviours[(a, b)] = MEET_LOW if sign[(a, b)] == 1 else MEET_HIGH
        else:
            behaviours[(a, b)] = PROJ_FIRST
    return BinaryPair.from_behaviours(g.n, behaviours)
