"""Hardness gadgets, random instances and the built-in language corpus."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import INF, CostFunction, Instance, Language, StructuralError

__all__ = [
    "SimpleGraph",
    "xor_language",
    "mis_language",
    "mis_instance",
    "random_instance",
    "parse_edge_list",
    "format_edge_list",
    "corpus",
    "CORPUS_NAMES",
]


@dataclass(frozen=True)
class SimpleGraph:
    n: int
    edges: tuple

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise StructuralError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise StructuralError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise StructuralError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple(sorted(seen)))


def parse_edge_list(text: str) -> SimpleGraph:
    """First line ``n m``, then ``m`` lines ``u v`` with 0-based vertices."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise StructuralError("header must be 'n m'")
    n, m = (int(t) for t in lines[0])
    if len(lines) - 1 != m:
        raise StructuralError(f"header promises {m} edges, found {len(lines) - 1}")
    edges = []
    for k, parts in enumerate(lines[1:], start=2):
        if len(parts) != 2:
            raise StructuralError(f"line {k}: expected 'u v'")
        edges.append((int(parts[0]), int(parts[1])))
    return SimpleGraph(n, tuple(edges))


def format_edge_list(g: SimpleGraph) -> str:
    return "\n".join([f"{g.n} {len(g.edges)}"] + [f"{u} {v}" for u, v in g.edges]) + "\n"


def xor_language() -> Language:
    """D = {a, b} with one binary that charges equal labels."""
    h = CostFunction(2, 2, (1, 0, 0, 1))
    return Language(("a", "b"), {"h": h})


def mis_language() -> Language:
    # b marks a vertex in the independent set; two adjacent b's are forbidden
    g = CostFunction(2, 2, (0, 0, 0, INF))
    h = CostFunction(2, 1, (1, 0))
    return Language(("a", "b"), {"g": g, "h": h})


def mis_instance(g: SimpleGraph) -> Instance:
    """Minimum cost equals the vertex count minus the independence number."""
    terms = [("g", e) for e in g.edges] + [("h", (v,)) for v in range(g.n)]
    return Instance(mis_language(), g.n, tuple(terms))


def random_instance(language: Language, n: int, t: int, seed: int) -> Instance:
    """``t`` terms over ``n`` variables drawn from one ``random.Random(seed)`` stream.

    Per term: a function name uniformly from the sorted names, then a scope
    of distinct variables via ``sample``.
    """
    if t < 0:
        raise ValueError("negative term count")
    rng = random.Random(seed)
    names = sorted(language.functions)
    terms = []
    for _ in range(t):
        name = rng.choice(names)
        arity = language.functions[name].arity
        if arity > n:
            raise ValueError(f"function {name!r} of arity {arity} needs at least {arity} variables")
        terms.append((name, tuple(rng.sample(range(n), arity))))
    return Instance(language, n, tuple(terms))


def _table(n: int, arity: int, fn) -> CostFunction:
    return CostFunction.from_callable(n, arity, fn)


def _with_unaries(n: int, functions: dict) -> dict:
    """Add every non-constant {0,1} unary plus one rational-valued unary."""
    out = dict(functions)
    for v in itertools.product((0, 1), repeat=n):
        if len(set(v)) > 1:
            out["u" + "".join(map(str, v))] = CostFunction(n, 1, v)
    weights = [Fraction(0), Fraction(3, 2), Fraction(1, 3)][:n]
    out["w"] = CostFunction(n, 1, weights)
    return out


def _potts() -> Language:
    return Language(("0", "1"), _with_unaries(2, {"eq": _table(2, 2, lambda x, y: int(x != y))}))


def _disequality() -> Language:
    return Language(("0", "1"), _with_unaries(2, {"ne": _table(2, 2, lambda x, y: 0 if x != y else INF)}))


def _interval() -> Language:
    near = _table(3, 2, lambda x, y: 0 if abs(x - y) <= 1 else INF)
    return Language(("0", "1", "2"), _with_unaries(3, {"near": near}))


def _chain_mixed() -> Language:
    fns = {
        "half": _table(3, 2, lambda x, y: INF if {x, y} == {0, 2} else Fraction(abs(x - y), 2)),
        "le": _table(3, 2, lambda x, y: 0 if x <= y else INF),
        "mono3": _table(3, 3, lambda x, y, z: 0 if x <= y <= z else INF),
    }
    return Language(("0", "1", "2"), _with_unaries(3, fns))


def _swap_mixed() -> Language:
    # the pair {0, 1} gets no commutative operation: the MJN side is exercised
    fns = {
        "swap": _table(3, 2, lambda x, y: 0 if (x, y) in {(0, 1), (1, 0), (2, 2)} else INF),
        "cut2": _table(3, 2, lambda x, y: Fraction(3, 2) * ((x == 2) != (y == 2))),
    }
    return Language(("0", "1", "2"), _with_unaries(3, fns))


def _spread_mixed() -> Language:
    fns = {
        "le": _table(3, 2, lambda x, y: 0 if x <= y else INF),
        "spread3": _table(3, 3, lambda x, y, z: max(x, y, z) - min(x, y, z)),
    }
    return Language(("0", "1", "2"), _with_unaries(3, fns))


def _permutations() -> Language:
    # every pair of labels is non-commutative, so each growth step is substantive
    fns = {}
    for perm in itertools.permutations(range(3)):
        name = "perm" + "".join(map(str, perm))
        fns[name] = _table(3, 2, lambda x, y, perm=perm: 0 if y == perm[x] else INF)
    return Language(("0", "1", "2"), _with_unaries(3, fns))


_CORPUS = {
    "potts": _potts,
    "disequality": _disequality,
    "interval": _interval,
    "chain-mixed": _chain_mixed,
    "swap-mixed": _swap_mixed,
    "spread-mixed": _spread_mixed,
    "permutations": _permutations,
}

CORPUS_NAMES: Sequence[str] = tuple(_CORPUS)


def corpus(name: str) -> Language:
    """A tractable language from the built-in test corpus."""
    try:
        return _CORPUS[name]()
    except KeyError:
        raise KeyError(f"unknown corpus language {name!r}; choose from {', '.join(CORPUS_NAMES)}") from None
