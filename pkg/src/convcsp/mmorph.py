"""Operation tables, STP/MJN shape predicates, multimorphism checks and the classifier.

A *pair* ``<meet, join>`` is stored as two ``n x n`` tables; a *triple*
``<Mj1, Mj2, Mn3>`` as three flat tables of length ``n**3`` indexed by
``a*n*n + b*n + c``.  Unordered label pairs are tuples ``(a, b)`` with
``a < b``.
"""

from __future__ import annotations

import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .core import INF, BudgetError, CostFunction, Language, StructuralError

__all__ = [
    "all_pairs",
    "complement",
    "BinaryPair",
    "TernaryTriple",
    "Violation",
    "Tractable",
    "NPHard",
    "Unknown",
    "check_shapes",
    "verify_multimorphism",
    "classify",
    "build_majority",
    "mu_bar",
    "DEFAULT_NODE_LIMIT",
    "DEFAULT_TIME_LIMIT",
    "DEFAULT_DOMAIN_CAP",
]

DEFAULT_NODE_LIMIT = 5_000_000
DEFAULT_TIME_LIMIT = 120.0
DEFAULT_DOMAIN_CAP = 4

# per-pair behaviours searched by the classifier
MEET_LOW, MEET_HIGH, PROJ_FIRST, PROJ_SECOND = range(4)


def all_pairs(labels) -> list:
    """All unordered pairs of distinct labels, as sorted tuples in lexicographic order."""
    if isinstance(labels, int):
        labels = range(labels)
    return list(itertools.combinations(sorted(labels), 2))


def complement(M, labels) -> frozenset:
    return frozenset(all_pairs(labels)) - frozenset(M)


def _key(a: int, b: int) -> tuple:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class BinaryPair:
    """Tables for ``<meet, join>`` plus the commutative pair set ``M``."""

    n: int
    meet: tuple
    join: tuple
    M: frozenset

    def __post_init__(self):
        object.__setattr__(self, "meet", tuple(tuple(r) for r in self.meet))
        object.__setattr__(self, "join", tuple(tuple(r) for r in self.join))
        object.__setattr__(self, "M", frozenset(_key(*p) for p in self.M))

    @property
    def Mbar(self) -> frozenset:
        return complement(self.M, self.n)

    def orientation(self, pair) -> str:
        """``"first"`` or ``"second"``: which argument ``meet`` projects to on an M-bar pair."""
        a, b = _key(*pair)
        return "first" if self.meet[a][b] == a else "second"

    @classmethod
    def from_behaviours(cls, n: int, behaviours: dict) -> "BinaryPair":
        meet = [[a if a == b else None for b in range(n)] for a in range(n)]
        join = [[a if a == b else None for b in range(n)] for a in range(n)]
        M = set()
        for (a, b), code in behaviours.items():
            if code == MEET_LOW:
                meet[a][b] = meet[b][a] = a
                join[a][b] = join[b][a] = b
                M.add((a, b))
            elif code == MEET_HIGH:
                meet[a][b] = meet[b][a] = b
                join[a][b] = join[b][a] = a
                M.add((a, b))
            elif code == PROJ_FIRST:
                meet[a][b], meet[b][a] = a, b
                join[a][b], join[b][a] = b, a
            elif code == PROJ_SECOND:
                meet[a][b], meet[b][a] = b, a
                join[a][b], join[b][a] = a, b
            else:
                raise ValueError(f"unknown behaviour {code}")
        return cls(n, meet, join, frozenset(M))

    @classmethod
    def min_max(cls, n: int) -> "BinaryPair":
        return cls.from_behaviours(n, {p: MEET_LOW for p in all_pairs(n)})

    @classmethod
    def projections(cls, n: int) -> "BinaryPair":
        return cls.from_behaviours(n, {p: PROJ_FIRST for p in all_pairs(n)})


@dataclass(frozen=True)
class TernaryTriple:
    n: int
    mj1: tuple
    mj2: tuple
    mn3: tuple
    Mbar: frozenset

    def __post_init__(self):
        for name in ("mj1", "mj2", "mn3"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "Mbar", frozenset(_key(*p) for p in self.Mbar))

    def at(self, a: int, b: int, c: int) -> tuple:
        i = (a * self.n + b) * self.n + c
        return self.mj1[i], self.mj2[i], self.mn3[i]

    @classmethod
    def boolean_like(cls, n: int, Mbar=()) -> "TernaryTriple":
        """Majority/majority/minority on two-valued triples, identity elsewhere."""
        mj1, mj2, mn3 = [], [], []
        for a, b, c in itertools.product(range(n), repeat=3):
            if len({a, b, c}) == 2:
                maj = a if a in (b, c) else b
                mino = (Counter((a, b, c)) - Counter((maj, maj))).most_common(1)[0][0]
                out = (maj, maj, mino)
            else:
                out = (a, b, c)
            mj1.append(out[0]), mj2.append(out[1]), mn3.append(out[2])
        return cls(n, mj1, mj2, mn3, frozenset(Mbar))


@dataclass(frozen=True)
class Violation:
    function: str
    tuples: tuple
    lhs: object
    rhs: object

    @property
    def kind(self) -> str:
        return "binary" if len(self.tuples) == 2 else "ternary"


@dataclass(frozen=True)
class Tractable:
    M: frozenset
    pair: BinaryPair
    triple: TernaryTriple
    nodes: int = 0
    verdict: str = field(default="tractable", init=False)


@dataclass(frozen=True)
class NPHard:
    nodes: int = 0
    verdict: str = field(default="np-hard", init=False)


@dataclass(frozen=True)
class Unknown:
    nodes: int = 0
    reason: str = ""
    verdict: str = field(default="unknown", init=False)


def _majority_minority(a, b, c):
    cnt = Counter((a, b, c))
    (maj, _), (mino, _) = cnt.most_common(2)
    return maj, mino


def check_shapes(pair: BinaryPair, triple: TernaryTriple, M=None) -> bool:
    """True iff ``pair`` is an STP on ``M`` and ``triple`` an MJN on its complement."""
    n = pair.n
    if triple.n != n or len(pair.meet) != n or any(len(r) != n for r in pair.meet + pair.join):
        raise StructuralError("operation tables disagree on the domain size")
    if any(len(t) != n**3 for t in (triple.mj1, triple.mj2, triple.mn3)):
        raise StructuralError("ternary tables must have n**3 entries")
    M = pair.M if M is None else frozenset(_key(*p) for p in M)
    Mbar = complement(M, n)
    for a in range(n):
        if pair.meet[a][a] != a or pair.join[a][a] != a:
            return False
    for a, b in all_pairs(n):
        m_ab, m_ba = pair.meet[a][b], pair.meet[b][a]
        j_ab, j_ba = pair.join[a][b], pair.join[b][a]
        if sorted((m_ab, j_ab)) != [a, b] or sorted((m_ba, j_ba)) != [a, b]:
            return False
        if (a, b) in M:
            if m_ab != m_ba or j_ab != j_ba:
                return False
        elif not ((m_ab, m_ba) == (a, b) or (m_ab, m_ba) == (b, a)):
            return False
    for a, b, c in itertools.product(range(n), repeat=3):
        out = triple.at(a, b, c)
        if sorted(out) != sorted((a, b, c)):
            return False
        values = {a, b, c}
        if len(values) == 2 and _key(*values) in Mbar:
            maj, mino = _majority_minority(a, b, c)
            if out != (maj, maj, mino):
                return False
    return True


class _ScaledFunction:
    """Cost table as Python ints (common scale) with ``math.inf`` for infinity."""

    __slots__ = ("name", "n", "arity", "costs", "dom", "weights")

    def __init__(self, name: str, f: CostFunction, scale: int):
        self.name = name
        self.n = f.n
        self.arity = f.arity
        self.costs = [math.inf if v is INF else int(v * scale) for v in f.table]
        self.dom = f.dom()
        self.weights = [f.n ** (f.arity - 1 - k) for k in range(f.arity)]

    def index(self, x) -> int:
        return sum(a * w for a, w in zip(x, self.weights))


def _scaled(language: Language):
    dens = [v.denominator for f in language.functions.values() for v in f.table if v is not INF]
    scale = math.lcm(*dens) if dens else 1
    return scale, [_ScaledFunction(name, f, scale) for name, f in language.functions.items()]


def _as_cost(value, scale):
    return INF if value == math.inf else Fraction(value, scale)


def verify_multimorphism(language: Language, pair: BinaryPair, triple: TernaryTriple) -> Optional[Violation]:
    """First violation of the binary or ternary multimorphism inequality, or ``None``.

    Per function (in language order) all ordered pairs of ``dom f`` are scanned
    lexicographically, then all ordered triples.
    """
    if pair.n != language.n or triple.n != language.n:
        raise StructuralError("operation tables and language disagree on the domain size")
    scale, fns = _scaled(language)
    n = language.n
    meet, join = pair.meet, pair.join
    for sf in fns:
        costs = sf.costs
        for x in sf.dom:
            cx = costs[sf.index(x)]
            for y in sf.dom:
                rhs = cx + costs[sf.index(y)]
                lo = [meet[a][b] for a, b in zip(x, y)]
                hi = [join[a][b] for a, b in zip(x, y)]
                lhs = costs[sf.index(lo)] + costs[sf.index(hi)]
                if lhs > rhs:
                    return Violation(sf.name, (x, y), _as_cost(lhs, scale), _as_cost(rhs, scale))
        mj1, mj2, mn3 = triple.mj1, triple.mj2, triple.mn3
        for x in sf.dom:
            cx = costs[sf.index(x)]
            for y in sf.dom:
                cxy = cx + costs[sf.index(y)]
                for z in sf.dom:
                    rhs = cxy + costs[sf.index(z)]
                    cells = [(a * n + b) * n + c for a, b, c in zip(x, y, z)]
                    lhs = (
                        costs[sf.index([mj1[t] for t in cells])]
                        + costs[sf.index([mj2[t] for t in cells])]
                        + costs[sf.index([mn3[t] for t in cells])]
                    )
                    if lhs > rhs:
                        return Violation(sf.name, (x, y, z), _as_cost(lhs, scale), _as_cost(rhs, scale))
    return None


def mu_bar(pair: BinaryPair, x: int, y: int, z: int) -> int:
    m, j = pair.meet, pair.join
    return m[m[j[y][x]][j[y][z]]][j[x][z]]


def build_majority(pair: BinaryPair, triple: TernaryTriple) -> tuple:
    """The ternary operation ``Mj1(mu_bar(x,y,z), mu_bar(y,z,x), mu_bar(z,x,y))`` as a flat table."""
    n = pair.n
    out = []
    for x, y, z in itertools.product(range(n), repeat=3):
        a, b, c = mu_bar(pair, x, y, z), mu_bar(pair, y, z, x), mu_bar(pair, z, x, y)
        out.append(triple.mj1[(a * n + b) * n + c])
    return tuple(out)


# ---------------------------------------------------------------------------
# classifier search


class _Budget:
    def __init__(self, node_limit, time_limit):
        self.node_limit = node_limit
        self.deadline = None if time_limit is None else time.monotonic() + time_limit
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.node_limit is not None and self.nodes > self.node_limit:
            raise _OutOfBudget("node limit")
        if self.deadline is not None and (self.nodes & 1023) == 0 and time.monotonic() > self.deadline:
            raise _OutOfBudget("time limit")


class _OutOfBudget(Exception):
    pass


def _triple_options(a, b, c, Mbar):
    """Candidate ``(Mj1, Mj2, Mn3)`` outputs for input ``(a, b, c)`` with permutation positions."""
    t = (a, b, c)
    values = set(t)
    if len(values) == 1:
        return [((a, a, a), (0, 1, 2))], True
    if len(values) == 2 and _key(*values) in Mbar:
        maj, mino = _majority_minority(a, b, c)
        return [((maj, maj, mino), None)], True
    seen, options = set(), []
    for p in itertools.permutations(range(3)):
        out = (t[p[0]], t[p[1]], t[p[2]])
        if out not in seen:
            seen.add(out)
            options.append((out, p))
    return options, False


class _MJNSearch:
    """Backtracking over the free entries of a conservative triple for a fixed M-bar."""

    def __init__(self, n, fns, Mbar, budget, reverse):
        self.n = n
        self.fns = fns
        self.Mbar = Mbar
        self.budget = budget
        self.reverse = reverse

    def run(self):
        n = self.n
        size = n**3
        outs = [None] * size
        free, options = [], {}
        for cell, (a, b, c) in enumerate(itertools.product(range(n), repeat=3)):
            opts, forced = _triple_options(a, b, c, self.Mbar)
            if forced:
                outs[cell] = opts[0][0]
            else:
                free.append(cell)
                options[cell] = opts[::-1] if self.reverse else opts
        if not self.Mbar and not self.reverse:
            # the identity permutation satisfies every ternary inequality with equality
            for cell in free:
                outs[cell] = options[cell][0][0]
            return outs
        position = {cell: k for k, cell in enumerate(free)}
        buckets = [[] for _ in free]
        for sf in self.fns:
            costs = sf.costs
            idx = sf.index
            dom = sf.dom
            for x in dom:
                cx = costs[idx(x)]
                for y in dom:
                    cxy = cx + costs[idx(y)]
                    for z in dom:
                        if x == y == z:
                            continue
                        rhs = cxy + costs[idx(z)]
                        cells = tuple((a * n + b) * n + c for a, b, c in zip(x, y, z))
                        last = max((position[c] for c in cells if c in position), default=-1)
                        con = (costs, sf.weights, cells, rhs)
                        if last < 0:
                            if not self._holds(outs, con):
                                return None
                        else:
                            buckets[last].append(con)
        self.buckets = buckets
        self.free = free
        self.options = options
        if self._dfs(0, outs, True):
            return outs
        return None

    @staticmethod
    def _holds(outs, con):
        costs, weights, cells, rhs = con
        total = 0
        for slot in range(3):
            idx = 0
            for cell, w in zip(cells, weights):
                idx += outs[cell][slot] * w
            total += costs[idx]
        return total <= rhs

    def _dfs(self, k, outs, tied):
        if k == len(self.free):
            return True
        cell = self.free[k]
        for out, perm in self.options[cell]:
            self.budget.tick()
            if tied and out[0] != out[1] and perm[0] > perm[1]:
                continue  # Mj1/Mj2 exchange symmetry
            outs[cell] = out
            if all(self._holds(outs, con) for con in self.buckets[k]):
                if self._dfs(k + 1, outs, tied and out[0] == out[1]):
                    return True
        outs[cell] = None
        return False


class _Classifier:
    def __init__(self, language, budget, reverse):
        self.n = language.n
        self.scale, self.fns = _scaled(language)
        self.pairs = all_pairs(self.n)
        self.budget = budget
        self.reverse = reverse
        self.order = [MEET_LOW, MEET_HIGH, PROJ_FIRST, PROJ_SECOND]
        if reverse:
            self.order.reverse()
        self.mjn_cache = {}
        self.pair_index = {p: i for i, p in enumerate(self.pairs)}
        self._bucket_binary()

    def _bucket_binary(self):
        buckets = [[] for _ in self.pairs]
        for sf in self.fns:
            for x in sf.dom:
                cx = sf.costs[sf.index(x)]
                for y in sf.dom:
                    if x == y:
                        continue
                    involved = {self.pair_index[_key(a, b)] for a, b in zip(x, y) if a != b}
                    rhs = cx + sf.costs[sf.index(y)]
                    buckets[max(involved)].append((sf.costs, sf.weights, x, y, rhs))
        self.buckets = buckets

    def run(self):
        n = self.n
        self.meet = [[a if a == b else None for b in range(n)] for a in range(n)]
        self.join = [[a if a == b else None for b in range(n)] for a in range(n)]
        self.behaviour = [None] * len(self.pairs)
        return self._dfs(0)

    def _set(self, k, code):
        a, b = self.pairs[k]
        m, j = self.meet, self.join
        if code == MEET_LOW:
            m[a][b] = m[b][a] = a
            j[a][b] = j[b][a] = b
        elif code == MEET_HIGH:
            m[a][b] = m[b][a] = b
            j[a][b] = j[b][a] = a
        elif code == PROJ_FIRST:
            m[a][b], m[b][a] = a, b
            j[a][b], j[b][a] = b, a
        else:
            m[a][b], m[b][a] = b, a
            j[a][b], j[b][a] = a, b
        self.behaviour[k] = code

    def _binary_ok(self, k):
        m, j = self.meet, self.join
        for costs, weights, x, y, rhs in self.buckets[k]:
            lo = hi = 0
            for a, b, w in zip(x, y, weights):
                lo += m[a][b] * w
                hi += j[a][b] * w
            if costs[lo] + costs[hi] > rhs:
                return False
        return True

    def _dfs(self, k):
        if k == len(self.pairs):
            Mbar = frozenset(p for p, c in zip(self.pairs, self.behaviour) if c in (PROJ_FIRST, PROJ_SECOND))
            if Mbar not in self.mjn_cache:
                self.mjn_cache[Mbar] = _MJNSearch(self.n, self.fns, Mbar, self.budget, self.reverse).run()
            outs = self.mjn_cache[Mbar]
            if outs is None:
                return None
            return dict(zip(self.pairs, self.behaviour)), Mbar, outs
        for code in self.order:
            self.budget.tick()
            self._set(k, code)
            if self._binary_ok(k):
                found = self._dfs(k + 1)
                if found is not None:
                    return found
        return None


def classify(
    language: Language,
    node_limit: Optional[int] = DEFAULT_NODE_LIMIT,
    time_limit: Optional[float] = DEFAULT_TIME_LIMIT,
    domain_cap: int = DEFAULT_DOMAIN_CAP,
    reverse: bool = False,
):
    """Decide tractability of a conservative language by exhaustive witness search.

    Returns :class:`Tractable` with the first witness in search order,
    :class:`NPHard` when the space is exhausted, or :class:`Unknown` when the
    node or time budget runs out.  ``reverse`` flips every value ordering,
    giving an independent traversal of the same space.
    """
    if language.n > domain_cap:
        raise BudgetError(f"domain size {language.n} exceeds classifier cap {domain_cap}")
    budget = _Budget(node_limit, time_limit)
    try:
        found = _Classifier(language, budget, reverse).run()
    except _OutOfBudget as exc:
        return Unknown(nodes=budget.nodes, reason=str(exc))
    if found is None:
        return NPHard(nodes=budget.nodes)
    behaviours, Mbar, outs = found
    n = language.n
    pair = BinaryPair.from_behaviours(n, behaviours)
    triple = TernaryTriple(n, [o[0] for o in outs], [o[1] for o in outs], [o[2] for o in outs], Mbar)
    result = Tractable(M=pair.M, pair=pair, triple=triple, nodes=budget.nodes)
    # the witness is re-checked independently of the incremental search
    if not check_shapes(pair, triple) or verify_multimorphism(language, pair, triple) is not None:
        raise AssertionError("classifier produced an invalid witness")
    return result
