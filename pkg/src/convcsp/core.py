"""Costs, cost-function tables, languages, instances and the exhaustive oracle.

Costs are exact: a finite cost is a non-negative :class:`fractions.Fraction`
and the only non-finite cost is the singleton :data:`INF`.  ``Fraction`` and
``int`` defer to ``INF`` for mixed arithmetic and comparison, so ordinary
``+``, ``sum`` and ``<`` work on extended costs directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "INF",
    "ExtendedCost",
    "StructuralError",
    "BudgetError",
    "to_cost",
    "format_cost",
    "is_finite",
    "CostFunction",
    "Language",
    "Term",
    "Instance",
    "eval_instance",
    "brute_force_solve",
    "objective_table",
    "ScaledTables",
    "DEFAULT_GUARD",
]

DEFAULT_GUARD = 10**7


class StructuralError(ValueError):
    """Malformed table, scope, or document."""


class BudgetError(RuntimeError):
    """A configured size or search limit was exceeded."""


class _Infinity:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __reduce__(self):
        return (_Infinity, ())

    def __repr__(self):
        return "INF"

    __str__ = __repr__

    def __hash__(self):
        return hash("convcsp.INF")

    def _check(self, other):
        if other is self or isinstance(other, (int, Fraction)):
            return True
        return False

    def __add__(self, other):
        if self._check(other):
            return self
        return NotImplemented

    __radd__ = __add__

    def __eq__(self, other):
        return other is self

    def __ne__(self, other):
        return other is not self

    def __lt__(self, other):
        if self._check(other):
            return False
        return NotImplemented

    def __le__(self, other):
        if self._check(other):
            return other is self
        return NotImplemented

    def __gt__(self, other):
        if self._check(other):
            return other is not self
        return NotImplemented

    def __ge__(self, other):
        if self._check(other):
            return True
        return NotImplemented


INF = _Infinity()

ExtendedCost = Union[Fraction, _Infinity]


def to_cost(value) -> ExtendedCost:
    """Parse ``value`` (int, Fraction, ``"p/q"``, ``"inf"``) into an extended cost."""
    if value is INF:
        return INF
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf"):
            return INF
        try:
            value = Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise StructuralError(f"cannot parse cost {value!r}") from exc
    elif isinstance(value, bool) or not isinstance(value, (int, Fraction)):
        raise StructuralError(f"costs must be exact rationals, got {value!r}")
    value = Fraction(value)
    if value < 0:
        raise StructuralError(f"negative cost {value}")
    return value


def format_cost(c: ExtendedCost) -> str:
    if c is INF:
        return "inf"
    c = Fraction(c)
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def is_finite(c: ExtendedCost) -> bool:
    return c is not INF


class CostFunction:
    """A total table ``D^arity -> ExtendedCost``, stored densely.

    Tuples are indexed lexicographically: ``(x_1, ..., x_m)`` lives at
    ``sum(x_k * n**(m-1-k))``, the order of ``itertools.product``.
    """

    __slots__ = ("arity", "n", "table", "_dom", "_hash")

    def __init__(self, n: int, arity: int, table: Sequence):
        if n < 1 or arity < 1:
            raise StructuralError("domain size and arity must be positive")
        if len(table) != n**arity:
            raise StructuralError(
                f"table has {len(table)} entries, expected {n}**{arity} = {n ** arity}"
            )
        self.n = n
        self.arity = arity
        self.table = tuple(to_cost(v) for v in table)
        self._dom = None
        self._hash = None

    @classmethod
    def from_callable(cls, n: int, arity: int, fn: Callable[..., object]) -> "CostFunction":
        return cls(n, arity, [fn(*x) for x in itertools.product(range(n), repeat=arity)])

    @classmethod
    def from_mapping(cls, n: int, arity: int, mapping: Mapping[tuple, object], default=INF):
        """Sparse constructor: unlisted tuples take ``default`` (infinite unless given)."""
        table = [default] * (n**arity)
        for x, v in mapping.items():
            table[cls.index_of(n, x)] = v
        return cls(n, arity, table)

    @staticmethod
    def index_of(n: int, x: Sequence[int]) -> int:
        idx = 0
        for a in x:
            if not 0 <= a < n:
                raise StructuralError(f"label {a} out of range for domain of size {n}")
            idx = idx * n + a
        return idx

    def tuples(self) -> Iterator[tuple]:
        return itertools.product(range(self.n), repeat=self.arity)

    def __call__(self, *x: int) -> ExtendedCost:
        if len(x) == 1 and isinstance(x[0], tuple):
            x = x[0]
        return self.table[self.index_of(self.n, x)]

    def dom(self) -> tuple:
        """Tuples with finite cost, in lexicographic order."""
        if self._dom is None:
            self._dom = tuple(x for x, v in zip(self.tuples(), self.table) if v is not INF)
        return self._dom

    @property
    def is_crisp(self) -> bool:
        return all(v is INF or v == 0 for v in self.table)

    @property
    def is_finite_valued(self) -> bool:
        return all(v is not INF for v in self.table)

    def __eq__(self, other):
        if not isinstance(other, CostFunction):
            return NotImplemented
        return (self.n, self.arity, self.table) == (other.n, other.arity, other.table)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self.arity, self.table))
        return self._hash

    def __repr__(self):
        body = ", ".join(format_cost(v) for v in self.table)
        return f"CostFunction(n={self.n}, arity={self.arity}, [{body}])"


@dataclass(frozen=True)
class Language:
    """Named cost functions over a common labelled domain.

    With ``conservative`` set the language is understood to also contain every
    {0,1}-valued unary function; those are never materialised.
    """

    labels: tuple
    functions: Mapping[str, CostFunction]
    conservative: bool = True

    def __post_init__(self):
        labels = tuple(str(a) for a in self.labels)
        if not labels:
            raise StructuralError("empty domain")
        if len(set(labels)) != len(labels):
            raise StructuralError("duplicate label names")
        object.__setattr__(self, "labels", labels)
        fns = dict(self.functions)
        for name, f in fns.items():
            if not isinstance(f, CostFunction):
                raise StructuralError(f"function {name!r} is not a CostFunction")
            if f.n != len(labels):
                raise StructuralError(
                    f"function {name!r} is over a domain of size {f.n}, language has {len(labels)}"
                )
        object.__setattr__(self, "functions", fns)

    @property
    def n(self) -> int:
        return len(self.labels)

    def __getitem__(self, name: str) -> CostFunction:
        return self.functions[name]

    def binary_functions(self) -> list:
        return [f for f in self.functions.values() if f.arity == 2]

    def __hash__(self):
        return hash((self.labels, tuple(self.functions.items()), self.conservative))


@dataclass(frozen=True)
class Term:
    function: str
    scope: tuple

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))


@dataclass(frozen=True)
class Instance:
    """A VCSP instance: ``n_vars`` variables and a list of terms over ``language``."""

    language: Language
    n_vars: int
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if self.n_vars < 0:
            raise StructuralError("negative variable count")
        for pos, t in enumerate(terms):
            if t.function not in self.language.functions:
                raise StructuralError(f"term {pos}: unknown function {t.function!r}")
            f = self.language.functions[t.function]
            if len(t.scope) != f.arity:
                raise StructuralError(
                    f"term {pos}: scope length {len(t.scope)} != arity {f.arity}"
                )
            for v in t.scope:
                if not 0 <= v < self.n_vars:
                    raise StructuralError(f"term {pos}: variable {v} out of range")

    def term_functions(self) -> Iterator[tuple]:
        for t in self.terms:
            yield self.language.functions[t.function], t.scope


def eval_instance(instance: Instance, x: Sequence[int]) -> ExtendedCost:
    if len(x) != instance.n_vars:
        raise StructuralError(f"assignment has length {len(x)}, instance has {instance.n_vars} variables")
    n = instance.language.n
    for a in x:
        if not 0 <= a < n:
            raise StructuralError(f"label {a} out of range")
    total = Fraction(0)
    for f, scope in instance.term_functions():
        total = total + f.table[CostFunction.index_of(n, [x[v] for v in scope])]
        if total is INF:
            return INF
    return total


class ScaledTables:
    """Integer images of a collection of tables under a common denominator.

    ``values[k]`` is an int64 (or object) array for table ``k`` with infinite
    entries set to 0 and flagged in ``infinite[k]``.  Used by vectorised sweeps
    where per-entry ``Fraction`` arithmetic would dominate.
    """

    def __init__(self, functions: Sequence[CostFunction], headroom: int = 1):
        denominators = [v.denominator for f in functions for v in f.table if v is not INF]
        self.scale = math.lcm(*denominators) if denominators else 1
        largest = 0
        values, infinite = [], []
        for f in functions:
            ints = [0 if v is INF else int(v * self.scale) for v in f.table]
            largest = max(largest, max(ints, default=0))
            infinite.append(np.array([v is INF for v in f.table], dtype=bool))
            values.append(ints)
        self.exact_int64 = largest * max(headroom, 1) < 2**62
        dtype = np.int64 if self.exact_int64 else object
        self.values = [np.array(v, dtype=dtype) for v in values]
        self.infinite = infinite

    def to_cost(self, scaled, infinite: bool = False) -> ExtendedCost:
        if infinite:
            return INF
        return Fraction(int(scaled), self.scale)


def _digits(indices: np.ndarray, n: int, width: int) -> np.ndarray:
    out = np.empty((indices.shape[0], width), dtype=np.int64)
    rest = indices.copy()
    for k in range(width - 1, -1, -1):
        out[:, k] = rest % n
        rest //= n
    return out


def _evaluate(instance: Instance, scaled: ScaledTables, xs: np.ndarray):
    n = instance.language.n
    acc = np.zeros(xs.shape[0], dtype=scaled.values[0].dtype)
    bad = np.zeros(xs.shape[0], dtype=bool)
    for k, t in enumerate(instance.terms):
        flat = np.zeros(xs.shape[0], dtype=np.int64)
        for v in t.scope:
            flat = flat * n + xs[:, v]
        acc = acc + scaled.values[k][flat]
        bad |= scaled.infinite[k][flat]
    return acc, bad


def objective_table(instance: Instance, guard: int = DEFAULT_GUARD):
    """Scaled costs of every assignment, in lexicographic order.

    Returns ``(values, infinite, scale)``: ``values[i] / scale`` is the cost of
    the ``i``-th assignment unless ``infinite[i]``.
    """
    n, nv = instance.language.n, instance.n_vars
    total = n**nv
    if total > guard:
        raise BudgetError(f"objective table of {total} entries exceeds guard {guard}")
    if not instance.terms:
        return np.zeros(total, dtype=np.int64), np.zeros(total, dtype=bool), 1
    scaled = ScaledTables([instance.language.functions[t.function] for t in instance.terms],
                          headroom=len(instance.terms))
    xs = _digits(np.arange(total, dtype=np.int64), n, nv)
    acc, bad = _evaluate(instance, scaled, xs)
    return acc, bad, scaled.scale


def brute_force_solve(instance: Instance, guard: int = DEFAULT_GUARD, chunk: int = 1 << 16):
    """Exhaustive minimisation; returns ``(assignment, cost)``.

    Ties go to the lexicographically least assignment.  When no assignment is
    finite the result is ``((0,)*n, INF)``.
    """
    n = instance.language.n
    nv = instance.n_vars
    total = n**nv
    if total > guard:
        raise BudgetError(f"exhaustive search over {n}^{nv} = {total} assignments exceeds guard {guard}")
    if not instance.terms:
        return (0,) * nv, Fraction(0)
    scaled = ScaledTables([instance.language.functions[t.function] for t in instance.terms],
                          headroom=len(instance.terms))
    best_cost, best_x = None, None
    for start in range(0, total, chunk):
        xs = _digits(np.arange(start, min(total, start + chunk), dtype=np.int64), n, nv)
        acc, bad = _evaluate(instance, scaled, xs)
        ok = np.flatnonzero(~bad)
        if ok.size == 0:
            continue
        # argmin returns the first minimiser, i.e. the lexicographically least
        pos = int(ok[np.argmin(acc[ok])])
        val = int(acc[pos])
        if best_cost is None or val < best_cost:
            best_cost, best_x = val, tuple(int(a) for a in xs[pos])
    if best_cost is None:
        return (0,) * nv, INF
    return best_x, Fraction(best_cost, scaled.scale)
