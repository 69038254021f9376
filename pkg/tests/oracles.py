"""Reference implementations that share no code path with the package under test."""

import itertools
from fractions import Fraction

from convcsp.core import INF


def naive_minimum(instance):
    """Plain Python enumeration; returns (lexicographically least argmin, cost)."""
    n = instance.language.n
    best, arg = INF, (0,) * instance.n_vars
    for x in itertools.product(range(n), repeat=instance.n_vars):
        total = Fraction(0)
        for t in instance.terms:
            total = total + instance.language.functions[t.function](*(x[v] for v in t.scope))
        if total < best:
            best, arg = total, x
    return arg, best


def binary_inequality_holds(f, meet, join):
    dom = [x for x in itertools.product(range(f.n), repeat=f.arity) if f(*x) != INF]
    for x, y in itertools.product(dom, repeat=2):
        lo = tuple(meet[a][b] for a, b in zip(x, y))
        hi = tuple(join[a][b] for a, b in zip(x, y))
        if f(*lo) + f(*hi) > f(*x) + f(*y):
            return False
    return True


def ternary_inequality_holds(f, op1, op2, op3):
    dom = [x for x in itertools.product(range(f.n), repeat=f.arity) if f(*x) != INF]
    for x, y, z in itertools.product(dom, repeat=3):
        outs = [tuple(op(a, b, c) for a, b, c in zip(x, y, z)) for op in (op1, op2, op3)]
        if sum((f(*o) for o in outs), Fraction(0)) > f(*x) + f(*y) + f(*z):
            return False
    return True


def is_witness(language, pair, triple):
    n = pair.n
    ops = [
        (lambda a, b, c, k=k: triple.at(a, b, c)[k]) for k in range(3)
    ]
    for f in language.functions.values():
        if not binary_inequality_holds(f, pair.meet, pair.join):
            return False
        if not ternary_inequality_holds(f, *ops):
            return False
    return n == triple.n


def submodular_2x2(t):
    """Boolean binary table (f00, f01, f10, f11) under either total order of {0, 1}."""
    f00, f01, f10, f11 = t
    return f00 + f11 <= f01 + f10 or f11 + f00 <= f10 + f01


def independence_number(n, edges):
    adj = {frozenset(e) for e in edges}
    best = 0
    for k in range(n, -1, -1):
        for S in itertools.combinations(range(n), k):
            if all(frozenset(p) not in adj for p in itertools.combinations(S, 2)):
                return k
    return best


def nonisomorphic_graphs(n):
    """One representative edge set per isomorphism class of simple graphs on ``n`` vertices."""
    all_edges = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n)))
    seen, reps = set(), []
    for mask in range(1 << len(all_edges)):
        edges = [e for k, e in enumerate(all_edges) if mask >> k & 1]
        canon = min(
            tuple(sorted(tuple(sorted((p[u], p[v]))) for u, v in edges)) for p in perms
        )
        if canon not in seen:
            seen.add(canon)
            reps.append(list(canon))
    return reps


def bar(p):
    return (p[1], p[0])
