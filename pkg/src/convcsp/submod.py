"""Exact minimisation once every variable carries a tournament pair.

Each domain is ordered by its join tournament.  Instances whose reduced terms
have arity at most two and whose tournaments are acyclic go through a
threshold (chain) min-cut encoding; everything else is enumerated under a
size guard.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .consistency import bits
from .core import DEFAULT_GUARD, INF, BudgetError, Instance, is_finite
from .mmorph import BinaryPair

__all__ = [
    "TournamentOrder",
    "FlowNetwork",
    "NotSubmodular",
    "ReducedProblem",
    "tournament_order",
    "reduce_instance",
    "build_mincut",
    "max_flow",
    "solve_stage3",
]


class NotSubmodular(ValueError):
    """A pairwise table cannot be encoded as non-negative cut capacities."""


@dataclass(frozen=True)
class TournamentOrder:
    order: Optional[tuple] = None  # labels, least first
    cycle: Optional[tuple] = None  # a -> b -> c -> a under "join gives the second"

    @property
    def is_total(self) -> bool:
        return self.order is not None


def tournament_order(pair: BinaryPair, labels=None) -> TournamentOrder:
    """Order ``labels`` so that ``a`` precedes ``b`` exactly when ``a ⊔ b = b``.

    ``labels`` is an iterable of label ids or a bitmask; it defaults to the
    whole domain.  The pair must be commutative on every pair of ``labels``.
    """
    if labels is None:
        labels = range(pair.n)
    elif isinstance(labels, int):
        labels = bits(labels)
    labels = sorted(labels)
    for a, b in itertools.combinations(labels, 2):
        if pair.join[a][b] != pair.join[b][a] or {pair.join[a][b], pair.meet[a][b]} != {a, b}:
            raise ValueError(f"pair is not a tournament pair on {{{a}, {b}}}")

    def before(a, b):
        return pair.join[a][b] == b

    wins = {a: sum(before(a, b) for b in labels if b != a) for a in labels}
    order = sorted(labels, key=lambda a: (-wins[a], a))
    if all(before(a, b) for a, b in itertools.combinations(order, 2)):
        return TournamentOrder(order=tuple(order))
    for a, b, c in itertools.permutations(labels, 3):
        if a == min(a, b, c) and before(a, b) and before(b, c) and before(c, a):
            return TournamentOrder(cycle=(a, b, c))
    raise AssertionError("tournament has neither an order nor a 3-cycle")


@dataclass
class ReducedProblem:
    """Terms restricted to the current domains with fixed and repeated variables substituted.

    ``terms`` maps a sorted variable tuple (length 1, 2 or more) to a dict from
    label tuples to costs.  ``constant`` collects terms with no free variable.
    """

    n_vars: int
    domains: list  # bitmasks
    terms: dict
    constant: object = Fraction(0)

    def free(self) -> list:
        return [v for v in range(self.n_vars) if len(list(bits(self.domains[v]))) > 1]

    def max_arity(self) -> int:
        return max((len(vs) for vs in self.terms), default=0)

    def value(self, x) -> object:
        total = self.constant
        for vs, table in self.terms.items():
            total = total + table.get(tuple(x[v] for v in vs), INF)
        return total


def _tighten_ok(micro, assignment: dict) -> bool:
    for (u, a), (v, b) in itertools.combinations(sorted(assignment.items()), 2):
        if not micro.rel[u][v][a] >> b & 1:
            return False
    return True


def reduce_instance(instance: Instance, domains=None, micro=None) -> ReducedProblem:
    """Restrict every term to ``domains`` and (optionally) to the pairwise relations of ``micro``.

    Terms on the same variables are summed.  Domains are then pruned to a
    fixpoint: labels with infinite unary cost or no finite support in some
    pairwise table are dropped.
    """
    nv = instance.n_vars
    full = (1 << instance.language.n) - 1
    domains = list(domains) if domains is not None else [full] * nv
    terms: dict = {}
    constant = Fraction(0)
    for f, scope in instance.term_functions():
        vs = tuple(sorted(set(scope)))
        free = tuple(v for v in vs if len(list(bits(domains[v]))) > 1)
        fixed = {v: next(bits(domains[v]), None) for v in vs if v not in free}
        if any(a is None for a in fixed.values()):
            constant = INF
            continue
        table = {}
        for labels in itertools.product(*(list(bits(domains[v])) for v in free)):
            assignment = dict(fixed)
            assignment.update(zip(free, labels))
            if micro is not None and not _tighten_ok(micro, assignment):
                cost = INF
            else:
                cost = f(*(assignment[v] for v in scope))
            table[labels] = cost
        if not free:
            constant = constant + table[()]
            continue
        if free in terms:
            old = terms[free]
            terms[free] = {x: old[x] + c for x, c in table.items()}
        else:
            terms[free] = table
    problem = ReducedProblem(nv, domains, terms, constant)
    _prune(problem)
    return problem


def _prune(problem: ReducedProblem) -> None:
    changed = True
    while changed:
        changed = False
        for vs, table in problem.terms.items():
            for pos, v in enumerate(vs):
                support = 0
                for x, c in table.items():
                    if is_finite(c) and all(problem.domains[u] >> x[k] & 1 for k, u in enumerate(vs)):
                        support |= 1 << x[pos]
                keep = problem.domains[v] & support
                if keep != problem.domains[v]:
                    problem.domains[v] = keep
                    changed = True
    if any(d == 0 for d in problem.domains):
        problem.constant = INF
    for vs in list(problem.terms):
        problem.terms[vs] = {
            x: c for x, c in problem.terms[vs].items()
            if all(problem.domains[u] >> x[k] & 1 for k, u in enumerate(vs))
        }


@dataclass
class FlowNetwork:
    """Source 0, sink 1, and one node per (variable, threshold level).

    Node ``z(i, l)`` on the source side means variable ``i`` sits at chain
    position ``l`` or later.  ``offset`` is added to the cut value.
    """

    n_nodes: int
    arcs: list = field(default_factory=list)  # (tail, head, capacity)
    offset: object = Fraction(0)
    chains: dict = field(default_factory=dict)  # variable -> label tuple
    node_of: dict = field(default_factory=dict)  # (variable, level) -> node

    SOURCE = 0
    SINK = 1

    def add_arc(self, u: int, v: int, cap) -> None:
        if cap == INF or cap > 0:
            self.arcs.append((u, v, cap))
        elif cap < 0:
            raise NotSubmodular(f"negative capacity {cap} on arc {u}->{v}")

    def dump(self) -> str:
        """Plain adjacency text: one ``tail head capacity`` line per arc."""
        lines = [f"nodes {self.n_nodes}", f"offset {self.offset}"]
        for (i, l), node in sorted(self.node_of.items()):
            lines.append(f"node {node} var {i} level {l}")
        lines += [f"{u} {v} {c}" for u, v, c in self.arcs]
        return "\n".join(lines) + "\n"


def _unary_arcs(net: FlowNetwork, i: int, u: list) -> None:
    # u[p] = u[0] - sum(b) + sum_{l<=p} a_l + sum_{l>p} b_l
    net.offset = net.offset + u[0]
    for l in range(1, len(u)):
        delta = u[l] - u[l - 1]
        node = net.node_of[(i, l)]
        if delta > 0:
            net.add_arc(node, FlowNetwork.SINK, delta)
        elif delta < 0:
            net.add_arc(FlowNetwork.SOURCE, node, -delta)
            net.offset = net.offset + delta


def _implications(finite: set, di: int, dj: int):
    """Monotone implications valid on ``finite`` and the set they carve out."""
    forward = [(l, m) for l in range(1, di) for m in range(1, dj)
               if all(q >= m for p, q in finite if p >= l)]
    backward = [(m, l) for m in range(1, dj) for l in range(1, di)
                if all(p >= l for p, q in finite if q >= m)]
    carved = {
        (p, q) for p in range(di) for q in range(dj)
        if all(not p >= l or q >= m for l, m in forward)
        and all(not q >= m or p >= l for m, l in backward)
    }
    return forward, backward, carved


def _pair_arcs(net: FlowNetwork, i: int, j: int, g: list, ui: list, uj: list, where: str) -> None:
    di, dj = len(g), len(g[0])
    finite = {(p, q) for p in range(di) for q in range(dj) if is_finite(g[p][q])}
    forward, backward, carved = _implications(finite, di, dj)
    if carved != finite:
        raise NotSubmodular(f"{where}: feasible set is not closed under the chain meet and join")
    for l, m in forward:
        net.add_arc(net.node_of[(i, l)], net.node_of[(j, m)], INF)
    for m, l in backward:
        net.add_arc(net.node_of[(j, m)], net.node_of[(i, l)], INF)
    h = _extend(g, finite)
    for p in range(di):
        ui[p] += h[p][0]
    for q in range(dj):
        uj[q] += h[0][q] - h[0][0]
    for l in range(1, di):
        row = Fraction(0)
        for m in range(1, dj):
            second = h[l][m] - h[l - 1][m] - h[l][m - 1] + h[l - 1][m - 1]
            if second > 0:
                ci, cj = net.chains[i], net.chains[j]
                raise NotSubmodular(
                    f"{where}: {g[l][m]} + {g[l-1][m-1]} > {g[l-1][m]} + {g[l][m-1]} "
                    f"at labels ({ci[l]}, {cj[m]}) / ({ci[l-1]}, {cj[m-1]})"
                )
            row += second
            if second < 0:
                net.add_arc(net.node_of[(i, l)], net.node_of[(j, m)], -second)
        for p in range(l, di):
            ui[p] += row


def _extend(g: list, finite: set) -> list:
    """A finite table agreeing with ``g`` on ``finite`` (whose rows are intervals).

    Points outside get the nearest in-row value plus a penalty proportional
    to the distance, large enough to dominate finite second differences.
    """
    di, dj = len(g), len(g[0])
    if len(finite) == di * dj:
        return [list(r) for r in g]
    vals = [g[p][q] for p, q in finite]
    K = 2 * (max(vals) - min(vals)) + 1
    h = []
    for p in range(di):
        qs = [q for q in range(dj) if (p, q) in finite]
        lo, hi = qs[0], qs[-1]
        row = []
        for q in range(dj):
            c = min(max(q, lo), hi)
            row.append(g[p][c] + K * abs(q - c))
        h.append(row)
    return h


def build_mincut(problem, orders: Sequence[TournamentOrder]) -> FlowNetwork:
    """Threshold network for ``problem`` under per-variable ``orders``.

    ``problem`` is a :class:`ReducedProblem` or an :class:`Instance` (reduced
    on the fly).  Requires every term to have arity at most two and every
    order to be total.  The cut value plus ``offset`` equals the objective.
    """
    if isinstance(problem, Instance):
        problem = reduce_instance(problem)
    net = FlowNetwork(2, offset=problem.constant)
    for v in range(problem.n_vars):
        order = orders[v]
        if not order.is_total:
            raise ValueError(f"variable {v} has a cyclic tournament {order.cycle}")
        chain = tuple(a for a in order.order if problem.domains[v] >> a & 1)
        net.chains[v] = chain
        for l in range(1, len(chain)):
            net.node_of[(v, l)] = net.n_nodes
            net.n_nodes += 1
        for l in range(1, len(chain) - 1):
            net.add_arc(net.node_of[(v, l + 1)], net.node_of[(v, l)], INF)
    pos = {v: {a: p for p, a in enumerate(net.chains[v])} for v in net.chains}
    unary = {v: [Fraction(0)] * len(net.chains[v]) for v in net.chains}
    for vs, table in sorted(problem.terms.items()):
        if len(vs) > 2:
            raise ValueError(f"term on variables {vs} has arity {len(vs)}")
        if len(vs) == 1:
            (v,) = vs
            for (a,), c in table.items():
                if not is_finite(c):
                    raise AssertionError("pruned domains still carry an infinite unary")
                unary[v][pos[v][a]] += c
            continue
        i, j = vs
        g = [[INF] * len(net.chains[j]) for _ in net.chains[i]]
        for (a, b), c in table.items():
            g[pos[i][a]][pos[j][b]] = c
        _pair_arcs(net, i, j, g, unary[i], unary[j], f"term on variables ({i}, {j})")
    for v, u in unary.items():
        if len(u) > 0:
            _unary_arcs(net, v, u)
    return net


def max_flow(n_nodes: int, arcs, source: int = 0, sink: int = 1):
    """Shortest-augmenting-path max flow over exact capacities.

    Returns ``(value, source_side)`` where ``source_side`` is the set of nodes
    reachable from ``source`` in the final residual graph (the minimal
    minimum cut).  ``value`` is :data:`INF` when an all-infinite path exists.
    """
    to, cap, adj = [], [], [[] for _ in range(n_nodes)]
    for u, v, c in arcs:
        adj[u].append(len(to))
        to.append(v)
        cap.append(c)
        adj[v].append(len(to))
        to.append(u)
        cap.append(Fraction(0))
    value = Fraction(0)

    def reachable():
        parent = [-1] * n_nodes
        seen = [False] * n_nodes
        seen[source] = True
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for e in adj[u]:
                v = to[e]
                if not seen[v] and (cap[e] == INF or cap[e] > 0):
                    seen[v] = True
                    parent[v] = e
                    queue.append(v)
        return seen, parent

    while True:
        seen, parent = reachable()
        if not seen[sink]:
            return value, {v for v in range(n_nodes) if seen[v]}
        path = []
        v = sink
        while v != source:
            e = parent[v]
            path.append(e)
            v = to[e ^ 1]
        finite = [cap[e] for e in path if cap[e] != INF]
        if not finite:
            return INF, {v for v in range(n_nodes) if seen[v]}
        push = min(finite)
        for e in path:
            if cap[e] != INF:
                cap[e] -= push
            if cap[e ^ 1] != INF:
                cap[e ^ 1] += push
        value += push


def _mincut_solve(problem: ReducedProblem, orders):
    net = build_mincut(problem, orders)
    value, side = max_flow(net.n_nodes, net.arcs)
    x = [0] * problem.n_vars
    for v, chain in net.chains.items():
        level = sum(1 for l in range(1, len(chain)) if net.node_of[(v, l)] in side)
        x[v] = chain[level]
    if value == INF or net.offset == INF:
        return tuple(x), INF
    cost = problem.value(x)
    if cost != value + net.offset:
        raise AssertionError(f"cut value {value + net.offset} disagrees with objective {cost}")
    return tuple(x), cost


def _enumerate(problem: ReducedProblem, guard: int, reason: str):
    doms = [list(bits(d)) for d in problem.domains]
    total = 1
    for d in doms:
        total *= len(d)
    if total > guard:
        raise BudgetError(
            f"{reason}: enumeration of {total} assignments exceeds guard {guard}"
        )
    best, best_x = INF, tuple(d[0] for d in doms)
    for x in itertools.product(*doms):
        c = problem.value(x)
        if c < best:
            best, best_x = c, x
    return best_x, best


def solve_stage3(
    instance: Instance,
    pairs,
    domains=None,
    micro=None,
    backend: str = "auto",
    guard: int = DEFAULT_GUARD,
    trace: Optional[dict] = None,
):
    """Minimise ``instance`` given a tournament pair per variable.

    ``pairs`` is one :class:`BinaryPair` or one per variable.  ``backend`` is
    ``"auto"``, ``"mincut"`` (errors instead of falling back) or ``"brute"``.
    Returns ``(assignment, cost)``; with ``trace`` the chosen backend and the
    fallback reason are recorded in it.
    """
    nv = instance.n_vars
    if isinstance(pairs, BinaryPair):
        pairs = [pairs] * nv
    problem = reduce_instance(instance, domains, micro)
    if trace is None:
        trace = {}
    if problem.constant == INF:
        trace.update(backend="pruning", reason="empty domain after reduction")
        return tuple(next(bits(d), 0) for d in problem.domains), INF
    reason = None
    orders = [tournament_order(pairs[v], problem.domains[v]) for v in range(nv)]
    if backend == "brute":
        reason = "brute backend requested"
    elif problem.max_arity() > 2:
        reason = "arity > 2"
    elif not all(o.is_total for o in orders):
        reason = "cyclic tournament"
    if reason is None:
        try:
            x, cost = _mincut_solve(problem, orders)
            trace.update(backend="mincut", reason=None)
            return x, cost
        except NotSubmodular as exc:
            if backend == "mincut":
                raise
            reason = f"not encodable: {exc}"
    elif backend == "mincut":
        raise NotSubmodular(f"min-cut backend unavailable: {reason}")
    trace.update(backend="brute", reason=reason)
    return _enumerate(problem, guard, reason)
