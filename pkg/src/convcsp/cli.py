"""Command-line front end: JSON documents in, canonical JSON reports out.

Exit codes: 0 success, 1 negative answer (np-hard, infeasible, violated
witness), 2 input error, 3 budget exhausted.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .consistency import INFEASIBLE
from .core import DEFAULT_GUARD, BudgetError, CostFunction, Instance, Language, StructuralError, format_cost, to_cost
from .ggraph import DEFAULT_DEPTH, DEFAULT_SIZE_CAP, OddCycle, SoftSelfLoop, close_binary, detect_and_saturate, stp_from_graph
from .mmorph import (
    DEFAULT_NODE_LIMIT,
    DEFAULT_TIME_LIMIT,
    BinaryPair,
    Tractable,
    TernaryTriple,
    check_shapes,
    classify,
    verify_multimorphism,
)
from .pipeline import ClassificationError, solve
from .submod import NotSubmodular
from . import gadgets

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

ENV_NODE_LIMIT = "CONVCSP_NODE_LIMIT"
ENV_TIME_LIMIT = "CONVCSP_TIME_LIMIT"
ENV_GUARD = "CONVCSP_GUARD"


class DocumentError(ValueError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


# -- documents ---------------------------------------------------------------


def _field(doc, key, where, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise DocumentError(where, f"missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise DocumentError(f"{where}.{key}".lstrip("."), f"expected {getattr(kind, '__name__', kind)}")
    return value


def _cost(value, where):
    if not isinstance(value, str):
        raise DocumentError(where, "costs are strings such as \"3/2\" or \"inf\"")
    try:
        return to_cost(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise DocumentError(where, str(exc)) from None


def parse_language(doc) -> Language:
    labels = _field(doc, "domain", "", list)
    if not labels or not all(isinstance(a, str) for a in labels):
        raise DocumentError("domain", "expected a non-empty list of label names")
    if len(set(labels)) != len(labels):
        raise DocumentError("domain", "duplicate label names")
    index = {a: k for k, a in enumerate(labels)}
    n = len(labels)
    functions = {}
    for fi, fdoc in enumerate(_field(doc, "functions", "", list)):
        where = f"functions[{fi}]"
        name = _field(fdoc, "name", where, str)
        arity = _field(fdoc, "arity", where, int)
        if arity < 1:
            raise DocumentError(f"{where}.arity", "must be at least 1")
        if name in functions:
            raise DocumentError(f"{where}.name", f"duplicate function {name!r}")
        default = fdoc.get("default_cost")
        if default is not None:
            default = _cost(default, f"{where}.default_cost")
        table = {}
        for ti, entry in enumerate(_field(fdoc, "table", where, list)):
            ewhere = f"{where}.table[{ti}]"
            args = _field(entry, "args", ewhere, list)
            if len(args) != arity:
                raise DocumentError(f"{ewhere}.args", f"expected {arity} labels")
            try:
                x = tuple(index[a] for a in args)
            except (KeyError, TypeError):
                raise DocumentError(f"{ewhere}.args", f"unknown label in {args}") from None
            if x in table:
                raise DocumentError(f"{ewhere}.args", "tuple listed twice")
            table[x] = _cost(_field(entry, "cost", ewhere), f"{ewhere}.cost")
        if default is None and len(table) != n**arity:
            missing = next(x for x in itertools.product(range(n), repeat=arity) if x not in table)
            raise DocumentError(
                f"{where}.table", f"tuple {[labels[a] for a in missing]} missing and no default_cost"
            )
        functions[name] = CostFunction.from_mapping(n, arity, table, default=default)
    conservative = doc.get("conservative", True)
    if not isinstance(conservative, bool):
        raise DocumentError("conservative", "expected a boolean")
    return Language(tuple(labels), functions, conservative)


def dump_language(language: Language) -> dict:
    labels = language.labels
    functions = []
    for name in sorted(language.functions):
        f = language.functions[name]
        functions.append({
            "name": name,
            "arity": f.arity,
            "table": [
                {"args": [labels[a] for a in x], "cost": format_cost(f(*x))} for x in f.tuples()
            ],
        })
    return {"domain": list(labels), "functions": functions, "conservative": language.conservative}


def parse_instance(doc, base: Optional[Path] = None) -> Instance:
    ldoc = _field(doc, "language", "")
    if isinstance(ldoc, str):
        path = Path(ldoc)
        if base is not None and not path.is_absolute():
            path = base / path
        ldoc = _read_json(path, "language")
    try:
        language = parse_language(ldoc)
    except DocumentError as exc:
        raise DocumentError(f"language.{exc.where}".rstrip("."), str(exc).split(": ", 1)[-1]) from None
    n_vars = _field(doc, "variables", "", int)
    terms = []
    for ti, tdoc in enumerate(_field(doc, "terms", "", list)):
        where = f"terms[{ti}]"
        name = _field(tdoc, "function", where, str)
        scope = _field(tdoc, "scope", where, list)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in scope):
            raise DocumentError(f"{where}.scope", "expected a list of variable indices")
        terms.append((name, tuple(scope)))
    try:
        return Instance(language, n_vars, tuple(terms))
    except StructuralError as exc:
        raise DocumentError("terms", str(exc)) from None


def dump_instance(instance: Instance) -> dict:
    return {
        "language": dump_language(instance.language),
        "variables": instance.n_vars,
        "terms": [{"function": t.function, "scope": list(t.scope)} for t in instance.terms],
    }


def dump_witness(language: Language, pair: BinaryPair, triple: TernaryTriple) -> dict:
    labels = language.labels
    rows = lambda t: [[labels[v] for v in row] for row in t]  # noqa: E731
    entries = []
    for a, b, c in itertools.product(range(pair.n), repeat=3):
        entries.append({"args": [labels[a], labels[b], labels[c]], "values": [labels[v] for v in triple.at(a, b, c)]})
    return {
        "M": [[labels[a], labels[b]] for a, b in sorted(pair.M)],
        "meet": rows(pair.meet),
        "join": rows(pair.join),
        "triple": entries,
    }


def parse_witness(doc, language: Language):
    if isinstance(doc, dict) and "witness" in doc:
        doc = doc["witness"]
        if doc is None:
            raise DocumentError("witness", "document carries no witness")
    labels = language.labels
    index = {a: k for k, a in enumerate(labels)}
    n = len(labels)

    def label(v, where):
        if v not in index:
            raise DocumentError(where, f"unknown label {v!r}")
        return index[v]

    def square(key):
        t = _field(doc, key, "", list)
        if len(t) != n or any(not isinstance(r, list) or len(r) != n for r in t):
            raise DocumentError(key, f"expected a {n} x {n} table")
        return [[label(v, f"{key}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(t)]

    M = set()
    for k, p in enumerate(_field(doc, "M", "", list)):
        if not isinstance(p, list) or len(p) != 2:
            raise DocumentError(f"M[{k}]", "expected a label pair")
        M.add(tuple(sorted((label(p[0], f"M[{k}]"), label(p[1], f"M[{k}]")))))
    pair = BinaryPair(n, square("meet"), square("join"), frozenset(M))
    outs = {}
    for k, e in enumerate(_field(doc, "triple", "", list)):
        where = f"triple[{k}]"
        args = tuple(label(v, where + ".args") for v in _field(e, "args", where, list))
        vals = tuple(label(v, where + ".values") for v in _field(e, "values", where, list))
        if len(args) != 3 or len(vals) != 3:
            raise DocumentError(where, "expected three args and three values")
        outs[args] = vals
    try:
        flat = [outs[x] for x in itertools.product(range(n), repeat=3)]
    except KeyError as exc:
        raise DocumentError("triple", f"missing entry for {[labels[a] for a in exc.args[0]]}") from None
    Mbar = frozenset(p for p in itertools.combinations(range(n), 2) if p not in M)
    triple = TernaryTriple(n, [o[0] for o in flat], [o[1] for o in flat], [o[2] for o in flat], Mbar)
    return pair, triple


def _read_json(path, where="input"):
    try:
        text = sys.stdin.read() if str(path) == "-" else Path(path).read_text()
    except OSError as exc:
        raise DocumentError(where, f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(where, f"invalid JSON at line {exc.lineno} column {exc.colno}") from None


def canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- budgets -----------------------------------------------------------------


def _env_number(name, default, kind):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return kind(raw)
    except ValueError:
        raise DocumentError(name, f"environment value {raw!r} is not a number") from None


def _classify_budget(args):
    nodes = args.node_limit if args.node_limit is not None else _env_number(ENV_NODE_LIMIT, DEFAULT_NODE_LIMIT, int)
    seconds = args.time_limit if args.time_limit is not None else _env_number(ENV_TIME_LIMIT, DEFAULT_TIME_LIMIT, float)
    return nodes, seconds


# -- commands ----------------------------------------------------------------


def _classification_doc(language, result) -> dict:
    doc = {"verdict": result.verdict, "nodes": result.nodes}
    if isinstance(result, Tractable):
        doc["witness"] = dump_witness(language, result.pair, result.triple)
    if getattr(result, "reason", ""):
        doc["reason"] = result.reason
    return doc


def _verdict_exit(verdict: str) -> int:
    return {"tractable": EXIT_OK, "np-hard": EXIT_NEGATIVE}.get(verdict, EXIT_BUDGET)


def cmd_classify(args, out):
    language = parse_language(_read_json(args.language, "language"))
    nodes, seconds = _classify_budget(args)
    result = classify(language, node_limit=nodes, time_limit=seconds, reverse=args.reverse)
    out.write(canonical(_classification_doc(language, result)))
    return _verdict_exit(result.verdict)


def cmd_solve(args, out):
    path = Path(args.instance) if args.instance != "-" else None
    instance = parse_instance(_read_json(args.instance, "instance"), path.parent if path else None)
    language = instance.language
    guard = _env_number(ENV_GUARD, DEFAULT_GUARD, int)
    witness = None
    if args.witness:
        pair, triple = parse_witness(_read_json(args.witness, "witness"), language)
        if not check_shapes(pair, triple) or verify_multimorphism(language, pair, triple) is not None:
            raise DocumentError("witness", "not a valid multimorphism pair for this language")
        witness = Tractable(M=pair.M, pair=pair, triple=triple)
    elif args.backend != "brute":
        nodes, seconds = _classify_budget(args)
        witness = classify(language, node_limit=nodes, time_limit=seconds)
    try:
        sol = solve(instance, witness=witness, backend=args.backend, debug=args.debug, guard=guard)
    except ClassificationError as exc:
        out.write(canonical({"status": "unsolved", "verdict": exc.result.verdict}))
        return _verdict_exit(exc.result.verdict)
    if sol is INFEASIBLE:
        out.write(canonical({"status": "infeasible", "cost": "inf"}))
        return EXIT_NEGATIVE
    doc = {
        "status": "optimal",
        "cost": format_cost(sol.cost),
        "assignment": [language.labels[a] for a in sol.assignment],
        "provenance": sol.provenance,
    }
    if args.verbose:
        doc["trace"] = sol.trace
    out.write(canonical(doc))
    return EXIT_OK


def cmd_check(args, out):
    language = parse_language(_read_json(args.language, "language"))
    pair, triple = parse_witness(_read_json(args.mmorph, "witness"), language)
    if not check_shapes(pair, triple):
        out.write(canonical({"valid": False, "reason": "shape"}))
        return EXIT_NEGATIVE
    v = verify_multimorphism(language, pair, triple)
    if v is None:
        out.write(canonical({"valid": True}))
        return EXIT_OK
    labels = language.labels
    out.write(canonical({
        "valid": False,
        "violation": {
            "function": v.function,
            "kind": v.kind,
            "tuples": [[labels[a] for a in x] for x in v.tuples],
            "lhs": format_cost(v.lhs),
            "rhs": format_cost(v.rhs),
        },
    }))
    return EXIT_NEGATIVE


def cmd_graph(args, out):
    language = parse_language(_read_json(args.language, "language"))
    labels = language.labels
    closure = close_binary(language, depth=args.depth, size_cap=args.size_cap)
    g = detect_and_saturate(closure.functions)
    node = lambda p: labels[p[0]] + labels[p[1]]  # noqa: E731
    edges = [
        {"p": node(e.p), "q": node(e.q), "soft": e.soft, "origin": e.origin, "verified": e.verify()}
        for _, e in sorted(g.edges.items())
    ]
    doc = {
        "closure_size": len(closure.functions),
        "truncated": closure.truncated,
        "edges": edges,
        "M": [node(p) for p in g.M()],
        "soft_self_loops": [node(p) for p in g.soft_self_loops()],
    }
    try:
        pair = stp_from_graph(g)
        doc["stp"] = {"meet": [[labels[v] for v in r] for r in pair.meet], "join": [[labels[v] for v in r] for r in pair.join]}
    except SoftSelfLoop as exc:
        doc["stp"] = None
        doc["obstruction"] = f"soft self-loop at {node(exc.node)}"
    except OddCycle as exc:
        doc["stp"] = None
        doc["obstruction"] = f"odd cycle: {exc}"
    out.write(canonical(doc))
    return EXIT_OK


def cmd_gadget(args, out):
    if args.kind == "xor":
        out.write(canonical(dump_language(gadgets.xor_language())))
        return EXIT_OK
    if not args.graph:
        raise DocumentError("graph", "gadget mis needs an edge-list file")
    try:
        text = sys.stdin.read() if args.graph == "-" else Path(args.graph).read_text()
    except OSError as exc:
        raise DocumentError("graph", f"cannot read {args.graph}: {exc.strerror}") from None
    try:
        g = gadgets.parse_edge_list(text)
    except (StructuralError, ValueError) as exc:
        raise DocumentError("graph", str(exc)) from None
    out.write(canonical(dump_instance(gadgets.mis_instance(g))))
    return EXIT_OK


def cmd_gen(args, out):
    language = parse_language(_read_json(args.language, "language"))
    try:
        instance = gadgets.random_instance(language, args.vars, args.terms, args.seed)
    except ValueError as exc:
        raise DocumentError("gen", str(exc)) from None
    out.write(canonical(dump_instance(instance)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convcsp", description="Conservative VCSP classifier and exact solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    def budget_flags(p):
        p.add_argument("--node-limit", type=int, default=None, help=f"classifier nodes (env {ENV_NODE_LIMIT})")
        p.add_argument("--time-limit", type=float, default=None, help=f"classifier seconds (env {ENV_TIME_LIMIT})")

    p = sub.add_parser("classify", help="search for a witness pair")
    p.add_argument("language", help="language document, or - for stdin")
    p.add_argument("--reverse", action="store_true", help="reverse every search ordering")
    budget_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="minimise an instance exactly")
    p.add_argument("instance")
    p.add_argument("--backend", choices=("auto", "mincut", "brute"), default="auto")
    p.add_argument("--witness", help="classification or witness document to use instead of searching")
    p.add_argument("--debug", action="store_true", help="assert invariants at every update")
    p.add_argument("--verbose", action="store_true", help="include the stage trace")
    budget_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="verify a witness against a language")
    p.add_argument("language")
    p.add_argument("--mmorph", required=True, help="witness document")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("graph", help="edge diagnostic on the bounded binary closure")
    p.add_argument("language")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--size-cap", type=int, default=DEFAULT_SIZE_CAP)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("gadget", help="emit a hardness gadget")
    p.add_argument("kind", choices=("mis", "xor"))
    p.add_argument("graph", nargs="?", help="edge list for mis: 'n m' then 'u v' lines")
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("gen", help="random instance over a language")
    p.add_argument("language")
    p.add_argument("--vars", type=int, required=True)
    p.add_argument("--terms", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def run_command(argv, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except DocumentError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (StructuralError, NotSubmodular) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except BudgetError as exc:
        err.write(f"budget exhausted: {exc}\n")
        return EXIT_BUDGET


def main(argv=None) -> int:
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
