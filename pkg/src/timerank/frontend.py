"""Parsers and printers for system, property and proof files.

All three are sequences of keyword-led declarations whose bodies are
s-expressions; ``;`` starts a line comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import logic as L
from .logic import (
    TIMER,
    TIMER_INF,
    TIMER_LE,
    TIMER_LT,
    TIMER_PRED,
    TIMER_ZERO,
    App,
    Eq,
    Formula,
    Rel,
    Signature,
    SortError,
    Term,
    Var,
    free_vars,
    sort_check,
    to_sexpr,
)
from .ranking import (
    PW,
    Bin,
    Cond,
    DomLex,
    DomPerm,
    DomPW,
    Lex,
    OrderLambda,
    Pos,
    RankingExpr,
    TimerRank,
)
from .sexpr import Atom, ParseError, SExpr, SList, Span, read_all
from .systems import Property, TransitionSystem
from .timers import AugmentedSystem, ReductionError, augment

IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


def _span(x: SExpr | None) -> Span | None:
    return x.span if x is not None else None


def _ident(x: SExpr, what: str) -> str:
    if not isinstance(x, Atom) or not IDENT.match(x.text):
        raise ParseError(f"expected {what} name, got {x}", _span(x))
    if x.text in L.RESERVED_NAMES:
        raise ParseError(f"{x.text} is reserved", x.span)
    return x.text


def _keyword_stream(items: list[SExpr]):
    """Group top-level items into (keyword, [arguments]) runs."""
    groups: list[tuple[Atom, list[SExpr]]] = []
    for item in items:
        if isinstance(item, Atom) and item.text in _KEYWORDS:
            groups.append((item, []))
        elif not groups:
            raise ParseError(f"expected a declaration keyword, got {item}", item.span)
        else:
            groups[-1][1].append(item)
    return groups


_KEYWORDS = {
    "sort",
    "relation",
    "function",
    "constant",
    "axiom",
    "init",
    "transition",
    "property",
    "invariant",
    "ranking",
    "finite-approx",
    "hint",
}


# -- formulas -----------------------------------------------------------------


class FormulaReader:
    """Turns s-expressions into terms and formulas over a signature."""

    def __init__(
        self,
        sig: Signature,
        primed: bool = False,
        temporal: bool = False,
        timers: AugmentedSystem | None = None,
    ):
        self.sig = sig
        self.primed = primed
        self.temporal = temporal
        self.timers = timers

    def _symbol(self, text: str, span: Span) -> tuple[str, bool]:
        if text.endswith("'"):
            if not self.primed:
                raise ParseError(f"primed symbol {text} outside a transition", span)
            return text[:-1], True
        return text, False

    def _checked(self, node, x: SExpr):
        try:
            sort_check(node, self.sig)
        except SortError as e:
            raise ParseError(str(e), x.span) from None
        return node

    def binders(self, x: SExpr, env: dict) -> tuple[tuple[Var, ...], dict]:
        if not isinstance(x, SList):
            raise ParseError("expected a binder list ((x Sort) ...)", _span(x))
        out = []
        new_env = dict(env)
        for b in x.items:
            if not (isinstance(b, SList) and len(b) == 2):
                raise ParseError("binder must be (name Sort)", _span(b))
            name = _ident(b[0], "variable")
            sort = b[1].text if isinstance(b[1], Atom) else None
            if sort not in self.sig.sorts:
                raise ParseError(f"unknown sort {b[1]}", b[1].span)
            v = Var(name, sort)
            out.append(v)
            new_env[name] = v
        return tuple(out), new_env

    def term(self, x: SExpr, env: dict) -> Term:
        if isinstance(x, Atom):
            if x.text in env:
                return env[x.text]
            if self.timers is not None and x.text in (TIMER_ZERO, TIMER_INF):
                return App(x.text)
            name, primed = self._symbol(x.text, x.span)
            if name in self.sig.functions:
                return self._checked(App(name, (), primed), x)
            raise ParseError(f"unknown variable or constant {x.text}", x.span)
        if not x.items or not isinstance(x[0], Atom):
            raise ParseError("expected a term", x.span)
        head = x[0].text
        if head == "timer":
            return self._timer(x, env)
        if head == TIMER_PRED and self.timers is not None:
            if len(x) != 2:
                raise ParseError("pred takes one argument", x.span)
            return self._checked(App(TIMER_PRED, (self.term(x[1], env),)), x)
        name, primed = self._symbol(head, x[0].span)
        if name not in self.sig.functions:
            if name in self.sig.relations:
                raise ParseError(f"relation {name} used as a term", x.span)
            raise ParseError(f"unknown function {name}", x.span)
        args = tuple(self.term(a, env) for a in x.items[1:])
        return self._checked(App(name, args, primed), x)

    def _timer(self, x: SList, env: dict) -> Term:
        if self.timers is None:
            raise ParseError("timer terms are only allowed in proofs", x.span)
        if len(x) != 2:
            raise ParseError("timer takes one formula", x.span)
        f = FormulaReader(self.sig, temporal=True).formula(x[1], env)
        try:
            return self.timers.timer_for(f)
        except ReductionError as e:
            raise ParseError(str(e), x.span) from None

    def formula(self, x: SExpr, env: dict) -> Formula:
        if isinstance(x, Atom):
            if x.text == "true":
                return L.TRUE
            if x.text == "false":
                return L.FALSE
            if x.text in env:
                raise ParseError(f"variable {x.text} used as a formula", x.span)
            name, primed = self._symbol(x.text, x.span)
            if name in self.sig.relations:
                return self._checked(Rel(name, (), primed), x)
            raise ParseError(f"unknown relation {x.text}", x.span)
        if not x.items or not isinstance(x[0], Atom):
            raise ParseError("expected a formula", x.span)
        head, args = x[0].text, x.items[1:]

        def arity(n: int) -> None:
            if len(args) != n:
                raise ParseError(f"{head} takes {n} argument(s), got {len(args)}", x.span)

        if head in ("forall", "exists"):
            arity(2)
            vs, inner = self.binders(args[0], env)
            body = self.formula(args[1], inner)
            return (L.Forall if head == "forall" else L.Exists)(vs, body)
        if head == "and":
            return L.And(tuple(self.formula(a, env) for a in args))
        if head == "or":
            return L.Or(tuple(self.formula(a, env) for a in args))
        if head == "not":
            arity(1)
            return L.Not(self.formula(args[0], env))
        if head == "->":
            arity(2)
            return L.Implies(self.formula(args[0], env), self.formula(args[1], env))
        if head == "<->":
            arity(2)
            return L.iff(self.formula(args[0], env), self.formula(args[1], env))
        if head == "=":
            arity(2)
            for a in args:
                if self._looks_like_formula(a, env):
                    raise ParseError("equality between formulas is ill-formed; use <->", x.span)
            return self._checked(Eq(self.term(args[0], env), self.term(args[1], env)), x)
        if head in ("G", "F", "X", "U"):
            if not self.temporal:
                raise ParseError(f"temporal operator {head} not allowed here", x.span)
            if head == "U":
                arity(2)
                return L.Until(self.formula(args[0], env), self.formula(args[1], env))
            arity(1)
            op = {"G": L.Globally, "F": L.Eventually, "X": L.Next}[head]
            return op(self.formula(args[0], env))
        if head in (TIMER_LE, TIMER_LT) and self.timers is not None:
            arity(2)
            return self._checked(Rel(head, (self.term(args[0], env), self.term(args[1], env))), x)
        name, primed = self._symbol(head, x[0].span)
        if name not in self.sig.relations:
            if name in self.sig.functions:
                raise ParseError(f"function {name} used as a formula", x.span)
            raise ParseError(f"unknown relation {name}", x.span)
        return self._checked(Rel(name, tuple(self.term(a, env) for a in args), primed), x)

    def _looks_like_formula(self, x: SExpr, env: dict) -> bool:
        head = x[0] if isinstance(x, SList) and x.items else x
        if not isinstance(head, Atom):
            return False
        text = head.text.rstrip("'")
        if text in env:
            return False
        return text in self.sig.relations or text in (
            "and", "or", "not", "->", "<->", "forall", "exists", "true", "false", "=",
        )


def _closed(f: Formula, x: SExpr, what: str) -> Formula:
    if free_vars(f):
        names = ", ".join(v.name for v in free_vars(f))
        raise ParseError(f"{what} has free variables: {names}", x.span)
    return f


# -- system files ---------------------------------------------------------------


def parse_system(text: str, path: str | None = None) -> TransitionSystem:
    try:
        return _parse_system(read_all(text))
    except ParseError as e:
        e.path = e.path or path
        raise


def _flags(args, allowed, span) -> set[str]:
    out = set()
    for a in args:
        if not isinstance(a, Atom) or a.text not in allowed:
            raise ParseError(f"unexpected {a}; allowed flags: {', '.join(sorted(allowed))}", _span(a))
        out.add(a.text)
    return out


def _parse_system(items) -> TransitionSystem:
    sig = Signature()
    axioms, inits, transitions = [], [], []
    declared: dict[str, Span] = {}
    for kw, args in _keyword_stream(items):
        k = kw.text
        if k == "sort":
            if not args:
                raise ParseError("sort needs a name", kw.span)
            flags = _flags(args[1:], {"finite"}, kw.span)
            name = _ident(args[0], "sort")
            if name in declared:
                raise ParseError(
                    f"duplicate sort {name} (first declared at {declared[name]})", args[0].span
                )
            declared[name] = args[0].span
            try:
                sig = sig.with_sort(name, "finite" in flags)
            except SortError as e:
                raise ParseError(str(e), args[0].span) from None
        elif k in ("relation", "function", "constant"):
            if not args or not isinstance(args[0], SList) or not args[0].items:
                raise ParseError(f"{k} needs a (name sorts...) declaration", kw.span)
            decl = args[0]
            name = _ident(decl[0], k)
            if name in declared:
                raise ParseError(
                    f"duplicate symbol {name} (first declared at {declared[name]})", decl[0].span
                )
            declared[name] = decl[0].span
            sorts = [s.text if isinstance(s, Atom) else "" for s in decl.items[1:]]
            try:
                if k == "relation":
                    flags = _flags(args[1:], {"well-founded", "immutable"}, kw.span)
                    sig = sig.with_relation(
                        name, sorts, "immutable" in flags, "well-founded" in flags
                    )
                elif k == "function":
                    flags = _flags(args[1:], {"immutable"}, kw.span)
                    if len(sorts) < 2 or sorts[-2] != "->":
                        raise ParseError("function declaration is (name sorts... -> sort)", decl.span)
                    sig = sig.with_function(name, sorts[:-2], sorts[-1], "immutable" in flags)
                else:
                    flags = _flags(args[1:], {"immutable"}, kw.span)
                    if len(sorts) != 1:
                        raise ParseError("constant declaration is (name sort)", decl.span)
                    sig = sig.with_function(name, (), sorts[0], "immutable" in flags)
            except SortError as e:
                raise ParseError(str(e), decl.span) from None
        elif k in ("axiom", "init", "transition"):
            if len(args) != 1:
                raise ParseError(f"{k} takes exactly one formula", kw.span)
            reader = FormulaReader(sig, primed=(k == "transition"))
            f = _closed(reader.formula(args[0], {}), args[0], k)
            {"axiom": axioms, "init": inits, "transition": transitions}[k].append(f)
        else:
            raise ParseError(f"{k} is not allowed in a system file", kw.span)
    if not transitions:
        raise ParseError("missing transition section")
    return TransitionSystem(sig, tuple(axioms), tuple(inits), tuple(transitions))


# -- property files -------------------------------------------------------------


def parse_property(text: str, system: TransitionSystem, path: str | None = None) -> Property:
    try:
        groups = _keyword_stream(read_all(text))
        found = None
        for kw, args in groups:
            if kw.text != "property":
                raise ParseError(f"{kw.text} is not allowed in a property file", kw.span)
            if found is not None:
                raise ParseError("only one property per file", kw.span)
            if len(args) != 1:
                raise ParseError("property takes exactly one formula", kw.span)
            reader = FormulaReader(system.signature, temporal=True)
            found = _closed(reader.formula(args[0], {}), args[0], "property")
        if found is None:
            raise ParseError("missing property")
        return Property(found)
    except ParseError as e:
        e.path = e.path or path
        raise


# -- proof files ----------------------------------------------------------------


@dataclass(frozen=True)
class Invariant:
    name: str
    formula: Formula


@dataclass(frozen=True)
class FiniteApprox:
    """``approx`` over-approximates ``target`` and gains at most ``m`` tuples per step."""

    agg: tuple
    params: tuple
    target: Formula
    approx: Formula
    m: int = 1


@dataclass(frozen=True)
class Hint:
    vc: str
    witnesses: tuple
    source: tuple = ()


@dataclass(frozen=True)
class Proof:
    invariants: tuple
    ranking: RankingExpr
    approximations: tuple = ()
    hints: tuple = ()


def parse_proof(text: str, aug: AugmentedSystem, path: str | None = None) -> Proof:
    try:
        return _parse_proof(read_all(text), aug)
    except ParseError as e:
        e.path = e.path or path
        raise


def _parse_proof(items, aug: AugmentedSystem) -> Proof:
    sig = aug.signature
    reader = FormulaReader(sig, timers=aug)
    invariants: list[Invariant] = []
    ranking = None
    approxs: list[FiniteApprox] = []
    hints: list[Hint] = []
    names: set[str] = set()
    for kw, args in _keyword_stream(items):
        k = kw.text
        if k == "invariant":
            if len(args) == 2:
                name = _ident(args[0], "invariant")
                body = args[1]
            elif len(args) == 1:
                name = f"inv{len(invariants) + 1}"
                body = args[0]
            else:
                raise ParseError("invariant is [name] formula", kw.span)
            if name in names:
                raise ParseError(f"duplicate invariant name {name}", kw.span)
            names.add(name)
            f = _closed(reader.formula(body, {}), body, "invariant")
            invariants.append(Invariant(name, f))
        elif k == "ranking":
            if ranking is not None:
                raise ParseError("only one ranking per proof", kw.span)
            if len(args) != 1:
                raise ParseError("ranking takes one constructor expression", kw.span)
            ranking = RankingReader(reader).read(args[0], {})
        elif k == "finite-approx":
            approxs.append(_finite_approx(args, reader, kw))
        elif k == "hint":
            hints.append(_hint(args, kw))
        else:
            raise ParseError(f"{k} is not allowed in a proof file", kw.span)
    if ranking is None:
        raise ParseError("ranking required")
    return Proof(tuple(invariants), ranking, tuple(approxs), tuple(hints))


def _clause(args, name: str, kw: Atom, required: bool = True):
    for a in args:
        if isinstance(a, SList) and a.items and isinstance(a[0], Atom) and a[0].text == name:
            return a
    if required:
        raise ParseError(f"finite-approx is missing ({name} ...)", kw.span)
    return None


def _finite_approx(args, reader: FormulaReader, kw: Atom) -> FiniteApprox:
    vars_clause = _clause(args, "vars", kw)
    agg, env = reader.binders(SList(vars_clause.items[1:], vars_clause.span), {})
    params: tuple = ()
    params_clause = _clause(args, "params", kw, required=False)
    if params_clause is not None:
        params, env = reader.binders(SList(params_clause.items[1:], params_clause.span), env)
    target_c = _clause(args, "target", kw)
    approx_c = _clause(args, "approx", kw)
    for c in (target_c, approx_c):
        if len(c) != 2:
            raise ParseError(f"({c[0]} formula) takes one formula", c.span)
    target = reader.formula(target_c[1], env)
    approx = reader.formula(approx_c[1], env)
    m = 1
    rest = [a for a in args if isinstance(a, Atom)]
    if rest:
        if len(rest) != 2 or rest[0].text != "m" or not rest[1].text.isdigit():
            raise ParseError("expected m <int>", rest[0].span)
        m = int(rest[1].text)
        if not 1 <= m <= 4:
            raise ParseError("m must be between 1 and 4", rest[1].span)
    return FiniteApprox(agg, params, target, approx, m)


def _hint(args, kw: Atom) -> Hint:
    vc = _clause(args, "vc", kw)
    wit = _clause(args, "witness", kw)
    if len(vc) != 2 or not isinstance(vc[1], Atom):
        raise ParseError("hint needs (vc <id>)", vc.span)
    return Hint(vc[1].text, (), tuple(wit.items[1:]))


class RankingReader:
    """Reads constructor expressions; binders scope over their component."""

    ARITY = {
        "Bin": (1, 1),
        "Pos": (2, 2),
        "Cond": (2, 2),
        "PW": (1, None),
        "Lex": (1, None),
        "DomPW": (2, 2),
        "DomLex": (3, 3),
        "DomPerm": (3, 3),
        "TimerRank": (1, 3),
    }

    def __init__(self, reader: FormulaReader):
        self.r = reader

    def read(self, x: SExpr, env: dict) -> RankingExpr:
        if not isinstance(x, SList) or not x.items or not isinstance(x[0], Atom):
            raise ParseError("expected a ranking constructor", _span(x))
        head, args = x[0].text, x.items[1:]
        if head not in self.ARITY:
            raise ParseError(f"unknown ranking constructor {head}", x.span)
        lo, hi = self.ARITY[head]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ParseError(f"{head}: wrong number of arguments ({len(args)})", x.span)
        if head == "Bin":
            return Bin(self.r.formula(args[0], env))
        if head == "Pos":
            t = self.r.term(args[0], env)
            sort = L.term_sort(t, self.r.sig)
            return Pos(t, self.order(args[1], sort, env), sort)
        if head == "Cond":
            return Cond(self.read(args[0], env), self.r.formula(args[1], env))
        if head in ("PW", "Lex"):
            kids = tuple(self.read(a, env) for a in args)
            return PW(kids) if head == "PW" else Lex(kids)
        if head in ("DomPW", "DomPerm"):
            vs, inner = self.r.binders(args[1], env)
            if not vs:
                raise ParseError(f"{head} needs at least one variable", x.span)
            child = self.read(args[0], inner)
            if head == "DomPW":
                return DomPW(child, vs)
            if not isinstance(args[2], Atom) or not args[2].text.isdigit():
                raise ParseError("DomPerm swap bound must be a non-negative integer", _span(args[2]))
            return DomPerm(child, vs, int(args[2].text))
        if head == "DomLex":
            b = args[1]
            if isinstance(b, SList) and len(b) == 2 and isinstance(b[0], Atom):
                b = SList((b,), b.span)
            vs, inner = self.r.binders(b, env)
            if len(vs) != 1:
                raise ParseError("DomLex aggregates exactly one variable", x.span)
            child = self.read(args[0], inner)
            return DomLex(child, vs[0], self.order(args[2], vs[0].sort, env))
        return self._timer_rank(x, args, env)

    def _timer_rank(self, x: SList, args, env: dict) -> TimerRank:
        vs: tuple = ()
        inner = env
        if len(args) >= 2 and self._is_binders(args[-1]):
            vs, inner = self.r.binders(args[-1], env)
            args = args[:-1]
        if len(args) > 2:
            raise ParseError("TimerRank is (TimerRank formula [condition] [binders])", x.span)
        sub = FormulaReader(self.r.sig, temporal=True, timers=self.r.timers)
        label = sub.formula(args[0], inner)
        cond = self.r.formula(args[1], inner) if len(args) == 2 else L.TRUE
        try:
            timer = self.r.timers.timer_for(label)
        except ReductionError as e:
            raise ParseError(str(e), args[0].span) from None
        return TimerRank(label, timer, cond, vs)

    def _is_binders(self, x: SExpr) -> bool:
        return (
            isinstance(x, SList)
            and all(
                isinstance(b, SList)
                and len(b) == 2
                and isinstance(b[1], Atom)
                and b[1].text in self.r.sig.sorts
                for b in x.items
            )
            and len(x.items) > 0
        )

    def order(self, x: SExpr, sort: str, env: dict):
        if isinstance(x, Atom):
            name = x.text
            profile = self.r.sig.relations.get(name)
            if profile is None:
                raise ParseError(f"unknown order relation {name}", x.span)
            if tuple(profile) != (sort, sort):
                raise ParseError(f"order {name} must relate two {sort} values", x.span)
            return name
        if isinstance(x, SList) and len(x) == 3 and isinstance(x[0], Atom) and x[0].text == "lambda":
            vs, inner = self.r.binders(x[1], env)
            if len(vs) != 2 or vs[0].sort != sort or vs[1].sort != sort:
                raise ParseError(f"order lambda must bind two {sort} variables", x.span)
            return OrderLambda(vs[0], vs[1], self.r.formula(x[2], inner))
        raise ParseError("an order is a relation name or (lambda ((a S) (b S)) formula)", _span(x))


def resolve_hint(hint: Hint, sig: Signature, env: dict, aug: AugmentedSystem | None = None) -> tuple:
    """Parse a hint's witness terms in the scope of the targeted block."""
    reader = FormulaReader(sig, primed=True, timers=aug)
    return tuple(reader.term(w, env) for w in hint.source)


# -- loading and printing ---------------------------------------------------------


@dataclass(frozen=True)
class Bundle:
    system: TransitionSystem
    property: Property
    augmented: AugmentedSystem
    proof: Proof | None = None


def load(system_path, property_path, proof_path=None, skolemize: bool = True) -> Bundle:
    system = parse_system(Path(system_path).read_text(encoding="utf-8"), str(system_path))
    prop = parse_property(
        Path(property_path).read_text(encoding="utf-8"), system, str(property_path)
    )
    aug = augment(system, prop.formula, skolemize)
    proof = None
    if proof_path is not None:
        proof = parse_proof(Path(proof_path).read_text(encoding="utf-8"), aug, str(proof_path))
    return Bundle(system, prop, aug, proof)


def format_signature(sig: Signature, skip=frozenset()) -> list[str]:
    lines = []
    for s in sig.sorts:
        if s in skip:
            continue
        lines.append(f"sort {s}" + (" finite" if s in sig.finite else ""))
    for name, args in sig.relations.items():
        if name in skip:
            continue
        flags = (" well-founded" if name in sig.well_founded else "") + (
            " immutable" if name in sig.rigid else ""
        )
        lines.append(f"relation ({' '.join([name, *args])}){flags}")
    for name, (args, result) in sig.functions.items():
        if name in skip:
            continue
        flag = " immutable" if name in sig.rigid else ""
        if args:
            lines.append(f"function ({' '.join([name, *args])} -> {result}){flag}")
        else:
            lines.append(f"constant ({name} {result}){flag}")
    return lines


def format_augmented(aug: AugmentedSystem) -> str:
    """The product system in the system-file grammar, annotated with provenance."""
    out = [
        f"; property: {to_sexpr(aug.property)}",
        f"; negated:  {to_sexpr(aug.negated)}",
        "",
    ]
    orig = aug.original
    out.extend(format_signature(orig.signature))
    out.append("")
    for name in aug.skolems:
        out.append("; skolem constant for an outer existential")
        out.append(f"constant ({name} {aug.signature.functions[name][1]}) immutable")
    out.append("; timer sort and order (built in)")
    for e in aug.entries:
        sorts = " ".join(v.sort for v in e.params)
        out.append(f"; timer of {to_sexpr(e.formula)}")
        out.append(f"function ({e.symbol}{' ' + sorts if sorts else ''} -> {TIMER})")
    out.append("")
    for a in orig.axioms:
        out.append(f"axiom {to_sexpr(a)}")
    for label, g in aug.gamma:
        out.append(f"; timer axiom: {label}")
        out.append(f"axiom {to_sexpr(g)}")
    out.append("")
    for i in orig.inits:
        out.append(f"init {to_sexpr(i)}")
    out.append("; timer init: the negated property holds initially")
    out.append(f"init {to_sexpr(aug.timer_init)}")
    out.append("")
    for t in orig.transitions:
        out.append(f"transition {to_sexpr(t)}")
    for label, t in aug.timer_transitions:
        out.append(f"; timer step: {label}")
        out.append(f"transition {to_sexpr(t)}")
    return "\n".join(out) + "\n"

