"""Many-sorted first-order and linear-temporal formulas.

Terms and formulas are immutable, hashable dataclasses.  Symbols carry a
``primed`` flag instead of a mangled name, so a two-state formula mentions
``p`` and ``p'`` as the same symbol read in the pre- and post-state.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

BOOL = "Bool"

# Built-in sort of timer values: the naturals extended with an infinity.
TIMER = "Timer"
TIMER_LE = "<="
TIMER_LT = "<"
TIMER_ZERO = "0"
TIMER_INF = "inf"
TIMER_PRED = "pred"
TIMER_SYMBOLS = frozenset({TIMER_LE, TIMER_LT, TIMER_ZERO, TIMER_INF, TIMER_PRED})
RESERVED_NAMES = TIMER_SYMBOLS | {TIMER, BOOL, "true", "false", "timer"}


class LogicError(Exception):
    """Raised for ill-formed terms or formulas."""


class SortError(LogicError):
    pass


class PrimingError(LogicError):
    pass


def _node(cls):
    """Frozen dataclass whose (recursive) hash is computed once."""
    cls = dataclass(frozen=True, repr=False)(cls)
    generated = cls.__hash__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            value = generated(self)
            object.__setattr__(self, "_hash", value)
            return value

    cls.__hash__ = __hash__
    return cls


class Node:
    def __repr__(self) -> str:
        return to_sexpr(self)


class Term(Node):
    pass


class Formula(Node):
    pass


@_node
class Var(Term):
    name: str
    sort: str


@_node
class App(Term):
    func: str
    args: tuple = ()
    primed: bool = False


@_node
class Eq(Formula):
    lhs: Term
    rhs: Term


@_node
class Rel(Formula):
    name: str
    args: tuple = ()
    primed: bool = False


@_node
class Not(Formula):
    body: Formula


@_node
class And(Formula):
    args: tuple = ()


@_node
class Or(Formula):
    args: tuple = ()


@_node
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@_node
class Forall(Formula):
    vars: tuple
    body: Formula


@_node
class Exists(Formula):
    vars: tuple
    body: Formula


@_node
class Globally(Formula):
    body: Formula


@_node
class Eventually(Formula):
    body: Formula


@_node
class Next(Formula):
    body: Formula


@_node
class Until(Formula):
    lhs: Formula
    rhs: Formula


TRUE = And(())
FALSE = Or(())

Quantifier = (Forall, Exists)
Temporal = (Globally, Eventually, Next, Until)
Atomic = (Eq, Rel)


# -- smart constructors -------------------------------------------------------


def conj(*parts: Formula) -> Formula:
    """Flattened conjunction; ``true`` parts are dropped."""
    out: list[Formula] = []
    for p in parts:
        if isinstance(p, And):
            out.extend(p.args)
        else:
            out.append(p)
    if any(p == FALSE for p in out):
        return FALSE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(*parts: Formula) -> Formula:
    out: list[Formula] = []
    for p in parts:
        if isinstance(p, Or):
            out.extend(p.args)
        else:
            out.append(p)
    if any(p == TRUE for p in out):
        return TRUE
    return out[0] if len(out) == 1 else Or(tuple(out))


def neg(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    if a == TRUE:
        return b
    if b == TRUE or a == FALSE:
        return TRUE
    return Implies(a, b)


def iff(a: Formula, b: Formula) -> Formula:
    """Biconditional, expanded into two implications."""
    return conj(Implies(a, b), Implies(b, a))


def forall(vs: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vs)
    return Forall(vs, body) if vs else body


def exists(vs: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vs)
    return Exists(vs, body) if vs else body


def tuple_eq(xs: Iterable[Term], ys: Iterable[Term]) -> Formula:
    return conj(*(Eq(a, b) for a, b in zip(xs, ys, strict=True)))


# -- traversal ----------------------------------------------------------------


def children(node: Node) -> tuple:
    if isinstance(node, (App, Rel)):
        return node.args
    if isinstance(node, Eq):
        return (node.lhs, node.rhs)
    if isinstance(node, (And, Or)):
        return node.args
    if isinstance(node, (Implies, Until)):
        return (node.lhs, node.rhs)
    if isinstance(node, (Not, Globally, Eventually, Next, Forall, Exists)):
        return (node.body,)
    return ()


def subformulas(f: Formula) -> Iterable[Formula]:
    """Pre-order walk over formula nodes (terms are skipped)."""
    yield f
    if isinstance(f, Atomic):
        return
    for c in children(f):
        yield from subformulas(c)


def free_vars(node: Node) -> tuple[Var, ...]:
    """Free variables in order of first occurrence."""
    seen: dict[Var, None] = {}

    def walk(n: Node, bound: frozenset) -> None:
        if isinstance(n, Var):
            if n not in bound:
                seen.setdefault(n, None)
            return
        if isinstance(n, Quantifier):
            walk(n.body, bound | set(n.vars))
            return
        for c in children(n):
            walk(c, bound)

    walk(node, frozenset())
    return tuple(seen)


def all_var_names(node: Node) -> set[str]:
    names: set[str] = set()

    def walk(n: Node) -> None:
        if isinstance(n, Var):
            names.add(n.name)
        elif isinstance(n, Quantifier):
            names.update(v.name for v in n.vars)
        for c in children(n):
            walk(c)

    walk(node)
    return names


def symbols(node: Node) -> set[tuple[str, bool]]:
    """``(name, primed)`` pairs of every function/relation occurrence."""
    out: set[tuple[str, bool]] = set()

    def walk(n: Node) -> None:
        if isinstance(n, (App, Rel)):
            out.add((n.func if isinstance(n, App) else n.name, n.primed))
        for c in children(n):
            walk(c)

    walk(node)
    return out


def is_temporal(f: Formula) -> bool:
    return any(isinstance(g, Temporal) for g in subformulas(f))


def is_two_state(node: Node) -> bool:
    return any(primed for _, primed in symbols(node))


# -- priming ------------------------------------------------------------------


def prime(node: Node, rigid: Iterable[str] = TIMER_SYMBOLS) -> Node:
    """Move a one-state formula or term to the post-state.

    Symbols in ``rigid`` keep their pre-state reading; variables are untouched.
    """
    rigid = frozenset(rigid)

    def go(n):
        if isinstance(n, Var):
            return n
        if isinstance(n, App):
            if n.primed:
                raise PrimingError(f"symbol {n.func} is already primed")
            return App(n.func, tuple(go(a) for a in n.args), n.func not in rigid)
        if isinstance(n, Rel):
            if n.primed:
                raise PrimingError(f"symbol {n.name} is already primed")
            return Rel(n.name, tuple(go(a) for a in n.args), n.name not in rigid)
        if isinstance(n, Temporal):
            raise PrimingError("temporal formulas cannot be primed")
        return _rebuild(n, [go(c) for c in children(n)])

    return go(node)


def _rebuild(n: Node, kids: list) -> Node:
    if isinstance(n, Eq):
        return Eq(*kids)
    if isinstance(n, App):
        return App(n.func, tuple(kids), n.primed)
    if isinstance(n, Rel):
        return Rel(n.name, tuple(kids), n.primed)
    if isinstance(n, And):
        return And(tuple(kids))
    if isinstance(n, Or):
        return Or(tuple(kids))
    if isinstance(n, Implies):
        return Implies(*kids)
    if isinstance(n, Until):
        return Until(*kids)
    if isinstance(n, Forall):
        return Forall(n.vars, kids[0])
    if isinstance(n, Exists):
        return Exists(n.vars, kids[0])
    return type(n)(kids[0])


def map_formula(f: Node, fn) -> Node:
    """Bottom-up rewrite; ``fn`` sees every node after its children."""
    kids = [map_formula(c, fn) for c in children(f)]
    return fn(_rebuild(f, kids) if kids else f)


# -- substitution -------------------------------------------------------------


def fresh_var(base: str, sort: str, avoid: Iterable[str]) -> Var:
    avoid = set(avoid)
    stem = re.sub(r"_\d+$", "", base.rstrip("'")) or "v"
    if base not in avoid:
        return Var(base, sort)
    i = 1
    while f"{stem}_{i}" in avoid:
        i += 1
    return Var(f"{stem}_{i}", sort)


def substitute(node: Node, mapping: Mapping[Var, Term]) -> Node:
    """Simultaneous, capture-avoiding replacement of free variables."""
    if not mapping:
        return node

    def go(n, m):
        if not m:
            return n
        if isinstance(n, Var):
            return m.get(n, n)
        if isinstance(n, Quantifier):
            inner = {v: t for v, t in m.items() if v not in n.vars}
            if not inner:
                return n
            body_free = set(free_vars(n.body))
            incoming = set()
            for v, t in inner.items():
                if v in body_free:
                    incoming |= {w.name for w in free_vars(t)}
            new_vars = []
            avoid = incoming | {v.name for v in body_free} | {
                w.name for t in inner.values() for w in free_vars(t)
            }
            for v in n.vars:
                if v.name in incoming:
                    fresh = fresh_var(v.name, v.sort, avoid | {x.name for x in new_vars})
                    avoid.add(fresh.name)
                    inner[v] = fresh
                    new_vars.append(fresh)
                else:
                    new_vars.append(v)
            return type(n)(tuple(new_vars), go(n.body, inner))
        kids = children(n)
        if not kids:
            return n
        return _rebuild(n, [go(c, m) for c in kids])

    return go(node, dict(mapping))


def rename_vars(node: Node, old: Iterable[Var], new: Iterable[Var]) -> Node:
    return substitute(node, dict(zip(tuple(old), tuple(new), strict=True)))


# -- canonical keys -----------------------------------------------------------


@dataclass(frozen=True)
class CanonicalKey:
    """Formula text with bound variables numbered by binding depth."""

    text: str
    free: tuple = ()

    def digest(self) -> str:
        free = ",".join(f"{v.name}:{v.sort}" for v in self.free)
        return hashlib.sha256(f"{self.text}|{free}".encode()).hexdigest()


def _canon_text(node: Node, env: dict, positional_free: dict | None) -> str:
    if isinstance(node, Var):
        if node in env:
            return f"%{env[node]}"
        if positional_free is not None:
            if node not in positional_free:
                positional_free[node] = len(positional_free)
            return f"${positional_free[node]}:{node.sort}"
        return f"{node.name}:{node.sort}"
    if isinstance(node, Quantifier):
        inner = dict(env)
        decls = []
        for v in node.vars:
            inner[v] = len(inner)
            decls.append(f"%{inner[v]}:{v.sort}")
        head = "forall" if isinstance(node, Forall) else "exists"
        body = _canon_text(node.body, inner, positional_free)
        return f"({head} ({' '.join(decls)}) {body})"
    kids = [_canon_text(c, env, positional_free) for c in children(node)]
    head = _head(node)
    if isinstance(node, (App, Rel)) and not kids:
        return head
    if node == TRUE or node == FALSE:
        return head
    return f"({' '.join([head, *kids])})"


def canonical_key(f: Node) -> CanonicalKey:
    return CanonicalKey(_canon_text(f, {}, None), free_vars(f))


def shape_key(f: Node) -> str:
    """Like the canonical key but free variables are numbered too."""
    return _canon_text(f, {}, {})


# -- printing -----------------------------------------------------------------


def _head(n: Node) -> str:
    if isinstance(n, App):
        return n.func + ("'" if n.primed else "")
    if isinstance(n, Rel):
        return n.name + ("'" if n.primed else "")
    if n == TRUE:
        return "true"
    if n == FALSE:
        return "false"
    return {
        Eq: "=",
        Not: "not",
        And: "and",
        Or: "or",
        Implies: "->",
        Globally: "G",
        Eventually: "F",
        Next: "X",
        Until: "U",
    }[type(n)]


def to_sexpr(n: Node) -> str:
    if isinstance(n, Var):
        return n.name
    if isinstance(n, Quantifier):
        head = "forall" if isinstance(n, Forall) else "exists"
        decls = " ".join(f"({v.name} {v.sort})" for v in n.vars)
        return f"({head} ({decls}) {to_sexpr(n.body)})"
    kids = children(n)
    if not kids or n == TRUE or n == FALSE:
        return _head(n)
    return "(" + " ".join([_head(n), *(to_sexpr(c) for c in kids)]) + ")"


def slug(n: Node, limit: int = 40) -> str:
    text = re.sub(r"[^A-Za-z0-9]+", "_", to_sexpr(n)).strip("_")
    return text[:limit].rstrip("_") or "f"


# -- signatures and sort checking ----------------------------------------------


@dataclass(frozen=True)
class Signature:
    """Sorts plus relation and function symbols (constants are nullary functions)."""

    sorts: tuple = ()
    relations: Mapping = field(default_factory=dict)
    functions: Mapping = field(default_factory=dict)
    rigid: frozenset = frozenset()
    finite: frozenset = frozenset()
    well_founded: frozenset = frozenset()

    @property
    def constants(self) -> dict[str, str]:
        return {n: r for n, (a, r) in self.functions.items() if not a}

    def has_symbol(self, name: str) -> bool:
        return name in self.relations or name in self.functions

    def with_sort(self, name: str, finite: bool = False) -> Signature:
        if name in self.sorts:
            raise SortError(f"duplicate sort {name}")
        return Signature(
            self.sorts + (name,),
            self.relations,
            self.functions,
            self.rigid,
            self.finite | ({name} if finite else set()),
            self.well_founded,
        )

    def with_relation(self, name: str, args, rigid=False, well_founded=False) -> Signature:
        self._check_new(name, args)
        if well_founded and (len(args) != 2 or args[0] != args[1]):
            raise SortError(f"well-founded relation {name} must be binary over one sort")
        return Signature(
            self.sorts,
            {**self.relations, name: tuple(args)},
            self.functions,
            self.rigid | ({name} if rigid else set()),
            self.finite,
            self.well_founded | ({name} if well_founded else set()),
        )

    def with_function(self, name: str, args, result: str, rigid=False) -> Signature:
        self._check_new(name, (*args, result))
        return Signature(
            self.sorts,
            self.relations,
            {**self.functions, name: (tuple(args), result)},
            self.rigid | ({name} if rigid else set()),
            self.finite,
            self.well_founded,
        )

    def _check_new(self, name: str, sorts) -> None:
        if self.has_symbol(name):
            raise SortError(f"duplicate symbol {name}")
        for s in sorts:
            if s not in self.sorts:
                raise SortError(f"unknown sort {s} in declaration of {name}")

    def with_timers(self) -> Signature:
        """Add the timer sort and its interpreted vocabulary."""
        if TIMER in self.sorts:
            return self
        sig = self.with_sort(TIMER)
        sig = sig.with_relation(TIMER_LE, (TIMER, TIMER), rigid=True)
        sig = sig.with_relation(TIMER_LT, (TIMER, TIMER), rigid=True)
        sig = sig.with_function(TIMER_ZERO, (), TIMER, rigid=True)
        sig = sig.with_function(TIMER_INF, (), TIMER, rigid=True)
        return sig.with_function(TIMER_PRED, (TIMER,), TIMER, rigid=True)


def sort_check(node: Node, sig: Signature) -> str:
    """Return the sort of a term (``Bool`` for formulas); raise on ill-sortedness."""
    if isinstance(node, Var):
        if node.sort not in sig.sorts:
            raise SortError(f"variable {node.name} has unknown sort {node.sort}")
        return node.sort
    if isinstance(node, App):
        if node.func not in sig.functions:
            if node.func in sig.relations:
                raise SortError(f"relation {node.func} used as a term")
            raise SortError(f"unknown function or constant {node.func}")
        args, result = sig.functions[node.func]
        _check_args(node.func, node.args, args, sig)
        _check_prime(node.func, node.primed, sig)
        return result
    if isinstance(node, Rel):
        if node.name not in sig.relations:
            if node.name in sig.functions:
                raise SortError(f"function {node.name} used as a formula")
            raise SortError(f"unknown relation {node.name}")
        _check_args(node.name, node.args, sig.relations[node.name], sig)
        _check_prime(node.name, node.primed, sig)
        return BOOL
    if isinstance(node, Eq):
        if not isinstance(node.lhs, Term) or not isinstance(node.rhs, Term):
            raise SortError("equality between formulas is ill-formed; use <-> instead")
        left, right = sort_check(node.lhs, sig), sort_check(node.rhs, sig)
        if left != right:
            raise SortError(f"equality between sorts {left} and {right}: {to_sexpr(node)}")
        return BOOL
    if isinstance(node, Quantifier):
        for v in node.vars:
            if v.sort not in sig.sorts:
                raise SortError(f"variable {v.name} has unknown sort {v.sort}")
    for c in children(node):
        if not isinstance(c, Formula):
            raise SortError(f"term used where a formula is expected: {to_sexpr(c)}")
        sort_check(c, sig)
    return BOOL


def _check_args(name: str, actual, expected, sig: Signature) -> None:
    if len(actual) != len(expected):
        raise SortError(f"{name} expects {len(expected)} arguments, got {len(actual)}")
    for i, (a, s) in enumerate(zip(actual, expected)):
        if not isinstance(a, Term):
            raise SortError(f"argument {i + 1} of {name} must be a term")
        got = sort_check(a, sig)
        if got != s:
            raise SortError(f"argument {i + 1} of {name} has sort {got}, expected {s}")


def _check_prime(name: str, primed: bool, sig: Signature) -> None:
    if primed and name in sig.rigid:
        raise SortError(f"immutable symbol {name} cannot be primed")


def term_sort(t: Term, sig: Signature) -> str:
    return sort_check(t, sig)

