"""Reduction of temporal properties to termination via timer functions.

Every formula in the closure of the (negated) property gets a timer
``t(x̄)`` valued in the extended naturals.  A timer is ``0`` exactly when its
formula holds now and otherwise counts the steps until it next holds
(``inf`` if never).  The reduction produces the axioms that pin timers to
their formulas within one state, the transition constraints that tie them
across a step, and the product with the original system.
"""

from __future__ import annotations

from dataclasses import dataclass

from .logic import (
    TIMER,
    TIMER_INF,
    TIMER_LE,
    TIMER_LT,
    TIMER_PRED,
    TIMER_ZERO,
    And,
    App,
    Atomic,
    CanonicalKey,
    Eq,
    Eventually,
    Exists,
    Forall,
    Formula,
    Globally,
    Implies,
    LogicError,
    Next,
    Not,
    Or,
    Rel,
    Signature,
    Term,
    Until,
    canonical_key,
    children,
    conj,
    disj,
    forall,
    free_vars,
    iff,
    prime,
    shape_key,
    slug,
    substitute,
    to_sexpr,
)
from .systems import TransitionSystem

ZERO = App(TIMER_ZERO)
INF = App(TIMER_INF)


def timer_lt(a: Term, b: Term) -> Formula:
    return Rel(TIMER_LT, (a, b))


def timer_le(a: Term, b: Term) -> Formula:
    return Rel(TIMER_LE, (a, b))


def timer_pred(a: Term) -> Term:
    return App(TIMER_PRED, (a,))


class ReductionError(LogicError):
    pass


# -- negation and Skolemization -----------------------------------------------


def push_negation(f: Formula) -> Formula:
    """An equivalent of ``not f`` with the negation moved inwards.

    Negation passes through the boolean connectives, quantifiers and the
    ``G``/``F``/``X`` operators; it stops at atoms and at ``U``.
    """
    if isinstance(f, Not):
        return f.body
    if isinstance(f, And):
        return disj(*(push_negation(a) for a in f.args)) if f.args else Or(())
    if isinstance(f, Or):
        return conj(*(push_negation(a) for a in f.args)) if f.args else And(())
    if isinstance(f, Implies):
        return conj(f.lhs, push_negation(f.rhs))
    if isinstance(f, Forall):
        return Exists(f.vars, push_negation(f.body))
    if isinstance(f, Exists):
        return Forall(f.vars, push_negation(f.body))
    if isinstance(f, Globally):
        return Eventually(push_negation(f.body))
    if isinstance(f, Eventually):
        return Globally(push_negation(f.body))
    if isinstance(f, Next):
        return Next(push_negation(f.body))
    return Not(f)


def skolemize(f: Formula, sig: Signature) -> tuple[Formula, Signature, tuple[str, ...]]:
    """Replace existentials reachable through ``and``/``or`` by fresh constants.

    The constants are immutable, so they keep one value along a trace.
    """
    new_names: list[str] = []
    taken = set(sig.relations) | set(sig.functions)

    def fresh(base: str) -> str:
        name = f"{base}0"
        i = 1
        while name in taken:
            name = f"{base}0_{i}"
            i += 1
        taken.add(name)
        return name

    consts: list[tuple[str, str]] = []

    def go(g: Formula) -> Formula:
        if isinstance(g, And):
            return And(tuple(go(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(go(a) for a in g.args))
        if isinstance(g, Exists):
            mapping = {}
            for v in g.vars:
                name = fresh(v.name)
                consts.append((name, v.sort))
                new_names.append(name)
                mapping[v] = App(name)
            return go(substitute(g.body, mapping))
        return g

    out = go(f)
    for name, sort in consts:
        sig = sig.with_function(name, (), sort, rigid=True)
    return out, sig, tuple(new_names)


def negate_property(
    phi: Formula, sig: Signature, skolemize_: bool = True
) -> tuple[Formula, Signature, tuple[str, ...]]:
    """The formula whose traces are the violations of ``phi``."""
    if not skolemize_:
        return Not(phi), sig, ()
    return skolemize(push_negation(phi), sig)


# -- closure and timers -------------------------------------------------------


def closure(root: Formula) -> tuple[Formula, ...]:
    """Subformulas of ``root`` (children first), with ``not p`` for each ``G p``.

    Entries are unique up to renaming of bound variables.
    """
    seen: dict[CanonicalKey, Formula] = {}

    def add(f: Formula) -> None:
        key = canonical_key(f)
        if key not in seen:
            seen[key] = f

    def visit(f: Formula) -> None:
        if not isinstance(f, Atomic):
            for c in children(f):
                visit(c)
        if isinstance(f, Globally):
            add(Not(f.body))
        add(f)

    visit(root)
    return tuple(seen.values())


@dataclass(frozen=True)
class TimerEntry:
    formula: Formula
    key: CanonicalKey
    symbol: str
    params: tuple

    @property
    def term(self) -> App:
        return App(self.symbol, tuple(self.params))

    def applied(self, args) -> App:
        return App(self.symbol, tuple(args))


def timer_symbol(f: Formula) -> str:
    return f"t!{canonical_key(f).digest()[:8]}!{slug(f)}"


@dataclass(frozen=True)
class AugmentedSystem:
    """The original system in product with the timer system of a negated property."""

    original: TransitionSystem
    property: Formula
    negated: Formula
    skolems: tuple
    entries: tuple
    gamma: tuple  # (label, formula) pairs
    timer_init: Formula
    timer_transitions: tuple  # (label, formula) pairs
    system: TransitionSystem

    @property
    def signature(self) -> Signature:
        return self.system.signature

    def entry(self, f: Formula) -> TimerEntry:
        key = canonical_key(f)
        for e in self.entries:
            if e.key == key:
                return e
        shape = shape_key(f)
        for e in self.entries:
            if shape_key(e.formula) == shape:
                return e
        available = "\n  ".join(to_sexpr(e.formula) for e in self.entries)
        raise ReductionError(
            f"no timer for {to_sexpr(f)}: not a subformula of the negated property; "
            f"timers exist for:\n  {available}"
        )

    def timer_for(self, f: Formula) -> App:
        """The timer of ``f`` applied to ``f``'s own free variables."""
        e = self.entry(f)
        return e.applied(free_vars(f))

    @property
    def timer_symbols(self) -> frozenset:
        return frozenset(e.symbol for e in self.entries)


def timer_constraints(entries: dict) -> list[tuple[TimerEntry, list, tuple]]:
    """For each entry: its state axioms and its transition constraint.

    ``entries`` maps canonical keys to entries and must be closed under
    subformulas.  Axioms and constraints are ``(label, formula)`` pairs.
    """

    def t(f: Formula) -> App:
        return entries[canonical_key(f)].applied(free_vars(f))

    def is_zero(f: Formula) -> Formula:
        return Eq(t(f), ZERO)

    rows = []
    for e in entries.values():
        gamma: list[tuple[str, Formula]] = []
        f = e.formula
        xs = e.params
        me = e.term
        state = None
        if isinstance(f, Atomic):
            state = f
        elif isinstance(f, Not):
            state = Not(is_zero(f.body))
        elif isinstance(f, And):
            state = And(tuple(is_zero(a) for a in f.args))
        elif isinstance(f, Or):
            state = Or(tuple(is_zero(a) for a in f.args))
        elif isinstance(f, Implies):
            state = Implies(is_zero(f.lhs), is_zero(f.rhs))
        elif isinstance(f, Forall):
            state = Forall(f.vars, is_zero(f.body))
        elif isinstance(f, Exists):
            state = Exists(f.vars, is_zero(f.body))
        elif isinstance(f, Eventually):
            state = timer_lt(t(f.body), INF)
        elif isinstance(f, Globally):
            state = Eq(t(Not(f.body)), INF)
        label = slug(f)
        gamma.append((f"range {label}", forall(xs, Or((timer_le(ZERO, me), Eq(me, INF))))))
        if state is not None:
            gamma.append((f"state {label}", forall(xs, iff(Eq(me, ZERO), state))))
        if isinstance(f, Until):
            gamma.append(
                (f"until {label}", forall(xs, Implies(Eq(me, ZERO), timer_lt(t(f.rhs), INF))))
            )

        post = prime(me)
        step = None
        if isinstance(f, Eventually):
            step = disj(is_zero(f.body), Eq(post, ZERO))
        elif isinstance(f, Globally):
            step = conj(is_zero(f.body), Eq(post, ZERO))
        elif isinstance(f, Next):
            step = Eq(prime(t(f.body)), ZERO)
        elif isinstance(f, Until):
            step = disj(is_zero(f.rhs), conj(is_zero(f.lhs), Eq(post, ZERO)))
        parts = [
            Implies(And((timer_lt(ZERO, me), timer_lt(me, INF))), Eq(post, timer_pred(me))),
            Implies(Eq(me, INF), Eq(post, INF)),
        ]
        if step is not None:
            parts.append(iff(Eq(me, ZERO), step))
        rows.append((e, gamma, (f"step {label}", forall(xs, conj(*parts)))))
    return rows


def augment(
    system: TransitionSystem, phi: Formula, skolemize_: bool = True
) -> AugmentedSystem:
    """Product of ``system`` with the timer system of the negation of ``phi``."""
    if free_vars(phi):
        raise ReductionError("the property must be closed")
    negated, sig, skolems = negate_property(phi, system.signature, skolemize_)
    sig = sig.with_timers()
    entries: dict[CanonicalKey, TimerEntry] = {}
    names: dict[str, CanonicalKey] = {}
    for f in closure(negated):
        key = canonical_key(f)
        symbol = timer_symbol(f)
        if symbol in names and names[symbol] != key:
            raise ReductionError(f"timer name collision on {symbol}")
        names[symbol] = key
        params = free_vars(f)
        entries[key] = TimerEntry(f, key, symbol, params)
        sig = sig.with_function(symbol, tuple(v.sort for v in params), TIMER)
    rows = timer_constraints(entries)
    gamma = [g for _, gs, _ in rows for g in gs]
    trans = [step for _, _, step in rows]
    root = entries[canonical_key(negated)]
    init = Eq(root.term, ZERO)
    product = TransitionSystem(
        sig,
        system.axioms + tuple(g for _, g in gamma),
        system.inits + (init,),
        system.transitions + tuple(t for _, t in trans),
    )
    return AugmentedSystem(
        system,
        phi,
        negated,
        skolems,
        tuple(entries.values()),
        tuple(gamma),
        init,
        tuple(trans),
        product,
    )
