"""Finite structures and Tarskian evaluation of first-order formulas."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .. import logic as L
from ..logic import (
    TIMER,
    TIMER_INF,
    TIMER_LE,
    TIMER_LT,
    TIMER_PRED,
    TIMER_ZERO,
    Eq,
    Formula,
    Rel,
    Term,
    Var,
)

INF = math.inf


class EvaluationError(L.LogicError):
    pass


def timer_pred(v):
    return v if v == 0 or v == INF else v - 1


@dataclass
class FiniteStructure:
    """Carriers per sort and an interpretation per symbol.

    Relations map to sets of argument tuples; functions (constants included)
    map to dicts from argument tuples to values.  Timer values are Python
    ints with ``math.inf`` for infinity.
    """

    carriers: dict
    interp: dict = field(default_factory=dict)

    def carrier(self, sort: str):
        try:
            return self.carriers[sort]
        except KeyError:
            raise EvaluationError(f"no carrier for sort {sort}") from None

    def copy(self) -> FiniteStructure:
        return FiniteStructure(dict(self.carriers), dict(self.interp))

    def key(self) -> tuple:
        """Hashable summary of the interpretation."""
        out = []
        for name in sorted(self.interp):
            v = self.interp[name]
            if isinstance(v, dict):
                out.append((name, tuple(sorted(v.items(), key=repr))))
            else:
                out.append((name, tuple(sorted(v, key=repr))))
        return tuple(out)


def _lookup(s: FiniteStructure, name: str):
    try:
        return s.interp[name]
    except KeyError:
        raise EvaluationError(f"symbol {name} is not interpreted") from None


def eval_term(t: Term, s: FiniteStructure, env: dict, post: FiniteStructure | None = None):
    if isinstance(t, Var):
        try:
            return env[t]
        except KeyError:
            raise EvaluationError(f"unbound variable {t.name}") from None
    if t.func == TIMER_ZERO:
        return 0
    if t.func == TIMER_INF:
        return INF
    args = tuple(eval_term(a, s, env, post) for a in t.args)
    if t.func == TIMER_PRED:
        return timer_pred(args[0])
    where = post if t.primed else s
    if where is None:
        raise EvaluationError(f"primed symbol {t.func}' needs a post-state")
    table = _lookup(where, t.func)
    try:
        return table[args]
    except KeyError:
        raise EvaluationError(f"{t.func} undefined on {args}") from None


def eval_fo(
    f: Formula, s: FiniteStructure, env: dict | None = None, post: FiniteStructure | None = None
) -> bool:
    """Truth of a (possibly two-state) formula; primed symbols read ``post``."""
    return _eval(f, s, env or {}, post)


def _eval(f, s, env, post) -> bool:
    if isinstance(f, Rel):
        args = tuple(eval_term(a, s, env, post) for a in f.args)
        if f.name == TIMER_LE:
            return args[0] <= args[1]
        if f.name == TIMER_LT:
            return args[0] < args[1]
        where = post if f.primed else s
        if where is None:
            raise EvaluationError(f"primed symbol {f.name}' needs a post-state")
        return args in _lookup(where, f.name)
    if isinstance(f, Eq):
        return eval_term(f.lhs, s, env, post) == eval_term(f.rhs, s, env, post)
    if isinstance(f, L.Not):
        return not _eval(f.body, s, env, post)
    if isinstance(f, L.And):
        return all(_eval(a, s, env, post) for a in f.args)
    if isinstance(f, L.Or):
        return any(_eval(a, s, env, post) for a in f.args)
    if isinstance(f, L.Implies):
        return (not _eval(f.lhs, s, env, post)) or _eval(f.rhs, s, env, post)
    if isinstance(f, (L.Forall, L.Exists)):
        domains = [s.carrier(v.sort) for v in f.vars]
        want = isinstance(f, L.Forall)
        for values in itertools.product(*domains):
            inner = {**env, **dict(zip(f.vars, values))}
            if _eval(f.body, s, inner, post) != want:
                return not want
        return want
    raise EvaluationError(f"cannot evaluate {type(f).__name__} in a single state")


def assignments(vs, s: FiniteStructure):
    """Every assignment of carrier elements to ``vs``."""
    for values in itertools.product(*(s.carrier(v.sort) for v in vs)):
        yield dict(zip(vs, values))


def timer_carrier(bound: int) -> tuple:
    return tuple(range(bound + 1)) + (INF,)


def with_timer_carrier(s: FiniteStructure, bound: int) -> FiniteStructure:
    out = s.copy()
    out.carriers[TIMER] = timer_carrier(bound)
    return out
