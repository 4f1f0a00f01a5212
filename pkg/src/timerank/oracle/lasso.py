"""Ultimately periodic traces, their temporal semantics and the timer check.

A lasso is a finite sequence of structures whose last state steps back to
``loop``.  All structures of a lasso share carriers.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .. import logic as L
from ..logic import TIMER, Formula, Signature
from ..timers import AugmentedSystem, timer_constraints
from .materialize import random_strict_order
from .structures import INF, FiniteStructure, EvaluationError, assignments, eval_fo

BUILTIN_TIMER_SYMBOLS = frozenset(
    {L.TIMER_LE, L.TIMER_LT, L.TIMER_ZERO, L.TIMER_INF, L.TIMER_PRED}
)


@dataclass(frozen=True)
class Lasso:
    states: tuple
    loop: int

    def __post_init__(self):
        if not self.states:
            raise ValueError("a lasso needs at least one state")
        if not 0 <= self.loop < len(self.states):
            raise ValueError(f"loop index {self.loop} outside 0..{len(self.states) - 1}")

    @classmethod
    def of(cls, stem, loop) -> Lasso:
        stem, loop = tuple(stem), tuple(loop)
        return cls(stem + loop, len(stem))

    def __len__(self) -> int:
        return len(self.states)

    def succ(self, i: int) -> int:
        return i + 1 if i + 1 < len(self.states) else self.loop

    def pairs(self):
        """Every consecutive pair, the wrap-around included."""
        for i in range(len(self.states)):
            yield i, self.succ(i)

    def reachable(self, i: int) -> range:
        """Positions visited at or after ``i``."""
        return range(min(i, self.loop), len(self.states))

    def unroll(self, steps: int) -> list[int]:
        out, i = [], 0
        for _ in range(steps):
            out.append(i)
            i = self.succ(i)
        return out


def _env_key(env: dict) -> tuple:
    return tuple(sorted(((v.name, v.sort), val) for v, val in env.items()))


class Labeler:
    """Truth of FO-LTL formulas at every lasso position, memoised."""

    def __init__(self, lasso: Lasso):
        self.lasso = lasso
        self._memo: dict = {}

    def __call__(self, f: Formula, env: dict | None = None) -> tuple[bool, ...]:
        env = env or {}
        relevant = {v: env[v] for v in L.free_vars(f) if v in env}
        key = (f, _env_key(relevant))
        out = self._memo.get(key)
        if out is None:
            out = self._label(f, relevant)
            self._memo[key] = out
        return out

    def _label(self, f: Formula, env: dict) -> tuple[bool, ...]:
        lasso = self.lasso
        n = len(lasso)
        if not L.is_temporal(f):
            return tuple(eval_fo(f, s, env) for s in lasso.states)
        if isinstance(f, L.Not):
            return tuple(not b for b in self(f.body, env))
        if isinstance(f, L.And):
            parts = [self(a, env) for a in f.args]
            return tuple(all(p[i] for p in parts) for i in range(n))
        if isinstance(f, L.Or):
            parts = [self(a, env) for a in f.args]
            return tuple(any(p[i] for p in parts) for i in range(n))
        if isinstance(f, L.Implies):
            a, b = self(f.lhs, env), self(f.rhs, env)
            return tuple((not a[i]) or b[i] for i in range(n))
        if isinstance(f, (L.Forall, L.Exists)):
            quant = all if isinstance(f, L.Forall) else any
            rows = [self(f.body, {**env, **a}) for a in assignments(f.vars, lasso.states[0])]
            return tuple(quant(r[i] for r in rows) for i in range(n))
        if isinstance(f, L.Next):
            body = self(f.body, env)
            return tuple(body[lasso.succ(i)] for i in range(n))
        if isinstance(f, L.Eventually):
            body = self(f.body, env)
            return tuple(any(body[j] for j in lasso.reachable(i)) for i in range(n))
        if isinstance(f, L.Globally):
            body = self(f.body, env)
            return tuple(all(body[j] for j in lasso.reachable(i)) for i in range(n))
        if isinstance(f, L.Until):
            a, b = self(f.lhs, env), self(f.rhs, env)
            out = []
            for i in range(n):
                j, seen, holds = i, set(), False
                while j not in seen:
                    if b[j]:
                        holds = True
                        break
                    if not a[j]:
                        break
                    seen.add(j)
                    j = lasso.succ(j)
                out.append(holds)
            return tuple(out)
        raise EvaluationError(f"cannot label {type(f).__name__}")


def label_lasso(f: Formula, lasso: Lasso, env: dict | None = None) -> tuple[bool, ...]:
    return Labeler(lasso)(f, env)


def holds(f: Formula, lasso: Lasso, env: dict | None = None) -> bool:
    return label_lasso(f, lasso, env)[0]


def holds_unrolled(
    f: Formula, lasso: Lasso, env: dict | None = None, steps: int = 64
) -> tuple[bool, ...]:
    """Labels computed on a finite unrolling of the lasso.

    Each temporal operator looks ahead ``len(lasso)`` steps along the unrolled
    path, which is exact on a lasso, and so shortens the usable prefix by that
    much.  Raises if ``steps`` is too short for the formula's nesting.
    """
    n = len(lasso)
    path = lasso.unroll(steps)
    memo: dict = {}

    def lab(g: Formula, env: dict) -> list[bool]:
        key = (g, _env_key({v: env[v] for v in L.free_vars(g) if v in env}))
        if key in memo:
            return memo[key]
        if not L.is_temporal(g):
            per_state = [eval_fo(g, s, env) for s in lasso.states]
            out = [per_state[p] for p in path]
        elif isinstance(g, L.Not):
            out = [not b for b in lab(g.body, env)]
        elif isinstance(g, (L.And, L.Or)):
            parts = [lab(a, env) for a in g.args]
            quant = all if isinstance(g, L.And) else any
            out = [quant(p[k] for p in parts) for k in range(min(map(len, parts)))]
        elif isinstance(g, L.Implies):
            a, b = lab(g.lhs, env), lab(g.rhs, env)
            out = [(not x) or y for x, y in zip(a, b)]
        elif isinstance(g, (L.Forall, L.Exists)):
            quant = all if isinstance(g, L.Forall) else any
            rows = [lab(g.body, {**env, **a}) for a in assignments(g.vars, lasso.states[0])]
            out = [quant(r[k] for r in rows) for k in range(min(map(len, rows)))]
        elif isinstance(g, L.Next):
            out = lab(g.body, env)[1:]
        elif isinstance(g, L.Eventually):
            body = lab(g.body, env)
            out = [any(body[k : k + n]) for k in range(len(body) - n)]
        elif isinstance(g, L.Globally):
            body = lab(g.body, env)
            out = [all(body[k : k + n]) for k in range(len(body) - n)]
        elif isinstance(g, L.Until):
            a, b = lab(g.lhs, env), lab(g.rhs, env)
            usable = min(len(a), len(b))
            out = []
            for k in range(usable - n):
                result = False
                for j in range(k, k + n):
                    if b[j]:
                        result = True
                        break
                    if not a[j]:
                        break
                out.append(result)
        else:
            raise EvaluationError(f"cannot label {type(g).__name__}")
        memo[key] = out
        return out

    labels = lab(f, env or {})
    if len(labels) < n:
        raise ValueError(f"{steps} unrolled steps are too few for this formula")
    return tuple(labels[:n])


def _args_of(entry, env: dict) -> tuple:
    return tuple(env[v] for v in entry.params)


def _distances(truth, lasso: Lasso) -> list:
    """Steps to the nearest position where ``truth`` holds, or infinity."""
    out = []
    for i in range(len(lasso)):
        j, d, seen = i, 0, set()
        while j not in seen and not truth[j]:
            seen.add(j)
            j = lasso.succ(j)
            d += 1
        out.append(d if truth[j] else INF)
    return out


def natural_timers(lasso: Lasso, aug: AugmentedSystem) -> Lasso:
    """Interpret every timer as the distance to the next position where its
    formula holds."""
    lab = Labeler(lasso)
    states = [s.copy() for s in lasso.states]
    horizon = len(lasso)
    for s in states:
        s.carriers[TIMER] = tuple(range(horizon + 1)) + (INF,)
    for e in aug.entries:
        tables = [dict() for _ in states]
        for env in assignments(e.params, lasso.states[0]):
            dist = _distances(lab(e.formula, env), lasso)
            args = _args_of(e, env)
            for i, d in enumerate(dist):
                tables[i][args] = d
        for s, table in zip(states, tables):
            s.interp[e.symbol] = table
    return Lasso(tuple(states), lasso.loop)


@dataclass
class ReductionReport:
    gamma: bool = True
    transition: bool = True
    init: bool = True
    zero_iff_holds: bool = True
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self):
        return self.violations[0] if self.violations else None


def check_reduction(
    lasso: Lasso, aug: AugmentedSystem, timed: Lasso | None = None, exhaustive: bool = True
) -> ReductionReport:
    """Check the timer constraints against a trace of the original system.

    ``timed`` is the trace with timers interpreted; by default the natural
    interpretation.  With ``exhaustive`` every timer sequence allowed by an
    entry's own constraints is enumerated, and the check demands that the only
    admissible one is zero exactly where the entry's formula holds.
    """
    timed = timed or natural_timers(lasso, aug)
    report = ReductionReport()
    for i, s in enumerate(timed.states):
        for label, g in aug.gamma:
            if not eval_fo(g, s):
                report.gamma = False
                report.violations.append(("gamma", label, i))
    for i, j in timed.pairs():
        for label, t in aug.timer_transitions:
            if not eval_fo(t, timed.states[i], post=timed.states[j]):
                report.transition = False
                report.violations.append(("transition", label, i))
    lab = Labeler(lasso)
    if lab(aug.negated)[0] and not eval_fo(aug.timer_init, timed.states[0]):
        report.init = False
        report.violations.append(("init", L.to_sexpr(aug.timer_init), 0))
    if exhaustive:
        _check_uniqueness(lasso, aug, timed, lab, report)
    return report


def _sequence_from_zeros(zeros: frozenset, lasso: Lasso) -> list:
    return _distances([i in zeros for i in range(len(lasso))], lasso)


def _instance(f: Formula, params: tuple) -> Formula:
    if params and isinstance(f, L.Forall) and f.vars == tuple(params):
        return f.body
    return f


def _check_uniqueness(lasso, aug, timed, lab, report) -> None:
    entries = {e.key: e for e in aug.entries}
    rows = timer_constraints(entries)
    states = [s.copy() for s in timed.states]
    for s in states:
        s.interp = {k: (dict(v) if isinstance(v, dict) else v) for k, v in s.interp.items()}
    n = len(lasso)
    for e, gammas, (step_label, step) in rows:
        gammas = [(lbl, _instance(g, e.params)) for lbl, g in gammas]
        step = _instance(step, e.params)
        for env in assignments(e.params, lasso.states[0]):
            args = _args_of(e, env)
            truth = lab(e.formula, env)
            natural = [s.interp[e.symbol][args] for s in states]

            def put(seq):
                for s, v in zip(states, seq):
                    s.interp[e.symbol][args] = v

            # positions where zero is allowed by the entry's own state axioms
            allowed = []
            for i, s in enumerate(states):
                opts = []
                for value in (0, 1):
                    s.interp[e.symbol][args] = value
                    if all(eval_fo(g, s, env) for _, g in gammas):
                        opts.append(value == 0)
                s.interp[e.symbol][args] = natural[i]
                allowed.append(opts)
            choices = [sorted(set(o)) for o in allowed]
            admissible = []
            for pick in itertools.product(*choices):
                zeros = frozenset(i for i, z in enumerate(pick) if z)
                seq = _sequence_from_zeros(zeros, lasso)
                put(seq)
                ok = all(
                    eval_fo(g, states[i], env) for i in range(n) for _, g in gammas
                ) and all(eval_fo(step, states[i], env, post=states[j]) for i, j in lasso.pairs())
                if ok:
                    admissible.append(zeros)
            put(natural)
            expected = frozenset(i for i in range(n) if truth[i])
            if admissible != [expected]:
                report.zero_iff_holds = False
                name = L.to_sexpr(e.formula)
                report.violations.append(
                    ("zero-iff-holds", name, tuple(sorted(env.items(), key=repr)))
                )


# -- sampling and search -----------------------------------------------------


def _user_symbols(sig: Signature, timers: bool = False):
    rels = {n: a for n, a in sig.relations.items() if n not in BUILTIN_TIMER_SYMBOLS}
    funs = {
        n: (a, r)
        for n, (a, r) in sig.functions.items()
        if n not in BUILTIN_TIMER_SYMBOLS and (timers or r != TIMER)
    }
    return rels, funs


def random_structure(
    sig: Signature,
    carriers: dict,
    rng: random.Random,
    fixed: FiniteStructure | None = None,
    density: float = 0.5,
    orders=(),
) -> FiniteStructure:
    """A structure with every symbol interpreted at random.

    Symbols interpreted in ``fixed`` are copied from it.  Relations named in
    ``orders`` become strict partial orders.  Timer-valued functions are
    sampled only when ``carriers`` has a timer carrier.
    """
    rels, funs = _user_symbols(sig, timers=TIMER in carriers)
    s = FiniteStructure(dict(carriers))
    for name, argsorts in rels.items():
        if fixed is not None and name in fixed.interp:
            s.interp[name] = fixed.interp[name]
            continue
        if name in orders:
            s.interp[name] = random_strict_order(carriers[argsorts[0]], rng)
            continue
        tuples = itertools.product(*(carriers[a] for a in argsorts))
        s.interp[name] = frozenset(t for t in tuples if rng.random() < density)
    for name, (argsorts, result) in funs.items():
        if fixed is not None and name in fixed.interp:
            s.interp[name] = fixed.interp[name]
            continue
        tuples = itertools.product(*(carriers[a] for a in argsorts))
        s.interp[name] = {t: rng.choice(carriers[result]) for t in tuples}
    return s


def random_lasso(
    sig: Signature,
    carriers: dict,
    rng: random.Random,
    max_stem: int = 3,
    max_loop: int = 3,
    rigid: FiniteStructure | None = None,
) -> Lasso:
    """Random states with rigid symbols shared across the lasso."""
    base = rigid or random_structure(sig, carriers, rng)
    keep = FiniteStructure(dict(carriers), {n: base.interp[n] for n in sig.rigid if n in base.interp})
    stem = rng.randint(0, max_stem)
    loop = rng.randint(1, max_loop)
    states = tuple(random_structure(sig, carriers, rng, keep) for _ in range(stem + loop))
    return Lasso(states, stem)


def all_structures(sig: Signature, carriers: dict, fixed: FiniteStructure | None = None, cap=None):
    """Every interpretation of the non-fixed, non-timer symbols."""
    rels, funs = _user_symbols(sig)
    slots = []
    for name, argsorts in rels.items():
        if fixed is not None and name in fixed.interp:
            continue
        tuples = list(itertools.product(*(carriers[a] for a in argsorts)))
        options = [
            frozenset(t for t, bit in zip(tuples, bits) if bit)
            for bits in itertools.product((False, True), repeat=len(tuples))
        ]
        slots.append((name, options))
    for name, (argsorts, result) in funs.items():
        if fixed is not None and name in fixed.interp:
            continue
        tuples = list(itertools.product(*(carriers[a] for a in argsorts)))
        options = [
            dict(zip(tuples, values))
            for values in itertools.product(carriers[result], repeat=len(tuples))
        ]
        slots.append((name, options))
    base = dict(fixed.interp) if fixed is not None else {}
    for count, choice in enumerate(itertools.product(*(opts for _, opts in slots))):
        if cap is not None and count >= cap:
            raise ValueError(f"more than {cap} candidate states")
        interp = dict(base)
        interp.update({name: value for (name, _), value in zip(slots, choice)})
        yield FiniteStructure(dict(carriers), interp)


def search_lasso(
    system,
    psi: Formula,
    carriers: dict,
    rigid: FiniteStructure,
    max_stem: int = 4,
    max_loop: int = 4,
    state_cap: int = 1 << 14,
):
    """A lasso of ``system`` whose first position satisfies ``psi``, or None.

    States are enumerated explicitly over ``carriers`` with the rigid symbols
    taken from ``rigid``; only states reachable within the bounds are explored.
    """
    candidates = [
        s
        for s in all_structures(system.signature, carriers, rigid, cap=state_cap)
        if eval_fo(system.axiom, s)
    ]
    succ_cache: dict[int, list[int]] = {}

    def successors(i: int) -> list[int]:
        if i not in succ_cache:
            src = candidates[i]
            succ_cache[i] = [
                j
                for j, dst in enumerate(candidates)
                if eval_fo(system.transition, src, post=dst)
            ]
        return succ_cache[i]

    inits = [i for i, s in enumerate(candidates) if eval_fo(system.init, s)]
    limit = max_stem + max_loop

    def dfs(path: list[int]):
        last = path[-1]
        for j in successors(last):
            if j in path:
                loop = path.index(j)
                if len(path) - loop <= max_loop and loop <= max_stem:
                    lasso = Lasso(tuple(candidates[k] for k in path), loop)
                    if holds(psi, lasso):
                        return lasso
            elif len(path) < limit:
                found = dfs(path + [j])
                if found is not None:
                    return found
        return None

    for i in inits:
        found = dfs([i])
        if found is not None:
            return found
    return None
