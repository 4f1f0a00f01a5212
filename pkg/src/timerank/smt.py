"""SMT-LIB emission, solver invocation and model read-back.

Timer values are encoded as integers with ``inf`` as ``-1``; quantifiers
over the timer sort are relativised to values ``>= -1``.  Each VC is checked
by asserting its negation in a fresh solver process.  A satisfying model is
turned back into a pair of finite structures and re-evaluated with the
explicit evaluator before it is reported as a counterexample.
"""

from __future__ import annotations

import itertools
import logging
import os
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import logic as L
from .logic import (
    BOOL,
    TIMER,
    TIMER_INF,
    TIMER_LE,
    TIMER_LT,
    TIMER_PRED,
    TIMER_SYMBOLS,
    TIMER_ZERO,
    Eq,
    Formula,
    Rel,
    Var,
    symbols,
)
from .oracle.structures import INF, FiniteStructure, eval_fo
from .sexpr import Atom, ParseError, SList, read_all
from .vcgen import VC

log = logging.getLogger(__name__)

SOLVER_ENV = "TIMERANK_SOLVER"
LOGIC = "UFLIA"


class BackendError(Exception):
    """The solver misbehaved or returned a model that does not refute the VC."""


def _q(name: str) -> str:
    return f"|{name}|"


def _sym(name: str, primed: bool) -> str:
    return _q(name + ("'" if primed else ""))


def _sort(sort: str) -> str:
    if sort == TIMER:
        return "Int"
    if sort == BOOL:
        return "Bool"
    return _q(sort)


def _var(v: Var) -> str:
    return _q("?" + v.name)


def _le(a: str, b: str) -> str:
    return f"(or (= {b} (- 1)) (and (not (= {a} (- 1))) (<= {a} {b})))"


def emit_term(t) -> str:
    if isinstance(t, Var):
        return _var(t)
    if t.func == TIMER_ZERO:
        return "0"
    if t.func == TIMER_INF:
        return "(- 1)"
    args = [emit_term(a) for a in t.args]
    if t.func == TIMER_PRED:
        a = args[0]
        return f"(ite (<= {a} 0) {a} (- {a} 1))"
    head = _sym(t.func, t.primed)
    return f"({head} {' '.join(args)})" if args else head


def _binders(vs) -> str:
    return " ".join(f"({_var(v)} {_sort(v.sort)})" for v in vs)


def _range(vs) -> list[str]:
    return [f"(>= {_var(v)} (- 1))" for v in vs if v.sort == TIMER]


def emit_formula(f: Formula) -> str:
    if isinstance(f, Rel):
        args = [emit_term(a) for a in f.args]
        if f.name == TIMER_LE:
            return _le(*args)
        if f.name == TIMER_LT:
            return f"(and {_le(*args)} (not (= {args[0]} {args[1]})))"
        head = _sym(f.name, f.primed)
        return f"({head} {' '.join(args)})" if args else head
    if isinstance(f, Eq):
        return f"(= {emit_term(f.lhs)} {emit_term(f.rhs)})"
    if isinstance(f, L.Not):
        return f"(not {emit_formula(f.body)})"
    if isinstance(f, (L.And, L.Or)):
        if not f.args:
            return "true" if isinstance(f, L.And) else "false"
        op = "and" if isinstance(f, L.And) else "or"
        return f"({op} {' '.join(emit_formula(a) for a in f.args)})"
    if isinstance(f, L.Implies):
        return f"(=> {emit_formula(f.lhs)} {emit_formula(f.rhs)})"
    if isinstance(f, L.Forall):
        body = emit_formula(f.body)
        guard = _range(f.vars)
        if guard:
            body = f"(=> (and {' '.join(guard)} true) {body})"
        return f"(forall ({_binders(f.vars)}) {body})"
    if isinstance(f, L.Exists):
        body = emit_formula(f.body)
        guard = _range(f.vars)
        if guard:
            body = f"(and {' '.join(guard)} {body})"
        return f"(exists ({_binders(f.vars)}) {body})"
    raise BackendError(f"cannot encode {type(f).__name__}")


def _declarations(vc: VC) -> list[str]:
    sig = vc.signature
    used = set()
    for _, h in vc.hyps:
        used |= symbols(h)
    used |= symbols(vc.goal)
    lines = []
    for s in sig.sorts:
        if s != TIMER:
            lines.append(f"(declare-sort {_q(s)} 0)")
    for name, primed in sorted(used):
        if name in TIMER_SYMBOLS:
            continue
        if name in sig.relations:
            args, result = sig.relations[name], BOOL
        else:
            args, result = sig.functions[name]
        arg_sorts = " ".join(_sort(a) for a in args)
        lines.append(f"(declare-fun {_sym(name, primed)} ({arg_sorts}) {_sort(result)})")
    return lines


def emit(vc: VC) -> str:
    """A self-contained SMT-LIB script asserting the negation of ``vc``."""
    out = [
        f"; vc {vc.id} ({vc.kind})",
        f"; {vc.provenance}",
        f"(set-logic {LOGIC})",
        "(set-option :produce-models true)",
    ]
    out.extend(_declarations(vc))
    for label, h in vc.hyps:
        out.append(f"; {label}")
        out.append(f"(assert {emit_formula(h)})")
    out.append("; negated goal")
    out.append(f"(assert (not {emit_formula(vc.goal)}))")
    out.append("(check-sat)")
    out.append("(get-model)")
    return "\n".join(out) + "\n"


# -- solver ---------------------------------------------------------------------


def find_solver(path: str | None = None) -> str:
    path = path or os.environ.get(SOLVER_ENV) or shutil.which("z3")
    if not path:
        raise BackendError(f"no SMT solver found; pass --solver or set {SOLVER_ENV}")
    return path


@dataclass
class Counterexample:
    vc: str
    kind: str
    pre: FiniteStructure
    post: FiniteStructure | None
    failing: tuple = ()

    def to_json(self) -> dict:
        out = {
            "vc": self.vc,
            "kind": self.kind,
            "domains": {s: [str(e) for e in els] for s, els in sorted(self.pre.carriers.items()) if s != TIMER},
            "pre": render_state(self.pre),
        }
        if self.post is not None:
            out["post"] = render_state(self.post)
        if self.failing:
            out["failing"] = list(self.failing)
        return out


def _value(v):
    return "inf" if v == INF else v if isinstance(v, (int, bool)) else str(v)


def render_state(s: FiniteStructure) -> dict:
    out = {}
    for name in sorted(s.interp):
        table = s.interp[name]
        if isinstance(table, dict):
            if list(table) == [()]:
                out[name] = _value(table[()])
            else:
                out[name] = [
                    [*map(_value, k), _value(v)] for k, v in sorted(table.items(), key=repr)
                ]
        else:
            out[name] = sorted([list(map(_value, t)) for t in table])
    return out


@dataclass
class Result:
    vc: str
    kind: str
    verdict: str  # Valid | Invalid | Unknown
    seconds: float
    counterexample: Counterexample | None = None
    detail: str = ""


@dataclass
class Solver:
    path: str | None = None
    timeout: float = 60.0
    args: tuple = field(default=())

    def run(self, script: str) -> str:
        cmd = [find_solver(self.path), "-smt2", "-in", f"-T:{max(1, int(self.timeout))}", *self.args]
        try:
            proc = subprocess.run(
                cmd, input=script, capture_output=True, text=True, timeout=self.timeout + 10
            )
        except subprocess.TimeoutExpired:
            return "timeout"
        except OSError as e:
            raise BackendError(f"cannot run solver {cmd[0]}: {e}") from None
        return proc.stdout

    def check(self, vc: VC) -> Result:
        start = time.monotonic()
        out = self.run(emit(vc))
        seconds = time.monotonic() - start
        first = out.strip().split("\n", 1)[0].strip() if out.strip() else ""
        if first == "unsat":
            return Result(vc.id, vc.kind, "Valid", seconds)
        if first == "sat":
            cex = read_counterexample(out, vc)
            return Result(vc.id, vc.kind, "Invalid", seconds, cex)
        detail = first or "no answer"
        if first.startswith("(error"):
            raise BackendError(f"solver rejected VC {vc.id}: {out.strip()[:500]}")
        return Result(vc.id, vc.kind, "Unknown", seconds, detail=detail)


def check_all(vcs, solver: Solver, jobs: int = 1) -> list[Result]:
    """Check every VC; results come back in input order regardless of ``jobs``."""
    if jobs <= 1:
        return [solver.check(v) for v in vcs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(solver.check, vcs))


# -- models ---------------------------------------------------------------------


def _name(x) -> str:
    text = x.text if isinstance(x, Atom) else str(x)
    return text[1:-1] if text.startswith("|") and text.endswith("|") else text


class _Model:
    def __init__(self, text: str):
        items = read_all(text)
        body = None
        for it in items:
            if isinstance(it, SList):
                body = it
                break
        if body is None:
            raise BackendError("solver printed no model")
        if body.items and isinstance(body[0], Atom) and body[0].text == "model":
            body = SList(body.items[1:], body.span)
        self.universe: dict[str, list[str]] = {}
        self.defs: dict[str, tuple] = {}
        for d in body.items:
            if not isinstance(d, SList) or not d.items:
                continue
            head = d[0].text if isinstance(d[0], Atom) else ""
            if head == "declare-fun" and len(d) == 4 and not d[2].items:
                self.universe.setdefault(_name(d[3]), []).append(_name(d[1]))
            elif head == "define-fun":
                params = [(_name(p[0]), _name(p[1])) for p in d[2].items]
                self.defs[_name(d[1])] = (params, d[4])

    def call(self, name: str, args: tuple):
        params, body = self.defs[name]
        env = {p: a for (p, _), a in zip(params, args)}
        return self.eval(body, env)

    def eval(self, x, env: dict):
        if isinstance(x, Atom):
            t = _name(x)
            if t in env:
                return env[t]
            if t == "true":
                return True
            if t == "false":
                return False
            if t.lstrip("-").isdigit():
                return int(t)
            if t in self.defs:
                return self.call(t, ())
            return t
        head = _name(x[0]) if isinstance(x[0], Atom) else None
        if head == "let":
            inner = dict(env)
            for b in x[1].items:
                inner[_name(b[0])] = self.eval(b[1], env)
            return self.eval(x[2], inner)
        if head == "ite":
            return self.eval(x[2] if self.eval(x[1], env) else x[3], env)
        args = [self.eval(a, env) for a in x.items[1:]]
        ops = {
            "and": lambda *a: all(a),
            "or": lambda *a: any(a),
            "not": lambda a: not a,
            "=>": lambda a, b: (not a) or b,
            "=": lambda *a: all(v == a[0] for v in a),
            "distinct": lambda *a: len(set(a)) == len(a),
            "<=": lambda a, b: a <= b,
            "<": lambda a, b: a < b,
            ">=": lambda a, b: a >= b,
            ">": lambda a, b: a > b,
            "+": lambda *a: sum(a),
            "*": lambda *a: _prod(a),
            "-": lambda a, *b: -a if not b else a - sum(b),
            "xor": lambda a, b: a != b,
        }
        if head in ops:
            return ops[head](*args)
        if head in self.defs:
            return self.call(head, tuple(args))
        raise BackendError(f"unsupported model expression {x}")


def _prod(xs):
    out = 1
    for x in xs:
        out *= x
    return out


def _from_int(v):
    if v == -1:
        return INF
    if isinstance(v, int) and v < -1:
        raise BackendError(f"timer value {v} outside the encoding range")
    return v


def read_counterexample(output: str, vc: VC) -> Counterexample:
    text = output.strip().split("\n", 1)[1] if "\n" in output.strip() else ""
    try:
        model = _Model(text)
    except ParseError as e:
        raise BackendError(f"cannot read model: {e}") from None
    sig = vc.signature
    carriers: dict[str, tuple] = {}
    for s in sig.sorts:
        if s == TIMER:
            continue
        els = model.universe.get(s) or [f"{s}!val!0"]
        carriers[s] = tuple(els)
    used = set()
    for _, h in vc.hyps:
        used |= symbols(h)
    used |= symbols(vc.goal)
    states = {False: {}, True: {}}
    top = 0
    for name, primed in sorted(used):
        if name in TIMER_SYMBOLS:
            continue
        key = name + ("'" if primed else "")
        is_rel = name in sig.relations
        arg_sorts = sig.relations[name] if is_rel else sig.functions[name][0]
        result = BOOL if is_rel else sig.functions[name][1]
        domain = list(itertools.product(*(carriers[a] for a in arg_sorts)))
        if key in model.defs:
            values = {args: model.call(key, args) for args in domain}
        else:
            default = False if is_rel else (0 if result == TIMER else carriers[result][0])
            values = {args: default for args in domain}
        if result == TIMER:
            values = {k: _from_int(v) for k, v in values.items()}
            top = max([top, *(v for v in values.values() if v != INF)])
        if is_rel:
            states[primed][name] = frozenset(k for k, v in values.items() if v)
        else:
            states[primed][name] = values
    carriers[TIMER] = tuple(range(top + 2)) + (INF,)
    pre = FiniteStructure(dict(carriers), states[False])
    post = FiniteStructure(dict(carriers), {**states[False], **states[True]}) if states[True] else None
    refutes = not eval_fo(vc.formula, pre, {}, post or pre)
    if not refutes:
        raise BackendError(f"model for {vc.id} does not refute the VC when re-evaluated")
    failing = []
    goal = vc.goal
    parts = goal.args if isinstance(goal, L.And) else (goal,)
    for i, p in enumerate(parts):
        if not eval_fo(p, pre, {}, post or pre):
            failing.append(L.to_sexpr(p)[:200])
    return Counterexample(vc.id, vc.kind, pre, post, tuple(failing))


def emit_all(vcs) -> dict[str, str]:
    return {vc.id: emit(vc) for vc in vcs}

