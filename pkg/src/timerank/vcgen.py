"""Verification conditions for an invariant-plus-ranking proof.

A proof of termination of the product system is accepted when

* every invariant conjunct holds initially and is preserved by a step,
* every reachable step reduces the closed ranking, and
* every side condition of the ranking (well-founded orders, finitely many
  non-minimal components) is discharged, either by a built-in argument or by
  a user-supplied finite over-approximation.

Conjuncts that mention only the original vocabulary are checked against the
original system and then assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import logic as L
from .frontend import Bundle, FiniteApprox, Hint, resolve_hint
from .logic import (
    TIMER,
    TIMER_LT,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Signature,
    Var,
    canonical_key,
    conj,
    disj,
    exists,
    forall,
    fresh_var,
    neg,
    prime,
    substitute,
    symbols,
    tuple_eq,
)
from .ranking import (
    FinNonMin,
    ImplicitRanking,
    RankContext,
    WellFounded,
    build,
    close,
    constructor_count,
    order_atom,
)
from .timers import INF, ZERO, timer_le, timer_lt, timer_pred


class PlanError(L.LogicError):
    """A proof obligation has no applicable discharge strategy."""


@dataclass(frozen=True)
class VC:
    id: str
    kind: str
    hyps: tuple  # (label, formula) pairs
    goal: Formula
    signature: Signature
    provenance: str = ""

    @property
    def formula(self) -> Formula:
        return Implies(conj(*(h for _, h in self.hyps)), self.goal)


@dataclass(frozen=True)
class Discharge:
    condition: object
    justification: str
    vcs: tuple = ()


@dataclass(frozen=True)
class DischargePlan:
    vcs: tuple
    discharges: tuple
    ranking: ImplicitRanking
    stats: dict = field(default_factory=dict)
    unresolved: tuple = ()
    warnings: tuple = ()


def _normalize(f: Formula) -> Formula:
    def step(g):
        if isinstance(g, Not) and isinstance(g.body, Not):
            return g.body.body
        if isinstance(g, L.And):
            return conj(*g.args) if g.args else g
        if isinstance(g, L.Or):
            return disj(*g.args) if g.args else g
        return g

    return L.map_formula(f, step)


def _uses_only(f: Formula, sig: Signature) -> bool:
    return all(sig.has_symbol(name) for name, _ in symbols(f))


def encoding_sanity() -> list[tuple[str, Formula]]:
    """Facts about the timer order that the integer encoding must validate."""
    a, b, c = (Var(n, TIMER) for n in "abc")
    le, lt = timer_le, timer_lt
    return [
        ("le-reflexive", Forall((a,), le(a, a))),
        ("le-antisymmetric", Forall((a, b), Implies(conj(le(a, b), le(b, a)), Eq(a, b)))),
        ("le-transitive", Forall((a, b, c), Implies(conj(le(a, b), le(b, c)), le(a, c)))),
        ("le-total", Forall((a, b), disj(le(a, b), le(b, a)))),
        ("zero-least", Forall((a,), le(ZERO, a))),
        ("inf-greatest", Forall((a,), le(a, INF))),
        ("lt-strict", Forall((a, b), L.iff(lt(a, b), conj(le(a, b), Not(Eq(a, b)))))),
        ("lt-irreflexive", Forall((a,), Not(lt(a, a)))),
        ("lt-transitive", Forall((a, b, c), Implies(conj(lt(a, b), lt(b, c)), lt(a, c)))),
        ("zero-below-inf", lt(ZERO, INF)),
        ("pred-decreases", Forall((a,), Implies(conj(lt(ZERO, a), lt(a, INF)), lt(timer_pred(a), a)))),
        (
            "pred-immediate",
            Forall((a, b), Implies(conj(lt(ZERO, a), lt(a, INF), lt(b, a)), le(b, timer_pred(a)))),
        ),
        ("pred-zero", Eq(timer_pred(ZERO), ZERO)),
        ("pred-inf", Eq(timer_pred(INF), INF)),
    ]


class Planner:
    def __init__(self, bundle: Bundle):
        if bundle.proof is None:
            raise PlanError("no proof given")
        self.bundle = bundle
        self.aug = bundle.augmented
        self.proof = bundle.proof
        self.sig = self.aug.signature
        self.orig = bundle.system
        self.vcs: list[VC] = []
        self.discharges: list[Discharge] = []
        self.unresolved: list[str] = []
        self.warnings: list[str] = []

    # hypotheses ------------------------------------------------------------
    def _inv(self, invariants) -> list[tuple[str, Formula]]:
        return [(f"invariant {i.name}", i.formula) for i in invariants]

    def _axioms(self, system, post=False) -> list[tuple[str, Formula]]:
        out = [("axiom", a) for a in system.axioms]
        if post:
            out += [("axiom'", prime(a, system.signature.rigid)) for a in system.axioms]
        return out

    def _step(self, system) -> list[tuple[str, Formula]]:
        return (
            self._axioms(system)
            + [("transition", t) for t in system.transitions]
            + [("axiom'", prime(a, system.signature.rigid)) for a in system.axioms]
        )

    def _add(self, vc: VC) -> str:
        self.vcs.append(vc)
        return vc.id

    # obligations -----------------------------------------------------------
    def invariants(self) -> None:
        plain = [i for i in self.proof.invariants if _uses_only(i.formula, self.orig.signature)]
        orig, prod = self.orig, self.aug.system
        for inv in self.proof.invariants:
            system = orig if inv in plain else prod
            hyps = self._inv(plain if inv in plain else self.proof.invariants)
            where = "original system" if inv in plain else "product system"
            self._add(
                VC(
                    f"init:{inv.name}",
                    "Init",
                    tuple(("init", i) for i in system.inits) + tuple(self._axioms(system)),
                    inv.formula,
                    system.signature,
                    f"invariant {inv.name} holds initially ({where})",
                )
            )
            self._add(
                VC(
                    f"consecution:{inv.name}",
                    "Consecution",
                    tuple(hyps) + tuple(self._step(system)),
                    prime(inv.formula, system.signature.rigid),
                    system.signature,
                    f"invariant {inv.name} is preserved ({where})",
                )
            )

    def decrease(self, ranking: ImplicitRanking) -> None:
        prod = self.aug.system
        self._add(
            VC(
                "rank:decrease",
                "RankDecrease",
                tuple(self._inv(self.proof.invariants)) + tuple(self._step(prod)),
                ranking.reduced,
                self.sig,
                "every step strictly reduces the ranking",
            )
        )

    def sanity(self) -> None:
        for name, f in encoding_sanity():
            self._add(VC(f"sanity:{name}", "EncodingSanity", (), f, self.sig, f"timer encoding: {name}"))

    def condition(self, c) -> None:
        if isinstance(c, WellFounded):
            self._well_founded(c)
        else:
            self._finite(c)

    def _well_founded(self, c: WellFounded) -> None:
        if c.sort == TIMER and c.order == TIMER_LT:
            self.discharges.append(Discharge(c, "TimerSemantics"))
            return
        if isinstance(c.order, str) and c.order in self.sig.well_founded:
            self.discharges.append(Discharge(c, "DeclaredWellFounded"))
            return
        if c.sort in self.sig.finite:
            y1, y2, y3 = (Var(f"o{i}", c.sort) for i in (1, 2, 3))
            rel = lambda a, b: order_atom(c.order, a, b, self.sig.rigid)  # noqa: E731
            goal = conj(
                Forall((y1,), Not(rel(y1, y1))),
                Forall((y1, y2, y3), Implies(conj(rel(y1, y2), rel(y2, y3)), rel(y1, y3))),
            )
            vid = f"order:{canonical_key(goal).digest()[:8]}"
            if vid not in {v.id for v in self.vcs}:
                self._add(
                    VC(
                        vid,
                        "OrderStrictness",
                        tuple(self._inv(self.proof.invariants)) + tuple(self._axioms(self.aug.system)),
                        goal,
                        self.sig,
                        f"{c.describe()}: a strict partial order on a finite sort",
                    )
                )
            self.discharges.append(Discharge(c, "FiniteSortPartialOrder", (vid,)))
            return
        self.unresolved.append(c.describe())

    def _finite(self, c: FinNonMin) -> None:
        if all(v.sort in self.sig.finite for v in c.agg):
            self.discharges.append(Discharge(c, "FiniteSort"))
            return
        target = _normalize(neg(c.minimal))
        fas = self.proof.approximations
        # an exact target wins; otherwise take the next unused approximation
        # over the same sorts (the subset VC is stated against the real set)
        order = [i for i, fa in enumerate(fas) if self._matches(fa, c, target)]
        order += [i for i, fa in enumerate(fas) if i not in self._reserved and self._fits(fa, c)]
        for i in order:
            if i in self._used:
                continue
            self._used.add(i)
            vids = self._approx_vcs(i, fas[i], c)
            self.discharges.append(Discharge(c, "FiniteApprox", vids))
            return
        self.unresolved.append(
            f"{c.describe()}: no finite-approx with target {L.to_sexpr(target)}"
        )

    def _rename(self, fa: FiniteApprox, c: FinNonMin, f: Formula) -> Formula:
        return substitute(f, {**dict(zip(fa.agg, c.agg)), **dict(zip(fa.params, c.params))})

    @staticmethod
    def _fits(fa: FiniteApprox, c: FinNonMin) -> bool:
        return [v.sort for v in fa.agg] == [v.sort for v in c.agg] and [
            v.sort for v in fa.params
        ] == [v.sort for v in c.params]

    def _matches(self, fa: FiniteApprox, c: FinNonMin, target: Formula) -> bool:
        if not self._fits(fa, c):
            return False
        mine = _normalize(self._rename(fa, c, fa.target))
        return canonical_key(mine) == canonical_key(target)

    def _approx_vcs(self, i: int, fa: FiniteApprox, c: FinNonMin) -> tuple:
        prod = self.aug.system
        inv = tuple(self._inv(self.proof.invariants))
        beta = self._rename(fa, c, fa.approx)
        ys, zs = c.agg, c.params
        avoid = L.all_var_names(beta) | {v.name for v in ys + zs}
        witnesses = []
        for j in range(1, fa.m + 1):
            block = []
            for v in ys:
                w = fresh_var(f"{v.name}{j}", v.sort, avoid)
                avoid.add(w.name)
                block.append(w)
            witnesses.append(tuple(block))
        flat = tuple(w for block in witnesses for w in block)
        among = disj(*(tuple_eq(ys, block) for block in witnesses))
        subset = forall(ys + zs, Implies(_normalize(neg(c.minimal)), beta))
        at_init = forall(zs, exists(flat, forall(ys, Implies(beta, among))))
        post_beta = prime(beta, self.sig.rigid)
        step = forall(zs, exists(flat, forall(ys, Implies(post_beta, disj(among, beta)))))
        base = f"finapprox:{i + 1}"
        what = c.describe()
        self._add(
            VC(f"{base}:subset", "FinApproxSubset", inv + tuple(self._axioms(prod)), subset, self.sig,
               f"approximation {i + 1} covers the non-minimal set of {what}")
        )
        self._add(
            VC(f"{base}:init", "FinApproxInit",
               tuple(("init", x) for x in prod.inits) + inv + tuple(self._axioms(prod)),
               at_init, self.sig, f"approximation {i + 1} has at most {fa.m} element(s) initially")
        )
        self._add(
            VC(f"{base}:step", "FinApproxStep", inv + tuple(self._step(prod)), step, self.sig,
               f"approximation {i + 1} gains at most {fa.m} element(s) per step")
        )
        return (f"{base}:subset", f"{base}:init", f"{base}:step")

    def hints(self) -> None:
        by_id = {v.id: n for n, v in enumerate(self.vcs)}
        for h in self.proof.hints:
            if h.vc not in by_id:
                raise PlanError(f"hint targets unknown VC {h.vc}")
            n = by_id[h.vc]
            vc = self.vcs[n]
            self.vcs[n] = VC(vc.id, vc.kind, vc.hyps, apply_hint(vc.goal, h, vc.signature, self.aug),
                             vc.signature, vc.provenance + " (with hint)")

    def run(self) -> DischargePlan:
        ctx = RankContext(self.sig)
        ranking = close(build(self.proof.ranking, ctx))
        self._used: set[int] = set()
        # approximations whose target names an obligation exactly are reserved for it
        self._reserved = {
            i
            for c in ranking.conditions
            if isinstance(c, FinNonMin)
            for i, fa in enumerate(self.proof.approximations)
            if self._matches(fa, c, _normalize(neg(c.minimal)))
        }
        self.invariants()
        self.decrease(ranking)
        for c in ranking.conditions:
            self.condition(c)
        unused = [i + 1 for i in range(len(self.proof.approximations)) if i not in self._used]
        if unused:
            self.warnings.append(
                "finite-approx " + ", ".join(map(str, unused)) + " matches no ranking obligation"
            )
        self.sanity()
        self.hints()
        stats = {
            "constructors": constructor_count(self.proof.ranking),
            "finite_approximations": len(self.proof.approximations),
            "invariant_conjuncts": len(self.proof.invariants),
            "timers": len(self.aug.entries),
        }
        return DischargePlan(
            tuple(self.vcs), tuple(self.discharges), ranking, stats,
            tuple(self.unresolved), tuple(self.warnings)
        )


def plan(bundle: Bundle) -> DischargePlan:
    return Planner(bundle).run()


def apply_hint(goal: Formula, hint: Hint, sig: Signature, aug=None) -> Formula:
    """Instantiate the first positive existential block that fits the witnesses."""
    n = len(hint.source)
    done = False

    def go(f: Formula, positive: bool, env: dict) -> Formula:
        nonlocal done
        if done:
            return f
        if isinstance(f, Exists) and positive and len(f.vars) == n:
            terms = resolve_hint(hint, sig, env, aug)
            for v, t in zip(f.vars, terms):
                if L.term_sort(t, sig) != v.sort:
                    raise PlanError(f"hint witness {t} has the wrong sort for {v.name}")
            done = True
            return substitute(f.body, dict(zip(f.vars, terms)))
        if isinstance(f, (Forall, Exists)):
            inner = {**env, **{v.name: v for v in f.vars}}
            return type(f)(f.vars, go(f.body, positive, inner))
        if isinstance(f, Not):
            return Not(go(f.body, not positive, env))
        if isinstance(f, Implies):
            return Implies(go(f.lhs, not positive, env), go(f.rhs, positive, env))
        if isinstance(f, (L.And, L.Or)):
            return type(f)(tuple(go(a, positive, env) for a in f.args))
        return f

    out = go(goal, True, {})
    if not done:
        raise PlanError(f"hint for {hint.vc}: no existential block with {n} variable(s)")
    return out
