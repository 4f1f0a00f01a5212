"""Seeded randomized suites over the explicit semantics.

Every sample draws from its own generator seeded with ``f"{seed}:{index}"``,
so a suite can be sharded across processes and any single failure replayed.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .. import logic as L
from .. import ranking as R
from ..logic import TIMER, App, Rel, Signature, Var
from ..ranking import RankContext
from ..systems import TransitionSystem
from ..timers import augment
from .lasso import check_reduction, random_lasso, random_structure
from .materialize import materialize, verify_ranking
from .structures import INF, FiniteStructure


def toy_signature() -> Signature:
    sig = Signature().with_sort("A")
    sig = sig.with_relation("p", ("A",)).with_relation("q", ("A", "A")).with_relation("r", ())
    return sig.with_function("c", (), "A").with_function("f", ("A",), "A")


def random_formula(rng: random.Random, depth: int, bound: tuple = (), fresh: list | None = None):
    """A random FO-LTL formula over :func:`toy_signature` whose free variables
    are among ``bound``."""
    fresh = fresh if fresh is not None else [0]
    terms = [App("c")] + list(bound)

    def term():
        t = rng.choice(terms)
        return App("f", (t,)) if rng.random() < 0.2 else t

    if depth == 0 or rng.random() < 0.15:
        kind = rng.randrange(4)
        if kind == 0:
            return Rel("p", (term(),))
        if kind == 1:
            return Rel("q", (term(), term()))
        if kind == 2:
            return Rel("r")
        return L.Eq(term(), term())
    op = rng.choice(["not", "and", "or", "G", "F", "X", "U", "forall", "exists", "G", "F", "U"])
    sub = lambda: random_formula(rng, depth - 1, bound, fresh)  # noqa: E731
    if op == "not":
        return L.Not(sub())
    if op == "and":
        return L.And((sub(), sub()))
    if op == "or":
        return L.Or((sub(), sub()))
    if op == "G":
        return L.Globally(sub())
    if op == "F":
        return L.Eventually(sub())
    if op == "X":
        return L.Next(sub())
    if op == "U":
        return L.Until(sub(), sub())
    fresh[0] += 1
    v = Var(f"v{fresh[0]}", "A")
    body = random_formula(rng, depth - 1, bound + (v,), fresh)
    return (L.Forall if op == "forall" else L.Exists)((v,), body)


@dataclass
class SuiteResult:
    name: str
    seed: int
    samples: int = 0
    failures: int = 0
    first_failure: dict | None = None
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failures == 0 and self.samples > 0

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "seed": self.seed,
            "samples": self.samples,
            "failures": self.failures,
            "passed": self.ok,
            "first_failure": self.first_failure,
            "seconds": round(self.seconds, 3),
            **self.extra,
        }


def reduction_sample(seed: int, index: int, max_carrier=3, max_stem=4, max_loop=4, depth=3):
    """One random formula and lasso; returns a failure description or None."""
    rng = random.Random(f"{seed}:{index}")
    phi = random_formula(rng, rng.randint(1, depth))
    sig = toy_signature()
    aug = augment(TransitionSystem(sig), phi)
    carriers = {"A": tuple(range(rng.randint(1, max_carrier)))}
    lasso = random_lasso(aug.signature, carriers, rng, max_stem, max_loop)
    report = check_reduction(lasso, aug)
    if report.ok:
        return None
    return {
        "index": index,
        "formula": L.to_sexpr(phi),
        "stem": lasso.loop,
        "loop": len(lasso) - lasso.loop,
        "violation": [str(x) for x in report.first],
    }


def _reduction_shard(args):
    seed, lo, hi, bounds = args
    return [(i, reduction_sample(seed, i, *bounds)) for i in range(lo, hi)]


def _shards(count: int, jobs: int) -> list[tuple[int, int]]:
    size = max(1, -(-count // max(1, jobs * 4)))
    return [(lo, min(count, lo + size)) for lo in range(0, count, size)]


def reduction_suite(
    seed: int = 0,
    count: int = 1000,
    max_carrier: int = 3,
    max_stem: int = 4,
    max_loop: int = 4,
    depth: int = 3,
    jobs: int = 1,
) -> SuiteResult:
    start = time.monotonic()
    bounds = (max_carrier, max_stem, max_loop, depth)
    work = [(seed, lo, hi, bounds) for lo, hi in _shards(count, jobs)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = [r for shard in pool.map(_reduction_shard, work) for r in shard]
    else:
        rows = [r for w in work for r in _reduction_shard(w)]
    result = SuiteResult("reduction", seed, samples=len(rows))
    for _, failure in sorted(rows, key=lambda r: r[0]):
        if failure is not None:
            result.failures += 1
            result.first_failure = result.first_failure or failure
    result.seconds = time.monotonic() - start
    return result


# -- ranking constructors --------------------------------------------------------


def ranking_signature() -> Signature:
    sig = Signature().with_sort("A").with_timers()
    sig = sig.with_relation("p", ("A",)).with_relation("q", ("A", "A"))
    sig = sig.with_relation("lt", ("A", "A"), rigid=True, well_founded=True)
    sig = sig.with_function("c", (), "A").with_function("f", ("A",), "A")
    return sig.with_function("tm", ("A",), TIMER)


def constructor_examples() -> dict:
    """One ranking per constructor over :func:`ranking_signature`."""
    x, y = Var("x", "A"), Var("y", "A")
    c = App("c")
    p_c = Rel("p", (c,))
    return {
        "Bin": R.Bin(p_c),
        "Pos": R.Pos(App("f", (c,)), "lt", "A"),
        "Cond": R.Cond(R.Pos(c, "lt", "A"), Rel("q", (c, c))),
        "PW": R.PW((R.Bin(p_c), R.Pos(c, "lt", "A"))),
        "Lex": R.Lex((R.Bin(p_c), R.Pos(c, "lt", "A"), R.Bin(Rel("q", (c, c))))),
        "DomPW": R.DomPW(R.Bin(Rel("q", (x, c))), (x,)),
        "DomLex": R.DomLex(R.Cond(R.Pos(App("f", (y,)), "lt", "A"), Rel("p", (y,))), y, "lt"),
        "DomPerm": R.DomPerm(R.Bin(Rel("p", (y,))), (y,), 1),
        "TimerRank": R.TimerRank(Rel("p", (x,)), App("tm", (x,)), Rel("q", (x, x)), (x,)),
    }


def sample_pairs(sig: Signature, rng: random.Random, count: int, size: int = 3, timer_bound: int = 2):
    """State pairs over one carrier that agree on the rigid symbols; ``lt`` is
    a random strict partial order."""
    carriers = {"A": tuple(range(size)), TIMER: tuple(range(timer_bound + 1)) + (INF,)}
    out = []
    for _ in range(count):
        s = random_structure(sig, carriers, rng, orders=("lt",))
        keep = FiniteStructure(carriers, {n: s.interp[n] for n in sig.rigid if n in s.interp})
        out.append((s, random_structure(sig, carriers, rng, fixed=keep)))
    return out


def _constructor_job(args):
    name, expr, seed, count, size = args
    sig = ranking_signature()
    rng = random.Random(f"{seed}:{name}")
    start = time.monotonic()
    report = verify_ranking(expr, RankContext(sig), sample_pairs(sig, rng, count, size), limit=1)
    return name, report, time.monotonic() - start


def constructor_suite(seed: int = 0, pairs: int = 10_000, size: int = 3, jobs: int = 1) -> list[SuiteResult]:
    work = [(n, e, seed, pairs, size) for n, e in constructor_examples().items()]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            reports = list(pool.map(_constructor_job, work))
    else:
        reports = [_constructor_job(w) for w in work]
    out = []
    for name, report, seconds in reports:
        res = SuiteResult(
            f"constructor {name}",
            seed,
            samples=report.checked,
            failures=len(report.violations),
            seconds=seconds,
            extra={"reduced_hits": report.reduced_hits, "conserved_hits": report.conserved_hits},
        )
        if report.violations:
            kind, *rest = report.violations[0]
            res.first_failure = {"kind": kind, "values": [repr(v) for v in rest[-2:]]}
        out.append(res)
    return out


def materialized_values(name: str, seed: int = 0, count: int = 200, size: int = 3):
    """Values of one constructor example on sampled states, for order checks."""
    sig = ranking_signature()
    expr = constructor_examples()[name]
    node = materialize(expr, bounded_perm=False)
    rng = random.Random(f"{seed}:values:{name}")
    pairs = sample_pairs(sig, rng, count, size)
    base = pairs[0][0]
    same = [FiniteStructure(t.carriers, {**t.interp, "lt": base.interp["lt"]}) for s, t in pairs]
    return node, base, [node.value(s, {}) for s in [base, *same]]
