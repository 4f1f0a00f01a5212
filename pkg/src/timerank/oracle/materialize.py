"""Explicit rankings on finite structures.

A ranking expression is turned into a function from a structure and an
assignment of its parameters to a value, together with the order on those
values.  The implicit formulas produced by :func:`timerank.ranking.build` are
then checked against the explicit order: a reduced pair must strictly
decrease, a conserved pair must not increase, and the minimality formula must
pick out exactly the minimal values.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .. import ranking as R
from ..logic import TIMER, TIMER_LT, Var
from ..ranking import ImplicitRanking, RankContext, post_vars
from .structures import FiniteStructure, assignments, eval_fo, eval_term

INSTANCE_CAP = 10**5


class InstanceCapExceeded(ValueError):
    pass


def order_holds(order, a, b, s: FiniteStructure) -> bool:
    if isinstance(order, str):
        if order == TIMER_LT:
            return a < b
        return (a, b) in s.interp[order]
    return eval_fo(order.body, s, {order.left: a, order.right: b})


class Node:
    """A materialised ranking: ``value`` computes, ``lt`` compares."""

    def value(self, s: FiniteStructure, env: dict):
        raise NotImplementedError

    def lt(self, a, b, s: FiniteStructure) -> bool:
        raise NotImplementedError

    def le(self, a, b, s: FiniteStructure) -> bool:
        return a == b or self.lt(a, b, s)

    def minimal(self, a, s: FiniteStructure) -> bool:
        raise NotImplementedError


@dataclass
class BinNode(Node):
    cond: object

    def value(self, s, env):
        return int(eval_fo(self.cond, s, env))

    def lt(self, a, b, s):
        return a < b

    def minimal(self, a, s):
        return a == 0


@dataclass
class PosNode(Node):
    term: object
    order: object
    sort: str

    def value(self, s, env):
        return eval_term(self.term, s, env)

    def lt(self, a, b, s):
        return order_holds(self.order, a, b, s)

    def minimal(self, a, s):
        return not any(order_holds(self.order, e, a, s) for e in s.carrier(self.sort))


@dataclass
class CondNode(Node):
    """``None`` is the bottom element added below the child's range."""

    child: Node
    cond: object

    def value(self, s, env):
        return self.child.value(s, env) if eval_fo(self.cond, s, env) else None

    def lt(self, a, b, s):
        if b is None:
            return False
        return a is None or self.child.lt(a, b, s)

    def minimal(self, a, s):
        return a is None


@dataclass
class PWNode(Node):
    children: list

    def value(self, s, env):
        return tuple(c.value(s, env) for c in self.children)

    def le(self, a, b, s):
        return all(c.le(x, y, s) for c, x, y in zip(self.children, a, b))

    def lt(self, a, b, s):
        return self.le(a, b, s) and any(c.lt(x, y, s) for c, x, y in zip(self.children, a, b))

    def minimal(self, a, s):
        return all(c.minimal(x, s) for c, x in zip(self.children, a))


@dataclass
class LexNode(Node):
    """Earlier components dominate; a component may decrease only while all
    earlier ones do not increase."""

    children: list

    def value(self, s, env):
        return tuple(c.value(s, env) for c in self.children)

    def lt(self, a, b, s):
        for c, x, y in zip(self.children, a, b):
            if c.lt(x, y, s):
                return True
            if not c.le(x, y, s):
                return False
        return False

    def minimal(self, a, s):
        return all(c.minimal(x, s) for c, x in zip(self.children, a))


def _domain(vs, s: FiniteStructure) -> list[tuple]:
    size = 1
    for v in vs:
        size *= len(s.carrier(v.sort))
    if size > INSTANCE_CAP:
        raise InstanceCapExceeded(f"{size} instances exceed the cap of {INSTANCE_CAP}")
    return [tuple(a[v] for v in vs) for a in assignments(vs, s)]


@dataclass
class DomPWNode(Node):
    child: Node
    vars: tuple

    def value(self, s, env):
        return tuple(
            self.child.value(s, {**env, **dict(zip(self.vars, point))})
            for point in _domain(self.vars, s)
        )

    def le(self, a, b, s):
        return all(self.child.le(x, y, s) for x, y in zip(a, b))

    def lt(self, a, b, s):
        return self.le(a, b, s) and any(self.child.lt(x, y, s) for x, y in zip(a, b))

    def minimal(self, a, s):
        return all(self.child.minimal(x, s) for x in a)


@dataclass
class DomLexNode(Node):
    """Functions over one variable, compared so that a coordinate may grow
    only if some coordinate above it in the order strictly shrinks."""

    child: Node
    var: Var
    order: object

    def value(self, s, env):
        return tuple(self.child.value(s, {**env, self.var: e}) for e in s.carrier(self.var.sort))

    def lt(self, a, b, s):
        elems = s.carrier(self.var.sort)
        down = [self.child.lt(x, y, s) for x, y in zip(a, b)]
        if not any(down):
            return False
        for i, e in enumerate(elems):
            if self.child.le(a[i], b[i], s):
                continue
            if not any(down[j] and order_holds(self.order, e, e0, s) for j, e0 in enumerate(elems)):
                return False
        return True

    def minimal(self, a, s):
        return all(self.child.minimal(x, s) for x in a)


def bounded_permutations(n: int, k: int):
    """Permutations of ``range(n)`` that are products of at most ``k``
    transpositions with pairwise distinct endpoints."""
    seen = set()

    def extend(perm, used, left, start):
        key = tuple(perm)
        if key not in seen:
            seen.add(key)
            yield key
        if left == 0:
            return
        for i in range(start, n):
            if i in used:
                continue
            for j in range(i + 1, n):
                if j in used:
                    continue
                nxt = list(perm)
                nxt[i], nxt[j] = nxt[j], nxt[i]
                yield from extend(nxt, used | {i, j}, left - 1, i + 1)

    yield from extend(list(range(n)), frozenset(), k, 0)


@dataclass
class DomPermNode(Node):
    """Functions compared pointwise up to a permutation of the domain.

    With ``bounded`` the permutations are those the implicit formulas can
    express: at most ``k`` disjoint swaps.  Otherwise every bijection is
    allowed, which is the transitive closure used for order checks.
    """

    child: Node
    vars: tuple
    k: int
    bounded: bool = True

    def value(self, s, env):
        return tuple(
            self.child.value(s, {**env, **dict(zip(self.vars, point))})
            for point in _domain(self.vars, s)
        )

    def _perms(self, n: int):
        if self.bounded:
            return bounded_permutations(n, self.k)
        return itertools.permutations(range(n))

    def _search(self, a, b, s, strict):
        n = len(b)
        for sigma in self._perms(n):
            if all(self.child.le(a[sigma[i]], b[i], s) for i in range(n)):
                if not strict or any(self.child.lt(a[sigma[i]], b[i], s) for i in range(n)):
                    return True
        return False

    def lt(self, a, b, s):
        return self._search(a, b, s, True)

    def le(self, a, b, s):
        return self._search(a, b, s, False)

    def minimal(self, a, s):
        return all(self.child.minimal(x, s) for x in a)


def materialize(expr, bounded_perm: bool = True) -> Node:
    """The explicit ranking of ``expr``; see :class:`DomPermNode` for
    ``bounded_perm``."""
    rec = lambda e: materialize(e, bounded_perm)  # noqa: E731
    if isinstance(expr, R.Bin):
        return BinNode(expr.cond)
    if isinstance(expr, R.Pos):
        return PosNode(expr.term, expr.order, expr.sort)
    if isinstance(expr, R.Cond):
        return CondNode(rec(expr.child), expr.cond)
    if isinstance(expr, R.PW):
        return PWNode([rec(c) for c in expr.children])
    if isinstance(expr, R.Lex):
        return LexNode([rec(c) for c in expr.children])
    if isinstance(expr, R.DomPW):
        return DomPWNode(rec(expr.child), expr.vars)
    if isinstance(expr, R.DomLex):
        return DomLexNode(rec(expr.child), expr.var, expr.order)
    if isinstance(expr, R.DomPerm):
        return DomPermNode(rec(expr.child), expr.vars, expr.k, bounded_perm)
    if isinstance(expr, R.TimerRank):
        pos = PosNode(expr.timer, TIMER_LT, TIMER)
        return DomPWNode(CondNode(pos, expr.cond), expr.vars)
    raise R.RankingError(f"unknown ranking constructor {expr!r}")


@dataclass
class RankingReport:
    checked: int = 0
    reduced_hits: int = 0
    conserved_hits: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_ranking(
    expr,
    ctx: RankContext,
    pairs,
    scope: tuple = (),
    implicit: ImplicitRanking | None = None,
    limit: int | None = None,
) -> RankingReport:
    """Compare the implicit formulas with the explicit order on state pairs.

    Every assignment of the pre- and post-state parameters is tried.  Pass
    ``implicit`` to check formulas other than the ones ``build`` produces.
    """
    implicit = implicit or R.build(expr, ctx, scope)
    node = materialize(expr)
    post = post_vars(scope)
    report = RankingReport()
    for s, t in pairs:
        for pre_env in assignments(scope, s):
            high = node.value(s, pre_env)
            mu = eval_fo(implicit.minimal, s, pre_env)
            if mu != node.minimal(high, s):
                report.violations.append(("minimal", s, pre_env, high))
            for post_env in assignments(scope, t):
                low = node.value(t, post_env)
                env = {**pre_env, **{p: post_env[v] for v, p in zip(scope, post)}}
                report.checked += 1
                if eval_fo(implicit.reduced, s, env, post=t):
                    report.reduced_hits += 1
                    if not node.lt(low, high, s):
                        report.violations.append(("reduced", s, t, env, high, low))
                if eval_fo(implicit.conserved, s, env, post=t):
                    report.conserved_hits += 1
                    if not node.le(low, high, s):
                        report.violations.append(("conserved", s, t, env, high, low))
                if limit is not None and len(report.violations) >= limit:
                    return report
    return report


def check_strict_order(node: Node, values, s: FiniteStructure) -> list:
    """Irreflexivity and transitivity of ``node.lt`` on the given values."""
    values = list(dict.fromkeys(values))
    bad = [("reflexive", a) for a in values if node.lt(a, a, s)]
    below = {i: [j for j, b in enumerate(values) if node.lt(b, values[i], s)] for i in range(len(values))}
    for i, lows in below.items():
        for j in lows:
            for k in below[j]:
                if k not in lows:
                    bad.append(("intransitive", values[k], values[j], values[i]))
    return bad


def random_strict_order(elems, rng: random.Random, density: float = 0.5) -> frozenset:
    """A random strict partial order: edges respect a shuffled ranking and
    are closed under transitivity."""
    elems = list(elems)
    rng.shuffle(elems)
    edges = {
        (elems[i], elems[j])
        for i in range(len(elems))
        for j in range(i + 1, len(elems))
        if rng.random() < density
    }
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in itertools.product(list(edges), repeat=2):
            if b == c and (a, d) not in edges:
                edges.add((a, d))
                changed = True
    return frozenset(edges)
