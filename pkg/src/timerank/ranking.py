"""Implicit rankings and their constructors.

An implicit ranking over parameters ``x̄`` is a triple of formulas: ``reduced``
(two-state; the rank strictly dropped from the pre-state to the post-state),
``conserved`` (two-state; the rank did not grow) and ``minimal`` (one-state;
the rank is at a minimum), together with side conditions that must hold for
the encoded order to be well-founded.  Post-state parameters are copies of
``x̄`` with a trailing quote.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .logic import (
    TIMER,
    TIMER_LT,
    Eq,
    Formula,
    Implies,
    LogicError,
    Not,
    Rel,
    Signature,
    Term,
    Var,
    all_var_names,
    canonical_key,
    conj,
    disj,
    exists,
    forall,
    free_vars,
    fresh_var,
    implies,
    iff,
    neg,
    prime,
    substitute,
    symbols,
    tuple_eq,
)


class RankingError(LogicError):
    pass


# -- orders -------------------------------------------------------------------


@dataclass(frozen=True)
class OrderLambda:
    """A binary relation given by a formula over two variables."""

    left: Var
    right: Var
    body: Formula

    def __repr__(self) -> str:
        return f"(lambda (({self.left.name} {self.left.sort}) ({self.right.name} {self.right.sort})) {self.body!r})"


Order = str | OrderLambda


def order_key(order: Order) -> str:
    if isinstance(order, str):
        return order
    return canonical_key(
        substitute(order.body, {order.left: Var("#l", order.left.sort), order.right: Var("#r", order.right.sort)})
    ).text


def order_atom(order: Order, a: Term, b: Term, rigid: frozenset, primed: bool = False) -> Formula:
    if isinstance(order, str):
        return Rel(order, (a, b), primed and order not in rigid)
    body = prime(order.body, rigid) if primed else order.body
    return substitute(body, {order.left: a, order.right: b})


def order_is_rigid(order: Order, rigid: frozenset) -> bool:
    if isinstance(order, str):
        return order in rigid
    return all(name in rigid for name, _ in symbols(order.body))


# -- side conditions ------------------------------------------------------------


@dataclass(frozen=True)
class WellFounded:
    order: Order
    sort: str

    def key(self) -> tuple:
        return ("wf", order_key(self.order), self.sort)

    def describe(self) -> str:
        return f"WellFounded({self.order!r} on {self.sort})"


@dataclass(frozen=True)
class FinNonMin:
    """The set of ``agg`` tuples whose component is not minimal is finite,
    for every value of ``params``."""

    minimal: Formula
    agg: tuple
    params: tuple

    def key(self) -> tuple:
        closed = forall(self.agg + self.params, self.minimal)
        return ("fin", canonical_key(closed).text, len(self.agg))

    def describe(self) -> str:
        agg = " ".join(f"{v.name}:{v.sort}" for v in self.agg)
        return f"FinNonMin[{agg}](not {self.minimal!r})"


Condition = WellFounded | FinNonMin


def _merge(*groups) -> tuple:
    out: dict = {}
    for g in groups:
        for c in g:
            out.setdefault(c.key(), c)
    return tuple(out.values())


# -- implicit rankings ----------------------------------------------------------


@dataclass(frozen=True)
class ImplicitRanking:
    params: tuple
    reduced: Formula
    conserved: Formula
    minimal: Formula
    conditions: tuple = ()
    label: str = ""
    children: tuple = field(default=(), repr=False)

    @property
    def post_params(self) -> tuple:
        return post_vars(self.params)

    def explain(self, indent: int = 0) -> list[str]:
        lines = ["  " * indent + self.label]
        for c in self.children:
            lines.extend(c.explain(indent + 1))
        return lines


def post_vars(vs) -> tuple:
    return tuple(Var(v.name + "'", v.sort) for v in vs)


@dataclass(frozen=True)
class RankContext:
    signature: Signature

    @property
    def rigid(self) -> frozenset:
        return self.signature.rigid


def _post(f, params, ctx: RankContext):
    """Read ``f`` in the post-state with post-state parameters."""
    return substitute(prime(f, ctx.rigid), dict(zip(params, post_vars(params))))


def _avoid(*nodes) -> set[str]:
    names: set[str] = set()
    for n in nodes:
        if isinstance(n, (tuple, list)):
            names |= {v.name for v in n}
        else:
            names |= all_var_names(n)
    return names


def psi_immut(order: Order, sort: str, ctx: RankContext, avoid=()) -> Formula:
    """The order is unchanged by the step and is a strict partial order."""
    if isinstance(order, str) and order == TIMER_LT:
        return conj()
    taken = set(avoid)
    y1 = fresh_var("o1", sort, taken)
    y2 = fresh_var("o2", sort, taken | {y1.name})
    y3 = fresh_var("o3", sort, taken | {y1.name, y2.name})
    rel = lambda a, b, p=False: order_atom(order, a, b, ctx.rigid, p)  # noqa: E731
    parts = []
    if not order_is_rigid(order, ctx.rigid):
        parts.append(forall((y1, y2), iff(rel(y1, y2, True), rel(y1, y2))))
    parts.append(forall((y1,), Not(rel(y1, y1))))
    parts.append(
        forall((y1, y2, y3), Implies(conj(rel(y1, y2), rel(y2, y3)), rel(y1, y3)))
    )
    return conj(*parts)


def rank_bin(alpha: Formula, params: tuple, ctx: RankContext) -> ImplicitRanking:
    """Two values: ``alpha`` holds (high) or not (low)."""
    post = _post(alpha, params, ctx)
    return ImplicitRanking(
        params,
        conj(alpha, neg(post)),
        implies(neg(alpha), neg(post)),
        neg(alpha),
        (),
        f"Bin {alpha!r}",
    )


def rank_pos(term: Term, order: Order, sort: str, params: tuple, ctx: RankContext) -> ImplicitRanking:
    """The position of ``term`` in a well-founded order."""
    post = _post(term, params, ctx)
    immut = psi_immut(order, sort, ctx, _avoid(params, post_vars(params)))
    y = fresh_var("lo", sort, _avoid(params, post_vars(params)))
    rel = lambda a, b: order_atom(order, a, b, ctx.rigid)  # noqa: E731
    post_rel = order_atom(order, post, term, ctx.rigid, False)
    return ImplicitRanking(
        params,
        conj(immut, post_rel),
        conj(immut, disj(post_rel, Eq(post, term))),
        forall((y,), Not(rel(y, term))),
        (WellFounded(order, sort),),
        f"Pos {term!r} by {order!r}",
    )


def rank_cond(child: ImplicitRanking, alpha: Formula, ctx: RankContext) -> ImplicitRanking:
    """``child``'s value while ``alpha`` holds, below everything otherwise."""
    params = child.params
    post = _post(alpha, params, ctx)
    return ImplicitRanking(
        params,
        disj(conj(alpha, neg(post)), conj(alpha, post, child.reduced)),
        disj(neg(post), conj(alpha, post, child.conserved)),
        neg(alpha),
        child.conditions,
        f"Cond {alpha!r}",
        (child,),
    )


def _same_params(kids) -> tuple:
    if not kids:
        raise RankingError("constructor needs at least one component")
    params = kids[0].params
    for k in kids[1:]:
        if k.params != params:
            raise RankingError("components must share their parameters")
    return params


def rank_pw(kids: list[ImplicitRanking]) -> ImplicitRanking:
    """Pointwise product of components."""
    params = _same_params(kids)
    conserved = conj(*(k.conserved for k in kids))
    return ImplicitRanking(
        params,
        conj(conserved, disj(*(k.reduced for k in kids))),
        conserved,
        conj(*(k.minimal for k in kids)),
        _merge(*(k.conditions for k in kids)),
        "PW",
        tuple(kids),
    )


def rank_lex(kids: list[ImplicitRanking]) -> ImplicitRanking:
    """Lexicographic product, most significant component first."""
    params = _same_params(kids)
    reduced = disj(
        *(conj(k.reduced, *(j.conserved for j in kids[:i])) for i, k in enumerate(kids))
    )
    return ImplicitRanking(
        params,
        reduced,
        disj(reduced, conj(*(k.conserved for k in kids))),
        conj(*(k.minimal for k in kids)),
        _merge(*(k.conditions for k in kids)),
        "Lex",
        tuple(kids),
    )


def _split(child: ImplicitRanking, ys: tuple) -> tuple:
    n = len(ys)
    if child.params[:n] != tuple(ys):
        raise RankingError("aggregated variables must be the leading parameters")
    return child.params[n:]


def _on_diagonal(f: Formula, ys: tuple, targets: tuple, post_targets: tuple) -> Formula:
    return substitute(f, {**dict(zip(ys, targets)), **dict(zip(post_vars(ys), post_targets))})


def rank_dom_pw(child: ImplicitRanking, ys: tuple) -> ImplicitRanking:
    """Pointwise over every value of ``ys``."""
    params = _split(child, ys)
    conserved = forall(ys, _on_diagonal(child.conserved, ys, ys, ys))
    reduced = conj(conserved, exists(ys, _on_diagonal(child.reduced, ys, ys, ys)))
    extra = (FinNonMin(child.minimal, tuple(ys), params),) if ys else ()
    return ImplicitRanking(
        params,
        reduced,
        conserved,
        forall(ys, child.minimal),
        _merge(child.conditions, extra),
        "DomPW " + " ".join(f"{v.name}:{v.sort}" for v in ys),
        (child,),
    )


def rank_dom_lex(child: ImplicitRanking, y: Var, order: Order, ctx: RankContext) -> ImplicitRanking:
    """Reverse-lexicographic over ``y``: larger values of ``y`` weigh more."""
    params = _split(child, (y,))
    avoid = _avoid(child.reduced, child.conserved, child.params, post_vars(child.params))
    y0 = fresh_var(y.name + "0", y.sort, avoid)
    immut = psi_immut(order, y.sort, ctx, avoid | {y0.name})
    dominated = exists(
        (y0,),
        conj(
            order_atom(order, y, y0, ctx.rigid),
            _on_diagonal(child.reduced, (y,), (y0,), (y0,)),
        ),
    )
    conserved = conj(
        immut, forall((y,), disj(_on_diagonal(child.conserved, (y,), (y,), (y,)), dominated))
    )
    reduced = conj(conserved, exists((y,), _on_diagonal(child.reduced, (y,), (y,), (y,))))
    return ImplicitRanking(
        params,
        reduced,
        conserved,
        forall((y,), child.minimal),
        _merge(
            child.conditions,
            (WellFounded(order, y.sort), FinNonMin(child.minimal, (y,), params)),
        ),
        f"DomLex {y.name}:{y.sort} by {order!r}",
        (child,),
    )


def swap_blocks(ys: tuple, k: int, avoid: set) -> list[tuple[tuple, tuple]]:
    """Fresh variable tuples for ``k`` transpositions of ``ys`` values."""
    taken = set(avoid)
    blocks = []
    for i in range(1, k + 1):
        pair = []
        for side in ("a", "b"):
            tup = []
            for v in ys:
                w = fresh_var(f"{side}{i}_{v.name}", v.sort, taken)
                taken.add(w.name)
                tup.append(w)
            pair.append(tuple(tup))
        blocks.append((pair[0], pair[1]))
    return blocks


def swap_distinct(blocks) -> Formula:
    """Endpoints of different transpositions are pairwise distinct."""
    parts = []
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            for u in blocks[i]:
                for w in blocks[j]:
                    parts.append(neg(tuple_eq(u, w)))
    return conj(*parts)


def swap_image(ys: tuple, ws: tuple, blocks) -> Formula:
    """``ws`` is the image of ``ys`` under the composed transpositions
    (tested in order, first match wins)."""
    if not blocks:
        return tuple_eq(ws, ys)
    (a, b), rest = blocks[0], blocks[1:]
    at_a, at_b = tuple_eq(ys, a), tuple_eq(ys, b)
    return disj(
        conj(at_a, tuple_eq(ws, b)),
        conj(neg(at_a), at_b, tuple_eq(ws, a)),
        conj(neg(at_a), neg(at_b), swap_image(ys, ws, rest)),
    )


def rank_dom_perm(child: ImplicitRanking, ys: tuple, k: int) -> ImplicitRanking:
    """Pointwise over ``ys`` up to a permutation made of at most ``k`` swaps."""
    if k < 0:
        raise RankingError("DomPerm needs a non-negative swap bound")
    params = _split(child, ys)
    avoid = _avoid(child.reduced, child.conserved, child.params, post_vars(child.params))
    ws = []
    for v in ys:
        w = fresh_var(v.name + "_img", v.sort, avoid)
        avoid.add(w.name)
        ws.append(w)
    ws = tuple(ws)
    blocks = swap_blocks(ys, k, avoid)
    sigma_vars = tuple(v for a, b in blocks for v in (*a, *b))
    image = swap_image(ys, ws, blocks)
    each = forall(
        ys + ws, implies(image, _on_diagonal(child.conserved, ys, ys, ws))
    )
    some = exists(ys + ws, conj(image, _on_diagonal(child.reduced, ys, ys, ws)))
    distinct = swap_distinct(blocks)
    return ImplicitRanking(
        params,
        exists(sigma_vars, conj(distinct, each, some)),
        exists(sigma_vars, conj(distinct, each)),
        forall(ys, child.minimal),
        _merge(child.conditions, (FinNonMin(child.minimal, tuple(ys), params),)),
        f"DomPerm {' '.join(f'{v.name}:{v.sort}' for v in ys)} swaps<={k}",
        (child,),
    )


# -- ranking expressions --------------------------------------------------------


@dataclass(frozen=True)
class Bin:
    cond: Formula


@dataclass(frozen=True)
class Pos:
    term: Term
    order: Order
    sort: str


@dataclass(frozen=True)
class Cond:
    child: object
    cond: Formula


@dataclass(frozen=True)
class PW:
    children: tuple


@dataclass(frozen=True)
class Lex:
    children: tuple


@dataclass(frozen=True)
class DomPW:
    child: object
    vars: tuple


@dataclass(frozen=True)
class DomLex:
    child: object
    var: Var
    order: Order


@dataclass(frozen=True)
class DomPerm:
    child: object
    vars: tuple
    k: int


@dataclass(frozen=True)
class TimerRank:
    """Steps until ``label`` next holds, counted while ``cond`` holds,
    pointwise over ``vars``."""

    label: Formula
    timer: Term
    cond: Formula
    vars: tuple


RankingExpr = Bin | Pos | Cond | PW | Lex | DomPW | DomLex | DomPerm | TimerRank


def constructor_count(expr: RankingExpr) -> int:
    """Number of constructor applications; a timer ranking counts once."""
    if isinstance(expr, (Bin, Pos, TimerRank)):
        return 1
    if isinstance(expr, (PW, Lex)):
        return 1 + sum(constructor_count(c) for c in expr.children)
    return 1 + constructor_count(expr.child)


def _in_scope(node, scope: tuple) -> None:
    loose = [v for v in free_vars(node) if v not in scope]
    if loose:
        names = ", ".join(f"{v.name}:{v.sort}" for v in loose)
        raise RankingError(f"free variable {names} is not bound by an enclosing aggregation")


def build(expr: RankingExpr, ctx: RankContext, scope: tuple = ()) -> ImplicitRanking:
    """Turn a ranking expression into an implicit ranking over ``scope``."""
    if isinstance(expr, Bin):
        _in_scope(expr.cond, scope)
        return rank_bin(expr.cond, scope, ctx)
    if isinstance(expr, Pos):
        _in_scope(expr.term, scope)
        return rank_pos(expr.term, expr.order, expr.sort, scope, ctx)
    if isinstance(expr, Cond):
        _in_scope(expr.cond, scope)
        return rank_cond(build(expr.child, ctx, scope), expr.cond, ctx)
    if isinstance(expr, PW):
        return rank_pw([build(c, ctx, scope) for c in expr.children])
    if isinstance(expr, Lex):
        return rank_lex([build(c, ctx, scope) for c in expr.children])
    if isinstance(expr, DomPW):
        return rank_dom_pw(build(expr.child, ctx, expr.vars + scope), expr.vars)
    if isinstance(expr, DomLex):
        child = build(expr.child, ctx, (expr.var,) + scope)
        return rank_dom_lex(child, expr.var, expr.order, ctx)
    if isinstance(expr, DomPerm):
        return rank_dom_perm(build(expr.child, ctx, expr.vars + scope), expr.vars, expr.k)
    if isinstance(expr, TimerRank):
        inner_scope = expr.vars + scope
        _in_scope(expr.timer, inner_scope)
        _in_scope(expr.cond, inner_scope)
        pos = rank_pos(expr.timer, TIMER_LT, TIMER, inner_scope, ctx)
        ranking = rank_dom_pw(rank_cond(pos, expr.cond, ctx), expr.vars)
        return ImplicitRanking(
            ranking.params,
            ranking.reduced,
            ranking.conserved,
            ranking.minimal,
            ranking.conditions,
            f"TimerRank {expr.label!r} while {expr.cond!r}",
            ranking.children,
        )
    raise RankingError(f"unknown ranking constructor {expr!r}")


def close(ranking: ImplicitRanking) -> ImplicitRanking:
    if ranking.params:
        raise RankingError("only a ranking without parameters can be closed")
    return ranking
