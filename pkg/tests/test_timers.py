import random
import re

import pytest
from hypothesis import given, settings

from timerank import logic as L
from timerank.logic import App, Rel, Var, canonical_key, to_sexpr
from timerank.oracle.lasso import Lasso, holds, random_lasso
from timerank.oracle.structures import FiniteStructure
from timerank.systems import TransitionSystem
from timerank.timers import (
    ReductionError,
    augment,
    closure,
    negate_property,
    push_negation,
    timer_constraints,
)

from conftest import bundle, formula, toy_sig
from strategies import closed

sig = toy_sig()
x = Var("x", "A")
p_x = Rel("p", (x,))


def F(text):
    return formula(text, sig)


def test_ticket_negation_is_skolemized():
    b = bundle("ticket", proof=False)
    assert to_sexpr(b.augmented.negated) == (
        "(and (forall ((x Thread)) (G (F (scheduled x))))"
        " (F (and (waiting x0) (G (not (critical x0))))))"
    )
    assert b.augmented.skolems == ("x0",)
    assert "x0" in b.augmented.signature.rigid


def test_negation_without_quantifiers_adds_no_constants():
    neg, _, consts = negate_property(F("(G r)"), sig)
    assert consts == ()
    assert neg == L.Eventually(L.Not(Rel("r")))


def test_skolemization_can_be_disabled():
    phi = F("(forall ((x A)) (F (p x)))")
    neg, _, consts = negate_property(phi, sig, skolemize_=False)
    assert neg == L.Not(phi) and consts == ()
    neg, sig2, consts = negate_property(phi, sig)
    assert consts == ("x0",)
    assert neg == L.Globally(L.Not(Rel("p", (App("x0"),))))
    assert sig2.functions["x0"] == ((), "A")


def test_both_negations_agree_on_lassos():
    # the Skolem constant ranges over the carrier; some choice must witness
    phi = F("(forall ((x A)) (F (p x)))")
    plain, _, _ = negate_property(phi, sig, skolemize_=False)
    skolem, sig2, _ = negate_property(phi, sig)
    rng = random.Random(7)
    for _ in range(200):
        lasso = random_lasso(sig, {"A": (0, 1)}, rng, 2, 2)
        witnessed = any(
            holds(skolem, Lasso(tuple(_with_x0(s, e) for s in lasso.states), lasso.loop))
            for e in (0, 1)
        )
        assert holds(plain, lasso) == witnessed


def _with_x0(s, e):
    return FiniteStructure(s.carriers, {**s.interp, "x0": {(): e}})


def test_push_negation_goes_through_temporal_operators_but_not_until():
    assert push_negation(F("(X (F r))")) == L.Next(L.Globally(L.Not(Rel("r"))))
    u = F("(U r (p c))")
    assert push_negation(u) == L.Not(u)


def test_closure_of_fairness_has_five_entries():
    psi = F("(forall ((x A)) (G (F (p x))))")
    got = [to_sexpr(f) for f in closure(psi)]
    assert got == [
        "(p x)",
        "(F (p x))",
        "(not (F (p x)))",
        "(G (F (p x)))",
        "(forall ((x A)) (G (F (p x))))",
    ]


def test_closure_of_atom_and_sharing():
    assert closure(Rel("r")) == (Rel("r"),)
    g = F("(G r)")
    assert len([f for f in closure(L.And((g, g))) if f == g]) == 1


def test_closure_shares_alpha_equivalent_subformulas():
    f = F("(and (forall ((x A)) (p x)) (forall ((y A)) (p y)))")
    entries = closure(f)
    # (p x) and (p y) differ in their free variable; the quantified forms coincide
    assert [to_sexpr(g) for g in entries] == [
        "(p x)",
        "(forall ((x A)) (p x))",
        "(p y)",
        "(and (forall ((x A)) (p x)) (forall ((y A)) (p y)))",
    ]


@settings(max_examples=200, deadline=None)
@given(closed(temporal=True))
def test_closure_is_children_first_and_closed_under_g_negation(f):
    entries = closure(f)
    keys = [canonical_key(g) for g in entries]
    assert len(keys) == len(set(keys))
    position = {k: i for i, k in enumerate(keys)}
    for i, g in enumerate(entries):
        for child in L.children(g):
            if isinstance(child, L.Formula):
                assert position[canonical_key(child)] < i
        if isinstance(g, L.Globally):
            assert canonical_key(L.Not(g.body)) in position
    assert keys[-1] == canonical_key(f)


def test_ticket_has_thirteen_timers():
    aug = bundle("ticket", proof=False).augmented
    expected = {
        "(scheduled x)",
        "(F (scheduled x))",
        "(not (F (scheduled x)))",
        "(G (F (scheduled x)))",
        "(forall ((x Thread)) (G (F (scheduled x))))",
        "(waiting x0)",
        "(critical x0)",
        "(not (critical x0))",
        "(not (not (critical x0)))",
        "(G (not (critical x0)))",
        "(and (waiting x0) (G (not (critical x0))))",
        "(F (and (waiting x0) (G (not (critical x0)))))",
        "(and (forall ((x Thread)) (G (F (scheduled x)))) (F (and (waiting x0) (G (not (critical x0))))))",
    }
    assert {to_sexpr(e.formula) for e in aug.entries} == expected


def test_termination_property_has_three_timers():
    aug = bundle("lexarray", proof=False).augmented
    assert [to_sexpr(e.formula) for e in aug.entries] == ["true", "(not true)", "(G true)"]


def test_timer_symbols_are_deterministic_and_fresh():
    aug = bundle("ticket", proof=False).augmented
    user = set(aug.original.signature.relations) | set(aug.original.signature.functions)
    for e in aug.entries:
        assert re.fullmatch(r"t![0-9a-f]{8}![A-Za-z0-9_]+", e.symbol)
        assert e.symbol not in user
        assert aug.signature.functions[e.symbol][1] == L.TIMER
    again = bundle("ticket", proof=False).augmented
    assert [e.symbol for e in again.entries] == [e.symbol for e in aug.entries]


def _rows(f):
    aug = augment(TransitionSystem(sig), f, skolemize_=False)
    rows = {to_sexpr(e.formula): (e, g, t) for e, g, t in timer_constraints({e.key: e for e in aug.entries})}
    return aug, rows


def test_state_axioms():
    aug, rows = _rows(F("(forall ((x A)) (F (G (p x))))"))
    _, gamma, _ = rows["(p x)"]
    t_p = aug.entry(p_x).symbol
    assert [lbl.split()[0] for lbl, _ in gamma] == ["range", "state"]
    assert to_sexpr(gamma[1][1]) == f"(forall ((x A)) (and (-> (= ({t_p} x) 0) (p x)) (-> (p x) (= ({t_p} x) 0))))"
    _, gamma, _ = rows["(G (p x))"]
    t_not = aug.entry(L.Not(p_x)).symbol
    t_g = aug.entry(L.Globally(p_x)).symbol
    assert f"(= ({t_g} x) 0) (= ({t_not} x) inf)" in to_sexpr(gamma[1][1])
    _, gamma, _ = rows["(F (G (p x)))"]
    assert f"(< ({t_g} x) inf)" in to_sexpr(gamma[1][1])


def test_transition_constraints():
    aug, rows = _rows(F("(forall ((x A)) (F (G (p x))))"))
    t_p = aug.entry(p_x).symbol
    t_g = aug.entry(L.Globally(p_x)).symbol
    t_fg = aug.entry(L.Eventually(L.Globally(p_x))).symbol
    _, _, (_, step) = rows["(p x)"]
    assert to_sexpr(step).count("(->") == 2  # decrease and persistence only
    _, _, (_, step) = rows["(G (p x))"]
    assert f"(and (= ({t_p} x) 0) (= ({t_g}' x) 0))" in to_sexpr(step)
    _, _, (_, step) = rows["(F (G (p x)))"]
    assert f"(or (= ({t_g} x) 0) (= ({t_fg}' x) 0))" in to_sexpr(step)


def test_until_gets_an_extra_state_axiom():
    aug, rows = _rows(F("(U r (p c))"))
    _, gamma, _ = rows["(not (U r (p c)))"]
    assert len(gamma) == 2
    aug, rows = _rows(L.Not(F("(U r (p c))")))
    _, gamma, _ = rows["(U r (p c))"]
    assert [lbl.split()[0] for lbl, _ in gamma] == ["range", "until"]


def test_augmented_system_is_a_product():
    b = bundle("ticket", proof=False)
    aug = b.augmented
    assert aug.system.axioms[: len(b.system.axioms)] == b.system.axioms
    assert aug.system.inits[-1] == aug.timer_init
    assert aug.system.transitions[: len(b.system.transitions)] == b.system.transitions
    root = aug.entry(aug.negated)
    assert aug.timer_init == L.Eq(root.term, App(L.TIMER_ZERO))


def test_property_true_pins_a_single_timer():
    aug = augment(TransitionSystem(sig), L.TRUE)
    assert [to_sexpr(e.formula) for e in aug.entries] == ["false"]


def test_open_property_is_rejected():
    with pytest.raises(ReductionError):
        augment(TransitionSystem(sig), p_x)


def test_entry_lookup_falls_back_to_shape():
    aug = bundle("ticket", proof=False).augmented
    y = Var("y", "Thread")
    e = aug.entry(Rel("scheduled", (y,)))
    assert to_sexpr(e.formula) == "(scheduled x)"
    with pytest.raises(ReductionError):
        aug.entry(L.Globally(Rel("critical", (App("x0"),))))
