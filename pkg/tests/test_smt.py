import itertools
import math
import stat
import subprocess
from dataclasses import replace
from pathlib import Path

import pytest

from timerank import logic as L
from timerank.frontend import Bundle, parse_proof
from timerank.logic import App, Eq, Rel, Var
from timerank.oracle.structures import INF, eval_fo
from timerank.smt import (
    BackendError,
    Solver,
    check_all,
    emit,
    emit_all,
    emit_formula,
    emit_term,
    find_solver,
    read_counterexample,
)
from timerank.timers import timer_pred
from timerank.vcgen import VC, plan

from conftest import bundle, needs_solver, toy_sig

GOLDEN = Path(__file__).parent / "golden"
VALUES = tuple(range(6)) + (math.inf,)
a, b = Var("a", L.TIMER), Var("b", L.TIMER)


def _enc(v):
    return "(- 1)" if v == math.inf else str(v)


def _rank_vc(name):
    return next(v for v in plan(bundle(name)).vcs if v.kind == "RankDecrease")


def _strip_commands(script):
    return script.replace("(check-sat)\n", "").replace("(get-model)\n", "")


# -- encoding ---------------------------------------------------------------------

# the extended naturals, evaluated directly with a float infinity
DIRECT = {
    "le": (Rel(L.TIMER_LE, (a, b)), lambda x, y: x <= y),
    "lt": (Rel(L.TIMER_LT, (a, b)), lambda x, y: x < y),
    "eq": (Eq(a, b), lambda x, y: x == y),
    "pred": (Eq(timer_pred(a), b), lambda x, y: y == (x if x in (0, math.inf) else x - 1)),
    "zero": (Eq(a, App(L.TIMER_ZERO)), lambda x, y: x == 0),
    "inf": (Eq(a, App(L.TIMER_INF)), lambda x, y: x == math.inf),
}


@needs_solver
def test_encoding_agrees_with_extended_naturals_on_all_small_pairs():
    # one solver run answers every (operation, a, b) query in order
    lines = ["(set-logic QF_LIA)", "(declare-const |?a| Int)", "(declare-const |?b| Int)"]
    expected = []
    for name, (f, direct) in DIRECT.items():
        enc = emit_formula(f)
        for x, y in itertools.product(VALUES, repeat=2):
            want = direct(x, y)
            lines += [
                "(push 1)",
                f"(assert (= |?a| {_enc(x)}))",
                f"(assert (= |?b| {_enc(y)}))",
                f"(assert (not (= {enc} {'true' if want else 'false'})))",
                "(check-sat)",
                "(pop 1)",
            ]
            expected.append((name, x, y))
    out = subprocess.run([find_solver(), "-smt2", "-in"], input="\n".join(lines), capture_output=True,
                         text=True, check=True).stdout.split()
    assert len(out) == len(expected) == len(DIRECT) * 49
    wrong = [e for e, ans in zip(expected, out) if ans != "unsat"]
    assert wrong == []


def test_encoded_constants_and_order():
    assert emit_term(App(L.TIMER_INF)) == "(- 1)"
    assert emit_term(App(L.TIMER_ZERO)) == "0"
    le = emit_formula(Rel(L.TIMER_LE, (a, b)))
    assert le == "(or (= |?b| (- 1)) (and (not (= |?a| (- 1))) (<= |?a| |?b|)))"


def test_timer_quantifiers_are_relativised():
    f = L.Forall((a,), Rel(L.TIMER_LE, (App(L.TIMER_ZERO), a)))
    assert emit_formula(f).startswith("(forall ((|?a| Int)) (=> (and (>= |?a| (- 1)) true)")
    g = L.Exists((a,), Eq(a, App(L.TIMER_ZERO)))
    assert "(and (>= |?a| (- 1))" in emit_formula(g)


@needs_solver
def test_sanity_vcs_are_valid(solver):
    vcs = [v for v in plan(bundle("binarycounter")).vcs if v.kind == "EncodingSanity"]
    assert {r.verdict for r in check_all(vcs, solver, jobs=4)} == {"Valid"}


# -- scripts ----------------------------------------------------------------------


def test_emission_is_deterministic():
    a1 = emit_all(plan(bundle("ticket")).vcs)
    a2 = emit_all(plan(bundle("ticket")).vcs)
    assert a1 == a2


def test_script_shape():
    script = emit(_rank_vc("lexarray"))
    lines = script.splitlines()
    assert lines[2] == "(set-logic UFLIA)"
    assert lines[-2:] == ["(check-sat)", "(get-model)"]
    assert "(declare-sort |Index| 0)" in lines
    assert "(assert (not " in script
    assert "Timer" not in "".join(ln for ln in lines if ln.startswith("(declare-sort"))


def test_lexarray_rank_decrease_golden():
    assert emit(_rank_vc("lexarray")) == (GOLDEN / "lexarray_rank_decrease.smt2").read_text()


def _cvc5_parse(script):
    cvc5 = pytest.importorskip("cvc5")
    tm = cvc5.TermManager()
    solver = cvc5.Solver(tm)
    sm = cvc5.SymbolManager(tm)
    parser = cvc5.InputParser(solver, sm)
    parser.setStringInput(cvc5.InputLanguage.SMT_LIB_2_6, _strip_commands(script), "vc")
    count = 0
    while True:
        cmd = parser.nextCommand()
        if cmd.isNull():
            return count
        cmd.invoke(solver, sm)
        count += 1


def _z3_parse(script):
    out = subprocess.run([find_solver(), "-smt2", "-in"], input=_strip_commands(script),
                         capture_output=True, text=True)
    return out.stdout.strip()


@pytest.mark.parametrize("name", ["ticket", "lexarray", "binarycounter", "mutexring"])
def test_every_script_parses_under_cvc5(name):
    for vc in plan(bundle(name)).vcs:
        assert _cvc5_parse(emit(vc)) > 0, vc.id


@needs_solver
@pytest.mark.parametrize("name", ["ticket", "lexarray", "binarycounter", "mutexring"])
def test_every_script_parses_under_z3(name):
    for vc in plan(bundle(name)).vcs:
        assert _z3_parse(emit(vc)) == "", vc.id


def test_cvc5_rejects_broken_input():
    with pytest.raises(RuntimeError):
        _cvc5_parse("(assert (foo")


# -- solver runs ------------------------------------------------------------------


def _vc(goal, hyps=(), sig=None):
    return VC("t", "Test", tuple(hyps), goal, sig or toy_sig())


@needs_solver
def test_tautology_is_valid(solver):
    x = Var("x", "A")
    goal = L.Forall((x,), L.Or((Rel("p", (x,)), L.Not(Rel("p", (x,))))))
    assert solver.check(_vc(goal)).verdict == "Valid"


@needs_solver
def test_false_ranking_fails_with_a_transition(solver):
    b = bundle("binarycounter")
    proof = parse_proof("ranking (Bin false)", b.augmented)
    vcs = plan(Bundle(b.system, b.property, b.augmented, proof)).vcs
    (res,) = [solver.check(v) for v in vcs if v.kind == "RankDecrease"]
    assert res.verdict == "Invalid"
    assert res.counterexample.post is not None


@needs_solver
def test_counterexample_reevaluates_to_a_violation(solver):
    b = bundle("ticket")
    kept = tuple(i for i in b.proof.invariants if i.name != "one_scheduled")
    vcs = plan(replace(b, proof=replace(b.proof, invariants=kept))).vcs
    vcs = [v for v in vcs if v.kind != "EncodingSanity"]
    bad = [r for r in check_all(vcs, solver, jobs=4) if r.verdict == "Invalid"]
    assert bad
    by_id = {v.id: v for v in vcs}
    for r in bad:
        cex = r.counterexample
        assert not eval_fo(by_id[r.vc].formula, cex.pre, {}, cex.post or cex.pre)
        assert cex.failing


def test_model_read_back_renders_infinity():
    sig = toy_sig().with_timers().with_function("tm", (), L.TIMER)
    vc = _vc(Eq(App("tm"), App(L.TIMER_ZERO)), sig=sig)
    output = """sat
(
  (define-fun |tm| () Int (- 1))
  (declare-fun A!val!0 () A)
)
"""
    cex = read_counterexample(output, vc)
    assert cex.pre.interp["tm"][()] == INF
    assert cex.to_json()["pre"]["tm"] == "inf"


def test_model_that_satisfies_the_vc_is_rejected():
    sig = toy_sig().with_timers().with_function("tm", (), L.TIMER)
    vc = _vc(Eq(App("tm"), App(L.TIMER_ZERO)), sig=sig)
    with pytest.raises(BackendError, match="does not refute"):
        read_counterexample("sat\n((define-fun |tm| () Int 0))\n", vc)


def test_truncated_model_is_an_error():
    sig = toy_sig().with_timers().with_function("tm", (), L.TIMER)
    vc = _vc(Eq(App("tm"), App(L.TIMER_ZERO)), sig=sig)
    with pytest.raises(BackendError):
        read_counterexample("sat\n((define-fun |tm| () Int", vc)
    with pytest.raises(BackendError):
        read_counterexample("sat\n", vc)


def _fake_solver(tmp_path, body):
    path = tmp_path / "fake-solver"
    path.write_text("#!/bin/sh\n" + body + "\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_solver_unknown_and_timeout_are_unknown(tmp_path):
    vc = _vc(L.TRUE)
    assert Solver(_fake_solver(tmp_path, "echo unknown")).check(vc).verdict == "Unknown"
    slow = Solver(_fake_solver(tmp_path, "sleep 30"), timeout=0.2)
    slow_res = slow.check(vc)
    assert slow_res.verdict == "Unknown" and slow_res.detail == "timeout"


def test_solver_errors_are_backend_errors(tmp_path):
    vc = _vc(L.TRUE)
    with pytest.raises(BackendError, match="rejected"):
        Solver(_fake_solver(tmp_path, 'echo "(error \\"bad\\")"')).check(vc)
    with pytest.raises(BackendError, match="cannot run"):
        Solver(str(tmp_path / "missing")).check(vc)


def test_solver_path_from_environment(monkeypatch, tmp_path):
    fake = _fake_solver(tmp_path, "echo unsat")
    monkeypatch.setenv("TIMERANK_SOLVER", fake)
    assert find_solver() == fake
    assert Solver().check(_vc(L.TRUE)).verdict == "Valid"
    monkeypatch.setenv("TIMERANK_SOLVER", "")
    monkeypatch.setenv("PATH", str(tmp_path / "empty"))
    with pytest.raises(BackendError, match="no SMT solver"):
        find_solver()


@needs_solver
def test_parallelism_does_not_change_verdicts(solver):
    vcs = plan(bundle("mutexring")).vcs
    one = [(r.vc, r.verdict) for r in check_all(vcs, solver, jobs=1)]
    eight = [(r.vc, r.verdict) for r in check_all(vcs, solver, jobs=8)]
    assert one == eight
    assert {v for _, v in one} == {"Valid"}

