"""Acceptance criteria, each at its stated tolerance.

Every test records a pass/fail line that is printed in the terminal summary.
"""

import json
from dataclasses import replace

import pytest

from timerank import ranking as R
from timerank.cli import main, run_check
from timerank.oracle.structures import eval_fo
from timerank.oracle.suites import constructor_suite, reduction_suite
from timerank.smt import Solver, emit
from timerank.vcgen import plan

from conftest import ACCEPTANCE, EXAMPLES, bundle, needs_solver, paths

JOBS = 8

# name -> (constructors, finite approximations, invariant conjuncts, seconds)
EXPECTED = {
    "ticket": (6, 2, 20, 120),
    "lexarray": (4, 1, 2, 30),
    "binarycounter": (4, 0, 0, 10),
    "mutexring": (8, 0, 5, 60),
}


def record(name, ok, detail):
    ACCEPTANCE.append((name, bool(ok), detail))
    assert ok, detail


# -- verification of the shipped examples -----------------------------------------


@needs_solver
@pytest.mark.parametrize("name", EXAMPLES)
def test_example_verifies_within_budget(name):
    con, fin, inv, budget = EXPECTED[name]
    report = run_check(bundle(name), name, Solver(timeout=budget), JOBS)
    s = report.stats
    got = (s["constructors"], s["finite_approximations"], s["invariant_conjuncts"])
    ok = report.exit_code == 0 and got == (con, fin, inv) and report.seconds <= budget
    record(
        f"{name} verifies",
        ok,
        f"exit {report.exit_code}, Con/Fin/Inv {got} want {(con, fin, inv)}, "
        f"{report.seconds:.1f}s of {budget}s",
    )


# -- mutations --------------------------------------------------------------------


def _drop_last_lex_child(expr):
    """Remove the last component of the outermost lexicographic node."""
    if isinstance(expr, R.Lex):
        kids = expr.children[:-1]
        return R.Lex(kids) if len(kids) > 1 else kids[0]
    if hasattr(expr, "child"):
        return replace(expr, child=_drop_last_lex_child(expr.child))
    raise ValueError(f"no lexicographic node under {type(expr).__name__}")


def mutants(b):
    proof = b.proof
    for inv in proof.invariants:
        kept = tuple(i for i in proof.invariants if i is not inv)
        yield f"without invariant {inv.name}", replace(b, proof=replace(proof, invariants=kept))
    yield "without last Lex component", replace(b, proof=replace(proof, ranking=_drop_last_lex_child(proof.ranking)))


@needs_solver
@pytest.mark.parametrize("name", EXAMPLES)
def test_mutated_proofs_fail_with_genuine_counterexamples(name):
    solver = Solver(timeout=60)
    problems, count = [], 0
    for label, mutant in mutants(bundle(name)):
        count += 1
        report = run_check(mutant, name, solver, JOBS)
        vcs = {v.id: v for v in plan(mutant).vcs}
        bad = [r for r in report.rows if r.verdict == "Invalid"]
        if report.exit_code != 1 or not bad:
            problems.append(f"{label}: exit {report.exit_code}")
            continue
        for r in bad:
            cex = r.counterexample
            if eval_fo(vcs[r.vc].formula, cex.pre, {}, cex.post or cex.pre):
                problems.append(f"{label}: model for {r.vc} satisfies the query")
    record(
        f"{name} mutations",
        not problems,
        f"{count - len(problems)}/{count} mutants rejected" + (f"; {problems[0]}" if problems else ""),
    )


# -- oracles ----------------------------------------------------------------------


@pytest.mark.slow
def test_reduction_oracle_on_a_thousand_lassos():
    result = reduction_suite(seed=2024, count=1000, max_carrier=3, max_stem=4, max_loop=4, depth=3, jobs=JOBS)
    ok = result.ok and result.samples >= 1000 and result.seconds <= 300
    record(
        "reduction oracle",
        ok,
        f"{result.samples - result.failures}/{result.samples} lassos agree in {result.seconds:.1f}s",
    )


@pytest.mark.slow
def test_constructor_oracle_on_ten_thousand_pairs_each():
    results = constructor_suite(seed=2024, pairs=10_000, jobs=JOBS)
    weak = [r.name for r in results if not r.ok or r.samples < 10_000]
    record(
        "constructor oracle",
        not weak,
        f"{len(results) - len(weak)}/{len(results)} constructors agree on >= 10000 pairs"
        + (f"; failing {weak}" if weak else ""),
    )


# -- encoding ---------------------------------------------------------------------


@needs_solver
def test_encoding_checks():
    import test_smt

    failures = []
    for check in (
        test_smt.test_encoding_agrees_with_extended_naturals_on_all_small_pairs,
        test_smt.test_encoded_constants_and_order,
    ):
        try:
            check()
        except AssertionError as e:
            failures.append(f"{check.__name__}: {e}")
    solver = Solver(timeout=60)
    for name in EXAMPLES:
        for vc in plan(bundle(name)).vcs:
            if vc.kind == "EncodingSanity" and solver.check(vc).verdict != "Valid":
                failures.append(f"{vc.id} not valid")
            script = emit(vc)
            if test_smt._z3_parse(script) != "":
                failures.append(f"z3 rejects {name}/{vc.id}")
            try:
                test_smt._cvc5_parse(script)
            except RuntimeError as e:
                failures.append(f"cvc5 rejects {name}/{vc.id}: {e}")
    record("timer encoding", not failures, failures[0] if failures else "exhaustive table, sanity VCs, both parsers")


# -- determinism ------------------------------------------------------------------


def _capture(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


@needs_solver
def test_outputs_are_deterministic(capsys, tmp_path):
    problems = []
    for name in EXAMPLES:
        sys_path, prop_path, proof_path = paths(name)
        for argv in (("reduce", sys_path, prop_path), ("explain", sys_path, prop_path, proof_path)):
            if _capture(capsys, *argv) != _capture(capsys, *argv):
                problems.append(f"{argv[0]} {name}")
        dirs = [tmp_path / f"{name}-{k}" for k in range(2)]
        for d in dirs:
            _capture(capsys, "emit-smt", "-o", d, sys_path, prop_path, proof_path)
        a, b = ({p.name: p.read_bytes() for p in d.iterdir()} for d in dirs)
        if a != b:
            problems.append(f"emit-smt {name}")
        verdicts = []
        for jobs in (1, 8):
            _, out = _capture(capsys, "check", "--json", "--jobs", jobs, sys_path, prop_path, proof_path)
            rep = json.loads(out)
            verdicts.append((rep["verdict"], [(v["id"], v["status"]) for v in rep["vcs"]]))
        if verdicts[0] != verdicts[1]:
            problems.append(f"check --jobs {name}")
    record("determinism", not problems, f"differs: {problems}" if problems else "reduce, explain, emit-smt, --jobs")
