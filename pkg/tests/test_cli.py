import json
import shutil
import stat
import subprocess
import sys

import pytest

from timerank.cli import SCHEMA, main

from conftest import DATA, needs_solver, paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _copy(tmp_path, name, proof_text=None):
    for src in paths(name):
        shutil.copy(src, tmp_path / src.name)
    if proof_text is not None:
        (tmp_path / f"{name}.proof").write_text(proof_text)
    return [tmp_path / p.name for p in paths(name)]


def _strip_times(report):
    report = dict(report, seconds=0)
    report["vcs"] = [dict(v, seconds=0) for v in report["vcs"]]
    return report


@needs_solver
def test_check_prints_verdict_and_stats(capsys):
    code, out, _ = run(capsys, "check", *paths("lexarray"))
    assert code == 0
    lines = out.splitlines()
    assert lines[-1] == "Verified"
    assert lines[-2].split()[:4] == ["lexarray", "4", "1", "2"]
    assert lines[-3].split() == ["name", "Con", "Fin", "Inv", "time"]


@needs_solver
def test_check_finds_sibling_files(capsys):
    code, out, _ = run(capsys, "check", DATA / "binarycounter.proof")
    assert code == 0 and out.rstrip().endswith("Verified")


@needs_solver
def test_json_report(capsys):
    code, out, _ = run(capsys, "check", "--json", *paths("binarycounter"))
    report = json.loads(out)
    assert code == 0
    assert report["schema"] == SCHEMA
    assert report["verdict"] == "Verified"
    assert report["stats"]["constructors"] == 4
    assert {"id", "kind", "status", "seconds"} <= set(report["vcs"][0])
    assert report["unresolved"] == [] and report["warnings"] == []


@needs_solver
def test_failed_proof_exits_one_with_a_counterexample(capsys, tmp_path):
    files = _copy(tmp_path, "binarycounter", "ranking (Bin false)\n")
    code, out, _ = run(capsys, "check", *files)
    assert code == 1
    assert "counterexample for rank:decrease" in out
    assert "    post:" in out
    assert out.rstrip().endswith("Failed")


def test_unknown_answers_exit_two(capsys, tmp_path):
    fake = tmp_path / "solver"
    fake.write_text("#!/bin/sh\necho unknown\n")
    fake.chmod(fake.stat().st_mode | stat.S_IEXEC)
    code, out, _ = run(capsys, "check", "--solver", fake, *paths("binarycounter"))
    assert code == 2
    assert out.rstrip().endswith("Incomplete")


@needs_solver
def test_unresolved_side_condition_exits_two(capsys, tmp_path):
    text = (DATA / "lexarray.proof").read_text().split("; positive cells")[0]
    code, out, _ = run(capsys, "check", *_copy(tmp_path, "lexarray", text))
    assert code == 2
    assert "unresolved: " in out


@needs_solver
def test_parallel_check_gives_the_same_report(capsys):
    _, one, _ = run(capsys, "check", "--json", "--jobs", "1", *paths("mutexring"))
    _, eight, _ = run(capsys, "check", "--json", "--jobs", "8", *paths("mutexring"))
    assert _strip_times(json.loads(one)) == _strip_times(json.loads(eight))


def test_reduce_is_byte_stable(capsys):
    sys_path, prop_path, _ = paths("ticket")
    code, first, _ = run(capsys, "reduce", sys_path, prop_path)
    _, second, _ = run(capsys, "reduce", sys_path, prop_path)
    assert code == 0 and first == second
    assert "constant (x0 Thread) immutable" in first


def test_reduce_without_skolemization(capsys):
    sys_path, prop_path, _ = paths("ticket")
    _, out, _ = run(capsys, "reduce", "--no-skolemize", sys_path, prop_path)
    assert "x0" not in out


def test_explain(capsys):
    code, out, _ = run(capsys, "explain", *paths("ticket"))
    assert code == 0
    assert out.startswith("Lex")
    assert out.count("requires:  ") >= 2
    assert "  reduced:   " in out


def test_emit_smt_writes_only_into_the_output_directory(capsys, tmp_path):
    target = tmp_path / "queries"
    code, out, _ = run(capsys, "emit-smt", "-o", target, *paths("lexarray"))
    assert code == 0
    files = sorted(p.name for p in target.iterdir())
    assert "rank:decrease.smt2" in files
    assert out.strip() == f"wrote {len(files)} queries to {target}"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["queries"]


def test_oracle_json(capsys):
    code, out, _ = run(capsys, "oracle", "--json", "--seed", 4, "--lassos", 30, "--pairs", 40)
    summary = json.loads(out)
    assert code == 0
    assert summary["schema"] == "timerank.oracle/1" and summary["passed"]
    assert len(summary["suites"]) == 10
    assert summary["suites"][0]["samples"] == 30


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["check"],
        ["check", "a.sys", "b.prop"],
        ["check", "/nonexistent/x.proof"],
        ["reduce", "/nonexistent/x.sys", "/nonexistent/x.prop"],
        ["check", "--jobs", "many", "x.proof"],
        ["check", "--jobs", "0", str(DATA / "lexarray.proof")],
        ["check", "--timeout", "0", str(DATA / "lexarray.proof")],
    ],
)
def test_usage_errors_exit_three(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 3


def test_parse_errors_exit_three_with_a_position(capsys, tmp_path):
    files = _copy(tmp_path, "ticket", "ranking (Foo)\n")
    code, _, err = run(capsys, "check", *files)
    assert code == 3
    assert "ticket.proof:1:" in err and "unknown ranking constructor" in err


def test_help_exits_zero(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "check" in out


def test_console_script_is_installed():
    exe = shutil.which("timerank")
    cmd = [exe] if exe else [sys.executable, "-m", "timerank.cli"]
    sys_path, prop_path, _ = paths("binarycounter")
    proc = subprocess.run([*cmd, "reduce", str(sys_path), str(prop_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("; property: (F false)")
