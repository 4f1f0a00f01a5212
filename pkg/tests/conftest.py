import shutil
from pathlib import Path

import pytest

from timerank.frontend import FormulaReader, load
from timerank.logic import Signature
from timerank.sexpr import read_all
from timerank.smt import SOLVER_ENV, Solver

DATA = Path(__file__).resolve().parent.parent / "src" / "timerank" / "data"
EXAMPLES = ("ticket", "lexarray", "binarycounter", "mutexring")


def paths(name):
    return DATA / f"{name}.sys", DATA / f"{name}.prop", DATA / f"{name}.proof"


def bundle(name, proof=True):
    sys_path, prop_path, proof_path = paths(name)
    return load(sys_path, prop_path, proof_path if proof else None)


def formula(text, sig, primed=False, temporal=True, timers=None):
    (x,) = read_all(text)
    return FormulaReader(sig, primed=primed, temporal=temporal, timers=timers).formula(x, {})


def toy_sig():
    sig = Signature().with_sort("A")
    sig = sig.with_relation("p", ("A",)).with_relation("q", ("A", "A")).with_relation("r", ())
    return sig.with_function("c", (), "A").with_function("f", ("A",), "A")


def have_solver():
    import os

    return bool(os.environ.get(SOLVER_ENV) or shutil.which("z3"))


needs_solver = pytest.mark.skipif(not have_solver(), reason="no z3 executable")


@pytest.fixture(scope="session")
def solver():
    return Solver(timeout=60)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
