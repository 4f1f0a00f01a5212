"""Command-line entry point.

Exit codes: 0 verified (or oracle suites passed), 1 failed, 2 incomplete,
3 usage, parse or setup errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .frontend import Bundle, format_augmented, load
from .logic import LogicError, to_sexpr
from .ranking import ImplicitRanking, RankContext, build
from .sexpr import ParseError
from .smt import BackendError, Solver, check_all, emit_all
from .vcgen import plan

SCHEMA = "timerank.report/1"

EXIT_VERIFIED = 0
EXIT_FAILED = 1
EXIT_INCOMPLETE = 2
EXIT_USAGE = 3


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    name: str
    verdict: str
    rows: list
    stats: dict
    seconds: float
    unresolved: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {"Verified": EXIT_VERIFIED, "Failed": EXIT_FAILED}.get(self.verdict, EXIT_INCOMPLETE)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "name": self.name,
            "verdict": self.verdict,
            "stats": self.stats,
            "seconds": round(self.seconds, 3),
            "vcs": [
                {
                    "id": r.vc,
                    "kind": r.kind,
                    "status": r.verdict,
                    "seconds": round(r.seconds, 3),
                    **({"detail": r.detail} if r.detail else {}),
                    **({"counterexample": r.counterexample.to_json()} if r.counterexample else {}),
                }
                for r in self.rows
            ],
            "unresolved": self.unresolved,
            "warnings": self.warnings,
        }


def stats_table(report: RunReport) -> str:
    s = report.stats
    head = f"{'name':<16}{'Con':>5}{'Fin':>5}{'Inv':>5}{'time':>10}"
    row = (
        f"{report.name:<16}{s['constructors']:>5}{s['finite_approximations']:>5}"
        f"{s['invariant_conjuncts']:>5}{report.seconds:>9.2f}s"
    )
    return head + "\n" + row


def siblings(proof: str) -> tuple[Path, Path, Path]:
    p = Path(proof)
    sys_path, prop_path = p.with_suffix(".sys"), p.with_suffix(".prop")
    for q in (p, sys_path, prop_path):
        if not q.exists():
            raise UsageError(f"{q} not found (give the .sys, .prop and .proof files explicitly)")
    return sys_path, prop_path, p


def _bundle(paths: list[str], skolemize: bool) -> Bundle:
    if len(paths) == 1:
        sys_path, prop_path, proof_path = siblings(paths[0])
    elif len(paths) == 3:
        sys_path, prop_path, proof_path = paths
    else:
        raise UsageError("expected PROOF or SYS PROP PROOF")
    return load(sys_path, prop_path, proof_path, skolemize)


def run_check(bundle: Bundle, name: str, solver: Solver, jobs: int) -> RunReport:
    start = time.monotonic()
    p = plan(bundle)
    results = check_all(p.vcs, solver, jobs)
    seconds = time.monotonic() - start
    if any(r.verdict == "Invalid" for r in results):
        verdict = "Failed"
    elif any(r.verdict != "Valid" for r in results) or p.unresolved:
        verdict = "Incomplete"
    else:
        verdict = "Verified"
    return RunReport(name, verdict, results, dict(p.stats), seconds, list(p.unresolved), list(p.warnings))


def _print_counterexample(cex, out) -> None:
    print(f"  counterexample for {cex.vc}:", file=out)
    data = cex.to_json()
    print(f"    domains: {json.dumps(data['domains'], sort_keys=True)}", file=out)
    for side in ("pre", "post"):
        if side in data:
            print(f"    {side}:", file=out)
            for sym, val in data[side].items():
                print(f"      {sym} = {json.dumps(val)}", file=out)
    for f in data.get("failing", []):
        print(f"    violated: {f}", file=out)


def print_report(report: RunReport, out=None) -> None:
    out = out or sys.stdout
    for r in report.rows:
        print(f"{r.verdict:<8} {r.seconds:7.2f}s  {r.kind:<16} {r.vc}", file=out)
        if r.detail:
            print(f"  {r.detail}", file=out)
        if r.counterexample is not None:
            _print_counterexample(r.counterexample, out)
    for u in report.unresolved:
        print(f"unresolved: {u}", file=out)
    for w in report.warnings:
        print(f"warning: {w}", file=out)
    print(stats_table(report), file=out)
    print(report.verdict, file=out)


def explain_lines(node: ImplicitRanking, depth: int = 0) -> list[str]:
    pad = "  " * depth
    lines = [f"{pad}{node.label}"]
    if node.params:
        lines.append(f"{pad}  params: {' '.join(f'{v.name}:{v.sort}' for v in node.params)}")
    lines.append(f"{pad}  reduced:   {to_sexpr(node.reduced)}")
    lines.append(f"{pad}  conserved: {to_sexpr(node.conserved)}")
    lines.append(f"{pad}  minimal:   {to_sexpr(node.minimal)}")
    for c in node.conditions:
        lines.append(f"{pad}  requires:  {c.describe()}")
    for child in node.children:
        lines.extend(explain_lines(child, depth + 1))
    return lines


# -- subcommands ---------------------------------------------------------------------


def cmd_check(args) -> int:
    if args.jobs < 1 or args.timeout <= 0:
        raise UsageError("--jobs must be at least 1 and --timeout positive")
    bundle = _bundle(args.files, not args.no_skolemize)
    name = Path(args.files[-1]).stem
    report = run_check(bundle, name, Solver(args.solver, args.timeout), args.jobs)
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print_report(report)
    return report.exit_code


def cmd_reduce(args) -> int:
    bundle = load(args.system, args.property, skolemize=not args.no_skolemize)
    sys.stdout.write(format_augmented(bundle.augmented))
    return EXIT_VERIFIED


def cmd_explain(args) -> int:
    bundle = _bundle(args.files, not args.no_skolemize)
    ranking = build(bundle.proof.ranking, RankContext(bundle.augmented.signature))
    print("\n".join(explain_lines(ranking)))
    return EXIT_VERIFIED


def cmd_emit_smt(args) -> int:
    bundle = _bundle(args.files, not args.no_skolemize)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    scripts = emit_all(plan(bundle).vcs)
    for vc_id, text in scripts.items():
        (out / f"{vc_id}.smt2").write_text(text, encoding="utf-8")
    print(f"wrote {len(scripts)} queries to {out}")
    return EXIT_VERIFIED


def cmd_oracle(args) -> int:
    from .oracle.suites import constructor_suite, reduction_suite

    results = []
    if args.suite in ("all", "reduction"):
        results.append(
            reduction_suite(
                args.seed, args.lassos, args.max_carrier, args.max_stem, args.max_loop,
                args.depth, args.jobs,
            )
        )
    if args.suite in ("all", "constructors"):
        results.extend(constructor_suite(args.seed, args.pairs, args.max_carrier, args.jobs))
    passed = all(r.ok for r in results)
    if args.json:
        summary = {
            "schema": "timerank.oracle/1",
            "seed": args.seed,
            "passed": passed,
            "suites": [r.to_json() for r in results],
        }
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(f"seed {args.seed}")
        for r in results:
            status = "pass" if r.ok else "FAIL"
            print(f"{status}  {r.name:<24} {r.samples:>7} samples  {r.seconds:7.2f}s")
            if r.first_failure:
                print(f"  first failure: {json.dumps(r.first_failure, sort_keys=True)}")
    return EXIT_VERIFIED if passed else EXIT_FAILED


def parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="timerank", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("--no-skolemize", action="store_true", help="keep outer existentials of the negated property")
        if solver:
            p.add_argument("--solver", help="path to the SMT solver (default: $TIMERANK_SOLVER or z3 on PATH)")
            p.add_argument("--timeout", type=float, default=60.0, help="seconds per query")
            p.add_argument("--jobs", type=int, default=1, help="queries checked in parallel")
            p.add_argument("--json", action="store_true", help="machine-readable report")

    p = sub.add_parser("check", help="verify a proof")
    p.add_argument("files", nargs="+", metavar="FILE", help="SYS PROP PROOF, or just PROOF with sibling files")
    common(p, solver=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reduce", help="print the system with timers for the negated property")
    p.add_argument("system")
    p.add_argument("property")
    common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("explain", help="print the ranking's formulas and side conditions")
    p.add_argument("files", nargs="+", metavar="FILE")
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("emit-smt", help="write every verification query as SMT-LIB")
    p.add_argument("files", nargs="+", metavar="FILE")
    p.add_argument("-o", "--output", required=True, help="directory for the .smt2 files")
    common(p)
    p.set_defaults(func=cmd_emit_smt)

    p = sub.add_parser("oracle", help="run the randomized explicit-state suites")
    p.add_argument("--suite", choices=("all", "reduction", "constructors"), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lassos", type=int, default=1000)
    p.add_argument("--pairs", type=int, default=10_000, help="state pairs per constructor")
    p.add_argument("--max-carrier", type=int, default=3)
    p.add_argument("--max-stem", type=int, default=4)
    p.add_argument("--max-loop", type=int, default=4)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)
    return top


def main(argv=None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_VERIFIED
    try:
        return args.func(args)
    except (UsageError, ParseError, LogicError, BackendError, OSError) as e:
        print(f"timerank: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
