"""Command-line front end.

Exit status: 0 success, 1 infeasible / unbounded / violated verdicts (a
report is still written), 2 usage or input errors, 3 internal inconsistency.
Reports are deterministic JSON on standard output; diagnostics go to
standard error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from . import __version__
from .exact import as_rational
from .io import (
    FormatError,
    decomposition_to_dict,
    dumps,
    file_sha256,
    load_json,
    oracle_to_dict,
    problem_from_dict,
    problem_to_dict,
    rat,
    report_to_dict,
    sclp_from_dict,
    sclp_solution_to_dict,
    sequence_from_dict,
)
from .model import FeasibilityClass, SolutionPair, classify, evaluate_objective, horizon
from .parametric import assemble_validity_matrix, evaluate_formula, sweep_T, validity_interval_T, validity_membership
from .rates import DimensionError
from .sclp import NoOptimalExists, discretize_oracle, encode_extension, extract_from_report
from .search import InternalInconsistency, solve, verify_certificate

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def decimal_string(q: Fraction, digits: int = 30) -> str:
    """Display-only decimal rendering with ``digits`` significant digits."""
    with localcontext() as ctx:
        ctx.prec = digits
        value = Decimal(q.numerator) / Decimal(q.denominator)
        return format(value, "f")


def _rational_arg(text: str) -> Fraction:
    try:
        return as_rational(text)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _meta(args, *paths) -> dict:
    return {
        "tool": "mclp",
        "version": __version__,
        "command": args.verb,
        "inputs": [{"file": Path(p).name, "sha256": file_sha256(p)} for p in paths],
    }


def _emit(doc: dict, out_file: Path | None = None) -> None:
    text = dumps(doc)
    sys.stdout.write(text)
    if out_file is not None:
        out_file.write_text(text, encoding="utf-8")


def _out_dir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_T(args) -> Fraction:
    if args.T is None:
        raise UsageError(f"{args.verb} needs --T")
    try:
        return horizon(args.T)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_problem(path):
    return problem_from_dict(load_json(path))


def verification_dict(res) -> dict:
    return {"verdict": res.kind, "violation": res.violation}


# --------------------------------------------------------------------------
# plot data


def _write_series(path: Path, records) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "t", "value", "value_decimal"])
        for kind, t, value in records:
            writer.writerow([kind, rat(t), rat(value), decimal_string(Fraction(value))])


def plot_series(sol: SolutionPair) -> dict:
    """Named series of ``(kind, t, value)`` records.

    ``point`` records give the cumulative control or the state at a
    breakpoint (right-continuous, after a time-0 impulse); ``impulse`` and
    ``jump`` records give the mass of a jump.  Dual series use dual time.
    """
    T = sol.T
    bp = sol.breakpoints
    series = {}
    for j in range(sol.J):
        U = sol.u0[j]
        recs = [("impulse", 0, sol.u0[j]), ("point", 0, U)]
        for n in range(sol.N):
            U += sol.tau[n] * sol.u_rates[n][j]
            recs.append(("point", bp[n + 1], U))
        recs.append(("impulse", T, sol.uN[j]))
        series[f"U{j + 1}"] = recs
    for k in range(sol.K):
        recs = [("point", t, x[k]) for t, x in zip(bp, sol.x_at)]
        recs.append(("jump", T, sol.xN_jump[k] - sol.x_at[-1][k]))
        series[f"x{k + 1}"] = recs
    # dual side in dual time s = T - t; its first interval is the last primal one
    for k in range(sol.K):
        P = sol.pN[k]
        recs = [("impulse", 0, sol.pN[k]), ("point", 0, P)]
        for n in range(sol.N - 1, -1, -1):
            P += sol.tau[n] * sol.p_rates[n][k]
            recs.append(("point", T - bp[n], P))
        recs.append(("impulse", T, sol.p0[k]))
        series[f"P{k + 1}"] = recs
    for j in range(sol.J):
        recs = [("point", T - bp[n], sol.q_at[n][j]) for n in range(sol.N, -1, -1)]
        recs.append(("jump", T, sol.q0_jump[j] - sol.q_at[0][j]))
        series[f"q{j + 1}"] = recs
    return series


def emit_plot_data(sol: SolutionPair, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, recs in plot_series(sol).items():
        path = directory / f"{name}.csv"
        _write_series(path, recs)
        written.append(path)
    return written


def _sweep_csv(dec, path: Path, samples: int = 5) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["regime", "quantity", "T", "value", "value_decimal"])
        for r, reg in enumerate(dec.regimes, start=1):
            if reg.formulas is None:
                continue
            ts = [reg.lo + (reg.hi - reg.lo) * Fraction(i, samples - 1) for i in range(samples)]
            for name, formula in reg.formulas.items():
                for t in ts:
                    v = evaluate_formula(formula, t)
                    writer.writerow([r, name, rat(t), rat(v), decimal_string(v)])
            if reg.objective is not None:
                a0, a1, a2 = reg.objective
                for t in ts:
                    v = a0 + a1 * t + a2 * t * t
                    writer.writerow([r, "objective", rat(t), rat(v), decimal_string(v)])


# --------------------------------------------------------------------------
# verbs


def cmd_classify(args) -> int:
    problem = _load_problem(args.problem)
    T = _require_T(args)
    verdict = classify(problem, T)
    _emit({"meta": _meta(args, args.problem), "T": rat(T), "verdict": verdict.value})
    return EXIT_OK if verdict is FeasibilityClass.BOTH_OPTIMAL else EXIT_VERDICT


def cmd_solve(args) -> int:
    problem = _load_problem(args.problem)
    T = _require_T(args)
    out = _out_dir(args)
    report = solve(problem, T)
    doc = report_to_dict(report, problem, T)
    doc["meta"] = _meta(args, args.problem)
    doc["problem"] = problem_to_dict(problem)
    if report.certificate is not None:
        check = verify_certificate(problem, T, report.certificate, report.strict)
        if not check.optimal:
            raise InternalInconsistency(f"the solver's own certificate does not verify: {check.violation}")
        doc["verification"] = verification_dict(check)
        if out is not None:
            emit_plot_data(report.solution, out / "plot")
    _emit(doc, None if out is None else out / "report.json")
    return EXIT_OK if report.verdict is FeasibilityClass.BOTH_OPTIMAL else EXIT_VERDICT


def _load_certificate(path, problem):
    doc = load_json(path)
    mode = "strict"
    if isinstance(doc, dict) and "certificate" in doc:
        doc = doc["certificate"]
    if isinstance(doc, dict) and "mode" in doc:
        mode = doc["mode"]
        if mode not in ("strict", "weak"):
            raise FormatError(f"certificate mode must be strict or weak, got {mode!r}")
    return sequence_from_dict(doc, problem.K, problem.J), mode


def cmd_verify(args) -> int:
    problem = _load_problem(args.problem)
    T = _require_T(args)
    seq, mode = _load_certificate(args.certificate, problem)
    if args.mode is not None:
        mode = args.mode
    try:
        res = verify_certificate(problem, T, seq, mode == "strict")
    except ValueError as exc:
        # e.g. non-adjacent or singular bases: the certificate is malformed
        raise UsageError(f"certificate cannot be assembled: {exc}") from exc
    doc = {"meta": _meta(args, args.problem, args.certificate), "T": rat(T), "mode": mode}
    doc["verification"] = verification_dict(res)
    if res.optimal:
        doc["objective"] = rat(evaluate_objective(problem, T, res.solution))
    _emit(doc)
    return EXIT_OK if res.optimal else EXIT_VERDICT


def cmd_sweep(args) -> int:
    problem = _load_problem(args.problem)
    if args.T_max is None:
        raise UsageError("sweep needs --T-max")
    if args.T_max <= 0:
        raise UsageError("--T-max must be positive")
    out = _out_dir(args)
    dec = sweep_T(problem, args.T_max)
    doc = decomposition_to_dict(dec, problem)
    doc["meta"] = _meta(args, args.problem)
    if out is not None:
        _sweep_csv(dec, out / "regimes.csv")
    _emit(doc, None if out is None else out / "sweep.json")
    return EXIT_OK if dec.regimes else EXIT_VERDICT


def cmd_validity(args) -> int:
    problem = _load_problem(args.problem)
    seq, _ = _load_certificate(args.certificate, problem)
    doc = {"meta": _meta(args, args.problem, args.certificate)}
    try:
        lo, hi = validity_interval_T(problem, seq)
    except ValueError as exc:
        doc["interval"] = None
        doc["reason"] = str(exc)
        _emit(doc)
        return EXIT_VERDICT
    doc["interval"] = [rat(lo), "inf" if hi is None else rat(hi)]
    status = EXIT_OK
    if args.T is not None:
        T = _require_T(args)
        vm = assemble_validity_matrix(problem, seq)
        inside = validity_membership(vm, problem.beta, problem.gamma, T).inside
        doc["T"] = rat(T)
        doc["inside"] = inside
        status = EXIT_OK if inside else EXIT_VERDICT
    _emit(doc)
    return status


def cmd_encode_sclp(args) -> int:
    sclp = sclp_from_dict(load_json(args.sclp))
    doc = problem_to_dict(encode_extension(sclp))
    _emit(doc, None if args.out is None else Path(args.out))
    return EXIT_OK


def cmd_extract_sclp(args) -> int:
    sclp = sclp_from_dict(load_json(args.sclp))
    T = _require_T(args)
    problem = encode_extension(sclp)
    report = solve(problem, T)
    doc = {"meta": _meta(args, args.sclp), "T": rat(T), "verdict": report.verdict.value}
    if report.solution is None:
        _emit(doc)
        return EXIT_VERDICT
    out = extract_from_report(report, sclp)
    doc["extension_objective"] = rat(report.objective)
    doc["sclp"] = sclp_solution_to_dict(out)
    _emit(doc)
    return EXIT_VERDICT if isinstance(out, NoOptimalExists) else EXIT_OK


def cmd_oracle(args) -> int:
    problem = _load_problem(args.problem)
    T = _require_T(args)
    if args.grid is None or args.grid < 1:
        raise UsageError("oracle needs --grid with a positive integer")
    res = discretize_oracle(problem, T, args.grid)
    doc = oracle_to_dict(res)
    doc["meta"] = _meta(args, args.problem)
    doc["T"] = rat(T)
    _emit(doc)
    return EXIT_OK if res.objective_bound is not None else EXIT_VERDICT


def cmd_selftest(args) -> int:
    from .corpus import run_selftest

    rows = run_selftest()
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        sys.stdout.write(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}\n")
    failed = sum(1 for _, ok, _ in rows if not ok)
    sys.stdout.write(f"{len(rows) - failed}/{len(rows)} passed\n")
    return EXIT_OK if failed == 0 else EXIT_INTERNAL


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mclp", description="Exact solver for M-CLP problems.")
    parser.add_argument("--version", action="version", version=f"mclp {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add(name, func, help_text, problem=True):
        p = sub.add_parser(name, help=help_text)
        if problem:
            p.add_argument("problem", help="problem JSON file")
        p.set_defaults(func=func)
        return p

    p = add("classify", cmd_classify, "feasibility class at horizon T")
    p.add_argument("--T", type=_rational_arg)
    p = add("solve", cmd_solve, "solve and certify at horizon T")
    p.add_argument("--T", type=_rational_arg)
    p.add_argument("--out", help="directory for report.json and plot CSV files")
    p = add("verify", cmd_verify, "re-validate a certificate")
    p.add_argument("certificate", help="certificate JSON (or a solve report)")
    p.add_argument("--T", type=_rational_arg)
    p.add_argument("--mode", choices=("strict", "weak"))
    p = add("sweep", cmd_sweep, "regime decomposition over (0, T_max]")
    p.add_argument("--T-max", dest="T_max", type=_rational_arg)
    p.add_argument("--out", help="directory for sweep.json and regimes.csv")
    p = add("validity", cmd_validity, "validity interval in T of a certificate")
    p.add_argument("certificate")
    p.add_argument("--T", type=_rational_arg)
    p = add("encode-sclp", cmd_encode_sclp, "M-CLP extension of an SCLP file", problem=False)
    p.add_argument("sclp", help="SCLP JSON file")
    p.add_argument("--out", help="write the problem JSON here as well")
    p = add("extract-sclp", cmd_extract_sclp, "solve the extension and extract an SCLP solution", problem=False)
    p.add_argument("sclp")
    p.add_argument("--T", type=_rational_arg)
    p = add("oracle", cmd_oracle, "uniform-grid discretization lower bound")
    p.add_argument("--T", type=_rational_arg)
    p.add_argument("--grid", type=int)
    add("selftest", cmd_selftest, "run the built-in example corpus", problem=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, DimensionError) as exc:
        sys.stderr.write(f"mclp {args.verb}: {exc}\n")
        return EXIT_USAGE
    except (InternalInconsistency, RuntimeError) as exc:
        sys.stderr.write(f"mclp {args.verb}: internal inconsistency: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
