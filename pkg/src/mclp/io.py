"""JSON (de)serialization with exact rationals.

Rationals are written as integer strings or ``"p/q"``; index sets and basis
variable names are 1-based in files (``"u1"``, ``"xdot2"``) and 0-based in
memory.  ``dumps`` is deterministic so that identical inputs produce
byte-identical reports.
"""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path

from .exact import RatMatrix, as_rational, format_rational
from .model import MclpProblem, SolutionPair
from .rates import basis_variable_name, parse_basis_variable
from .sclp import DiscretizationResult, NoOptimalExists, SclpProblem, SclpSolution
from .structure import BaseSequence, Family, Layout


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def rat(q) -> str:
    return format_rational(Fraction(q))


def rvec(v) -> list:
    return [rat(x) for x in v]


def _parse_rat(value, where: str) -> Fraction:
    try:
        return as_rational(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def _parse_vec(value, where: str) -> tuple:
    if not isinstance(value, list):
        raise FormatError(f"{where}: expected a list")
    return tuple(_parse_rat(x, f"{where}[{i}]") for i, x in enumerate(value))


def _parse_mat(value, where: str, cols: int | None = None) -> RatMatrix:
    if not isinstance(value, list) or any(not isinstance(r, list) for r in value):
        raise FormatError(f"{where}: expected a list of rows")
    rows = [_parse_vec(r, f"{where}[{i}]") for i, r in enumerate(value)]
    try:
        return RatMatrix(rows, cols=cols if not rows else None)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from exc


def _require(doc: dict, keys, what: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError(f"{what} must be a JSON object")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FormatError(f"{what} is missing {', '.join(missing)}")


# --------------------------------------------------------------------------
# problems


def problem_from_dict(doc: dict) -> MclpProblem:
    _require(doc, ("A", "beta", "b", "gamma", "c"), "problem")
    try:
        return MclpProblem(
            _parse_mat(doc["A"], "A"),
            _parse_vec(doc["beta"], "beta"),
            _parse_vec(doc["b"], "b"),
            _parse_vec(doc["gamma"], "gamma"),
            _parse_vec(doc["c"], "c"),
        )
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def problem_to_dict(problem: MclpProblem) -> dict:
    return {
        "A": [rvec(r) for r in problem.A.entries],
        "beta": rvec(problem.beta),
        "b": rvec(problem.b),
        "gamma": rvec(problem.gamma),
        "c": rvec(problem.c),
    }


def sclp_from_dict(doc: dict) -> SclpProblem:
    _require(doc, ("G", "F", "H", "alpha", "a", "b", "gamma", "c", "d"), "SCLP problem")
    G = _parse_mat(doc["G"], "G")
    d = _parse_vec(doc["d"], "d")
    b = _parse_vec(doc["b"], "b")
    try:
        return SclpProblem(
            G,
            _parse_mat(doc["F"], "F", cols=len(d)) if doc["F"] else [],
            _parse_mat(doc["H"], "H", cols=G.cols) if doc["H"] else [],
            _parse_vec(doc["alpha"], "alpha"),
            _parse_vec(doc["a"], "a"),
            b,
            _parse_vec(doc["gamma"], "gamma"),
            _parse_vec(doc["c"], "c"),
            d,
        )
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def sclp_to_dict(sclp: SclpProblem) -> dict:
    return {
        "G": [rvec(r) for r in sclp.G.entries],
        "F": [rvec(r) for r in sclp.F.entries] if sclp.n_x else [],
        "H": [rvec(r) for r in sclp.H.entries],
        "alpha": rvec(sclp.alpha),
        "a": rvec(sclp.a),
        "b": rvec(sclp.b_cap),
        "gamma": rvec(sclp.gamma_s),
        "c": rvec(sclp.c_s),
        "d": rvec(sclp.d),
    }


# --------------------------------------------------------------------------
# certificates and solutions


def _one_based(s) -> list:
    return sorted(i + 1 for i in s)


def sequence_to_dict(seq: BaseSequence, J: int) -> dict:
    return {
        "bases": [[basis_variable_name(i, J) for i in b] for b in seq.bases],
        "K0": _one_based(seq.K0),
        "J0": _one_based(seq.J0),
        "KN1": _one_based(seq.KN1),
        "JN1": _one_based(seq.JN1),
    }


def _index_set(value, limit: int, where: str) -> frozenset:
    if not isinstance(value, list) or any(not isinstance(i, int) or isinstance(i, bool) for i in value):
        raise FormatError(f"{where}: expected a list of 1-based integers")
    if any(not 1 <= i <= limit for i in value):
        raise FormatError(f"{where}: index out of range 1..{limit}")
    return frozenset(i - 1 for i in value)


def sequence_from_dict(doc: dict, K: int, J: int) -> BaseSequence:
    _require(doc, ("bases", "K0", "J0", "KN1", "JN1"), "certificate")
    if not isinstance(doc["bases"], list) or not doc["bases"]:
        raise FormatError("certificate: bases must be a nonempty list")
    bases = []
    for n, b in enumerate(doc["bases"]):
        if not isinstance(b, list) or len(b) != K:
            raise FormatError(f"certificate: basis {n + 1} must list {K} variables")
        try:
            idx = tuple(sorted(parse_basis_variable(str(v), J, K) for v in b))
        except ValueError as exc:
            raise FormatError(f"certificate: basis {n + 1}: {exc}") from exc
        if len(set(idx)) != K:
            raise FormatError(f"certificate: basis {n + 1} repeats a variable")
        bases.append(idx)
    return BaseSequence(
        tuple(bases),
        _index_set(doc["K0"], K, "K0"),
        _index_set(doc["J0"], J, "J0"),
        _index_set(doc["KN1"], K, "KN1"),
        _index_set(doc["JN1"], J, "JN1"),
    )


def solution_to_dict(sol: SolutionPair) -> dict:
    return {
        "T": rat(sol.T),
        "tau": rvec(sol.tau),
        "breakpoints": rvec(sol.breakpoints),
        "u0": rvec(sol.u0),
        "uN": rvec(sol.uN),
        "p0": rvec(sol.p0),
        "pN": rvec(sol.pN),
        "x0": rvec(sol.x0),
        "xN_jump": rvec(sol.xN_jump),
        "qN": rvec(sol.qN),
        "q0_jump": rvec(sol.q0_jump),
        "u_rates": [rvec(r) for r in sol.u_rates],
        "xdot": [rvec(r) for r in sol.xdot],
        "p_rates": [rvec(r) for r in sol.p_rates],
        "qdot": [rvec(r) for r in sol.qdot],
        "x_at": [rvec(r) for r in sol.x_at],
        "q_at": [rvec(r) for r in sol.q_at],
    }


def family_to_dict(family: Family, K: int, J: int, N: int) -> dict:
    names = Layout(K, J, N).names()
    out = {
        "dim": family.dim,
        "bounded": family.bounded,
        "point": dict(zip(names, rvec(family.point))),
        "directions": [dict(zip(names, rvec(d))) for d in family.directions],
    }
    if family.dim == 1:
        out["theta_range"] = ["0", "1"] if family.bounded else ["0", "inf"]
    return out


def report_to_dict(report, problem: MclpProblem, T) -> dict:
    doc = {"T": rat(T), "verdict": report.verdict.value}
    if report.certificate is None:
        return doc
    seq = report.certificate
    cert = sequence_to_dict(seq, problem.J)
    cert["mode"] = "strict" if report.strict else "weak"
    doc.update(
        certificate=cert,
        solution=solution_to_dict(report.solution),
        objective=rat(report.objective),
        dual_objective=rat(report.dual_objective),
        method=report.method,
        stats=report.stats.as_dict(),
        family=None if report.family is None else family_to_dict(report.family, problem.K, problem.J, seq.N),
    )
    if report.perturbation is not None:
        pert = report.perturbation
        doc["perturbation"] = {
            "alpha": rat(pert["alpha"]),
            "epsilon": rvec(pert["epsilon"]),
            "delta": rvec(pert["delta"]),
            "rule": pert.get("rule"),
            "trace_length": len(pert.get("trace", ())),
        }
    return doc


def decomposition_to_dict(dec, problem: MclpProblem) -> dict:
    regimes = []
    for reg in dec.regimes:
        entry = {
            "interval": [rat(reg.lo), rat(reg.hi)],
            "open_ended": reg.open_ended,
            "certificate": sequence_to_dict(reg.sequence, problem.J),
            "note": reg.note,
        }
        if reg.formulas is not None:
            entry["formulas"] = {k: {"constant": rat(i), "slope": rat(s)} for k, (i, s) in reg.formulas.items()}
        if reg.objective is not None:
            entry["objective"] = {f"T^{k}": rat(v) for k, v in enumerate(reg.objective)}
        regimes.append(entry)
    points = [
        {
            "T": rat(p["T"]),
            "status": "unique" if p["unique"] else "non-unique",
            "left": sequence_to_dict(p["left"], problem.J),
            "right": None if p["right"] is None else sequence_to_dict(p["right"], problem.J),
        }
        for p in dec.boundary_points
    ]
    return {
        "T_max": rat(dec.T_max),
        "regimes": regimes,
        "breakpoints": [rat(t) for t in dec.breakpoints],
        "boundary_points": points,
        "truncated_at": None if dec.truncated_at is None else rat(dec.truncated_at),
    }


def sclp_solution_to_dict(sol) -> dict:
    if isinstance(sol, NoOptimalExists):
        return {
            "status": "NoOptimalExists",
            "impulses": [{"t": rat(t), "coordinate": name, "mass": rat(m)} for t, name, m in sol.impulses],
        }
    return {
        "status": "Extracted",
        "T": rat(sol.T),
        "tau": rvec(sol.tau),
        "breakpoints": rvec(sol.breakpoints),
        "u_rates": [rvec(r) for r in sol.u_rates],
        "x_at": [rvec(x) for x in sol.x_at],
    }


def oracle_to_dict(res: DiscretizationResult) -> dict:
    doc = {
        "grid_size": res.grid_size,
        "lp_status": res.kind.value,
        "objective_bound": None if res.objective_bound is None else rat(res.objective_bound),
        "dual_discretization_infeasible": res.dual_infeasible,
    }
    if res.trajectory is not None:
        doc["u0"] = rvec(res.trajectory.u0)
        doc["uN"] = rvec(res.trajectory.uN)
        doc["u_rates"] = [rvec(r) for r in res.trajectory.u_rates]
    return doc
