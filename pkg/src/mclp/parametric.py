"""Validity regions of base sequences and the regime decomposition in T.

For a fixed base sequence the certificate conditions are linear in the data
``(beta, gamma, T)``: the unknowns ``v`` (boundary values, interval lengths and
the states at breakpoints) satisfy ``M v = (beta, gamma, 0, T, 0, ...)`` with
``v >= 0``.  ``M`` depends only on ``A``, ``b``, ``c`` and the sequence, so the
set of ``(beta, gamma, T)`` for which the sequence is optimal is a convex
polyhedral cone.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exact import RatMatrix, as_rational, as_vector, dot, vec_add, vec_scale
from .lp import LpInstance, LpKind, Sense, SignClass, solve_lp
from .model import MclpProblem, Side, build_test_lp, check_uniqueness_condition, evaluate_objective
from .search import SolveReport, solve
from .structure import BaseSequence, Layout, _System, validate_certificate


@dataclass(frozen=True)
class ValidityMatrix:
    """``M`` with columns ``(unknowns | states)`` and per-column sign classes.

    Rows are: first boundary equations (K then J), time-interval equations
    (N - 1), the sum of interval lengths, second boundary equations (K then
    J), then one row per state at a breakpoint tying it to the unknowns.
    """

    M: RatMatrix
    sign_class: tuple
    layout: Layout
    state_names: tuple
    sequence: BaseSequence
    K: int
    J: int

    @property
    def n_unknowns(self) -> int:
        return self.layout.size

    @property
    def free_unknowns(self) -> int:
        """Boundary values and interval lengths not fixed at zero."""
        return sum(1 for c in self.sign_class[: self.layout.size] if c is not SignClass.Z)

    @property
    def tau_row(self) -> int:
        return self.K + self.J + self.layout.N - 1

    def rhs(self, beta, gamma, T) -> tuple:
        beta, gamma = as_vector(beta), as_vector(gamma)
        r = [Fraction(0)] * self.M.rows
        r[: self.K] = beta
        r[self.K : self.K + self.J] = gamma
        r[self.tau_row] = as_rational(T)
        return tuple(r)

    def vector_from_solution(self, values: Sequence[Fraction], state_values: Sequence[Fraction]) -> tuple:
        return tuple(values) + tuple(state_values)


def assemble_validity_matrix(problem: MclpProblem, seq: BaseSequence) -> ValidityMatrix:
    # T only enters the right-hand side; any positive value builds the rows
    system = _System(problem, Fraction(1), seq.bases)
    L = system.layout
    n = L.size
    states = [(name, coef) for name, coef, _ in system.quantities if "^" in name]
    ns = len(states)
    rows = [list(r) + [Fraction(0)] * ns for r in system.rows]
    for i, (_, coef) in enumerate(states):
        row = list(coef) + [Fraction(0)] * ns
        row[n + i] = Fraction(-1)
        rows.append(row)
    zeros = set(system.zero_columns(seq))
    classes = tuple(SignClass.Z if i in zeros else SignClass.P for i in range(n)) + (SignClass.P,) * ns
    M = RatMatrix(rows, cols=n + ns)
    return ValidityMatrix(M, classes, L, tuple(name for name, _ in states), seq, problem.K, problem.J)


@dataclass(frozen=True)
class Membership:
    inside: bool
    witness: tuple | None = None


def validity_membership(vm: ValidityMatrix, beta, gamma, T) -> Membership:
    """Is the sequence optimal for data ``(beta, gamma, T)``?  (weak inequalities)"""
    T = as_rational(T)
    if T <= 0:
        raise ValueError("T must be positive")
    inst = LpInstance((Fraction(0),) * vm.M.cols, vm.M, vm.rhs(beta, gamma, T), vm.sign_class)
    out = solve_lp(inst)
    if not out.optimal:
        return Membership(False)
    return Membership(True, out.primal_values)


INF = None  # an unbounded upper endpoint is represented by None


def validity_interval_T(problem: MclpProblem, seq: BaseSequence, beta=None, gamma=None) -> tuple:
    """Smallest and largest T for which ``seq`` is valid with ``beta``, ``gamma`` fixed.

    Returns ``(T_min, T_max)`` with ``T_max = None`` when unbounded.  Raises
    ``ValueError`` when no T >= 0 is valid.
    """
    vm = assemble_validity_matrix(problem, seq)
    beta = problem.beta if beta is None else as_vector(beta)
    gamma = problem.gamma if gamma is None else as_vector(gamma)
    rhs = list(vm.rhs(beta, gamma, 0))
    col = [[Fraction(-1) if i == vm.tau_row else Fraction(0)] for i in range(vm.M.rows)]
    M = vm.M.hstack(RatMatrix(col, cols=1))
    width = M.cols
    obj = [Fraction(0)] * width
    obj[-1] = Fraction(1)
    classes = vm.sign_class + (SignClass.P,)
    lo = solve_lp(LpInstance(tuple(obj), M, tuple(rhs), classes, Sense.MIN))
    if lo.kind is LpKind.INFEASIBLE:
        raise ValueError("the base sequence is not valid for any horizon")
    hi = solve_lp(LpInstance(tuple(obj), M, tuple(rhs), classes, Sense.MAX))
    T_max = None if hi.kind is LpKind.UNBOUNDED else hi.objective_value
    return lo.objective_value, T_max


def feasible_horizon(problem: MclpProblem) -> tuple[bool, Fraction | None]:
    """Whether some ``T >= 0`` makes both sides feasible, and the largest such T.

    The feasible horizons form an interval starting at 0 (``None`` = unbounded).
    """
    ends = []
    for side in (Side.PRIMAL, Side.DUAL):
        base = build_test_lp(problem, Fraction(1), side)
        data = problem if side is Side.PRIMAL else problem.dual()
        K = data.K
        # rows K..2K-1 carry beta + b T; move b T to the left as a variable column
        col = [[Fraction(0)] for _ in range(K)] + [[-x] for x in data.b]
        M = base.A.hstack(RatMatrix(col, cols=1))
        rhs = data.beta + data.beta
        obj = (Fraction(0),) * base.n_vars + (Fraction(1),)
        inst = LpInstance(obj, M, rhs, base.sign_class + (SignClass.P,))
        out = solve_lp(inst)
        if out.kind is LpKind.INFEASIBLE:
            return False, Fraction(0)
        ends.append(None if out.kind is LpKind.UNBOUNDED else out.objective_value)
    finite = [e for e in ends if e is not None]
    return True, (min(finite) if finite else None)


# --------------------------------------------------------------------------
# regime decomposition


@dataclass
class Regime:
    lo: Fraction
    hi: Fraction
    sequence: BaseSequence
    open_ended: bool = False
    formulas: dict | None = None  # name -> (intercept, slope)
    objective: tuple | None = None  # (a0, a1, a2) with value a0 + a1 T + a2 T^2
    note: str | None = None


@dataclass
class RegimeDecomposition:
    regimes: list
    T_max: Fraction
    truncated_at: Fraction | None = None
    boundary_points: list = field(default_factory=list)

    @property
    def breakpoints(self) -> list:
        return [r.hi for r in self.regimes[:-1]]


def _values_at(problem, seq, T, strict) -> tuple | None:
    res = validate_certificate(problem, T, seq, strict)
    if not res.optimal:
        res = validate_certificate(problem, T, seq, False)
    return res.values if res.optimal else None


def _affine_formulas(problem: MclpProblem, reg: Regime, strict: bool) -> None:
    lo, hi = reg.lo, reg.hi
    T1 = lo + (hi - lo) / 4
    T2 = lo + 3 * (hi - lo) / 4
    Tm = (lo + hi) / 2
    v1 = _values_at(problem, reg.sequence, T1, strict)
    v2 = _values_at(problem, reg.sequence, T2, strict)
    vm = _values_at(problem, reg.sequence, Tm, strict)
    if v1 is None or v2 is None or vm is None:
        reg.note = "certificate does not validate at the interpolation points"
        return
    slope = tuple((b - a) / (T2 - T1) for a, b in zip(v1, v2))
    icpt = tuple(a - s * T1 for a, s in zip(v1, slope))
    if tuple(i + s * Tm for i, s in zip(icpt, slope)) != tuple(vm):
        reg.note = "boundary values are not affine on this regime (non-unique representative)"
        return
    names = Layout(problem.K, problem.J, reg.sequence.N).names()
    reg.formulas = {name: (i, s) for name, i, s in zip(names, icpt, slope)}
    # objective is quadratic in T: fit through three points, check a fourth
    pts = [T1, Tm, T2]
    vals = []
    for T in pts:
        vals.append(_objective_at(problem, reg.sequence, T, strict))
    a0, a1, a2 = _quadratic_through(pts, vals)
    T4 = lo + 5 * (hi - lo) / 8
    if a0 + a1 * T4 + a2 * T4 * T4 != _objective_at(problem, reg.sequence, T4, strict):
        reg.note = "objective is not quadratic on this regime"
        return
    reg.objective = (a0, a1, a2)


def _objective_at(problem, seq, T, strict) -> Fraction:
    res = validate_certificate(problem, T, seq, strict)
    if not res.optimal:
        res = validate_certificate(problem, T, seq, False)
    return evaluate_objective(problem, T, res.solution)


def _quadratic_through(xs, ys) -> tuple:
    (x0, x1, x2), (y0, y1, y2) = xs, ys
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    a2 = (d12 - d01) / (x2 - x0)
    a1 = d01 - a2 * (x0 + x1)
    a0 = y0 - a1 * x0 - a2 * x0 * x0
    return a0, a1, a2


def evaluate_formula(formula: tuple, T) -> Fraction:
    i, s = formula
    return i + s * as_rational(T)


def sweep_T(problem: MclpProblem, T_max, with_formulas: bool = True) -> RegimeDecomposition:
    """Cover ``(0, T_max]`` by validity intervals of optimal base sequences."""
    T_max = as_rational(T_max)
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    feasible, hi_feas = feasible_horizon(problem)
    if not feasible or hi_feas == 0:
        return RegimeDecomposition([], T_max, truncated_at=Fraction(0))
    end = T_max if hi_feas is None else min(T_max, hi_feas)
    truncated = hi_feas if (hi_feas is not None and hi_feas < T_max) else None
    regimes: list[Regime] = []
    strict_of: dict = {}

    def cover(a: Fraction, b: Fraction) -> None:
        for frac in (Fraction(3, 7), Fraction(2, 7), Fraction(4, 7)):
            T = a + (b - a) * frac
            report = solve(problem, T)
            if report.certificate is None:
                raise RuntimeError(f"no certificate at T = {T} inside the feasible range")
            lo, hi = validity_interval_T(problem, report.certificate)
            if hi is None or lo < hi:
                break
        open_ended = hi is None
        lo_c = max(lo, a)
        hi_c = b if hi is None else min(hi, b)
        reg = Regime(lo_c, hi_c, report.certificate, open_ended=open_ended and hi_c == b)
        strict_of[id(reg)] = report.strict
        regimes.append(reg)
        if lo_c > a:
            cover(a, lo_c)
        if hi_c < b:
            cover(hi_c, b)

    cover(Fraction(0), end)
    regimes.sort(key=lambda r: r.lo)
    if with_formulas:
        for reg in regimes:
            _affine_formulas(problem, reg, strict_of[id(reg)])
    points = []
    for left, right in zip(regimes, regimes[1:]):
        T = left.hi
        points.append(
            {
                "T": T,
                "unique": check_uniqueness_condition(problem, T),
                "left": left.sequence,
                "right": right.sequence,
            }
        )
    last = regimes[-1].hi
    if truncated is not None and last > 0:
        points.append({"T": last, "unique": check_uniqueness_condition(problem, last), "left": regimes[-1].sequence, "right": None})
    return RegimeDecomposition(regimes, T_max, truncated, points)
