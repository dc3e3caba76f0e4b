"""Built-in example problems and the self-test that runs them.

One-dimensional cases use ``A = [1]`` and unit magnitudes; they are numbered
1..16 by the signs of ``(beta, b, gamma, c)`` in the order
``(+,+,+,+), (+,+,+,-), (+,+,-,+), (+,+,-,-), (+,-,+,+), ...`` so that cases
9..16 repeat 1..8 with ``beta < 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .model import FeasibilityClass, MclpProblem, check_uniqueness_condition, one_dim
from .sclp import SclpProblem, encode_extension, extract_from_report, NoOptimalExists
from .search import solve

BOTH = FeasibilityClass.BOTH_OPTIMAL
PIDU = FeasibilityClass.PRIMAL_INFEASIBLE_DUAL_UNBOUNDED


@dataclass(frozen=True)
class OneDimCase:
    number: int
    signs: tuple
    problem: MclpProblem

    @property
    def feasible_for_all_T(self) -> bool:
        return self.signs[0] > 0 and self.signs[1] > 0

    @property
    def horizon_limit(self) -> Fraction | None:
        """Largest feasible T (``None`` when feasible for all T or never)."""
        beta, b = self.signs[0], self.signs[1]
        if beta > 0 and b < 0:
            return Fraction(-beta, b)
        return None

    def expected_class(self, T) -> FeasibilityClass:
        beta = self.signs[0]
        if beta < 0:
            return PIDU
        limit = self.horizon_limit
        return BOTH if limit is None or T <= limit else PIDU


def one_dim_cases() -> list[OneDimCase]:
    cases = []
    for n, (beta, b, gamma, c) in enumerate(product((1, -1), repeat=4), start=1):
        cases.append(OneDimCase(n, (beta, b, gamma, c), one_dim(beta, b, gamma, c)))
    return cases


# Solution shapes at T = 1/2 for the feasible cases:
# (impulse at 0, impulse at T, number of intervals)
ONE_DIM_SHAPES = {
    1: (True, False, 1),
    2: (False, True, 1),
    3: (False, False, 1),
    4: (False, False, 1),
    5: (True, False, 1),
    6: (False, True, 1),
    7: (False, False, 1),
    8: (False, False, 1),
}


def example_2x2() -> MclpProblem:
    return MclpProblem([[5, 2], [3, 4]], [8, 10], [3, 1], [5, 6], [1, 2])


# certified objective values of the 2x2 example
EXAMPLE_2X2_OBJECTIVES = {
    Fraction(3, 4): Fraction(95045, 4704),
    Fraction(1): Fraction(131, 6),
    Fraction(3, 2): Fraction(1219, 48),
}


def sclp_case(n: int, alpha=1) -> SclpProblem:
    """The three SCLP examples; cases 1 and 2 take ``alpha`` as a parameter."""
    if n == 1:
        return SclpProblem([[1]], [], [], [alpha], [1], [], [1], [1], [])
    if n == 2:
        return SclpProblem([[1]], [], [], [alpha], [1], [], [-1], [1], [])
    if n == 3:
        return SclpProblem([[1, 0], [0, -1]], [], [], [1, 3], [5, -1], [], [-2, -1], [1, -6], [])
    raise ValueError(f"no SCLP case {n}")


def sclp_closed_form(n: int, T, alpha=1) -> Fraction:
    """Known optimal values of the extensions as functions of T."""
    T = Fraction(T)
    al = Fraction(alpha)
    if n == 1:
        a, g, c = 1, 1, 1
        return g * (al + a * T) + c * T * (al + a * T / 2)
    if n == 2:
        a, g, c = 1, -1, 1
        if T <= Fraction(-g, c):
            return Fraction(0)
        return al * (g + c * T) + a * c * T * T / 2 + a * g * (T + Fraction(g, 2 * c))
    if n == 3:
        if T <= 2:
            return Fraction(0)
        if T <= 3:
            return 8 - 9 * T + Fraction(5, 2) * T * T
        return -16 + 8 * T - T * T / 2
    raise ValueError(f"no SCLP case {n}")


def _has_impulse(v) -> bool:
    return any(x != 0 for x in v)


def run_selftest() -> list[tuple[str, bool, str]]:
    """Run the corpus; each row is ``(name, passed, detail)``."""
    rows = []
    half, two = Fraction(1, 2), Fraction(2)
    for case in one_dim_cases():
        name = f"1-d case {case.number} {case.signs}"
        ok, detail = True, []
        for T in (half, two):
            rep = solve(case.problem, T)
            if rep.verdict is not case.expected_class(T):
                ok = False
                detail.append(f"T={T}: {rep.verdict.value}")
                continue
            if rep.verdict is BOTH and rep.objective != rep.dual_objective:
                ok = False
                detail.append(f"T={T}: duality gap")
        if case.number in ONE_DIM_SHAPES:
            sol = solve(case.problem, half).solution
            shape = (_has_impulse(sol.u0), _has_impulse(sol.uN), sol.N)
            if shape != ONE_DIM_SHAPES[case.number]:
                ok = False
                detail.append(f"shape {shape}")
        if case.number in (3, 7) and check_uniqueness_condition(case.problem, 1):
            ok = False
            detail.append("uniqueness not flagged at T = 1")
        if case.number == 3 and solve(case.problem, two).solution.N != 2:
            ok = False
            detail.append("expected two intervals at T = 2")
        rows.append((name, ok, "; ".join(detail) or "ok"))

    problem = example_2x2()
    for T, value in EXAMPLE_2X2_OBJECTIVES.items():
        rep = solve(problem, T)
        ok = rep.objective == value and rep.dual_objective == value
        rows.append((f"2x2 example T={T}", ok, f"objective {rep.objective}"))

    for n, T in ((1, 2), (2, 2), (3, 3), (3, 4)):
        sclp = sclp_case(n)
        rep = solve(encode_extension(sclp), T)
        want = sclp_closed_form(n, T)
        rows.append((f"SCLP case {n} T={T}", rep.objective == want, f"objective {rep.objective}"))
    for alpha, want_none in ((1, True), (0, False)):
        sclp = sclp_case(1, alpha)
        out = extract_from_report(solve(encode_extension(sclp), 2), sclp)
        ok = isinstance(out, NoOptimalExists) == want_none
        if ok and not want_none:
            ok = all(r == (1,) for r in out.u_rates)
        rows.append((f"SCLP case 1 extraction alpha={alpha}", ok, type(out).__name__))
    return rows
