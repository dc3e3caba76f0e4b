"""Separated continuous linear programs through their M-CLP extension.

An SCLP instance

    max  int_0^T (gamma + (T - t) c)^T u(t) + d^T x(t) dt
    s.t. int_0^t G u(s) ds + F x(t) <= alpha + a t,   H u(t) <= b,   u, x >= 0

is encoded as an M-CLP over the cumulative controls
``U = (U_*, U_s, U^+, U^-)`` where ``U_*`` integrates ``u``, ``U_s`` integrates
the slack of ``H u <= b`` and ``x = U^+ - U^-``.  The file also hosts the
time-discretization oracle, a finite LP restriction of any M-CLP on a uniform
grid whose optimum bounds the continuous optimum from below.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from .exact import RatMatrix, as_rational, as_vector, block_matrix, dot, vec_add, vec_scale, vec_sub
from .lp import LpInstance, LpKind, LpOutcome, SignClass, is_feasible, solve_lp
from .model import MclpProblem, SolutionPair, horizon
from .structure import family_solution


def _matrix(data, rows: int | None = None, cols: int | None = None) -> RatMatrix:
    """Coerce to RatMatrix; an empty block becomes ``rows x cols`` of zero size."""
    if isinstance(data, RatMatrix):
        if data.rows == 0 and data.cols == 0 and rows is not None and 0 in (rows, cols):
            return RatMatrix.zeros(rows, cols)
        return data
    data = [list(r) for r in data]
    if not data or not any(data):
        if rows is None or 0 not in (rows, cols):
            raise ValueError("a required matrix block is empty")
        return RatMatrix.zeros(rows, cols)
    return RatMatrix(data)


@dataclass(frozen=True)
class SclpProblem:
    """SCLP data.  ``F`` and ``H`` may be empty (zero columns / zero rows)."""

    G: RatMatrix
    F: RatMatrix
    H: RatMatrix
    alpha: tuple
    a: tuple
    b_cap: tuple
    gamma_s: tuple
    c_s: tuple
    d: tuple

    def __post_init__(self):
        G = _matrix(self.G)
        m, n = G.rows, G.cols
        d, b_cap = as_vector(self.d), as_vector(self.b_cap)
        F = _matrix(self.F, rows=m, cols=len(d))
        H = _matrix(self.H, rows=len(b_cap), cols=n)
        if F.rows != m or F.cols != len(d):
            raise ValueError(f"F must be {m} x {len(d)} (rows of G by entries of d)")
        if H.rows != len(b_cap) or H.cols != n:
            raise ValueError(f"H must be {len(b_cap)} x {n} (entries of b by columns of G)")
        vectors = {"alpha": m, "a": m, "gamma_s": n, "c_s": n}
        for name, size in vectors.items():
            v = as_vector(getattr(self, name))
            if len(v) != size:
                raise ValueError(f"{name} needs {size} entries, got {len(v)}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "b_cap", b_cap)
        object.__setattr__(self, "d", d)

    @property
    def n_u(self) -> int:
        return self.G.cols

    @property
    def n_x(self) -> int:
        return len(self.d)

    @property
    def n_h(self) -> int:
        return len(self.b_cap)

    @property
    def extension_width(self) -> int:
        return self.n_u + self.n_h + 2 * self.n_x

    def column_name(self, j: int) -> str:
        n, r, p = self.n_u, self.n_h, self.n_x
        if j < n:
            return f"U*[{j + 1}]"
        if j < n + r:
            return f"Us[{j - n + 1}]"
        if j < n + r + p:
            return f"U+[{j - n - r + 1}]"
        return f"U-[{j - n - r - p + 1}]"


def encode_extension(sclp: SclpProblem) -> MclpProblem:
    """Block M-CLP whose optimum equals the SCLP supremum.

    The ``d`` weights go into the ``(T - t)`` part of the objective on the
    ``U^+``/``U^-`` columns: ``int (T - t) d^T dX = int d^T X(t) dt`` for a
    cumulative ``X`` started at zero, which is the SCLP term ``int d^T x dt``.
    """
    m, n = sclp.G.rows, sclp.G.cols
    r, p = sclp.n_h, sclp.n_x
    Z = RatMatrix.zeros
    I_p, I_r = RatMatrix.identity(p), RatMatrix.identity(r)
    blocks = [[sclp.G, Z(m, r), sclp.F, -sclp.F]]
    if p:
        blocks.append([Z(p, n), Z(p, r), -I_p, I_p])
    if r:
        blocks.append([sclp.H, I_r, Z(r, p), Z(r, p)])
        blocks.append([-sclp.H, -I_r, Z(r, p), Z(r, p)])
    blocks = [[blk for blk in row if blk.cols] for row in blocks]
    A = block_matrix(blocks)
    zero = Fraction(0)
    beta = sclp.alpha + (zero,) * (p + 2 * r)
    b = sclp.a + (zero,) * p + sclp.b_cap + tuple(-v for v in sclp.b_cap)
    gamma = sclp.gamma_s + (zero,) * (r + 2 * p)
    c = sclp.c_s + (zero,) * r + sclp.d + tuple(-v for v in sclp.d)
    return MclpProblem(A, beta, b, gamma, c)


# --------------------------------------------------------------------------
# primal trajectories and SCLP solutions


@dataclass(frozen=True)
class PrimalTrajectory:
    """Primal side only: impulses at 0 and T plus constant rates per interval."""

    T: Fraction
    u0: tuple
    uN: tuple
    tau: tuple
    u_rates: tuple

    @property
    def breakpoints(self) -> tuple:
        t = [Fraction(0)]
        for tau in self.tau:
            t.append(t[-1] + tau)
        return tuple(t)

    def cumulative(self) -> list:
        """``U(t_n)`` for every breakpoint, before the terminal impulse."""
        U = [self.u0]
        for tau, rate in zip(self.tau, self.u_rates):
            U.append(vec_add(U[-1], vec_scale(tau, rate)))
        return U

    def slack(self, problem: MclpProblem) -> list:
        return [vec_sub(vec_add(problem.beta, vec_scale(t, problem.b)), problem.A.apply(U))
                for t, U in zip(self.breakpoints, self.cumulative())]


def trajectory_violations(problem: MclpProblem, traj: PrimalTrajectory) -> list[str]:
    issues = []
    if sum(traj.tau, Fraction(0)) != traj.T:
        issues.append("interval lengths do not sum to T")
    if any(v < 0 for v in traj.u0) or any(v < 0 for v in traj.uN):
        issues.append("negative impulse")
    if any(v < 0 for r in traj.u_rates for v in r) or any(t < 0 for t in traj.tau):
        issues.append("negative rate or interval length")
    for t, x in zip(traj.breakpoints, traj.slack(problem)):
        if any(v < 0 for v in x):
            issues.append(f"primal constraint fails at t = {t}")
    final = vec_add(traj.cumulative()[-1], traj.uN)
    rhs = vec_add(problem.beta, vec_scale(traj.T, problem.b))
    if any(v < 0 for v in vec_sub(rhs, problem.A.apply(final))):
        issues.append("primal constraint fails at T")
    return issues


def trajectory_objective(problem: MclpProblem, traj: PrimalTrajectory) -> Fraction:
    T = traj.T
    total = dot(vec_add(problem.gamma, vec_scale(T, problem.c)), traj.u0) + dot(problem.gamma, traj.uN)
    for t0, tau, rate in zip(traj.breakpoints, traj.tau, traj.u_rates):
        mid = t0 + tau / 2
        total += tau * dot(vec_add(problem.gamma, vec_scale(T - mid, problem.c)), rate)
    return total


def trajectory_of(sol: SolutionPair) -> PrimalTrajectory:
    return PrimalTrajectory(sol.T, sol.u0, sol.uN, sol.tau, sol.u_rates)


@dataclass(frozen=True)
class SclpSolution:
    """Piecewise constant ``u`` and continuous piecewise linear ``x``."""

    T: Fraction
    tau: tuple
    u_rates: tuple
    x_at: tuple

    def __post_init__(self):
        object.__setattr__(self, "T", as_rational(self.T))
        object.__setattr__(self, "tau", as_vector(self.tau))
        object.__setattr__(self, "u_rates", tuple(as_vector(r) for r in self.u_rates))
        object.__setattr__(self, "x_at", tuple(as_vector(x) for x in self.x_at))
        if len(self.u_rates) != len(self.tau) or len(self.x_at) != len(self.tau) + 1:
            raise ValueError("need one rate per interval and one x value per breakpoint")

    @property
    def breakpoints(self) -> tuple:
        t = [Fraction(0)]
        for tau in self.tau:
            t.append(t[-1] + tau)
        return tuple(t)


@dataclass(frozen=True)
class NoOptimalExists:
    """The extension's optimum needs impulses that SCLP cannot represent."""

    impulses: tuple  # (time, coordinate name, mass)


def sclp_violations(sclp: SclpProblem, sol: SclpSolution) -> list[str]:
    issues = []
    if sum(sol.tau, Fraction(0)) != sol.T:
        issues.append("interval lengths do not sum to T")
    for n, rate in enumerate(sol.u_rates):
        if any(v < 0 for v in rate):
            issues.append(f"negative u on interval {n + 1}")
        if sclp.n_h and any(v < 0 for v in vec_sub(sclp.b_cap, sclp.H.apply(rate))):
            issues.append(f"H u <= b fails on interval {n + 1}")
    integral = (Fraction(0),) * sclp.n_u
    for n, (t, x) in enumerate(zip(sol.breakpoints, sol.x_at)):
        if n:
            integral = vec_add(integral, vec_scale(sol.tau[n - 1], sol.u_rates[n - 1]))
        if any(v < 0 for v in x):
            issues.append(f"x(t) negative at t = {t}")
        lhs = vec_add(sclp.G.apply(integral), sclp.F.apply(x) if sclp.n_x else (Fraction(0),) * sclp.G.rows)
        if any(v < 0 for v in vec_sub(vec_add(sclp.alpha, vec_scale(t, sclp.a)), lhs)):
            issues.append(f"integral constraint fails at t = {t}")
    return issues


def sclp_objective(sclp: SclpProblem, sol: SclpSolution) -> Fraction:
    total = Fraction(0)
    for t0, tau, rate, x0, x1 in zip(sol.breakpoints, sol.tau, sol.u_rates, sol.x_at, sol.x_at[1:]):
        mid = t0 + tau / 2
        total += tau * dot(vec_add(sclp.gamma_s, vec_scale(sol.T - mid, sclp.c_s)), rate)
        total += tau * dot(sclp.d, vec_scale(Fraction(1, 2), vec_add(x0, x1)))
    return total


def lift_sclp_solution(sclp: SclpProblem, sol: SclpSolution) -> PrimalTrajectory:
    """Feasible extension trajectory with the same objective value.

    ``U_*`` integrates ``u``, ``U_s`` integrates the slack ``b - H u`` and
    ``x`` is split as ``U^+ - U^-`` by sending increases to ``U^+`` and
    decreases to ``U^-`` (the minimal-variation split), with ``x(0)`` as an
    impulse in ``U^+`` at time 0.
    """
    issues = sclp_violations(sclp, sol)
    if issues:
        raise ValueError("SCLP solution is infeasible: " + "; ".join(issues))
    p, r = sclp.n_x, sclp.n_h
    zero = Fraction(0)
    u0 = (zero,) * (sclp.n_u + r) + sol.x_at[0] + (zero,) * p
    rates = []
    for n, rate in enumerate(sol.u_rates):
        slack = vec_sub(sclp.b_cap, sclp.H.apply(rate)) if r else ()
        slope = tuple((b - a) / sol.tau[n] if sol.tau[n] else zero for a, b in zip(sol.x_at[n], sol.x_at[n + 1]))
        up = tuple(max(s, zero) for s in slope)
        down = tuple(max(-s, zero) for s in slope)
        rates.append(rate + slack + up + down)
    width = sclp.extension_width
    return PrimalTrajectory(sol.T, u0, (zero,) * width, sol.tau, tuple(rates))


def extract_sclp_solution(mclp_sol: SolutionPair | PrimalTrajectory, sclp: SclpProblem) -> SclpSolution | NoOptimalExists:
    """SCLP solution from an extension solution, or the offending impulses."""
    n, r, p = sclp.n_u, sclp.n_h, sclp.n_x
    if len(mclp_sol.u0) != sclp.extension_width:
        raise ValueError(
            f"solution has {len(mclp_sol.u0)} controls, the extension has {sclp.extension_width}"
        )
    bad = []
    for j, v in enumerate(mclp_sol.u0):
        if v != 0 and j < n + r:
            bad.append((Fraction(0), sclp.column_name(j), v))
    for j, v in enumerate(mclp_sol.uN):
        if v != 0:
            bad.append((mclp_sol.T, sclp.column_name(j), v))
    if bad:
        return NoOptimalExists(tuple(bad))
    plus = slice(n + r, n + r + p)
    minus = slice(n + r + p, n + r + 2 * p)
    x = [vec_sub(mclp_sol.u0[plus], mclp_sol.u0[minus])]
    u_rates = []
    for tau, rate in zip(mclp_sol.tau, mclp_sol.u_rates):
        u_rates.append(tuple(rate[:n]))
        x.append(vec_add(x[-1], vec_scale(tau, vec_sub(rate[plus], rate[minus]))))
    return SclpSolution(mclp_sol.T, mclp_sol.tau, tuple(u_rates), tuple(x))


def extract_from_report(report, sclp: SclpProblem) -> SclpSolution | NoOptimalExists:
    """Like ``extract_sclp_solution`` but also tries the ends of a
    one-parameter optimal family, since non-uniqueness can hide an
    impulse-free optimum behind an impulsive representative."""
    if report.solution is None:
        raise ValueError("the report carries no solution")
    first = extract_sclp_solution(report.solution, sclp)
    family = report.family
    if not isinstance(first, NoOptimalExists) or family is None or family.dim != 1 or not family.bounded:
        return first
    problem = encode_extension(sclp)
    for theta in (1, Fraction(1, 2)):
        member = family_solution(problem, report.solution.T, report.certificate, family.at(theta))
        out = extract_sclp_solution(member, sclp)
        if not isinstance(out, NoOptimalExists):
            return out
    return first


# --------------------------------------------------------------------------
# discretization oracle


@dataclass(frozen=True)
class DiscretizationResult:
    grid_size: int
    objective_bound: Fraction | None
    lp_outcome: LpOutcome
    trajectory: PrimalTrajectory | None = None
    dual_infeasible: bool | None = None

    @property
    def kind(self) -> LpKind:
        return self.lp_outcome.kind


def _oracle_lp(problem: MclpProblem, T: Fraction, n: int) -> LpInstance:
    """Variables ``(u0, r_1 .. r_n, uN, slacks)``; rows for grid points 0..n and T."""
    K, J = problem.K, problem.J
    h = T / n
    A = problem.A
    n_ctrl = J * (n + 2)
    n_rows = K * (n + 2)
    rows = []
    rhs = []
    for i in range(n + 2):
        t = T if i == n + 1 else i * h
        for k in range(K):
            row = [Fraction(0)] * (n_ctrl + n_rows)
            for j in range(J):
                row[j] = A[k, j]
                for m in range(min(i, n)):
                    row[J * (m + 1) + j] = h * A[k, j]
                if i == n + 1:
                    row[J * (n + 1) + j] = A[k, j]
            row[n_ctrl + len(rows)] = Fraction(1)
            rows.append(row)
            rhs.append(problem.beta[k] + t * problem.b[k])
    obj = list(vec_add(problem.gamma, vec_scale(T, problem.c)))
    for m in range(n):
        mid = (m + Fraction(1, 2)) * h
        obj += [h * v for v in vec_add(problem.gamma, vec_scale(T - mid, problem.c))]
    obj += list(problem.gamma)
    obj += [Fraction(0)] * n_rows
    return LpInstance(tuple(obj), RatMatrix(rows, cols=n_ctrl + n_rows), tuple(rhs), (SignClass.P,) * (n_ctrl + n_rows))


def dual_discretization_infeasible(problem: MclpProblem, T, theta=None) -> bool:
    """Infeasibility of the three-epoch dual constraint system.

    ``A^T p1 >= gamma + c theta``, ``A^T (p1 + p2) >= gamma + c (T/2 - 2 theta)``,
    ``A^T (p1 + p2 + p3) >= gamma + c (T - theta)`` with ``p >= 0``.  When the
    primal discretization is feasible, infeasibility here certifies that it
    is unbounded.  ``theta`` defaults to ``T / 16``.
    """
    T = horizon(T)
    theta = T / 16 if theta is None else as_rational(theta)
    if not 0 <= 4 * theta < T:
        raise ValueError("theta must satisfy 0 <= 4 theta < T")
    K, J = problem.K, problem.J
    At = problem.A.T
    epochs = (theta, T / 2 - 2 * theta, T - theta)
    width = 3 * K + 3 * J
    rows, rhs = [], []
    for e, s in enumerate(epochs):
        for j in range(J):
            row = [Fraction(0)] * width
            for blk in range(e + 1):
                for k in range(K):
                    row[blk * K + k] = At[j, k]
            row[3 * K + len(rows)] = Fraction(-1)
            rows.append(row)
            rhs.append(problem.gamma[j] + s * problem.c[j])
    inst = LpInstance((Fraction(0),) * width, RatMatrix(rows, cols=width), tuple(rhs), (SignClass.P,) * width)
    return not is_feasible(inst)


def discretize_oracle(problem: MclpProblem, T, n: int, dual_check: bool = True) -> DiscretizationResult:
    """Exact optimum of the uniform-grid restriction with ``n`` cells.

    Within a cell both ``A U(t)`` and ``beta + b t`` are affine, so enforcing
    the constraints at the grid points (and after the impulse at T) makes
    every LP solution feasible for the continuous problem; the LP optimum is a
    lower bound on the M-CLP optimum.
    """
    T = horizon(T)
    if not isinstance(n, int) or n < 1:
        raise ValueError("grid size must be a positive integer")
    inst = _oracle_lp(problem, T, n)
    out = solve_lp(inst)
    traj = None
    bound = None
    if out.optimal:
        J = problem.J
        v = out.primal_values
        h = T / n
        traj = PrimalTrajectory(
            T,
            tuple(v[:J]),
            tuple(v[J * (n + 1) : J * (n + 2)]),
            (h,) * n,
            tuple(tuple(v[J * (m + 1) : J * (m + 2)]) for m in range(n)),
        )
        bound = out.objective_value
    flag = None
    if dual_check and out.kind is not LpKind.INFEASIBLE:
        flag = dual_discretization_infeasible(problem, T)
    return DiscretizationResult(n, bound, out, traj, flag)
