"""Problem and solution data, objectives, feasibility classes and the finite
side conditions (Test-LP, Slater, non-degeneracy) of constant-coefficient
continuous linear programs.

The primal problem is

    max  int_{0-}^T (gamma + (T - t) c)^T dU(t)
    s.t. A U(t) + x(t) = beta + b t,  x(t) >= 0,  U nondecreasing, U(0-) = 0,

and the dual is

    min  int_{0-}^T (beta + (T - s) b)^T dP(s)
    s.t. A^T P(s) - q(s) = gamma + c s,  q(s) >= 0,  P nondecreasing.

The dual runs in reversed time: dual time ``s`` corresponds to primal time
``T - s``.  It is the primal problem for the data (-A^T, -gamma, -c, -beta, -b)
with the objective negated, and :meth:`MclpProblem.dual` returns that data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .exact import (
    RatMatrix,
    as_rational,
    as_vector,
    block_matrix,
    dot,
    is_general_position,
    vec_add,
    vec_scale,
    vec_sub,
)
from .lp import LpInstance, LpKind, SignClass, solve_lp, is_feasible


class Side(Enum):
    PRIMAL = "primal"
    DUAL = "dual"


class FeasibilityClass(Enum):
    BOTH_OPTIMAL = "BothOptimal"
    BOTH_INFEASIBLE = "BothInfeasible"
    PRIMAL_INFEASIBLE_DUAL_UNBOUNDED = "PrimalInfeasibleDualUnbounded"
    DUAL_INFEASIBLE_PRIMAL_UNBOUNDED = "DualInfeasiblePrimalUnbounded"


def horizon(T) -> Fraction:
    """Validate a time horizon.  ``T = 0`` is a plain LP and is refused."""
    T = as_rational(T)
    if T <= 0:
        raise ValueError(f"time horizon must be positive, got {T}")
    return T


@dataclass(frozen=True)
class MclpProblem:
    A: RatMatrix
    beta: tuple
    b: tuple
    gamma: tuple
    c: tuple

    def __post_init__(self):
        A = self.A if isinstance(self.A, RatMatrix) else RatMatrix(self.A)
        object.__setattr__(self, "A", A)
        for name in ("beta", "b", "gamma", "c"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        if len(self.beta) != A.rows or len(self.b) != A.rows:
            raise ValueError(f"beta and b need {A.rows} entries (rows of A)")
        if len(self.gamma) != A.cols or len(self.c) != A.cols:
            raise ValueError(f"gamma and c need {A.cols} entries (columns of A)")

    @property
    def K(self) -> int:
        return self.A.rows

    @property
    def J(self) -> int:
        return self.A.cols

    def dual(self) -> "MclpProblem":
        """The dual written as a primal problem (with negated objective)."""
        return MclpProblem(
            -self.A.T,
            tuple(-g for g in self.gamma),
            tuple(-x for x in self.c),
            tuple(-x for x in self.beta),
            tuple(-x for x in self.b),
        )

    def with_data(self, **changes) -> "MclpProblem":
        data = dict(A=self.A, beta=self.beta, b=self.b, gamma=self.gamma, c=self.c)
        data.update(changes)
        return MclpProblem(**data)


def one_dim(beta, b, gamma, c, a=1) -> MclpProblem:
    """A problem with ``K = J = 1`` and scalar matrix ``a``."""
    return MclpProblem(RatMatrix([[a]]), (beta,), (b,), (gamma,), (c,))


@dataclass(frozen=True)
class SolutionPair:
    """Impulse plus piecewise linear primal/dual solution on ``[0, T]``.

    Interval ``n`` (0-based here) spans primal times ``(t_n, t_{n+1})``; on the
    dual side it spans dual times ``(T - t_{n+1}, T - t_n)``.  ``x_at[n]`` is
    ``x(t_n)`` for ``n = 0..N`` with ``x_at[N]`` the limit ``x(T-)``, and
    ``q_at[n]`` is the dual state at primal time ``t_n`` (dual time ``T - t_n``)
    with ``q_at[0]`` the limit ``q(T-)`` in dual time.
    """

    T: Fraction
    u0: tuple
    uN: tuple
    p0: tuple
    pN: tuple
    x0: tuple
    xN_jump: tuple
    qN: tuple
    q0_jump: tuple
    tau: tuple
    u_rates: tuple
    xdot: tuple
    p_rates: tuple
    qdot: tuple
    x_at: tuple = field(default=None)
    q_at: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "T", as_rational(self.T))
        for name in ("u0", "uN", "p0", "pN", "x0", "xN_jump", "qN", "q0_jump", "tau"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        for name in ("u_rates", "xdot", "p_rates", "qdot"):
            object.__setattr__(self, name, tuple(as_vector(v) for v in getattr(self, name)))
        N = len(self.tau)
        if not (len(self.u_rates) == len(self.xdot) == len(self.p_rates) == len(self.qdot) == N):
            raise ValueError("one set of rates per interval is required")
        x_at = [self.x0]
        for n in range(N):
            x_at.append(vec_add(x_at[-1], vec_scale(self.tau[n], self.xdot[n])))
        q_at = [self.qN]
        for n in range(N - 1, -1, -1):
            q_at.append(vec_add(q_at[-1], vec_scale(self.tau[n], self.qdot[n])))
        q_at.reverse()
        object.__setattr__(self, "x_at", tuple(x_at))
        object.__setattr__(self, "q_at", tuple(q_at))

    @property
    def N(self) -> int:
        return len(self.tau)

    @property
    def K(self) -> int:
        return len(self.x0)

    @property
    def J(self) -> int:
        return len(self.u0)

    @property
    def breakpoints(self) -> tuple:
        t = [Fraction(0)]
        for tau in self.tau:
            t.append(t[-1] + tau)
        return tuple(t)

    @property
    def xN_limit(self) -> tuple:
        return self.x_at[-1]

    @property
    def q0_limit(self) -> tuple:
        return self.q_at[0]

    def mirrored(self) -> "SolutionPair":
        """The same pair viewed from the dual side (roles of U and P swapped,
        time reversed).  It solves the problem returned by ``dual()``."""
        return SolutionPair(
            self.T,
            u0=self.pN,
            uN=self.p0,
            p0=self.uN,
            pN=self.u0,
            x0=self.qN,
            xN_jump=self.q0_jump,
            qN=self.x0,
            q0_jump=self.xN_jump,
            tau=tuple(reversed(self.tau)),
            u_rates=tuple(reversed(self.p_rates)),
            xdot=tuple(reversed(self.qdot)),
            p_rates=tuple(reversed(self.u_rates)),
            qdot=tuple(reversed(self.xdot)),
        )


def zero_solution(problem: MclpProblem, T) -> SolutionPair:
    """``U = P = 0`` on one interval; feasible only when the data allow it."""
    T = horizon(T)
    K, J = problem.K, problem.J
    zK, zJ = (Fraction(0),) * K, (Fraction(0),) * J
    return SolutionPair(
        T, zJ, zJ, zK, zK,
        x0=problem.beta,
        xN_jump=vec_add(problem.beta, vec_scale(T, problem.b)),
        qN=tuple(-g for g in problem.gamma),
        q0_jump=tuple(-(g + T * c) for g, c in zip(problem.gamma, problem.c)),
        tau=(T,),
        u_rates=(zJ,),
        xdot=(problem.b,),
        p_rates=(zK,),
        qdot=(tuple(-c for c in problem.c),),
    )


# --------------------------------------------------------------------------
# Test-LP, classification, Slater, non-degeneracy


def build_test_lp(problem: MclpProblem, T, side: Side = Side.PRIMAL) -> LpInstance:
    """Equality form of Test-LP with variables (u, U, s1, s2), all nonnegative.

        A u + s1 = beta,   A u + A U + s2 = beta + b T,
        maximise (gamma + c T)^T u + gamma^T U.

    The dual side is the same construction on ``problem.dual()``.
    """
    T = horizon(T)
    if side is Side.DUAL:
        return build_test_lp(problem.dual(), T, Side.PRIMAL)
    K, J = problem.K, problem.J
    A = problem.A
    I = RatMatrix.identity(K)
    Z_KJ = RatMatrix.zeros(K, J)
    Z_KK = RatMatrix.zeros(K, K)
    M = block_matrix([[A, Z_KJ, I, Z_KK], [A, A, Z_KK, I]])
    rhs = problem.beta + vec_add(problem.beta, vec_scale(T, problem.b))
    obj = vec_add(problem.gamma, vec_scale(T, problem.c)) + problem.gamma + (Fraction(0),) * (2 * K)
    return LpInstance(obj, M, rhs, (SignClass.P,) * (2 * J + 2 * K))


def classify(problem: MclpProblem, T) -> FeasibilityClass:
    """Map the feasibility of Test-LP and Test-LP* to the four possible classes."""
    primal = is_feasible(build_test_lp(problem, T, Side.PRIMAL))
    dual = is_feasible(build_test_lp(problem, T, Side.DUAL))
    if primal and dual:
        return FeasibilityClass.BOTH_OPTIMAL
    if not primal and not dual:
        return FeasibilityClass.BOTH_INFEASIBLE
    if not primal:
        return FeasibilityClass.PRIMAL_INFEASIBLE_DUAL_UNBOUNDED
    return FeasibilityClass.DUAL_INFEASIBLE_PRIMAL_UNBOUNDED


@dataclass(frozen=True)
class SlaterResult:
    holds: bool
    alpha: Fraction | None = None


def check_slater(problem: MclpProblem, T, side: Side = Side.PRIMAL) -> SlaterResult:
    """Largest uniform slack ``alpha`` over the Test-LP constraints.

    Variables (u, U, w1, w2, a) with a free:  A u + w1 + a 1 = beta and
    A u + A U + w2 + a 1 = beta + b T.  The condition holds iff the best ``a`` is
    positive; an unbounded ``a`` is reported as ``alpha = 1``.
    """
    T = horizon(T)
    if side is Side.DUAL:
        return check_slater(problem.dual(), T, Side.PRIMAL)
    base = build_test_lp(problem, T)
    K = problem.K
    ones = RatMatrix([[1] for _ in range(2 * K)], cols=1)
    M = base.A.hstack(ones)
    obj = (Fraction(0),) * base.n_vars + (Fraction(1),)
    inst = LpInstance(obj, M, base.rhs, base.sign_class + (SignClass.U,))
    out = solve_lp(inst)
    if out.kind is LpKind.INFEASIBLE:
        return SlaterResult(False)
    if out.kind is LpKind.UNBOUNDED:
        return SlaterResult(True, Fraction(1))
    alpha = out.objective_value
    return SlaterResult(alpha > 0, alpha)


def check_nondegeneracy(problem: MclpProblem, level: str = "I") -> dict:
    """General-position tests.  Level I checks b and c, level II beta and gamma."""
    AI = problem.A.hstack(RatMatrix.identity(problem.K))
    ATI = problem.A.T.hstack(RatMatrix.identity(problem.J))
    if level == "I":
        return {"b": is_general_position(problem.b, AI), "c": is_general_position(problem.c, ATI)}
    if level == "II":
        return {
            "beta": is_general_position(problem.beta, AI),
            "gamma": is_general_position(problem.gamma, ATI),
        }
    raise ValueError(f"unknown non-degeneracy level {level!r}")


def check_uniqueness_condition(problem: MclpProblem, T) -> bool:
    """Both stacked general-position tests for the boundary values at ``T``."""
    T = horizon(T)

    def stacked(M: RatMatrix, v, w) -> bool:
        R, C = M.rows, M.cols
        big = block_matrix(
            [
                [M, RatMatrix.zeros(R, C), RatMatrix.identity(R), RatMatrix.zeros(R, R)],
                [M, M, RatMatrix.zeros(R, R), RatMatrix.identity(R)],
            ]
        )
        return is_general_position(v + vec_add(v, vec_scale(T, w)), big)

    return stacked(problem.A, problem.beta, problem.b) and stacked(
        problem.A.T, problem.gamma, problem.c
    )


# --------------------------------------------------------------------------
# Objectives, complementary slackness, pointwise evaluation


def _check_tau(sol: SolutionPair, T: Fraction) -> None:
    if sum(sol.tau, Fraction(0)) != T:
        raise ValueError(f"interval lengths sum to {sum(sol.tau, Fraction(0))}, not T = {T}")


def evaluate_objective(problem: MclpProblem, T, sol: SolutionPair, side: Side = Side.PRIMAL) -> Fraction:
    """Exact objective: impulse terms plus interval terms weighted at midpoints."""
    T = horizon(T)
    _check_tau(sol, T)
    t = sol.breakpoints
    if side is Side.PRIMAL:
        gT = vec_add(problem.gamma, vec_scale(T, problem.c))
        val = dot(gT, sol.u0) + dot(problem.gamma, sol.uN)
        for n in range(sol.N):
            mid = (t[n] + t[n + 1]) / 2
            w = vec_add(problem.gamma, vec_scale(T - mid, problem.c))
            val += dot(w, sol.u_rates[n]) * sol.tau[n]
        return val
    bT = vec_add(problem.beta, vec_scale(T, problem.b))
    val = dot(bT, sol.pN) + dot(problem.beta, sol.p0)
    for n in range(sol.N):
        mid = (t[n] + t[n + 1]) / 2
        w = vec_add(problem.beta, vec_scale(mid, problem.b))
        val += dot(w, sol.p_rates[n]) * sol.tau[n]
    return val


def complementary_slackness_integrals(sol: SolutionPair) -> tuple[Fraction, Fraction]:
    """The two integrals  int x(T-s)^T dP(s)  and  int q(T-t)^T dU(t).

    Impulses pick up the state at their location (P at dual time 0 meets the
    post-jump state x(T), P at dual time T meets x(0), U at 0 meets the dual
    state after its jump, U at T meets q^N).  On each interval the integrand
    is linear, so the trapezoid rule is exact.
    """
    I1 = dot(sol.xN_jump, sol.pN) + dot(sol.x0, sol.p0)
    I2 = dot(sol.q0_jump, sol.u0) + dot(sol.qN, sol.uN)
    for n in range(sol.N):
        xs = vec_add(sol.x_at[n], sol.x_at[n + 1])
        qs = vec_add(sol.q_at[n], sol.q_at[n + 1])
        I1 += dot(sol.p_rates[n], xs) * sol.tau[n] / 2
        I2 += dot(sol.u_rates[n], qs) * sol.tau[n] / 2
    return I1, I2


def check_complementary_slackness(sol: SolutionPair) -> bool:
    I1, I2 = complementary_slackness_integrals(sol)
    return I1 == 0 and I2 == 0


def _overlap(lo: Fraction, hi: Fraction, a: Fraction, b: Fraction) -> Fraction:
    return max(Fraction(0), min(hi, b) - max(lo, a))


def evaluate_solution_at(sol: SolutionPair, t) -> tuple[tuple, tuple, tuple, tuple]:
    """Right-continuous values ``(U(t), x(t), P(T - t), q(T - t))``.

    P and q are the dual functions of dual time, read at dual time ``T - t``.
    At ``t = 0`` they include the dual impulse at the end of dual time, and at
    ``t = T`` the primal side includes the terminal impulse and post-jump state.
    """
    t = as_rational(t)
    T = sol.T
    if t < 0 or t > T:
        raise ValueError(f"t = {t} lies outside [0, {T}]")
    bp = sol.breakpoints
    U, x = sol.u0, sol.x0
    P, q = sol.pN, sol.qN
    for n in range(sol.N):
        before = _overlap(bp[n], bp[n + 1], Fraction(0), t)
        after = _overlap(bp[n], bp[n + 1], t, T)
        if before:
            U = vec_add(U, vec_scale(before, sol.u_rates[n]))
            x = vec_add(x, vec_scale(before, sol.xdot[n]))
        if after:
            P = vec_add(P, vec_scale(after, sol.p_rates[n]))
            q = vec_add(q, vec_scale(after, sol.qdot[n]))
    if t == T:
        U = vec_add(U, sol.uN)
        x = sol.xN_jump
    if t == 0:
        P = vec_add(P, sol.p0)
        q = sol.q0_jump
    return U, x, P, q


def feasibility_violations(problem: MclpProblem, sol: SolutionPair) -> list[str]:
    """Exact feasibility audit of a solution pair at every breakpoint.

    Returns human-readable descriptions of each failed check; an empty list
    means both sides are feasible.  Between breakpoints everything is affine,
    so the breakpoints (plus both sides of the jumps) suffice.
    """
    issues = []
    T = sol.T
    if sum(sol.tau, Fraction(0)) != T:
        issues.append("interval lengths do not sum to T")
    for name in ("u0", "uN", "p0", "pN", "tau"):
        if any(v < 0 for v in getattr(sol, name)):
            issues.append(f"{name} has a negative entry")
    for n in range(sol.N):
        if any(v < 0 for v in sol.u_rates[n]) or any(v < 0 for v in sol.p_rates[n]):
            issues.append(f"negative control rate on interval {n + 1}")
        if problem.A.apply(sol.u_rates[n]) != vec_sub(problem.b, sol.xdot[n]):
            issues.append(f"primal rate equation fails on interval {n + 1}")
        if problem.A.T.apply(sol.p_rates[n]) != vec_add(problem.c, sol.qdot[n]):
            issues.append(f"dual rate equation fails on interval {n + 1}")
    for n, v in enumerate(sol.x_at):
        if any(x < 0 for x in v):
            issues.append(f"x(t_{n}) has a negative entry")
    for n, v in enumerate(sol.q_at):
        if any(x < 0 for x in v):
            issues.append(f"q at t_{n} has a negative entry")
    if any(v < 0 for v in sol.xN_jump) or any(v < 0 for v in sol.q0_jump):
        issues.append("a post-jump state is negative")
    for t in sol.breakpoints:
        U, x, P, q = evaluate_solution_at(sol, t)
        if vec_add(problem.A.apply(U), x) != vec_add(problem.beta, vec_scale(t, problem.b)):
            issues.append(f"primal constraint fails at t = {t}")
        s = T - t
        if vec_sub(problem.A.T.apply(P), q) != vec_add(problem.gamma, vec_scale(s, problem.c)):
            issues.append(f"dual constraint fails at dual time {s}")
    # limits before the jump at T (primal) and at dual time T (dual)
    U_lim = vec_sub(evaluate_solution_at(sol, T)[0], sol.uN)
    if vec_add(problem.A.apply(U_lim), sol.xN_limit) != vec_add(problem.beta, vec_scale(T, problem.b)):
        issues.append("primal constraint fails at T-")
    P_lim = vec_sub(evaluate_solution_at(sol, 0)[2], sol.p0)
    if vec_sub(problem.A.T.apply(P_lim), sol.q0_limit) != vec_add(problem.gamma, vec_scale(T, problem.c)):
        issues.append("dual constraint fails at dual time T-")
    return issues
