"""Base-sequence certificates.

A base sequence is a list of adjacent admissible Rates-LP bases together with
four boundary index sets.  It determines a square linear system whose
solution gives the impulses, boundary states and interval lengths; the
sequence certifies an optimal solution when that solution is nonnegative.

Unknowns are laid out as

    u0 (J) | x0 (K) | qN (J) | pN (K) | tau (N) | uN (J) | xN (K) | p0 (K) | q0 (J)

where ``xN`` and ``q0`` denote the post-jump states at the end of primal and
dual time respectively.  Every checked quantity (unknowns and the states at
breakpoints) is a homogeneous linear form in this vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

from .exact import (
    LinearSolveResult,
    RatMatrix,
    SolveKind,
    dot,
    solve_linear_system,
    vec_add,
    vec_scale,
)
from .lp import LpInstance, LpKind, Sense, SignClass, solve_lp
from .model import MclpProblem, SolutionPair, evaluate_objective, horizon, Side
from .rates import RatesPair, are_adjacent, is_admissible, rates_from_basis, rates_objective


@dataclass(frozen=True)
class BaseSequence:
    """Bases ``B_1..B_N`` (sorted index tuples) and the boundary sets.

    ``K0``: states positive at time 0.  ``J0``: controls without an impulse
    at time 0.  ``KN1``: dual impulses at dual time 0 that vanish.  ``JN1``:
    dual states positive at dual time 0.  All indices are 0-based.
    """

    bases: tuple
    K0: frozenset = frozenset()
    J0: frozenset = frozenset()
    KN1: frozenset = frozenset()
    JN1: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(tuple(sorted(b)) for b in self.bases))
        for name in ("K0", "J0", "KN1", "JN1"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))

    @property
    def N(self) -> int:
        return len(self.bases)

    @property
    def pivots(self) -> list:
        return [are_adjacent(a, b) for a, b in zip(self.bases, self.bases[1:])]

    def with_sets(self, K0, J0, KN1, JN1) -> "BaseSequence":
        return BaseSequence(self.bases, K0, J0, KN1, JN1)


class Layout:
    """Offsets of each block in the unknown vector."""

    BLOCKS = ("u0", "x0", "qN", "pN", "tau", "uN", "xN", "p0", "q0")

    def __init__(self, K: int, J: int, N: int):
        self.K, self.J, self.N = K, J, N
        sizes = {"u0": J, "x0": K, "qN": J, "pN": K, "tau": N, "uN": J, "xN": K, "p0": K, "q0": J}
        self.offset = {}
        pos = 0
        for name in self.BLOCKS:
            self.offset[name] = pos
            pos += sizes[name]
        self.sizes = sizes
        self.size = pos

    def idx(self, block: str, i: int) -> int:
        return self.offset[block] + i

    def block(self, values: Sequence, name: str) -> tuple:
        o = self.offset[name]
        return tuple(values[o : o + self.sizes[name]])

    def names(self) -> list[str]:
        out = []
        for name in self.BLOCKS:
            label = {"xN": "xN_jump", "q0": "q0_jump"}.get(name, name)
            out.extend(f"{label}[{i + 1}]" for i in range(self.sizes[name]))
        return out


@dataclass(frozen=True)
class Family:
    """Affine set of solutions of an underdetermined certificate system.

    For ``dim == 1`` the members are ``point + theta * direction`` for theta in
    ``[0, 1]`` (or ``[0, inf)`` when ``bounded`` is False).  For higher
    dimensions only the representative and a basis of directions are kept.
    """

    dim: int
    point: tuple
    directions: tuple
    bounded: bool = True

    def at(self, theta) -> tuple:
        if self.dim != 1:
            raise ValueError("only one-parameter families can be evaluated by theta")
        theta = Fraction(theta)
        if theta < 0 or (self.bounded and theta > 1):
            raise ValueError("theta outside the family range")
        return vec_add(self.point, vec_scale(theta, self.directions[0]))


@dataclass(frozen=True)
class CertificateResult:
    kind: str  # "Optimal" or "Violated"
    solution: SolutionPair | None = None
    violation: str | None = None
    values: tuple | None = None
    family: Family | None = None
    sequence: BaseSequence | None = None

    @property
    def optimal(self) -> bool:
        return self.kind == "Optimal"


class _System:
    """Equation rows, zero settings and checked quantities for a sequence."""

    def __init__(self, problem: MclpProblem, T: Fraction, bases: Sequence[tuple]):
        K, J, N = problem.K, problem.J, len(bases)
        self.problem = problem
        self.T = T
        self.bases = tuple(bases)
        self.layout = L = Layout(K, J, N)
        self.rates: list[RatesPair] = [rates_from_basis(problem, b) for b in bases]
        n_unk = L.size
        rows: list[list[Fraction]] = []
        rhs: list[Fraction] = []
        A = problem.A

        def row():
            return [Fraction(0)] * n_unk

        # first boundary equations
        for k in range(K):
            r = row()
            for j in range(J):
                r[L.idx("u0", j)] = A[k, j]
            r[L.idx("x0", k)] = Fraction(1)
            rows.append(r)
            rhs.append(problem.beta[k])
        for j in range(J):
            r = row()
            for k in range(K):
                r[L.idx("pN", k)] = A[k, j]
            r[L.idx("qN", j)] = Fraction(-1)
            rows.append(r)
            rhs.append(problem.gamma[j])
        # time-interval equations
        for n in range(N - 1):
            adj = are_adjacent(bases[n], bases[n + 1])
            if adj is None:
                raise ValueError(f"bases {n + 1} and {n + 2} are not adjacent")
            leaving = adj[0]
            r = row()
            if leaving >= J:
                k = leaving - J
                r[L.idx("x0", k)] = Fraction(1)
                for m in range(n + 1):
                    r[L.idx("tau", m)] = self.rates[m].xdot[k]
            else:
                j = leaving
                r[L.idx("qN", j)] = Fraction(1)
                for m in range(n + 1, N):
                    r[L.idx("tau", m)] = self.rates[m].qdot[j]
            rows.append(r)
            rhs.append(Fraction(0))
        # sum of interval lengths
        r = row()
        for m in range(N):
            r[L.idx("tau", m)] = Fraction(1)
        rows.append(r)
        rhs.append(T)
        # second boundary equations
        for k in range(K):
            r = row()
            for j in range(J):
                r[L.idx("uN", j)] = A[k, j]
            r[L.idx("xN", k)] = Fraction(1)
            r[L.idx("x0", k)] = Fraction(-1)
            for m in range(N):
                r[L.idx("tau", m)] = -self.rates[m].xdot[k]
            rows.append(r)
            rhs.append(Fraction(0))
        for j in range(J):
            r = row()
            for k in range(K):
                r[L.idx("p0", k)] = A[k, j]
            r[L.idx("q0", j)] = Fraction(-1)
            r[L.idx("qN", j)] = Fraction(1)
            for m in range(N):
                r[L.idx("tau", m)] = self.rates[m].qdot[j]
            rows.append(r)
            rhs.append(Fraction(0))
        self.rows = rows
        self.rhs = rhs
        self.quantities = self._quantities()

    def _quantities(self) -> list[tuple[str, list[Fraction], bool]]:
        """(name, coefficients, is_interval_length) in the checking order."""
        L = self.layout
        K, J, N = L.K, L.J, L.N
        n_unk = L.size
        out = []

        def unit(i):
            r = [Fraction(0)] * n_unk
            r[i] = Fraction(1)
            return r

        for block, label in (("u0", "u0"), ("x0", "x0"), ("qN", "qN"), ("pN", "pN"), ("tau", "tau")):
            for i in range(L.sizes[block]):
                out.append((f"{label}[{i + 1}]", unit(L.idx(block, i)), block == "tau"))
        for n in range(1, N + 1):
            for k in range(K):
                r = unit(L.idx("x0", k))
                for m in range(n):
                    r[L.idx("tau", m)] += self.rates[m].xdot[k]
                out.append((f"x^{n}[{k + 1}]", r, False))
        for n in range(N - 1, -1, -1):
            for j in range(J):
                r = unit(L.idx("qN", j))
                for m in range(n, N):
                    r[L.idx("tau", m)] += self.rates[m].qdot[j]
                out.append((f"q^{n}[{j + 1}]", r, False))
        for block, label in (("uN", "uN"), ("xN", "xN_jump"), ("p0", "p0"), ("q0", "q0_jump")):
            for i in range(L.sizes[block]):
                out.append((f"{label}[{i + 1}]", unit(L.idx(block, i)), False))
        return out

    def zero_columns(self, seq: BaseSequence) -> list[int]:
        """Unknowns fixed at zero by the boundary sets, in layout order."""
        L = self.layout
        K, J = L.K, L.J
        zs = []
        zs += [L.idx("u0", j) for j in range(J) if j in seq.J0]
        zs += [L.idx("x0", k) for k in range(K) if k not in seq.K0]
        zs += [L.idx("qN", j) for j in range(J) if j not in seq.JN1]
        zs += [L.idx("pN", k) for k in range(K) if k in seq.KN1]
        zs += [L.idx("uN", j) for j in range(J) if j in seq.JN1]
        zs += [L.idx("xN", k) for k in range(K) if k not in seq.KN1]
        zs += [L.idx("p0", k) for k in range(K) if k in seq.K0]
        zs += [L.idx("q0", j) for j in range(J) if j not in seq.J0]
        return sorted(zs)

    def matrix(self, seq: BaseSequence) -> tuple[RatMatrix, tuple]:
        n_unk = self.layout.size
        rows = [list(r) for r in self.rows]
        rhs = list(self.rhs)
        for z in self.zero_columns(seq):
            r = [Fraction(0)] * n_unk
            r[z] = Fraction(1)
            rows.append(r)
            rhs.append(Fraction(0))
        return RatMatrix(rows, cols=n_unk), tuple(rhs)


def compatibility_zeros(problem: MclpProblem, bases: Sequence[tuple]) -> tuple[frozenset, frozenset]:
    """States that must start at zero and dual states that must end at zero.

    ``K0`` may only contain states whose slope is basic in ``B_1``, and
    ``JN1`` only controls that are nonbasic in ``B_N``.
    """
    J, K = problem.J, problem.K
    first = set(bases[0])
    last = set(bases[-1])
    x_forced = frozenset(k for k in range(K) if (J + k) not in first)
    q_forced = frozenset(j for j in range(J) if j in last)
    return x_forced, q_forced


def structural_violation(problem: MclpProblem, seq: BaseSequence, strict: bool = True) -> str | None:
    """Checks on the sequence that do not involve the horizon.

    The weak form (``strict=False``) lets consecutive interval objectives tie,
    which happens in limits of perturbed problems.
    """
    K, J = problem.K, problem.J
    if seq.N == 0:
        return "empty base sequence"
    if seq.N > comb(K + J, K):
        return f"{seq.N} intervals exceed the bound {comb(K + J, K)}"
    if len(set(seq.bases)) != seq.N:
        return "bases are not distinct"
    for name, limit in (("K0", K), ("KN1", K), ("J0", J), ("JN1", J)):
        if any(not 0 <= i < limit for i in getattr(seq, name)):
            return f"{name} has an index out of range"
    prev_obj = None
    for n, b in enumerate(seq.bases):
        if len(b) != K or any(not 0 <= i < J + K for i in b):
            return f"basis {n + 1} has the wrong shape"
        try:
            pair = rates_from_basis(problem, b)
        except ValueError:
            return f"basis {n + 1} is singular"
        if not is_admissible(pair):
            return f"basis {n + 1} is not admissible"
        obj = rates_objective(problem, pair)
        if prev_obj is not None and (obj > prev_obj or (strict and obj == prev_obj)):
            return f"interval objective does not decrease from basis {n} to basis {n + 1}"
        prev_obj = obj
    for n in range(seq.N - 1):
        if are_adjacent(seq.bases[n], seq.bases[n + 1]) is None:
            return f"bases {n + 1} and {n + 2} are not adjacent"
    x_forced, q_forced = compatibility_zeros(problem, seq.bases)
    if seq.K0 & x_forced:
        return "K0 is not compatible with the first basis"
    if seq.JN1 & q_forced:
        return "JN1 is not compatible with the last basis"
    return None


def assemble_equations(problem: MclpProblem, T, seq: BaseSequence) -> tuple[RatMatrix, tuple]:
    """The square system (equations plus zero settings) for ``seq`` at ``T``."""
    T = horizon(T)
    return _System(problem, T, seq.bases).matrix(seq)


def _first_violation(system: _System, values: Sequence[Fraction], strict: bool) -> str | None:
    for name, coef, is_tau in system.quantities:
        v = dot(coef, values)
        if v < 0:
            return f"{name} = {_fmt(v)} < 0"
        if strict and is_tau and v == 0:
            return f"{name} = 0 (interval of zero length)"
    return None


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _family(system: _System, res: LinearSolveResult) -> Family | str:
    """Nonnegative part of an underdetermined solution set, or a reason string."""
    p = res.particular
    D = res.nullspace_basis
    if len(D) == 1:
        d = D[0]
        lo, hi = None, None
        for name, coef, _ in system.quantities:
            a = dot(coef, p)
            s = dot(coef, d)
            if s == 0:
                if a < 0:
                    return f"{name} = {_fmt(a)} < 0 for every member of the solution family"
                continue
            bound = -a / s
            if s > 0:
                lo = bound if lo is None else max(lo, bound)
            else:
                hi = bound if hi is None else min(hi, bound)
        if lo is not None and hi is not None and lo > hi:
            return "no member of the one-parameter solution family is nonnegative"
        ends = []
        if lo is not None:
            ends.append(vec_add(p, vec_scale(lo, d)))
        if hi is not None:
            ends.append(vec_add(p, vec_scale(hi, d)))
        if len(ends) == 2:
            start, stop = (ends[0], ends[1]) if ends[0] >= ends[1] else (ends[1], ends[0])
            return Family(1, start, (tuple(b - a for a, b in zip(start, stop)),), True)
        if len(ends) == 1:
            direction = d if lo is not None else tuple(-x for x in d)
            return Family(1, ends[0], (direction,), False)
        return "solution family is unbounded in both directions"
    # several free parameters: find one nonnegative member by LP
    n_free = len(D)
    quant = system.quantities
    rows = []
    rhs = []
    for name, coef, _ in quant:
        # coef.(p + D theta) - s = 0  ->  sum_i (coef.D_i) theta_i - s = -coef.p
        rows.append([dot(coef, di) for di in D])
        rhs.append(-dot(coef, p))
    nq = len(quant)
    M = RatMatrix(
        [r + [Fraction(-1) if i == k else Fraction(0) for k in range(nq)] for i, r in enumerate(rows)],
        cols=n_free + nq,
    )
    inst = LpInstance(
        (Fraction(0),) * (n_free + nq), M, tuple(rhs), (SignClass.U,) * n_free + (SignClass.P,) * nq
    )
    out = solve_lp(inst)
    if not out.optimal:
        return f"no member of the {n_free}-parameter solution family is nonnegative"
    theta = out.primal_values[:n_free]
    point = tuple(p)
    for t, di in zip(theta, D):
        point = vec_add(point, vec_scale(t, di))
    return Family(n_free, point, tuple(D), True)


def solution_from_values(system: _System, values: Sequence[Fraction]) -> SolutionPair:
    L = system.layout
    return SolutionPair(
        system.T,
        u0=L.block(values, "u0"),
        uN=L.block(values, "uN"),
        p0=L.block(values, "p0"),
        pN=L.block(values, "pN"),
        x0=L.block(values, "x0"),
        xN_jump=L.block(values, "xN"),
        qN=L.block(values, "qN"),
        q0_jump=L.block(values, "q0"),
        tau=L.block(values, "tau"),
        u_rates=tuple(r.u for r in system.rates),
        xdot=tuple(r.xdot for r in system.rates),
        p_rates=tuple(r.p for r in system.rates),
        qdot=tuple(r.qdot for r in system.rates),
    )


def validate_certificate(problem: MclpProblem, T, seq: BaseSequence, strict: bool = True) -> CertificateResult:
    """Solve the certificate system and check every sign condition exactly.

    With ``strict`` every interval must have positive length; the weak form
    accepts zero-length intervals (used when validating limits of perturbed
    problems).  An underdetermined but consistent system yields an Optimal
    result whose ``family`` describes all nonnegative solutions; the reported
    values are the family's canonical member.
    """
    T = horizon(T)
    reason = structural_violation(problem, seq, strict)
    if reason is not None:
        return CertificateResult("Violated", violation=reason, sequence=seq)
    system = _System(problem, T, seq.bases)
    M, rhs = system.matrix(seq)
    res = solve_linear_system(M, rhs)
    if res.kind is SolveKind.INCONSISTENT:
        return CertificateResult("Violated", violation="inconsistent system", sequence=seq)
    family = None
    if res.kind is SolveKind.UNIQUE:
        values = res.particular
    else:
        fam = _family(system, res)
        if isinstance(fam, str):
            return CertificateResult("Violated", violation=fam, sequence=seq)
        family = fam
        values = fam.point
    bad = _first_violation(system, values, strict)
    if bad is not None:
        return CertificateResult("Violated", violation=bad, values=tuple(values), family=family, sequence=seq)
    sol = solution_from_values(system, values)
    return CertificateResult("Optimal", solution=sol, values=tuple(values), family=family, sequence=seq)


def construct_solution(problem: MclpProblem, T, seq: BaseSequence, strict: bool = True) -> SolutionPair:
    res = validate_certificate(problem, T, seq, strict)
    if not res.optimal:
        raise ValueError(f"base sequence is not a valid certificate: {res.violation}")
    return res.solution


def family_solution(problem: MclpProblem, T, seq: BaseSequence, values: Sequence[Fraction]) -> SolutionPair:
    """Solution pair for an explicit unknown vector (e.g. a family member)."""
    return solution_from_values(_System(problem, horizon(T), seq.bases), values)


def boundary_sets_of(problem: MclpProblem, sol: SolutionPair) -> tuple[int, int]:
    """The cardinality excesses ``(L1, L2)`` of the boundary sets of a solution."""
    K0 = sum(1 for v in sol.x0 if v > 0)
    J0bar = sum(1 for v in sol.u0 if v != 0)
    JN1 = sum(1 for v in sol.qN if v > 0)
    KN1bar = sum(1 for v in sol.pN if v != 0)
    return K0 + J0bar - problem.K, JN1 + KN1bar - problem.J


# --------------------------------------------------------------------------
# Boundary-LP cross-checks


def _boundary_lp(A: RatMatrix, cost0, costN, rhs1, rhs2, sense: Sense) -> LpInstance:
    """Two-stage boundary LP in equality form with slack variables.

    For ``MAX``: ``A y0 <= rhs1``, ``A y0 + A yN <= rhs2``.  For ``MIN`` the
    inequalities are reversed (surplus variables).
    """
    K, J = A.rows, A.cols
    sgn = 1 if sense is Sense.MAX else -1
    I = RatMatrix([[sgn if i == j else 0 for j in range(K)] for i in range(K)], cols=K)
    Z = RatMatrix.zeros(K, K)
    ZJ = RatMatrix.zeros(K, J)
    M = A.hstack(ZJ, I, Z).vstack(A.hstack(A, Z, I))
    obj = tuple(cost0) + tuple(costN) + (Fraction(0),) * (2 * K)
    return LpInstance(obj, M, tuple(rhs1) + tuple(rhs2), (SignClass.P,) * (2 * J + 2 * K), sense)


def _lp_agrees(inst: LpInstance, y0, yN, first_rows, second_rows, sense: Sense) -> bool:
    A_half = inst.A.entries
    K = len(first_rows)
    J = len(y0)
    Aop = [row[:J] for row in A_half[:K]]
    lhs1 = [dot(r, y0) for r in Aop]
    lhs2 = [a + dot(r, yN) for a, r in zip(lhs1, Aop)]
    if sense is Sense.MAX:
        feasible = all(l <= r for l, r in zip(lhs1, first_rows)) and all(l <= r for l, r in zip(lhs2, second_rows))
    else:
        feasible = all(l >= r for l, r in zip(lhs1, first_rows)) and all(l >= r for l, r in zip(lhs2, second_rows))
    if not feasible or any(v < 0 for v in y0) or any(v < 0 for v in yN):
        return False
    out = solve_lp(inst)
    if out.kind is not LpKind.OPTIMAL:
        return False
    value = dot(inst.objective[:J], y0) + dot(inst.objective[J : 2 * J], yN)
    return value == out.objective_value


def boundary_lp_crosscheck(problem: MclpProblem, T, sol: SolutionPair) -> bool:
    """Check that the impulses solve both boundary LP pairs of a certified solution."""
    T = horizon(T)
    A = problem.A
    AT = A.T
    Ucheck = (Fraction(0),) * problem.J
    Pcheck = (Fraction(0),) * problem.K
    for n in range(sol.N):
        Ucheck = vec_add(Ucheck, vec_scale(sol.tau[n], sol.u_rates[n]))
        Pcheck = vec_add(Pcheck, vec_scale(sol.tau[n], sol.p_rates[n]))
    AU = A.apply(Ucheck)
    ATP = AT.apply(Pcheck)
    gT = vec_add(problem.gamma, vec_scale(T, problem.c))
    bT = vec_add(problem.beta, vec_scale(T, problem.b))
    rhs2 = tuple(a - b for a, b in zip(bT, AU))
    drhs2 = tuple(a - b for a, b in zip(gT, ATP))

    # lower offsets from the running minima of the states
    xlow = []
    for k in range(problem.K):
        acc, low = Fraction(0), Fraction(0)
        for n in range(sol.N):
            acc += sol.xdot[n][k] * sol.tau[n]
            low = min(low, acc)
        xlow.append(-low)
    qlow = []
    for j in range(problem.J):
        acc, low = Fraction(0), Fraction(0)
        for n in range(sol.N - 1, -1, -1):
            acc += sol.qdot[n][j] * sol.tau[n]
            low = min(low, acc)
        qlow.append(-low)

    checks = []
    # Boundary-LP and its dual
    cost0 = tuple(a - b for a, b in zip(gT, ATP))
    inst = _boundary_lp(A, cost0, problem.gamma, problem.beta, rhs2, Sense.MAX)
    checks.append(_lp_agrees(inst, sol.u0, sol.uN, problem.beta, rhs2, Sense.MAX))
    inst = _boundary_lp(AT, rhs2, problem.beta, problem.gamma, drhs2, Sense.MIN)
    checks.append(_lp_agrees(inst, sol.pN, sol.p0, problem.gamma, drhs2, Sense.MIN))
    # modified pair
    first = tuple(a - b for a, b in zip(problem.beta, xlow))
    inst = _boundary_lp(A, gT, problem.gamma, first, rhs2, Sense.MAX)
    checks.append(_lp_agrees(inst, sol.u0, sol.uN, first, rhs2, Sense.MAX))
    dfirst = tuple(a + b for a, b in zip(problem.gamma, qlow))
    inst = _boundary_lp(AT, bT, problem.beta, dfirst, drhs2, Sense.MIN)
    checks.append(_lp_agrees(inst, sol.pN, sol.p0, dfirst, drhs2, Sense.MIN))
    return all(checks)
