"""Exact two-phase primal simplex for equality-form LPs with sign classes.

Each variable is tagged ``Z`` (fixed at zero), ``P`` (nonnegative) or ``U``
(free).  Internally ``Z`` columns are dropped and ``U`` columns are split into
a difference of two nonnegative columns, so the core is a textbook simplex.

The tableau is kept fraction-free: every constraint row and the cost vector are
scaled to integers, and pivots use the integer-preserving update

    T'[i][j] = (T[i][j] * p - T[i][s] * T[r][j]) / D

where ``p`` is the pivot entry and ``D`` the previous pivot.  The division is
always exact, so the true tableau is ``T / D`` with ``D`` the determinant of the
current basis (up to sign, which we normalise to positive).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import lcm
from typing import Sequence

from .exact import RatMatrix, SolveKind, as_vector, dot, rank, solve_linear_system


class SignClass(Enum):
    Z = "Z"
    P = "P"
    U = "U"


class Sense(Enum):
    MAX = "max"
    MIN = "min"


class LpKind(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class SingularBasisError(ValueError):
    """Raised when a proposed basis has linearly dependent columns."""


@dataclass(frozen=True)
class LpInstance:
    objective: tuple
    A: RatMatrix
    rhs: tuple
    sign_class: tuple
    sense: Sense = Sense.MAX

    def __post_init__(self):
        object.__setattr__(self, "objective", as_vector(self.objective))
        object.__setattr__(self, "rhs", as_vector(self.rhs))
        classes = tuple(SignClass(s) if not isinstance(s, SignClass) else s for s in self.sign_class)
        object.__setattr__(self, "sign_class", classes)
        object.__setattr__(self, "sense", Sense(self.sense))
        if len(self.objective) != self.A.cols:
            raise ValueError("objective length must equal the number of columns")
        if len(self.rhs) != self.A.rows:
            raise ValueError("rhs length must equal the number of rows")
        if len(self.sign_class) != self.A.cols:
            raise ValueError("one sign class per variable is required")

    @property
    def n_vars(self) -> int:
        return self.A.cols

    @property
    def n_rows(self) -> int:
        return self.A.rows

    def with_objective(self, objective, sense: Sense = Sense.MAX) -> "LpInstance":
        return LpInstance(tuple(objective), self.A, self.rhs, self.sign_class, sense)


@dataclass(frozen=True)
class LpBasis:
    basic_indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "basic_indices", tuple(sorted(self.basic_indices)))

    def __contains__(self, j) -> bool:
        return j in self.basic_indices

    def __len__(self) -> int:
        return len(self.basic_indices)


@dataclass(frozen=True)
class LpOutcome:
    kind: LpKind
    basis: LpBasis | None = None
    primal_values: tuple | None = None
    dual_values: tuple | None = None
    objective_value: Fraction | None = None

    @property
    def optimal(self) -> bool:
        return self.kind is LpKind.OPTIMAL


def _int_scale(values: Sequence[Fraction]) -> int:
    return lcm(*(v.denominator for v in values)) if values else 1


class _Tableau:
    """Integer-preserving tableau.  Row 0 holds ``D * (reduced costs | value)``."""

    def __init__(self, rows: list[list[int]], basis: list[int], n_struct: int):
        self.rows = rows  # rows[0] is the objective row
        self.basis = basis  # basis[i] is the column basic in constraint row i+1
        self.D = 1
        self.n_struct = n_struct

    @property
    def m(self) -> int:
        return len(self.rows) - 1

    def set_objective(self, costs: list[int]) -> None:
        """Rebuild row 0 for the integer cost vector ``costs`` (maximisation)."""
        width = len(self.rows[0])
        D = self.D
        row0 = [0] * width
        for j, cj in enumerate(costs):
            if cj:
                row0[j] = -D * cj
        for i, bj in enumerate(self.basis):
            cb = costs[bj]
            if cb:
                row = self.rows[i + 1]
                for j in range(width):
                    if row[j]:
                        row0[j] += cb * row[j]
        self.rows[0] = row0

    def pivot(self, r: int, s: int) -> None:
        """Pivot on constraint row ``r`` (1-based in ``rows``) and column ``s``."""
        rows = self.rows
        prow = rows[r]
        p = prow[s]
        D = self.D
        nz = [j for j, v in enumerate(prow) if v]
        for i in range(len(rows)):
            if i == r:
                continue
            row = rows[i]
            f = row[s]
            if f == 0:
                if p != D:
                    rows[i] = [(v * p) // D for v in row]
                continue
            new = [v * p for v in row]
            for j in nz:
                new[j] -= f * prow[j]
            rows[i] = [v // D for v in new]
        if p < 0:
            for i in range(len(rows)):
                rows[i] = [-v for v in rows[i]]
            p = -p
        self.D = p
        self.basis[r - 1] = s

    def run(self, allowed: Sequence[bool]) -> str:
        """Bland's-rule primal simplex.  Returns "optimal" or "unbounded"."""
        rows = self.rows
        while True:
            row0 = rows[0]
            s = -1
            for j, ok in enumerate(allowed):
                if ok and row0[j] < 0:
                    s = j
                    break
            if s < 0:
                return "optimal"
            best = None
            r_best = -1
            for i in range(1, len(rows)):
                a = rows[i][s]
                if a > 0:
                    val = Fraction(rows[i][-1], a)
                    if (
                        best is None
                        or val < best
                        or (val == best and self.basis[i - 1] < self.basis[r_best - 1])
                    ):
                        best = val
                        r_best = i
            if r_best < 0:
                return "unbounded"
            self.pivot(r_best, s)


def solve_lp(instance: LpInstance) -> LpOutcome:
    """Solve an :class:`LpInstance` exactly.

    ``primal_values`` and ``dual_values`` refer to the original variables and
    rows.  The dual values ``y`` satisfy ``B^T y = c_B`` for the optimal basis,
    so for a maximisation ``A^T y >= c`` on P columns.  The reported basis lists
    the original indices of the basic structural variables; after redundant
    rows are detected it can be shorter than the row count.
    """
    m, n = instance.n_rows, instance.n_vars
    sense_sign = 1 if instance.sense is Sense.MAX else -1
    # internal columns: (original index, sign)
    cols: list[tuple[int, int]] = []
    for j, cls in enumerate(instance.sign_class):
        if cls is SignClass.P:
            cols.append((j, 1))
        elif cls is SignClass.U:
            cols.append((j, 1))
            cols.append((j, -1))
    nc = len(cols)

    # scale rows to integers and make the rhs nonnegative
    row_factor: list[Fraction] = []
    rows: list[list[int]] = [None]  # placeholder for row 0
    for i in range(m):
        orig = instance.A.entries[i]
        vals = [orig[j] * sg for j, sg in cols] + [instance.rhs[i]]
        scale = _int_scale(vals)
        if instance.rhs[i] < 0:
            scale = -scale
        row_factor.append(Fraction(scale))
        ints = [int(v * scale) for v in vals]
        rows.append(ints[:-1] + [1 if k == i else 0 for k in range(m)] + [ints[-1]])
    width = nc + m + 1
    rows[0] = [0] * width
    tab = _Tableau(rows, [nc + i for i in range(m)], nc)

    # phase 1: maximise -sum(artificials)
    costs1 = [0] * nc + [-1] * m
    tab.set_objective(costs1)
    allowed1 = [True] * nc + [False] * m
    tab.run(allowed1)
    if tab.rows[0][-1] != 0:
        return LpOutcome(LpKind.INFEASIBLE)

    # drive artificials out of the basis where possible
    for r in range(1, m + 1):
        if tab.basis[r - 1] >= nc:
            row = tab.rows[r]
            for j in range(nc):
                if row[j] != 0:
                    tab.pivot(r, j)
                    break

    # phase 2
    cvals = [instance.objective[j] * sg * sense_sign for j, sg in cols]
    cscale = _int_scale(cvals)
    costs2 = [int(v * cscale) for v in cvals] + [0] * m
    tab.set_objective(costs2)
    status = tab.run([True] * nc + [False] * m)
    if status == "unbounded":
        return LpOutcome(LpKind.UNBOUNDED)

    D = tab.D
    x = [Fraction(0)] * n
    basic_orig = set()
    for i, bj in enumerate(tab.basis):
        if bj < nc:
            j, sg = cols[bj]
            x[j] += sg * Fraction(tab.rows[i + 1][-1], D)
            basic_orig.add(j)
    row0 = tab.rows[0]
    y = tuple(
        Fraction(row0[nc + i], D) * row_factor[i] / cscale * sense_sign for i in range(m)
    )
    x = tuple(x)
    return LpOutcome(LpKind.OPTIMAL, LpBasis(tuple(basic_orig)), x, y, dot(instance.objective, x))


def is_feasible(instance: LpInstance) -> bool:
    zero = instance.with_objective([0] * instance.n_vars)
    return solve_lp(zero).optimal


def basic_solution(instance: LpInstance, basis: LpBasis) -> tuple[tuple, tuple]:
    """Primal and dual values attached to ``basis``.

    The primal solves ``B x_B = rhs`` with nonbasic values zero, the dual solves
    ``B^T y = c_B``.  No sign feasibility is checked here.
    """
    idx = basis.basic_indices
    if len(idx) != instance.n_rows:
        raise SingularBasisError(f"basis has {len(idx)} columns but the system has {instance.n_rows} rows")
    for j in idx:
        if instance.sign_class[j] is SignClass.Z:
            raise SingularBasisError(f"variable {j} is fixed at zero and cannot be basic")
    B = instance.A.select_columns(idx)
    res = solve_linear_system(B, instance.rhs)
    if res.kind is not SolveKind.UNIQUE:
        raise SingularBasisError(f"basis {idx} is singular")
    x = [Fraction(0)] * instance.n_vars
    for j, v in zip(idx, res.particular):
        x[j] = v
    dres = solve_linear_system(B.T, [instance.objective[j] for j in idx])
    return tuple(x), dres.particular


def pivot(instance: LpInstance, basis: LpBasis, leaving: int, entering: int) -> LpBasis:
    """Swap ``leaving`` out of and ``entering`` into ``basis``; reject singular results."""
    if leaving not in basis:
        raise ValueError(f"variable {leaving} is not basic")
    if entering in basis:
        raise ValueError(f"variable {entering} is already basic")
    new = LpBasis(tuple(j for j in basis.basic_indices if j != leaving) + (entering,))
    if rank(instance.A.select_columns(new.basic_indices)) < len(new):
        raise SingularBasisError(
            f"pivot {leaving} -> {entering} gives dependent columns {new.basic_indices}"
        )
    return new
