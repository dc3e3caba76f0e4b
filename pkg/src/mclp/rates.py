"""The Rates-LP pair that governs control rates and state slopes on each interval.

Primal Rates-LP:  max c^T u  s.t.  A u + xdot = b.
Dual Rates-LP*:   min b^T p  s.t.  A^T p - qdot = c.

Variables of the primal are indexed ``0..J-1`` for ``u`` and ``J..J+K-1`` for
``xdot``; a basis is the sorted tuple of its ``K`` basic indices.  The dual
basic solution is the complementary one: ``p`` solves ``B^T p = c_B`` and
``qdot = A^T p - c``.

Sign sets: ``J_set`` lists the controls allowed to be positive (the others
are fixed at zero) and ``K_set`` lists the states whose slope is free (the
others must have ``xdot >= 0``, since those states sit at zero).
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .exact import RatMatrix, SolveKind, dot, solve_linear_system
from .lp import LpBasis, LpInstance, Sense, SignClass
from .model import MclpProblem

DEFAULT_MAX_DIM = 10


class DimensionError(ValueError):
    """Raised when a problem exceeds the configured enumeration cap."""


def max_dim() -> int:
    value = os.environ.get("MCLP_MAX_DIM")
    if value is None:
        return DEFAULT_MAX_DIM
    try:
        cap = int(value)
    except ValueError as exc:
        raise DimensionError(f"MCLP_MAX_DIM must be an integer, got {value!r}") from exc
    return cap


def check_dimension(problem: MclpProblem, cap: int | None = None) -> None:
    cap = max_dim() if cap is None else cap
    if problem.K + problem.J > cap:
        raise DimensionError(
            f"K + J = {problem.K + problem.J} exceeds the enumeration cap {cap} (set MCLP_MAX_DIM to raise it)"
        )


@dataclass(frozen=True)
class SignSets:
    K_set: frozenset
    J_set: frozenset

    def __post_init__(self):
        object.__setattr__(self, "K_set", frozenset(self.K_set))
        object.__setattr__(self, "J_set", frozenset(self.J_set))


@dataclass(frozen=True)
class RatesPair:
    u: tuple
    xdot: tuple
    p: tuple
    qdot: tuple

    @property
    def K_pos(self) -> frozenset:
        """States with nonzero slope."""
        return frozenset(k for k, v in enumerate(self.xdot) if v != 0)

    @property
    def J_pos(self) -> frozenset:
        """Dual states with nonzero slope."""
        return frozenset(j for j, v in enumerate(self.qdot) if v != 0)


def rates_matrix(problem: MclpProblem) -> RatMatrix:
    return problem.A.hstack(RatMatrix.identity(problem.K))


def build_rates_lp(problem: MclpProblem, signs: SignSets) -> tuple[LpInstance, LpInstance]:
    K, J = problem.K, problem.J
    for k in signs.K_set:
        if not 0 <= k < K:
            raise ValueError(f"state index {k} out of range")
    for j in signs.J_set:
        if not 0 <= j < J:
            raise ValueError(f"control index {j} out of range")
    u_cls = tuple(SignClass.P if j in signs.J_set else SignClass.Z for j in range(J))
    x_cls = tuple(SignClass.U if k in signs.K_set else SignClass.P for k in range(K))
    primal = LpInstance(
        problem.c + (Fraction(0),) * K,
        rates_matrix(problem),
        problem.b,
        u_cls + x_cls,
        Sense.MAX,
    )
    p_cls = tuple(SignClass.Z if k in signs.K_set else SignClass.P for k in range(K))
    q_cls = tuple(SignClass.P if j in signs.J_set else SignClass.U for j in range(J))
    dual = LpInstance(
        problem.b + (Fraction(0),) * J,
        problem.A.T.hstack(-RatMatrix.identity(J)),
        problem.c,
        p_cls + q_cls,
        Sense.MIN,
    )
    return primal, dual


def rates_from_basis(problem: MclpProblem, basis: LpBasis | tuple) -> RatesPair:
    """Primal basic solution and its complementary dual for a Rates-LP basis."""
    idx = basis.basic_indices if isinstance(basis, LpBasis) else tuple(sorted(basis))
    K, J = problem.K, problem.J
    if len(idx) != K:
        raise ValueError(f"a Rates-LP basis has {K} indices, got {len(idx)}")
    M = rates_matrix(problem)
    B = M.select_columns(idx)
    prim = solve_linear_system(B, problem.b)
    if prim.kind is not SolveKind.UNIQUE:
        raise ValueError(f"basis {idx} is singular")
    cfull = problem.c + (Fraction(0),) * K
    dual = solve_linear_system(B.T, [cfull[i] for i in idx])
    full = [Fraction(0)] * (J + K)
    for i, v in zip(idx, prim.particular):
        full[i] = v
    p = dual.particular
    qdot = tuple(a - c for a, c in zip(problem.A.T.apply(p), problem.c))
    return RatesPair(tuple(full[:J]), tuple(full[J:]), p, qdot)


def is_admissible(pair: RatesPair) -> bool:
    return all(v >= 0 for v in pair.u) and all(v >= 0 for v in pair.p)


def rates_objective(problem: MclpProblem, pair: RatesPair) -> Fraction:
    return dot(problem.c, pair.u)


def are_adjacent(b1, b2) -> tuple[int, int] | None:
    """``(leaving, entering)`` if the bases differ by one swap, otherwise None."""
    s1 = set(b1.basic_indices if isinstance(b1, LpBasis) else b1)
    s2 = set(b2.basic_indices if isinstance(b2, LpBasis) else b2)
    out, inn = s1 - s2, s2 - s1
    if len(out) == 1 and len(inn) == 1:
        return out.pop(), inn.pop()
    return None


def check_strict_complementarity(pair: RatesPair, x_positive, q_positive) -> bool:
    """On an open interval: ``x_k > 0 <=> xdot_k != 0 <=> p_k = 0`` and
    ``q_j > 0 <=> qdot_j != 0 <=> u_j = 0``."""
    x_positive, q_positive = set(x_positive), set(q_positive)
    for k in range(len(pair.xdot)):
        pos = k in x_positive
        if pos != (pair.xdot[k] != 0) or pos != (pair.p[k] == 0):
            return False
    for j in range(len(pair.qdot)):
        pos = j in q_positive
        if pos != (pair.qdot[j] != 0) or pos != (pair.u[j] == 0):
            return False
    return True


def _sign_feasible(pair: RatesPair, basis: tuple, signs: SignSets, J: int) -> bool:
    for i in basis:
        if i < J and i not in signs.J_set and pair.u[i] != 0:
            return False
    for k, v in enumerate(pair.xdot):
        if k not in signs.K_set and v < 0:
            return False
    return True


def enumerate_admissible_bases(
    problem: MclpProblem, signs: SignSets | None = None, cap: int | None = None
) -> list[tuple]:
    """All nonsingular admissible Rates-LP bases in lexicographic order.

    With ``signs`` the list is further restricted to bases whose primal
    basic solution respects those sign restrictions.
    """
    check_dimension(problem, cap)
    K, J = problem.K, problem.J
    M = rates_matrix(problem)
    out = []
    for idx in combinations(range(J + K), K):
        res = solve_linear_system(M.select_columns(idx), problem.b)
        if res.kind is not SolveKind.UNIQUE:
            continue
        pair = rates_from_basis(problem, idx)
        if not is_admissible(pair):
            continue
        if signs is not None and not _sign_feasible(pair, idx, signs, J):
            continue
        out.append(idx)
    return out


def basis_variable_name(i: int, J: int) -> str:
    return f"u{i + 1}" if i < J else f"xdot{i - J + 1}"


def parse_basis_variable(name: str, J: int, K: int) -> int:
    name = name.strip()
    if name.startswith("xdot"):
        k = int(name[4:])
        if not 1 <= k <= K:
            raise ValueError(f"state index out of range in {name!r}")
        return J + k - 1
    if name.startswith("u"):
        j = int(name[1:])
        if not 1 <= j <= J:
            raise ValueError(f"control index out of range in {name!r}")
        return j - 1
    raise ValueError(f"unknown basis variable {name!r}")
