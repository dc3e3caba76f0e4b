"""Exact rational scalars, dense rational matrices and linear solving.

Everything here works over :class:`fractions.Fraction`.  Elimination is done
fraction-free: each row is scaled to integers and the Bareiss update keeps
every intermediate entry an integer, which avoids the gcd work that plain
``Fraction`` elimination does at every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Iterable, Sequence

Rational = Fraction
RatVector = tuple  # tuple[Fraction, ...]


def as_rational(value) -> Fraction:
    """Convert an int, Fraction or ``"p/q"`` string to a Fraction.

    Floats are refused on purpose: they would silently import rounding error
    into an exact computation.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed rational {value!r}") from exc
    raise TypeError(f"cannot use {type(value).__name__} as an exact rational")


def as_vector(values: Iterable) -> tuple:
    return tuple(as_rational(v) for v in values)


def format_rational(q: Fraction) -> str:
    """Render as ``"p/q"``, or ``"p"`` for integers."""
    q = as_rational(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    if len(a) != len(b):
        raise ValueError("dot product of vectors with different lengths")
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def vec_add(a, b) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def vec_sub(a, b) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


def vec_scale(s, a) -> tuple:
    return tuple(s * x for x in a)


class RatMatrix:
    """Immutable dense matrix of Fractions.

    ``rows`` and ``cols`` are the dimensions; ``entries`` is a tuple of row
    tuples.  A matrix may have zero rows but still carry a column count.
    """

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Iterable[Iterable], cols: int | None = None):
        data = tuple(as_vector(row) for row in entries)
        if data:
            width = len(data[0])
            if any(len(row) != width for row in data):
                raise ValueError("matrix rows have different lengths")
            if cols is not None and cols != width:
                raise ValueError("column count does not match the entries")
        else:
            width = cols or 0
        object.__setattr__(self, "entries", data)
        object.__setattr__(self, "rows", len(data))
        object.__setattr__(self, "cols", width)

    def __setattr__(self, name, value):
        raise AttributeError("RatMatrix is immutable")

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)], cols=n)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RatMatrix":
        return cls([[0] * cols for _ in range(rows)], cols=cols)

    def __getitem__(self, index):
        i, j = index
        return self.entries[i][j]

    def row(self, i: int) -> tuple:
        return self.entries[i]

    def column(self, j: int) -> tuple:
        return tuple(row[j] for row in self.entries)

    @property
    def T(self) -> "RatMatrix":
        if self.rows == 0:
            return RatMatrix([[]] * self.cols, cols=0)
        return RatMatrix(zip(*self.entries), cols=self.rows)

    def select_columns(self, indices: Sequence[int]) -> "RatMatrix":
        return RatMatrix([[row[j] for j in indices] for row in self.entries], cols=len(indices))

    def apply(self, v: Sequence[Fraction]) -> tuple:
        """Matrix-vector product."""
        if len(v) != self.cols:
            raise ValueError("vector length does not match matrix columns")
        return tuple(dot(row, v) for row in self.entries)

    def __matmul__(self, other):
        if isinstance(other, RatMatrix):
            if self.cols != other.rows:
                raise ValueError("inner dimensions differ")
            cols = [other.column(j) for j in range(other.cols)]
            return RatMatrix([[dot(r, c) for c in cols] for r in self.entries], cols=other.cols)
        return self.apply(other)

    def __neg__(self) -> "RatMatrix":
        return RatMatrix([[-x for x in row] for row in self.entries], cols=self.cols)

    def hstack(self, *others: "RatMatrix") -> "RatMatrix":
        mats = (self,) + others
        if any(m.rows != self.rows for m in mats):
            raise ValueError("hstack needs equal row counts")
        return RatMatrix(
            [sum((m.entries[i] for m in mats), ()) for i in range(self.rows)],
            cols=sum(m.cols for m in mats),
        )

    def vstack(self, *others: "RatMatrix") -> "RatMatrix":
        mats = (self,) + others
        if any(m.cols != self.cols for m in mats):
            raise ValueError("vstack needs equal column counts")
        return RatMatrix(sum((m.entries for m in mats), ()), cols=self.cols)

    def tolist(self) -> list:
        return [list(row) for row in self.entries]

    def __eq__(self, other):
        return isinstance(other, RatMatrix) and self.cols == other.cols and self.entries == other.entries

    def __hash__(self):
        return hash((self.cols, self.entries))

    def __repr__(self):
        body = "; ".join(" ".join(format_rational(x) for x in row) for row in self.entries)
        return f"RatMatrix({self.rows}x{self.cols}: [{body}])"


def block_matrix(blocks: Sequence[Sequence[RatMatrix]]) -> RatMatrix:
    """Assemble a matrix from a grid of blocks with matching dimensions."""
    strips = [blocks_row[0].hstack(*blocks_row[1:]) for blocks_row in blocks]
    return strips[0].vstack(*strips[1:])


class SolveKind(Enum):
    UNIQUE = "Unique"
    INCONSISTENT = "Inconsistent"
    UNDERDETERMINED = "Underdetermined"


@dataclass(frozen=True)
class LinearSolveResult:
    kind: SolveKind
    particular: tuple | None = None
    nullspace_basis: tuple = field(default_factory=tuple)

    @property
    def consistent(self) -> bool:
        return self.kind is not SolveKind.INCONSISTENT


def _integer_rows(rows: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    out = []
    for row in rows:
        scale = lcm(*(x.denominator for x in row)) if row else 1
        out.append([int(x * scale) for x in row])
    return out


def _bareiss_echelon(rows: list[list[int]], ncols: int) -> list[int]:
    """Fraction-free forward elimination in place on the first ``ncols`` columns.

    Returns the pivot column of each leading row.  The pivot in each column is
    the nonzero entry of smallest magnitude, which keeps the integers small.
    """
    m = len(rows)
    pivots: list[int] = []
    prev = 1
    r = 0
    for col in range(ncols):
        if r == m:
            break
        candidates = [i for i in range(r, m) if rows[i][col] != 0]
        if not candidates:
            continue
        best = min(candidates, key=lambda i: abs(rows[i][col]))
        rows[r], rows[best] = rows[best], rows[r]
        piv_row = rows[r]
        p = piv_row[col]
        width = len(piv_row)
        for i in range(r + 1, m):
            row = rows[i]
            f = row[col]
            if f == 0:
                # rows below must all carry the same Bareiss scale
                rows[i] = [(x * p) // prev for x in row]
                continue
            rows[i] = [(row[j] * p - f * piv_row[j]) // prev for j in range(width)]
        prev = p
        pivots.append(col)
        r += 1
    return pivots


def rank(M: RatMatrix) -> int:
    """Exact rank over the rationals."""
    if M.rows == 0 or M.cols == 0:
        return 0
    rows = _integer_rows(M.entries)
    return len(_bareiss_echelon(rows, M.cols))


def _back_substitute(rows, pivots, ncols, rhs_col: bool, free_values: dict) -> list:
    x = [Fraction(0)] * ncols
    for j, val in free_values.items():
        x[j] = Fraction(val)
    for r in range(len(pivots) - 1, -1, -1):
        col = pivots[r]
        row = rows[r]
        acc = Fraction(row[ncols]) if rhs_col else Fraction(0)
        for j in range(col + 1, ncols):
            if row[j] and x[j]:
                acc -= row[j] * x[j]
        x[col] = acc / row[col]
    return x


def solve_linear_system(A: RatMatrix, rhs: Sequence) -> LinearSolveResult:
    """Solve ``A x = rhs`` exactly and classify the system.

    For consistent systems ``particular`` sets every free variable to zero and
    ``nullspace_basis`` holds one vector per free variable.
    """
    rhs = as_vector(rhs)
    if len(rhs) != A.rows:
        raise ValueError(f"rhs has length {len(rhs)} but the matrix has {A.rows} rows")
    n = A.cols
    if A.rows == 0:
        basis = tuple(tuple(Fraction(int(i == j)) for i in range(n)) for j in range(n))
        kind = SolveKind.UNIQUE if n == 0 else SolveKind.UNDERDETERMINED
        return LinearSolveResult(kind, tuple(Fraction(0) for _ in range(n)), basis)
    rows = _integer_rows([row + (b,) for row, b in zip(A.entries, rhs)])
    pivots = _bareiss_echelon(rows, n)
    r = len(pivots)
    for i in range(r, len(rows)):
        if rows[i][n] != 0:
            return LinearSolveResult(SolveKind.INCONSISTENT)
    free = [j for j in range(n) if j not in set(pivots)]
    particular = tuple(_back_substitute(rows, pivots, n, True, {}))
    basis = []
    for f in free:
        vec = _back_substitute(rows, pivots, n, False, {f: 1})
        basis.append(tuple(vec))
    kind = SolveKind.UNIQUE if not free else SolveKind.UNDERDETERMINED
    return LinearSolveResult(kind, particular, tuple(basis))


def inverse(M: RatMatrix) -> RatMatrix:
    """Inverse of a square nonsingular matrix; raises ``ValueError`` otherwise."""
    if M.rows != M.cols:
        raise ValueError("only square matrices have inverses")
    n = M.rows
    cols = []
    for j in range(n):
        res = solve_linear_system(M, [int(i == j) for i in range(n)])
        if res.kind is not SolveKind.UNIQUE:
            raise ValueError("matrix is singular")
        cols.append(res.particular)
    return RatMatrix(zip(*cols), cols=n) if n else RatMatrix([], cols=0)


def in_column_span(v: Sequence[Fraction], M: RatMatrix) -> bool:
    return solve_linear_system(M, v).consistent


def is_general_position(v: Sequence, M: RatMatrix) -> bool:
    """True iff ``v`` is not a combination of fewer than ``M.rows`` columns of ``M``.

    Every column subset of size ``K - 1`` is tested (a smaller subset is
    contained in one of those).  The count of subsets grows combinatorially,
    which is fine for matrices with a handful of rows.
    """
    v = as_vector(v)
    K = M.rows
    if len(v) != K:
        raise ValueError("vector length must equal the number of matrix rows")
    if K == 0:
        return True
    size = min(K - 1, M.cols)
    vcol = RatMatrix([[x] for x in v], cols=1)
    for subset in combinations(range(M.cols), size):
        S = M.select_columns(subset)
        if rank(S.hstack(vcol)) == rank(S):
            return False
    return True
