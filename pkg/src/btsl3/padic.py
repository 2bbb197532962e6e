"""Exact p-adic valuation arithmetic and matrix decompositions over Z_(p).

Everything here works inside the rationals localized at p: a matrix is
"p-unimodular" when its entries have valuation >= 0 and its determinant is a
p-adic unit. No floating point is used anywhere in this module.

Matrices are tuples of row tuples of ``Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import gmpy2

from .errors import SingularMatrix

INF = math.inf

Matrix = tuple  # tuple[tuple[Fraction, ...], ...]


def int_valuation(n: int, p: int):
    if n == 0:
        return INF
    return int(gmpy2.remove(n, p)[1])


def valuation(q, p: int):
    """v_p(q) for a rational q; +inf for zero."""
    q = Fraction(q)
    if q == 0:
        return INF
    return int_valuation(q.numerator, p) - int_valuation(q.denominator, p)


@dataclass(frozen=True)
class ValuedScalar:
    value: Fraction
    prime: int
    valuation: object = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))
        object.__setattr__(self, "valuation", valuation(self.value, self.prime))

    def __mul__(self, other: "ValuedScalar") -> "ValuedScalar":
        return ValuedScalar(self.value * other.value, self.prime)

    def __add__(self, other: "ValuedScalar") -> "ValuedScalar":
        return ValuedScalar(self.value + other.value, self.prime)

    def is_unit(self) -> bool:
        return self.valuation == 0


# ---------------------------------------------------------------------------
# small dense matrix helpers


def as_matrix(rows) -> Matrix:
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def identity(n: int = 3) -> Matrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def diag(*entries) -> Matrix:
    n = len(entries)
    return tuple(
        tuple(Fraction(entries[i]) if i == j else Fraction(0) for j in range(n))
        for i in range(n)
    )


def p_diag(p: int, exps) -> Matrix:
    return diag(*(Fraction(p) ** e for e in exps))


def mat_mul(a, b) -> Matrix:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def mat_vec(a, v) -> tuple:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def transpose(a) -> Matrix:
    return tuple(zip(*a))


def det(a) -> Fraction:
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    if n == 3:
        return (
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        )
    raise ValueError("only 1x1, 2x2 and 3x3 determinants are supported")


def adjugate(a) -> Matrix:
    n = len(a)
    if n == 2:
        return ((a[1][1], -a[0][1]), (-a[1][0], a[0][0]))
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            m = a[rows[0]][cols[0]] * a[rows[1]][cols[1]] - a[rows[0]][cols[1]] * a[rows[1]][cols[0]]
            cof[i][j] = m if (i + j) % 2 == 0 else -m
    return tuple(tuple(cof[j][i] for j in range(3)) for i in range(3))


def inverse(a) -> Matrix:
    d = Fraction(det(a))
    if d == 0:
        raise SingularMatrix("matrix is singular")
    return tuple(tuple(Fraction(x) / d for x in row) for row in adjugate(a))


def min_valuation(entries, p: int):
    return min((valuation(x, p) for x in entries), default=INF)


def is_p_unimodular(a, p: int) -> bool:
    return all(valuation(x, p) >= 0 for row in a for x in row) and valuation(det(a), p) == 0


def minors2(a):
    """All 2x2 minors of a matrix with at least two rows."""
    n, m = len(a), len(a[0])
    out = []
    for r0 in range(n):
        for r1 in range(r0 + 1, n):
            for c0 in range(m):
                for c1 in range(c0 + 1, m):
                    out.append(a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0])
    return out


# ---------------------------------------------------------------------------
# Smith (Cartan) decomposition


@dataclass(frozen=True)
class SmithDecomposition:
    """``input == U @ diag(p**valuations) @ V`` with U, V p-unimodular."""

    U: Matrix
    valuations: tuple
    V: Matrix
    prime: int

    def diagonal(self) -> Matrix:
        return p_diag(self.prime, self.valuations)

    def reconstruct(self) -> Matrix:
        return mat_mul(mat_mul(self.U, self.diagonal()), self.V)


def _swap_rows(m, i, j):
    m[i], m[j] = m[j], m[i]


def _swap_cols(m, i, j):
    for row in m:
        row[i], row[j] = row[j], row[i]


def smith_decompose(M, p: int, pivot_order=None) -> SmithDecomposition:
    """Smith form over Z_(p) for a nonsingular square matrix.

    The pivot at each stage is the entry of least valuation; ties go to the
    first in row-major order, or to the first in ``pivot_order`` (a list of
    (row, col) pairs) when one is supplied.
    """
    W = [[Fraction(x) for x in row] for row in M]
    n = len(W)
    U = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    V = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    order = pivot_order or [(i, j) for i in range(n) for j in range(n)]
    vals = []
    for k in range(n):
        best, bi, bj = INF, None, None
        for i, j in order:
            if i < k or j < k:
                continue
            v = valuation(W[i][j], p)
            if v < best:
                best, bi, bj = v, i, j
        if bi is None:
            raise SingularMatrix("matrix is singular over Q")
        if bi != k:
            _swap_rows(W, k, bi)
            _swap_cols(U, k, bi)
        if bj != k:
            _swap_cols(W, k, bj)
            _swap_rows(V, k, bj)
        piv = W[k][k]
        for i in range(k + 1, n):
            f = W[i][k] / piv
            if f:
                W[i] = [a - f * b for a, b in zip(W[i], W[k])]
                for r in range(n):
                    U[r][k] += f * U[r][i]
        for j in range(k + 1, n):
            f = W[k][j] / piv
            if f:
                for r in range(n):
                    W[r][j] -= f * W[r][k]
                V[k] = [a + f * b for a, b in zip(V[k], V[j])]
        vals.append(best)
        unit = piv / Fraction(p) ** best
        V[k] = [unit * x for x in V[k]]
    return SmithDecomposition(
        tuple(tuple(r) for r in U), tuple(vals), tuple(tuple(r) for r in V), p
    )


def minor_valuations(M, p: int) -> tuple:
    """Elementary-divisor valuations from minimal minor valuations.

    Independent of ``smith_decompose``: v1 = min entry valuation,
    v1 + v2 = min 2x2-minor valuation, v1 + v2 + v3 = v(det).
    """
    n = len(M)
    e1 = min_valuation([x for row in M for x in row], p)
    e_det = valuation(det(M), p)
    if e_det == INF:
        raise SingularMatrix("matrix is singular")
    if n == 2:
        return (e1, e_det - e1)
    e2 = min_valuation(minors2(M), p)
    return (e1, e2 - e1, e_det - e2)


# ---------------------------------------------------------------------------
# Iwasawa decomposition


class Iwasawa(NamedTuple):
    N: Matrix
    exponents: tuple
    K: Matrix


def iwasawa_decompose(M, p: int) -> Iwasawa:
    """``M == N @ diag(p**b) @ K``, N upper unipotent, K p-unimodular.

    N stabilizes the standard flag <e1> < <e1, e2>. The exponent vector is
    found by column reduction from the bottom row up.
    """
    W = [[Fraction(x) for x in row] for row in M]
    n = len(W)
    K = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    b = [0] * n
    for r in range(n - 1, -1, -1):
        best, bj = INF, None
        for j in range(r + 1):
            v = valuation(W[r][j], p)
            if v < best:
                best, bj = v, j
        if bj is None:
            raise SingularMatrix("matrix is singular")
        if bj != r:
            _swap_cols(W, r, bj)
            _swap_rows(K, r, bj)
        unit = W[r][r] / Fraction(p) ** best
        for i in range(n):
            W[i][r] /= unit
        K[r] = [unit * x for x in K[r]]
        for j in range(r):
            f = W[r][j] / W[r][r]
            if f:
                for i in range(n):
                    W[i][j] -= f * W[i][r]
                K[r] = [a + f * c for a, c in zip(K[r], K[j])]
        b[r] = best
    N = tuple(
        tuple(W[i][j] / Fraction(p) ** b[j] for j in range(n)) for i in range(n)
    )
    return Iwasawa(N, tuple(b), tuple(tuple(r) for r in K))


# ---------------------------------------------------------------------------
# Hermite canonical form


def _residue(r: Fraction, e: int, p: int) -> Fraction:
    """Canonical representative of r modulo p**e Z_(p), in [0, p**e) ∩ Z[1/p]."""
    if r == 0 or valuation(r, p) >= e:
        return Fraction(0)
    a, b = r.numerator, r.denominator
    t = int_valuation(b, p)
    b_unit = b // p**t
    mod = p ** (e + t)
    return Fraction(a * pow(b_unit, -1, mod) % mod, p**t)


def hermite_canonical(basis, p: int) -> tuple:
    """Canonical basis for the homothety class of the Z_(p)-lattice spanned
    by the columns of ``basis`` (n rows, at least n columns, full rank).

    The result is lower triangular with p-power diagonal, entries left of the
    diagonal reduced into [0, p**e_i) for the diagonal exponent e_i of their
    row, scaled to be integral and primitive. Returned as a tuple of int rows.
    """
    W = [[Fraction(x) for x in row] for row in basis]
    n, m = len(W), len(W[0])
    if m < n:
        raise SingularMatrix("fewer generators than the dimension")
    exps = []
    for i in range(n):
        best, bj = INF, None
        for j in range(i, m):
            v = valuation(W[i][j], p)
            if v < best:
                best, bj = v, j
        if bj is None:
            raise SingularMatrix("generators do not span a full-rank lattice")
        if bj != i:
            _swap_cols(W, i, bj)
        unit = W[i][i] / Fraction(p) ** best
        for r in range(n):
            W[r][i] /= unit
        for j in range(i + 1, m):
            f = W[i][j] / W[i][i]
            if f:
                for r in range(n):
                    W[r][j] -= f * W[r][i]
        exps.append(best)
    for i in range(n):
        pe = Fraction(p) ** exps[i]
        for j in range(i):
            rep = _residue(W[i][j], exps[i], p)
            q = (W[i][j] - rep) / pe
            if q:
                for r in range(i, n):
                    W[r][j] -= q * W[r][i]
    H = [row[:n] for row in W]
    shift = min_valuation([x for row in H for x in row], p)
    scale = Fraction(p) ** (-shift)
    return tuple(tuple(int(x * scale) for x in row) for row in H)
