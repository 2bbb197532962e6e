"""The Bruhat-Tits building of SL3 over Q_p, as homothety classes of lattices.

A vertex is the class of a Z_(p)-lattice in Q^3, stored by its canonical
Hermite basis. Chambers at infinity are full flags (line < plane) with
integer representatives; the plane is stored as a covector n with n.u = 0.
The base vertex ``o`` is the class of the standard lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd

from . import padic
from .errors import NonRegularType, NotInGroup, SingularMatrix
from .padic import INF, valuation
from .weyl import (
    IDENTITY,
    S1,
    S2,
    W0,
    TypeVector,
    WeylElement,
    normalize,
    root_pairings,
)

# relative positions for the two length-2 cases (see weyl_distance)
_LINE_IN_OTHER_PLANE = WeylElement((2, 0, 1))
_OTHER_LINE_IN_PLANE = WeylElement((1, 2, 0))


# ---------------------------------------------------------------------------
# vectors


def primitive_int(v) -> tuple:
    """Integer representative of the rational line through v: gcd 1, first
    nonzero entry positive."""
    v = [Fraction(x) for x in v]
    if not any(v):
        raise ValueError("zero vector has no direction")
    den = reduce(lambda a, b: a * b // gcd(a, b), (x.denominator for x in v), 1)
    ints = [int(x * den) for x in v]
    g = reduce(gcd, (abs(x) for x in ints))
    ints = [x // g for x in ints]
    first = next(x for x in ints if x)
    if first < 0:
        ints = [-x for x in ints]
    return tuple(ints)


def cross(a, b) -> tuple:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _mod_p(x, p: int, k: int = 1) -> int:
    x = Fraction(x)
    m = p**k
    return x.numerator * pow(x.denominator, -1, m) % m


def projective_mod(v, p: int, k: int = 1) -> tuple:
    """Reduce a p-primitive vector mod p**k and scale its first unit entry to 1."""
    red = [_mod_p(x, p, k) for x in v]
    m = p**k
    for x in red:
        if x % p:
            inv = pow(x, -1, m)
            return tuple(y * inv % m for y in red)
    raise ValueError("vector is not p-primitive")


def p_primitive(v, p: int) -> tuple:
    """Scale a rational vector by a power of p so its minimal valuation is 0."""
    v = [Fraction(x) for x in v]
    s = padic.min_valuation(v, p)
    if s == INF:
        raise ValueError("zero vector")
    scale = Fraction(p) ** (-s)
    return tuple(x * scale for x in v)


# ---------------------------------------------------------------------------
# vertices


@dataclass(frozen=True)
class BuildingVertex:
    canon: tuple
    prime: int

    @classmethod
    def from_basis(cls, basis, p: int) -> "BuildingVertex":
        return cls(padic.hermite_canonical(basis, p), p)

    @classmethod
    def standard(cls, p: int) -> "BuildingVertex":
        return cls(tuple(tuple(int(i == j) for j in range(3)) for i in range(3)), p)

    def basis(self):
        return padic.as_matrix(self.canon)

    def to_json(self) -> dict:
        return {"basis": [[str(x) for x in row] for row in self.canon]}

    @classmethod
    def from_json(cls, obj, p: int) -> "BuildingVertex":
        return cls.from_basis([[Fraction(x) for x in row] for row in obj["basis"]], p)


def standard_vertex(p: int) -> BuildingVertex:
    return BuildingVertex.standard(p)


def act(g, x: BuildingVertex) -> BuildingVertex:
    g = padic.as_matrix(g)
    if padic.det(g) != 1:
        raise NotInGroup("acting matrix must have determinant 1")
    return BuildingVertex.from_basis(padic.mat_mul(g, x.basis()), x.prime)


def act_any(g, x: BuildingVertex) -> BuildingVertex:
    """Action of GL3(Q) on vertex classes (no determinant check)."""
    return BuildingVertex.from_basis(padic.mat_mul(padic.as_matrix(g), x.basis()), x.prime)


def relative_matrix(x: BuildingVertex, y: BuildingVertex):
    return padic.mat_mul(padic.inverse(x.basis()), y.basis())


def type_from_valuations(vals) -> TypeVector:
    """Cartan type from Smith valuations: negate, centre, sort."""
    return normalize(tuple(-Fraction(v) for v in vals))


def cartan_type(x: BuildingVertex, y: BuildingVertex) -> TypeVector:
    """theta(x, y), so that theta(o, diag(1/p, 1, p) o) = (1, 0, -1)."""
    dec = padic.smith_decompose(relative_matrix(x, y), x.prime)
    return type_from_valuations(dec.valuations)


def distance2(x: BuildingVertex, y: BuildingVertex) -> Fraction:
    return cartan_type(x, y).norm2()


def sqrt_le_sum(a2: Fraction, b2: Fraction, c2: Fraction) -> bool:
    """Exact test of sqrt(a2) <= sqrt(b2) + sqrt(c2) for nonnegative rationals."""
    lhs = a2 - b2 - c2
    if lhs <= 0:
        return True
    return lhs * lhs <= 4 * b2 * c2


# ---------------------------------------------------------------------------
# flags


@dataclass(frozen=True)
class Flag:
    """Line spanned by ``line`` inside the plane ``{w : plane . w = 0}``."""

    line: tuple
    plane: tuple

    def __post_init__(self):
        u = primitive_int(self.line)
        n = primitive_int(self.plane)
        if dot(n, u) != 0:
            raise ValueError(f"line {u} is not contained in plane {n}")
        object.__setattr__(self, "line", u)
        object.__setattr__(self, "plane", n)

    @classmethod
    def from_span(cls, u, v) -> "Flag":
        """Flag <u> < <u, v>."""
        return cls(u, cross(u, v))

    def act(self, g) -> "Flag":
        g = padic.as_matrix(g)
        u = padic.mat_vec(g, self.line)
        adj = padic.adjugate(g)
        n = tuple(sum(self.plane[i] * adj[i][j] for i in range(3)) for j in range(3))
        return Flag(u, n)

    def to_json(self) -> dict:
        return {"line": [str(x) for x in self.line], "plane": [str(x) for x in self.plane]}

    @classmethod
    def from_json(cls, obj) -> "Flag":
        return cls(tuple(int(x) for x in obj["line"]), tuple(int(x) for x in obj["plane"]))


def standard_flag() -> Flag:
    return Flag((1, 0, 0), (0, 0, 1))


def flag_mod_p(F: Flag, p: int) -> "GermChamber":
    return GermChamber(projective_mod(F.line, p), projective_mod(F.plane, p), p)


@dataclass(frozen=True)
class GermChamber:
    """A chamber of the residue building at o: a flag over F_p."""

    line_modp: tuple
    plane_modp: tuple
    prime: int

    def __post_init__(self):
        p = self.prime
        u = projective_mod(self.line_modp, p)
        n = projective_mod(self.plane_modp, p)
        if dot(u, n) % p:
            raise ValueError("germ line is not in germ plane")
        object.__setattr__(self, "line_modp", u)
        object.__setattr__(self, "plane_modp", n)

    def act(self, g) -> "GermChamber":
        """Action of a p-unimodular matrix through its reduction mod p."""
        p = self.prime
        gm = [[_mod_p(x, p) for x in row] for row in g]
        u = tuple(sum(gm[i][j] * self.line_modp[j] for j in range(3)) % p for i in range(3))
        adj = padic.adjugate(tuple(tuple(Fraction(x) for x in row) for row in gm))
        n = tuple(
            int(sum(self.plane_modp[i] * adj[i][j] for i in range(3))) % p for j in range(3)
        )
        return GermChamber(u, n, p)

    def to_json(self) -> dict:
        return {"line": list(self.line_modp), "plane": list(self.plane_modp)}


def _two_minor_valuation(a, b, p: int):
    return min(
        valuation(a[i] * b[j] - a[j] * b[i], p) for i in range(3) for j in range(i + 1, 3)
    )


def flag_gap_exponent(F: Flag, G: Flag, p: int):
    """Exponent m with flag_distance(F, G) = p**-m (+inf when equal)."""
    return min(
        _two_minor_valuation(F.line, G.line, p), _two_minor_valuation(F.plane, G.plane, p)
    )


def flag_distance(F: Flag, G: Flag, p: int) -> Fraction:
    """Ultrametric on chambers at infinity; exact rational p**-m."""
    m = flag_gap_exponent(F, G, p)
    if m == INF:
        return Fraction(0)
    return Fraction(p) ** (-m)


def weyl_distance(F: Flag, G: Flag) -> WeylElement:
    """Relative position of two flags over Q, as a permutation.

    In a basis e adapted to F, G is spanned by e_{w(0)} < <e_{w(0)}, e_{w(1)}>.
    """
    same_line = not any(cross(F.line, G.line))
    same_plane = not any(cross(F.plane, G.plane))
    if same_line and same_plane:
        return IDENTITY
    if same_plane:
        return S1
    if same_line:
        return S2
    line_in_other = dot(G.plane, F.line) == 0
    other_in_plane = dot(F.plane, G.line) == 0
    if line_in_other:
        return _LINE_IN_OTHER_PLANE
    if other_in_plane:
        return _OTHER_LINE_IN_PLANE
    return W0


def opposite(F: Flag, G: Flag) -> bool:
    return dot(G.plane, F.line) != 0 and dot(F.plane, G.line) != 0


def apartment_frame(F: Flag, G: Flag):
    """Frame (u, direction of P & P', u') of the apartment joining F and G.

    The determinant of this frame is nonzero exactly when F and G are opposite.
    """
    return (F.line, cross(F.plane, G.plane), G.line)


# ---------------------------------------------------------------------------
# Cartan flags and germs


def _regularity_wall(vals):
    v1, v2, v3 = vals
    if v1 == v2 and v2 == v3:
        return 0
    if v1 == v2:
        return 1
    if v2 == v3:
        return 2
    return None


def attracting_flag(M, p: int, pivot_order=None) -> Flag:
    """Flag <U e1> < <U e1, U e2> from the Smith factor of a nonsingular M."""
    dec = padic.smith_decompose(M, p, pivot_order)
    wall = _regularity_wall(dec.valuations)
    if wall is not None:
        raise NonRegularType(f"Cartan valuations {dec.valuations} lie on a wall", wall)
    U = dec.U
    u = tuple(U[i][0] for i in range(3))
    v = tuple(U[i][1] for i in range(3))
    return Flag.from_span(u, v)


def cartan_flag(g, p: int, pivot_order=None) -> Flag:
    g = padic.as_matrix(g)
    if padic.det(g) != 1:
        raise NotInGroup("cartan_flag expects a determinant-1 matrix")
    return attracting_flag(g, p, pivot_order)


def germ_project(o: BuildingVertex, y: BuildingVertex) -> GermChamber:
    """Germ at o of the segment [o, y], in o's canonical coordinates."""
    return flag_mod_p(attracting_flag(relative_matrix(o, y), o.prime), o.prime)


# ---------------------------------------------------------------------------
# sectors and retractions


def adapted_basis(x: BuildingVertex, C: Flag):
    """Basis h of x's lattice with h e1 on C's line and h e1, h e2 in its plane.

    h maps o to x and the standard flag to C.
    """
    p = x.prime
    B = x.basis()
    u = p_primitive(padic.mat_vec(padic.inverse(B), C.line), p)
    i = next(k for k in range(3) if valuation(u[k], p) == 0)
    j, k = [t for t in range(3) if t != i]
    e = lambda t: tuple(Fraction(int(s == t)) for s in range(3))
    cols = [u, e(j), e(k)]
    n = tuple(sum(Fraction(C.plane[r]) * B[r][c] for r in range(3)) for c in range(3))
    c2, c3 = dot(n, cols[1]), dot(n, cols[2])
    if c3 != 0 and (c2 == 0 or valuation(c3, p) <= valuation(c2, p)):
        f = c2 / c3
        f2 = tuple(a - f * b for a, b in zip(cols[1], cols[2]))
        f3 = cols[2]
    elif c2 != 0:
        f = c3 / c2
        f2 = tuple(a - f * b for a, b in zip(cols[2], cols[1]))
        f3 = cols[1]
    else:
        raise SingularMatrix("plane covector vanishes")
    frame = tuple(tuple(col[r] for col in (u, f2, f3)) for r in range(3))
    return padic.mat_mul(B, frame)


def retraction_coordinate(x: BuildingVertex, C: Flag, y: BuildingVertex) -> tuple:
    """Coordinates of y after retracting onto the apartment of the sector
    Q(x, C), normalized to sum zero (unsorted)."""
    h = adapted_basis(x, C)
    iw = padic.iwasawa_decompose(padic.mat_mul(padic.inverse(h), y.basis()), x.prime)
    neg = [-Fraction(b) for b in iw.exponents]
    m = sum(neg) / 3
    return tuple(a - m for a in neg)


def sector_membership(x: BuildingVertex, C: Flag, y: BuildingVertex) -> bool:
    """True when y lies in the closed sector Q(x, C)."""
    coord = retraction_coordinate(x, C, y)
    if not (coord[0] >= coord[1] >= coord[2]):
        return False
    return coord == cartan_type(x, y).coords


# ---------------------------------------------------------------------------
# serialization


def dumps(obj) -> str:
    return json.dumps(obj.to_json(), sort_keys=True)


def is_regular(t: TypeVector) -> bool:
    return root_pairings(t).regular
