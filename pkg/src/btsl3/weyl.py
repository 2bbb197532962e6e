"""Geometry of the A2 model apartment.

Vectors live in the plane {x in R^3 : x1 + x2 + x3 = 0}; one lattice step is
one unit of p-adic valuation. Coordinates are kept as exact ``Fraction``s and
squared norms are exact; square roots only appear in reporting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

from .errors import EmptyTrajectory, InvalidVector, ZeroVector


def _frac3(v) -> tuple[Fraction, Fraction, Fraction]:
    if len(v) != 3:
        raise InvalidVector(f"expected 3 coordinates, got {len(v)}")
    return tuple(Fraction(x) for x in v)


@dataclass(frozen=True, order=True)
class TypeVector:
    """A dominant vector l1 >= l2 >= l3 with l1 + l2 + l3 = 0."""

    coords: tuple[Fraction, Fraction, Fraction]

    def __init__(self, coords):
        c = _frac3(coords)
        if sum(c) != 0:
            raise InvalidVector(f"coordinates {c} do not sum to zero")
        if not (c[0] >= c[1] >= c[2]):
            raise InvalidVector(f"coordinates {c} are not dominant")
        object.__setattr__(self, "coords", c)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def __repr__(self):
        return "TypeVector(({}))".format(", ".join(str(x) for x in self.coords))

    def norm2(self) -> Fraction:
        return sum(x * x for x in self.coords)

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def scale(self, c) -> "TypeVector":
        c = Fraction(c)
        if c < 0:
            raise InvalidVector("negative scaling leaves the dominant cone")
        return TypeVector(tuple(c * x for x in self.coords))

    def is_zero(self) -> bool:
        return not any(self.coords)

    def to_json(self) -> list[str]:
        return [str(x) for x in self.coords]


ZERO = TypeVector((0, 0, 0))


@dataclass(frozen=True)
class WeylElement:
    """Permutation of the three coordinate slots (0-based images).

    ``w.apply(v)`` moves coordinate i to slot ``perm[i]``.
    """

    perm: tuple[int, int, int]

    def __post_init__(self):
        if sorted(self.perm) != [0, 1, 2]:
            raise ValueError(f"{self.perm} is not a permutation of (0, 1, 2)")

    def __mul__(self, other: "WeylElement") -> "WeylElement":
        return WeylElement(tuple(self.perm[other.perm[i]] for i in range(3)))

    def inverse(self) -> "WeylElement":
        inv = [0, 0, 0]
        for i, j in enumerate(self.perm):
            inv[j] = i
        return WeylElement(tuple(inv))

    def length(self) -> int:
        p = self.perm
        return sum(1 for i, j in itertools.combinations(range(3), 2) if p[i] > p[j])

    def apply(self, v):
        out = [None, None, None]
        for i, x in enumerate(v):
            out[self.perm[i]] = x
        return tuple(out)

    def is_identity(self) -> bool:
        return self.perm == (0, 1, 2)


IDENTITY = WeylElement((0, 1, 2))
S1 = WeylElement((1, 0, 2))
S2 = WeylElement((0, 2, 1))
W0 = WeylElement((2, 1, 0))
WEYL_GROUP = tuple(WeylElement(p) for p in itertools.permutations(range(3)))


class Projection(NamedTuple):
    vector: TypeVector
    perm: WeylElement


def dominance_project(v, return_perm: bool = False):
    """Sort a sum-zero triple into the dominant cone.

    With ``return_perm`` the Weyl element ``w`` with ``w.apply(v) == result``
    is returned alongside (ties resolved by the stable sort).
    """
    c = _frac3(v)
    if sum(c) != 0:
        raise InvalidVector(f"coordinate sum of {c} is {sum(c)}, not 0")
    order = sorted(range(3), key=lambda i: -c[i])
    result = TypeVector(tuple(c[i] for i in order))
    if not return_perm:
        return result
    perm = [0, 0, 0]
    for slot, i in enumerate(order):
        perm[i] = slot
    return Projection(result, WeylElement(tuple(perm)))


def normalize(v) -> TypeVector:
    """Subtract the mean of an arbitrary rational triple, then sort."""
    c = _frac3(v)
    m = sum(c) / 3
    return dominance_project(tuple(x - m for x in c))


class RootPairings(NamedTuple):
    a1: Fraction
    a2: Fraction
    regular: bool


def root_pairings(lam: TypeVector) -> RootPairings:
    a1 = lam[0] - lam[1]
    a2 = lam[1] - lam[2]
    return RootPairings(a1, a2, a1 > 0 and a2 > 0)


def opposition_involution(lam: TypeVector) -> TypeVector:
    """iota(lam) = w0(-lam): negate and reverse."""
    return TypeVector((-lam[2], -lam[1], -lam[0]))


def separation_constant(lam: TypeVector, literal: bool = False) -> float:
    """Direction-only constant bounding d(x, y) >= C d(o, x) for split segments.

    The default is the chord ratio min_w |lam - w lam| / |lam|, which equals
    2 sin(angle/2). ``literal=True`` returns min_w 2 sin(angle(lam, w lam))
    instead, for comparison.
    """
    lam = lam if isinstance(lam, TypeVector) else TypeVector(lam)
    n2 = lam.norm2()
    if n2 == 0:
        raise ZeroVector("separation constant undefined at the origin")
    best = None
    for w in WEYL_GROUP:
        if w.is_identity():
            continue
        wl = w.apply(lam.coords)
        if literal:
            cos = float(sum(a * b for a, b in zip(lam.coords, wl)) / n2)
            cos = max(-1.0, min(1.0, cos))
            val = 2.0 * math.sin(math.acos(cos))
        else:
            chord2 = sum((a - b) ** 2 for a, b in zip(lam.coords, wl))
            val = math.sqrt(chord2 / n2)
        best = val if best is None else min(best, val)
    return best


def separation_constant_squared(lam: TypeVector) -> Fraction:
    """Exact square of the chord-ratio separation constant."""
    n2 = lam.norm2()
    if n2 == 0:
        raise ZeroVector("separation constant undefined at the origin")
    return min(
        sum((a - b) ** 2 for a, b in zip(lam.coords, w.apply(lam.coords))) / n2
        for w in WEYL_GROUP
        if not w.is_identity()
    )


class RegularityReport(NamedTuple):
    lambda_hat: TypeVector
    max_step_ratio: float
    direction_residuals: list[float]


def regularity_diagnostics(types: Sequence[TypeVector], steps: Sequence = ()) -> RegularityReport:
    """Finite-n diagnostics for lambda-regularity of a sequence.

    ``types[n-1]`` is theta(o, x_n) and ``steps[n-1]`` is d(x_n, x_{n+1}).
    Residuals are |types[n]/n - lambda_hat| for n = 1..N; the step ratio is
    taken over the second half of the run.
    """
    N = len(types)
    if N == 0:
        raise EmptyTrajectory("no types supplied")
    lam_hat = types[-1].scale(Fraction(1, N))
    residuals = []
    for n, t in enumerate(types, start=1):
        d2 = sum((x / n - y) ** 2 for x, y in zip(t.coords, lam_hat.coords))
        residuals.append(math.sqrt(d2))
    ratio = 0.0
    for n in range(max(1, N // 2), len(steps) + 1):
        ratio = max(ratio, float(steps[n - 1]) / n)
    return RegularityReport(lam_hat, ratio, residuals)


def distance2(a, b) -> Fraction:
    return sum((Fraction(x) - Fraction(y)) ** 2 for x, y in zip(a, b))
