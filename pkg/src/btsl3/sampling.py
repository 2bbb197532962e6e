"""Seeded pseudo-random objects for self-checks and property tests."""

from __future__ import annotations

import random
from fractions import Fraction

from . import padic
from .building import BuildingVertex, Flag, cross


def entry_matrix(rng: random.Random, p: int, det_one: bool = True):
    """Matrix with entries in {0, +-1, +-p, +-1/p}; rejection-sampled to det 1."""
    values = [Fraction(0), Fraction(1), Fraction(-1), Fraction(p), Fraction(-p),
              Fraction(1, p), Fraction(-1, p)]
    while True:
        M = tuple(tuple(rng.choice(values) for _ in range(3)) for _ in range(3))
        d = padic.det(M)
        if (det_one and d == 1) or (not det_one and d != 0):
            return M


def unimodular(rng: random.Random, p: int, n: int = 3, steps: int = 6):
    """Random element of SL_n(Z): product of elementary and signed permutation moves."""
    M = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        c = rng.randint(-p * p, p * p)
        for r in range(n):
            M[r][j] += c * M[r][i]
        if rng.random() < 0.3:
            for r in range(n):
                M[r][i], M[r][j] = M[r][j], -M[r][i]
    return tuple(tuple(row) for row in M)


def group_element(rng: random.Random, p: int, spread: int = 2):
    """Random element of SL3(Q) of the form k1 diag(p^a) k2."""
    a = [rng.randint(-spread, spread) for _ in range(2)]
    a.append(-a[0] - a[1])
    D = padic.p_diag(p, a)
    return padic.mat_mul(padic.mat_mul(unimodular(rng, p), D), unimodular(rng, p))


def vertex(rng: random.Random, p: int, spread: int = 2) -> BuildingVertex:
    return BuildingVertex.from_basis(group_element(rng, p, spread), p)


def flag(rng: random.Random, p: int, size: int = 30) -> Flag:
    while True:
        u = [rng.randint(-size, size) for _ in range(3)]
        v = [rng.randint(-size, size) for _ in range(3)]
        if any(cross(u, v)):
            return Flag.from_span(u, v)


def flag_near(rng: random.Random, F: Flag, p: int, k: int) -> Flag:
    """A flag agreeing with F modulo p**k (perturbs the line inside the plane
    and the plane around the new line)."""
    n = F.plane
    w = cross(n, [rng.randint(-3, 3) for _ in range(3)])
    u = [a + p**k * b for a, b in zip(F.line, w)]
    m = [a + p**k * b for a, b in zip(n, cross(u, [rng.randint(-3, 3) for _ in range(3)]))]
    return Flag(u, m)
