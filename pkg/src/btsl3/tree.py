"""Panel trees at type-1 vertices at infinity.

For a line u in Q^3 the panel tree T_u is realized as the Bruhat-Tits tree
of lattice classes in the quotient V/<u> = Q^2 (unit edge lengths). Ends of
T_u are lines in the quotient, which correspond to planes containing u, that
is to chambers at infinity in the residue of u. Type-2 trees are handled by
dualizing (``dual_flag``, ``dual_vertex``).

Quotient coordinates: for u with first p-unit coordinate i and remaining
indices j < k, w = a u + b e_j + c e_k is sent to (b, c).
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from . import padic
from .building import BuildingVertex, Flag, cross, p_primitive, primitive_int
from .errors import (
    EmptyMeasure,
    InvalidArgument,
    InvalidEndSet,
    InvalidEpsilon,
    NotInResidue,
    TooFewAtoms,
)
from .padic import INF, valuation


# ---------------------------------------------------------------------------
# vertices and ends


@dataclass(frozen=True)
class TreeVertex:
    canon: tuple
    prime: int

    @classmethod
    def from_basis(cls, basis, p: int) -> "TreeVertex":
        return cls(padic.hermite_canonical(basis, p), p)

    def basis(self):
        return padic.as_matrix(self.canon)

    def to_json(self) -> dict:
        return {"basis": [[str(x) for x in row] for row in self.canon]}


def base_vertex(p: int) -> TreeVertex:
    return TreeVertex(((1, 0), (0, 1)), p)


@dataclass(frozen=True)
class TreeEnd:
    rep: tuple

    def __post_init__(self):
        object.__setattr__(self, "rep", primitive_int(self.rep))

    def to_json(self) -> dict:
        return {"rep": [str(x) for x in self.rep]}


def act_vertex(g, v: TreeVertex) -> TreeVertex:
    return TreeVertex.from_basis(padic.mat_mul(padic.as_matrix(g), v.basis()), v.prime)


def act_end(g, e: TreeEnd) -> TreeEnd:
    return TreeEnd(padic.mat_vec(padic.as_matrix(g), e.rep))


def vertex_distance(v: TreeVertex, w: TreeVertex) -> int:
    if v == w:
        return 0
    M = padic.mat_mul(padic.inverse(v.basis()), w.basis())
    a, b = padic.smith_decompose(M, v.prime).valuations
    return abs(b - a)


def tree_path(v: TreeVertex, w: TreeVertex) -> list:
    """Vertices of the geodesic from v to w, both ends included."""
    if v == w:
        return [v]
    p = v.prime
    B = v.basis()
    dec = padic.smith_decompose(padic.mat_mul(padic.inverse(B), w.basis()), p)
    a, b = dec.valuations
    F = padic.mat_mul(B, dec.U)
    f1 = (F[0][0], F[1][0])
    f2 = (F[0][1], F[1][1])
    path = []
    for k in range(b - a + 1):
        s = Fraction(p) ** k
        path.append(TreeVertex.from_basis(((f1[0], s * f2[0]), (f1[1], s * f2[1])), p))
    return path


def neighbors(v: TreeVertex) -> list:
    p = v.prime
    B = v.basis()
    b1 = (B[0][0], B[1][0])
    b2 = (B[0][1], B[1][1])
    out = []
    for j in range(p):
        c = (b1[0] + j * b2[0], b1[1] + j * b2[1])
        out.append(TreeVertex.from_basis(((c[0], p * b2[0]), (c[1], p * b2[1])), p))
    out.append(TreeVertex.from_basis(((p * b1[0], b2[0]), (p * b1[1], b2[1])), p))
    return out


def ball(center: TreeVertex, radius: int) -> list:
    """All vertices within ``radius`` of ``center`` (breadth first)."""
    seen = {center}
    frontier = [center]
    out = [center]
    for _ in range(radius):
        nxt = []
        for v in frontier:
            for w in neighbors(v):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        out.extend(nxt)
        frontier = nxt
    return out


# ---------------------------------------------------------------------------
# points on edges


@dataclass(frozen=True)
class TreePoint:
    """Point at distance ``offset`` from ``anchor`` towards ``toward``.

    Stored canonically: a vertex is (v, v, 0); an edge point is (v, w, t)
    with v, w adjacent, v.canon < w.canon and 0 < t < 1.
    """

    anchor: TreeVertex
    toward: TreeVertex
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        t = Fraction(self.offset)
        a, b = self.anchor, self.toward
        if a == b:
            if t != 0:
                raise InvalidArgument("nonzero offset along a degenerate segment")
            object.__setattr__(self, "offset", t)
            return
        path = tree_path(a, b)
        if not 0 <= t <= len(path) - 1:
            raise InvalidArgument(f"offset {t} outside [0, {len(path) - 1}]")
        k = math.floor(t)
        r = t - k
        if r == 0:
            a = b = path[k]
        else:
            a, b = path[k], path[k + 1]
            if b.canon < a.canon:
                a, b, r = b, a, 1 - r
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "toward", b)
        object.__setattr__(self, "offset", r)

    @classmethod
    def vertex(cls, v: TreeVertex) -> "TreePoint":
        return cls(v, v, Fraction(0))

    @property
    def is_vertex(self) -> bool:
        return self.offset == 0

    def endpoints(self):
        """(vertex, distance to it) pairs for the ends of the carrying edge."""
        if self.is_vertex:
            return [(self.anchor, Fraction(0))]
        return [(self.anchor, self.offset), (self.toward, 1 - self.offset)]

    def act(self, g) -> "TreePoint":
        return TreePoint(act_vertex(g, self.anchor), act_vertex(g, self.toward), self.offset)

    def to_json(self) -> dict:
        return {
            "anchor": self.anchor.to_json(),
            "toward": self.toward.to_json(),
            "offset": str(self.offset),
        }


def _as_point(x) -> TreePoint:
    return x if isinstance(x, TreePoint) else TreePoint.vertex(x)


def tree_distance(a, b) -> Fraction:
    a, b = _as_point(a), _as_point(b)
    if not a.is_vertex and not b.is_vertex and (a.anchor, a.toward) == (b.anchor, b.toward):
        return abs(a.offset - b.offset)
    return min(
        da + vertex_distance(ea, eb) + db for ea, da in a.endpoints() for eb, db in b.endpoints()
    )


def _offset_on_edge(P: TreePoint, v: TreeVertex, w: TreeVertex) -> Fraction:
    if P.is_vertex:
        return Fraction(0) if P.anchor == v else Fraction(1)
    return P.offset if P.anchor == v else 1 - P.offset


def point_between(a, b, s) -> TreePoint:
    """The point at distance s from a on the geodesic [a, b]."""
    a, b = _as_point(a), _as_point(b)
    s = Fraction(s)
    total = tree_distance(a, b)
    if not 0 <= s <= total:
        raise InvalidArgument(f"distance {s} outside [0, {total}]")
    if s == 0:
        return a
    if s == total:
        return b
    if not a.is_vertex and not b.is_vertex and (a.anchor, a.toward) == (b.anchor, b.toward):
        sign = 1 if b.offset > a.offset else -1
        return TreePoint(a.anchor, a.toward, a.offset + sign * s)
    ea, da, eb, db = min(
        ((ea, da, eb, db) for ea, da in a.endpoints() for eb, db in b.endpoints()),
        key=lambda c: c[1] + vertex_distance(c[0], c[2]) + c[3],
    )
    if s <= da:
        v, w = (a.anchor, a.toward) if ea == a.toward else (a.toward, a.anchor)
        return TreePoint(v, w, _offset_on_edge(a, v, w) + s)
    s -= da
    middle = vertex_distance(ea, eb)
    if s <= middle:
        return TreePoint(ea, eb, s)
    s -= middle
    v, w = eb, (b.toward if eb == b.anchor else b.anchor)
    return TreePoint(v, w, s)


def circumcenter(points) -> TreePoint:
    """Circumcenter of a finite set of tree points: midpoint of a diametral pair."""
    pts = [_as_point(x) for x in points]
    if not pts:
        raise InvalidArgument("circumcenter of an empty set")
    best = (Fraction(-1), pts[0], pts[0])
    for i, x in enumerate(pts):
        for y in pts[i:]:
            d = tree_distance(x, y)
            if d > best[0]:
                best = (d, x, y)
    d, x, y = best
    return point_between(x, y, d / 2)


# ---------------------------------------------------------------------------
# projection from the building and the residue bijection


def _quotient_indices(u, p: int):
    i = next(t for t in range(3) if valuation(u[t], p) == 0)
    j, k = [t for t in range(3) if t != i]
    return i, j, k


def quotient_vector(u, w, p: int) -> tuple:
    u = p_primitive(u, p)
    i, j, k = _quotient_indices(u, p)
    a = Fraction(w[i]) / u[i]
    return (Fraction(w[j]) - a * u[j], Fraction(w[k]) - a * u[k])


def project_to_tree(u, x: BuildingVertex) -> TreeVertex:
    """pi_u(x): the image of x's lattice in V/<u>."""
    p = x.prime
    B = x.basis()
    cols = [quotient_vector(u, [B[r][c] for r in range(3)], p) for c in range(3)]
    gens = tuple(tuple(col[r] for col in cols) for r in range(2))
    return TreeVertex.from_basis(gens, p)


def induced_map(g, u, p: int):
    """2x2 matrix of g : V/<u> -> V/<g u> in the respective quotient coordinates."""
    g = padic.as_matrix(g)
    u = p_primitive(u, p)
    _, j, k = _quotient_indices(u, p)
    gu = padic.mat_vec(g, u)
    cols = []
    for t in (j, k):
        col = tuple(g[r][t] for r in range(3))
        cols.append(quotient_vector(gu, col, p))
    return tuple(tuple(col[r] for col in cols) for r in range(2))


def chamber_end_bijection(u, C: Flag, p: int) -> TreeEnd:
    """phi_u(C): the image of C's plane in V/<u>."""
    if C.line != primitive_int(u):
        raise NotInResidue(f"flag line {C.line} differs from {primitive_int(u)}")
    up = p_primitive(u, p)
    _, j, k = _quotient_indices(up, p)
    n = C.plane
    return TreeEnd((n[k], -n[j]))


def end_to_chamber(u, end: TreeEnd, p: int) -> Flag:
    up = p_primitive(u, p)
    _, j, k = _quotient_indices(up, p)
    w = [0, 0, 0]
    w[j], w[k] = end.rep
    return Flag(u, cross(u, w))


def dual_flag(F: Flag) -> Flag:
    """The flag in the dual space: line and plane covector swap roles."""
    return Flag(F.plane, F.line)


def dual_vertex(x: BuildingVertex) -> BuildingVertex:
    """Class of the dual lattice (basis transpose-inverse)."""
    return BuildingVertex.from_basis(padic.transpose(padic.inverse(x.basis())), x.prime)


# ---------------------------------------------------------------------------
# Gromov products and barycenters


def _gromov_at_vertex(x: TreeVertex, C: TreeEnd, D: TreeEnd):
    p = x.prime
    Binv = padic.inverse(x.basis())
    c = p_primitive(padic.mat_vec(Binv, C.rep), p)
    d = p_primitive(padic.mat_vec(Binv, D.rep), p)
    return valuation(c[0] * d[1] - c[1] * d[0], p)


def gromov_product(xi, C: TreeEnd, D: TreeEnd):
    """(C|D)_xi: distance from xi to the geodesic line joining C and D."""
    if C == D:
        return INF
    xi = _as_point(xi)
    if xi.is_vertex:
        return Fraction(_gromov_at_vertex(xi.anchor, C, D))
    t = xi.offset
    return (1 - t) * _gromov_at_vertex(xi.anchor, C, D) + t * _gromov_at_vertex(xi.toward, C, D)


def end_metric(xi, C: TreeEnd, D: TreeEnd) -> float:
    g = gromov_product(xi, C, D)
    return 0.0 if g == INF else math.exp(-float(g))


def f_s(x, S) -> Fraction:
    """Sum of Gromov products over unordered pairs of distinct ends."""
    return sum(gromov_product(x, C, D) for C, D in itertools.combinations(S, 2))


def tripod_center(C1: TreeEnd, C2: TreeEnd, C3: TreeEnd, p: int) -> TreeVertex:
    """The vertex where the three lines joining C1, C2, C3 meet."""
    c1, c2, c3 = C1.rep, C2.rep, C3.rep
    d = c1[0] * c2[1] - c1[1] * c2[0]
    a = Fraction(c3[0] * c2[1] - c3[1] * c2[0], d)
    b = Fraction(c1[0] * c3[1] - c1[1] * c3[0], d)
    return TreeVertex.from_basis(((a * c1[0], b * c2[0]), (a * c1[1], b * c2[1])), p)


def _check_ends(S):
    S = [e if isinstance(e, TreeEnd) else TreeEnd(e) for e in S]
    if len(S) < 3:
        raise InvalidEndSet(f"need at least 3 ends, got {len(S)}")
    if len(set(S)) != len(S):
        raise InvalidEndSet("ends must be pairwise distinct")
    return sorted(S, key=lambda e: e.rep)


def bary_ends(S, p: int) -> TreePoint:
    """Circumcenter of the minimizing set of F_S for n >= 3 distinct ends.

    The minimum lies in the convex hull of the tripod centers, so only the
    vertices of that finite subtree are evaluated.
    """
    S = _check_ends(S)
    centers = {tripod_center(*t, p) for t in itertools.combinations(S, 3)}
    centers = sorted(centers, key=lambda v: v.canon)
    hull = set(centers)
    for v, w in itertools.combinations(centers, 2):
        hull.update(tree_path(v, w))
    values = {v: f_s(TreePoint.vertex(v), S) for v in hull}
    best = min(values.values())
    argmin = sorted((v for v, f in values.items() if f == best), key=lambda v: v.canon)
    return circumcenter(argmin)


def measure_pushforward(nu: dict, p: int) -> dict:
    """Push nu x nu x nu, restricted to distinct triples, through bary_ends."""
    atoms = {}
    for e, w in nu.items():
        e = e if isinstance(e, TreeEnd) else TreeEnd(e)
        w = Fraction(w)
        if w > 0:
            atoms[e] = atoms.get(e, 0) + w
    if len(atoms) < 3:
        raise TooFewAtoms(f"support has {len(atoms)} points, need at least 3")
    ends = sorted(atoms, key=lambda e: e.rep)
    out = defaultdict(Fraction)
    total = Fraction(0)
    for triple in itertools.combinations(ends, 3):
        # each unordered triple stands for its 6 orderings
        w = 6 * atoms[triple[0]] * atoms[triple[1]] * atoms[triple[2]]
        out[bary_ends(triple, p)] += w
        total += w
    return {x: w / total for x, w in out.items()}


# ---------------------------------------------------------------------------
# epsilon-concentration barycenter of a measure on tree points


def _hull_graph(atoms):
    """Abstract weighted tree spanned by the atoms (nodes are TreePoints)."""
    ends = set()
    for a in atoms:
        for v, _ in a.endpoints():
            ends.add(v)
    ends = sorted(ends, key=lambda v: v.canon)
    edges = set()
    for v, w in itertools.combinations(ends, 2):
        path = tree_path(v, w)
        for x, y in zip(path, path[1:]):
            edges.add((x, y) if x.canon < y.canon else (y, x))
    on_edge = defaultdict(list)
    for a in atoms:
        if not a.is_vertex:
            on_edge[(a.anchor, a.toward)].append(a)
    adj = defaultdict(dict)
    for v in ends:
        adj[TreePoint.vertex(v)]
    for v, w in edges:
        chain = [TreePoint.vertex(v)]
        chain += sorted(on_edge.get((v, w), []), key=lambda a: a.offset)
        chain.append(TreePoint.vertex(w))
        for x, y in zip(chain, chain[1:]):
            length = _offset_on_edge(y, v, w) - _offset_on_edge(x, v, w)
            adj[x][y] = length
            adj[y][x] = length
    keep = set(atoms)
    changed = True
    while changed:
        changed = False
        for node in list(adj):
            if node not in keep and len(adj[node]) <= 1:
                for other in adj[node]:
                    del adj[other][node]
                del adj[node]
                changed = True
    return adj


def _quantile_radius(dists, weights, threshold) -> Fraction:
    """Smallest R with weight{d <= R} > threshold."""
    acc = Fraction(0)
    for d, w in sorted(zip(dists, weights), key=lambda t: t[0]):
        acc += w
        if acc > threshold:
            return d
    return max(dists)


def beta_eps(nu: dict, eps) -> TreePoint:
    """Barycenter from the epsilon-concentration radii of a finitely supported
    measure on tree points, searched over the convex hull of its support."""
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 2):
        raise InvalidEpsilon(f"epsilon {eps} not in (0, 1/2)")
    items = {}
    for x, w in nu.items():
        w = Fraction(w)
        if w > 0:
            x = _as_point(x)
            items[x] = items.get(x, 0) + w
    if not items:
        raise EmptyMeasure("measure has empty support")
    if sum(items.values()) != 1:
        raise InvalidArgument("measure must have total mass 1")
    atoms = sorted(items, key=lambda a: (a.anchor.canon, a.toward.canon, a.offset))
    weights = [items[a] for a in atoms]
    if len(atoms) == 1:
        return atoms[0]
    threshold = 1 - eps
    adj = _hull_graph(atoms)
    nodes = list(adj)
    dist = {x: [tree_distance(x, a) for a in atoms] for x in nodes}

    pieces = []  # (U, W, t0, t1, r0, r1)
    seen = set()
    for U in nodes:
        for W, L in adj[U].items():
            if (W, U) in seen:
                continue
            seen.add((U, W))
            lines = []
            for i in range(len(atoms)):
                if dist[U][i] + L == dist[W][i]:
                    lines.append((1, dist[U][i]))
                else:
                    lines.append((-1, dist[W][i] + L))
            breaks = {Fraction(0), L}
            for s1, c1 in lines:
                for s2, c2 in lines:
                    if s1 == 1 and s2 == -1:
                        t = (c2 - c1) / 2
                        if 0 < t < L:
                            breaks.add(t)
            breaks = sorted(breaks)

            def radius(t):
                return _quantile_radius([c + s * t for s, c in lines], weights, threshold)

            vals = [radius(t) for t in breaks]
            for k in range(len(breaks) - 1):
                pieces.append((U, W, breaks[k], breaks[k + 1], vals[k], vals[k + 1]))
    r_min = min(min(pc[4], pc[5]) for pc in pieces)
    level = r_min + 1
    candidates = []
    for U, W, t0, t1, r0, r1 in pieces:
        if r0 >= level and r1 >= level:
            continue
        lo, hi = t0, t1
        if r0 >= level:
            lo = t0 + (level - r0) / (r1 - r0) * (t1 - t0)
        if r1 >= level:
            hi = t0 + (level - r0) / (r1 - r0) * (t1 - t0)
        candidates.append(point_between(U, W, lo))
        candidates.append(point_between(U, W, hi))
    return circumcenter(sorted(set(candidates), key=lambda a: (a.anchor.canon, a.toward.canon, a.offset)))
