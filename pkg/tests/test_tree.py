import math
import random
from fractions import Fraction

import pytest

from btsl3 import padic, sampling, tree
from btsl3.building import Flag, act, cartan_type, cross, flag_distance, standard_vertex
from btsl3.errors import EmptyMeasure, InvalidEndSet, InvalidEpsilon, NotInResidue, TooFewAtoms

from tree_oracles import brute_bary, four_point_check, random_ends, random_line, residue_flag, unimodular2

P = 3
BASE = tree.base_vertex(P)
O = standard_vertex(P)
E1, E2 = tree.TreeEnd((1, 0)), tree.TreeEnd((0, 1))


def tv(*rows):
    return tree.TreeVertex.from_basis(rows, P)


def test_tree_distance_examples():
    assert tree.tree_distance(BASE, BASE) == 0
    assert tree.tree_distance(BASE, tv((1, 0), (0, P))) == 1
    assert tree.tree_distance(BASE, tv((P, 0), (0, P))) == 0


def test_neighbors_and_ball():
    nb = tree.neighbors(BASE)
    assert len(set(nb)) == P + 1
    assert all(tree.vertex_distance(BASE, v) == 1 for v in nb)
    assert len(tree.ball(BASE, 3)) == 1 + (P + 1) * (1 + P + P * P)


def test_tree_path_is_geodesic():
    rng = random.Random(3)
    for _ in range(30):
        a = tv(*[[rng.randint(-9, 9) or 1 for _ in range(2)] for _ in range(2)])
        b = tv(*[[rng.randint(-9, 9) or 1 for _ in range(2)] for _ in range(2)])
        path = tree.tree_path(a, b)
        assert path[0] == a and path[-1] == b
        assert len(path) - 1 == tree.vertex_distance(a, b)
        assert all(tree.vertex_distance(x, y) == 1 for x, y in zip(path, path[1:]))


def test_points_and_metric():
    a, b = BASE, tv((1, 0), (0, P**3))
    m = tree.point_between(a, b, Fraction(3, 2))
    assert tree.tree_distance(a, m) == Fraction(3, 2)
    assert tree.tree_distance(m, b) == Fraction(3, 2)
    assert tree.circumcenter([a, b]) == m
    assert tree.TreePoint(a, b, 2).is_vertex


def test_four_point_condition():
    rng = random.Random(4)
    verts = tree.ball(BASE, 3)
    for _ in range(200):
        pts = []
        for _ in range(4):
            v = rng.choice(verts)
            w = rng.choice(tree.neighbors(v))
            pts.append(tree.TreePoint(v, w, Fraction(rng.randint(0, 4), 4)))
        assert four_point_check(*pts)


def test_project_to_tree_examples():
    u = (1, 0, 0)
    assert tree.project_to_tree(u, O) == BASE
    x = act(padic.diag(Fraction(1, P), 1, P), O)
    assert tree.project_to_tree(u, x) == tv((1, 0), (0, P))
    y = act(padic.diag(Fraction(1, P), P, 1), O)
    assert tree.project_to_tree(u, y) == tv((P, 0), (0, 1))
    assert tree.vertex_distance(BASE, tree.project_to_tree(u, y)) == 1


def test_projection_lipschitz_constant_is_sharp():
    u = (1, 0, 0)
    y = act(padic.diag(1, Fraction(1, P), P), O)
    assert tree.vertex_distance(BASE, tree.project_to_tree(u, y)) == 2
    assert cartan_type(O, y).norm2() == 2


def test_projection_lipschitz_and_equivariant():
    rng = random.Random(5)
    for _ in range(60):
        u = random_line(rng, P)
        x, y = sampling.vertex(rng, P), sampling.vertex(rng, P)
        d_tree = tree.vertex_distance(tree.project_to_tree(u, x), tree.project_to_tree(u, y))
        # unit tree edges are sqrt(2) building units transverse to u
        assert d_tree**2 <= 2 * cartan_type(x, y).norm2()
        g = sampling.unimodular(rng, P)
        gu = padic.mat_vec(g, u)
        gbar = tree.induced_map(g, u, P)
        assert tree.project_to_tree(gu, act(g, x)) == tree.act_vertex(gbar, tree.project_to_tree(u, x))


def test_bijection_examples_and_roundtrip():
    u = (1, 0, 0)
    assert tree.chamber_end_bijection(u, Flag.from_span(u, (0, 1, 0)), P) == E1
    rng = random.Random(6)
    for _ in range(100):
        u = random_line(rng, P)
        C = residue_flag(rng, u)
        end = tree.chamber_end_bijection(u, C, P)
        assert tree.end_to_chamber(u, end, P) == C
    with pytest.raises(NotInResidue):
        tree.chamber_end_bijection((1, 0, 0), Flag((0, 1, 0), (1, 0, 0)), P)


def test_bijection_equivariance():
    rng = random.Random(7)
    for _ in range(60):
        u = random_line(rng, P)
        C = residue_flag(rng, u)
        g = sampling.unimodular(rng, P)
        gu = padic.mat_vec(g, u)
        lhs = tree.chamber_end_bijection(gu, C.act(g), P)
        assert lhs == tree.act_end(tree.induced_map(g, u, P), tree.chamber_end_bijection(u, C, P))


def test_bijection_continuity():
    u = (1, 0, 0)
    C = Flag.from_span(u, (0, 1, 0))
    m = cross(u, (0, 2, 5))
    prev = None
    for k in range(1, 8):
        Ck = Flag(u, [a + P**k * b for a, b in zip(C.plane, m)])
        assert flag_distance(Ck, C, P) <= Fraction(1, P**k)
        dist = tree.end_metric(BASE, tree.chamber_end_bijection(u, Ck, P), tree.chamber_end_bijection(u, C, P))
        assert dist <= math.exp(-k) + 1e-15
        assert prev is None or dist < prev
        prev = dist


def test_gromov_examples():
    assert tree.gromov_product(BASE, E1, E2) == 0
    assert tree.end_metric(BASE, E1, E2) == 1
    D = tree.TreeEnd((1, P))
    assert tree.gromov_product(BASE, E1, D) == 1
    assert tree.end_metric(BASE, E1, D) == pytest.approx(math.exp(-1))
    assert tree.end_metric(BASE, E1, E1) == 0


def test_gromov_is_distance_to_line():
    rng = random.Random(8)
    for _ in range(30):
        C, D = random_ends(rng, 2)
        verts = tree.ball(BASE, 3)
        on_line = [v for v in verts if tree.gromov_product(v, C, D) == 0]
        for v in rng.sample(verts, 10):
            expect = min(tree.vertex_distance(v, w) for w in on_line) if on_line else None
            if expect is not None and expect < 3 - tree.vertex_distance(BASE, v):
                assert tree.gromov_product(v, C, D) == expect


def test_end_metric_triangle():
    rng = random.Random(9)
    for _ in range(100):
        A, B, C = random_ends(rng, 3)
        d = lambda x, y: tree.end_metric(BASE, x, y)
        assert d(A, C) <= max(d(A, B), d(B, C)) + 1e-15


def test_bary_examples():
    S1 = [E1, E2, tree.TreeEnd((1, 1))]
    assert tree.bary_ends(S1, P) == tree.TreePoint.vertex(BASE)
    S2 = [E1, E2, tree.TreeEnd((1, P))]
    b = tree.bary_ends(S2, P)
    assert b == tree.TreePoint.vertex(tv((1, 0), (0, P)))
    assert tree.tree_distance(BASE, b) == 1
    assert tree.bary_ends(list(reversed(S2)), P) == b
    with pytest.raises(InvalidEndSet):
        tree.bary_ends([E1, E2], P)
    with pytest.raises(InvalidEndSet):
        tree.bary_ends([E1, E2, tree.TreeEnd((2, 0))], P)


def test_bary_matches_brute_force():
    rng = random.Random(10)
    checked = 0
    while checked < 15:
        S = random_ends(rng, rng.randint(3, 5))
        oracle = brute_bary(S, P, radius=3)
        if oracle is None:
            continue
        checked += 1
        assert tree.bary_ends(S, P) == oracle


def test_bary_equivariance():
    rng = random.Random(11)
    for _ in range(30):
        S = random_ends(rng, rng.randint(3, 5))
        g = unimodular2(rng, P)
        gS = [tree.act_end(g, e) for e in S]
        assert tree.bary_ends(gS, P) == tree.bary_ends(S, P).act(g)


def test_pushforward_examples():
    nu = {E1: Fraction(1, 3), E2: Fraction(1, 3), tree.TreeEnd((1, 1)): Fraction(1, 3)}
    assert tree.measure_pushforward(nu, P) == {tree.TreePoint.vertex(BASE): 1}
    four = [E1, E2, tree.TreeEnd((1, 1)), tree.TreeEnd((1, P))]
    out = tree.measure_pushforward({e: Fraction(1, 4) for e in four}, P)
    assert sum(out.values()) == 1
    assert out == {tree.TreePoint.vertex(BASE): Fraction(1, 2), tree.TreePoint.vertex(tv((1, 0), (0, P))): Fraction(1, 2)}
    with pytest.raises(TooFewAtoms):
        tree.measure_pushforward({E1: 1, E2: 1}, P)


def test_pushforward_equivariance():
    rng = random.Random(12)
    for _ in range(10):
        ends = random_ends(rng, 4)
        nu = {e: Fraction(rng.randint(1, 4)) for e in ends}
        total = sum(nu.values())
        nu = {e: w / total for e, w in nu.items()}
        g = unimodular2(rng, P)
        lhs = tree.measure_pushforward({tree.act_end(g, e): w for e, w in nu.items()}, P)
        rhs = {x.act(g): w for x, w in tree.measure_pushforward(nu, P).items()}
        assert lhs == rhs


def test_beta_eps_examples():
    a, b = BASE, tv((1, 0), (0, P * P))
    mid = tree.point_between(a, b, 1)
    assert tree.beta_eps({a: Fraction(1, 2), b: Fraction(1, 2)}, Fraction(1, 4)) == mid
    assert tree.beta_eps({a: 1}, Fraction(1, 3)) == tree.TreePoint.vertex(a)
    with pytest.raises(InvalidEpsilon):
        tree.beta_eps({a: 1}, Fraction(1, 2))
    with pytest.raises(EmptyMeasure):
        tree.beta_eps({}, Fraction(1, 4))


def test_beta_eps_in_hull_and_equivariant():
    rng = random.Random(13)
    verts = tree.ball(BASE, 3)
    for _ in range(30):
        atoms = rng.sample(verts, rng.randint(2, 4))
        ws = [Fraction(rng.randint(1, 5)) for _ in atoms]
        nu = {v: w / sum(ws) for v, w in zip(atoms, ws)}
        eps = Fraction(rng.randint(1, 9), 20)
        b = tree.beta_eps(nu, eps)
        # in the hull: some pair of atoms has b on its geodesic
        assert any(
            tree.tree_distance(x, b) + tree.tree_distance(b, y) == tree.tree_distance(x, y)
            for x in atoms for y in atoms
        )
        g = unimodular2(rng, P)
        gnu = {tree.act_vertex(g, v): w for v, w in nu.items()}
        assert tree.beta_eps(gnu, eps) == b.act(g)
