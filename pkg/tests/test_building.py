from fractions import Fraction

import pytest

from btsl3 import padic, sampling
from btsl3.building import (
    BuildingVertex,
    Flag,
    GermChamber,
    act,
    adapted_basis,
    apartment_frame,
    attracting_flag,
    cartan_flag,
    cartan_type,
    flag_distance,
    flag_gap_exponent,
    flag_mod_p,
    germ_project,
    opposite,
    relative_matrix,
    retraction_coordinate,
    sector_membership,
    sqrt_le_sum,
    standard_flag,
    standard_vertex,
    weyl_distance,
)
from btsl3.errors import NonRegularType, NotInGroup
from btsl3.weyl import IDENTITY, S1, W0, TypeVector, opposition_involution

P = 3
O = standard_vertex(P)
D = padic.diag(Fraction(1, P), 1, P)
E1, E2, E3 = (1, 0, 0), (0, 1, 0), (0, 0, 1)


def at(g):
    return act(g, O)


def test_act_basics(rng):
    assert act(padic.identity(), O) == O
    y = at(D)
    assert y != O and cartan_type(O, y) == TypeVector((1, 0, -1))
    for _ in range(20):
        g = sampling.group_element(rng, P)
        x = sampling.vertex(rng, P)
        assert act(g, act(padic.inverse(g), x)) == x
    with pytest.raises(NotInGroup):
        act(padic.diag(P, 1, 1), O)


def test_vertex_equality_matches_zero_type(rng):
    for _ in range(30):
        x = sampling.vertex(rng, P)
        k = sampling.unimodular(rng, P)
        y = BuildingVertex.from_basis(padic.mat_mul(x.basis(), k), P)
        assert x == y and cartan_type(x, y).is_zero()


def test_cartan_type_examples():
    assert cartan_type(O, O).is_zero()
    assert cartan_type(O, at(D)) == TypeVector((1, 0, -1))
    g = padic.diag(Fraction(1, P), Fraction(1, P), P * P)
    assert cartan_type(O, at(g)) == TypeVector((1, 1, -2))
    g = padic.as_matrix(((1, Fraction(1, P), 0), (0, 1, 0), (0, 0, 1)))
    assert cartan_type(O, at(g)) == TypeVector((1, 0, -1))


def test_metric_properties_random(rng):
    for _ in range(60):
        x, y, z = (sampling.vertex(rng, P) for _ in range(3))
        t = cartan_type(x, y)
        assert cartan_type(y, x) == opposition_involution(t)
        assert sqrt_le_sum(t.norm2(), cartan_type(x, z).norm2(), cartan_type(z, y).norm2())
        g = sampling.group_element(rng, P)
        assert cartan_type(act(g, x), act(g, y)) == t


def test_sqrt_le_sum_exact():
    assert sqrt_le_sum(Fraction(4), Fraction(1), Fraction(1))
    assert not sqrt_le_sum(Fraction(4) + Fraction(1, 10**9), Fraction(1), Fraction(1))


def test_flag_invariants():
    with pytest.raises(ValueError):
        Flag(E1, E1)
    F = Flag((-2, 0, 0), (0, 0, -5))
    assert F == standard_flag()
    assert Flag.from_span(E1, E2) == standard_flag()


def test_flag_distance_examples():
    F = standard_flag()
    assert flag_distance(F, F, P) == 0
    assert flag_distance(F, Flag((1, P, 0), E3), P) == Fraction(1, P)
    assert flag_distance(F, Flag(E2, E3), P) == 1


def test_flag_distance_ultrametric_and_invariance(rng):
    for _ in range(100):
        F, G, H = (sampling.flag(rng, P) for _ in range(3))
        assert flag_distance(F, H, P) <= max(flag_distance(F, G, P), flag_distance(G, H, P))
        k = sampling.unimodular(rng, P)
        assert flag_distance(F.act(k), G.act(k), P) == flag_distance(F, G, P)


def test_flag_near_has_requested_gap(rng):
    for k in (1, 2, 4):
        F = sampling.flag(rng, P)
        G = sampling.flag_near(rng, F, P, k)
        assert flag_gap_exponent(F, G, P) >= k


def test_weyl_distance_examples():
    F0 = standard_flag()
    assert weyl_distance(F0, F0) == IDENTITY
    F1 = Flag(E3, E1)
    assert weyl_distance(F0, F1) == W0 and opposite(F0, F1)
    F2 = Flag(E2, E3)
    w = weyl_distance(F0, F2)
    assert w == S1 and w.length() == 1 and not opposite(F0, F2)


def test_weyl_distance_lengths_and_symmetry(rng):
    F0 = standard_flag()
    cases = {
        Flag(E1, E2): 1,  # same line
        Flag(E3, E2): 2,  # e1 lies in <e1, e3>
        Flag(E2, E1): 2,  # e2 lies in <e1, e2>
    }
    for G, length in cases.items():
        assert weyl_distance(F0, G).length() == length
    for _ in range(100):
        F, G = sampling.flag(rng, P), sampling.flag(rng, P)
        w = weyl_distance(F, G)
        assert weyl_distance(G, F) == w.inverse()
        det = padic.det(padic.transpose(padic.as_matrix(apartment_frame(F, G))))
        assert opposite(F, G) == (w.length() == 3) == (det != 0)


def test_weyl_distance_matches_relative_position(rng):
    # G = k F with k in the Bruhat cell of w has relative position w
    F = standard_flag()
    for w in [IDENTITY, S1, W0]:
        perm = [[Fraction(int(w.perm[j] == i)) for j in range(3)] for i in range(3)]
        G = F.act(perm)
        assert weyl_distance(F, G).length() == w.length()


def test_cartan_flag_examples():
    assert cartan_flag(D, P) == standard_flag()
    w = padic.as_matrix(((0, 0, 1), (1, 0, 0), (0, 1, 0)))
    conj = padic.mat_mul(padic.mat_mul(w, D), padic.inverse(w))
    assert cartan_flag(conj, P) == Flag.from_span((0, 1, 0), (0, 0, 1))
    with pytest.raises(NonRegularType) as exc:
        cartan_flag(padic.identity(), P)
    assert exc.value.wall == 0
    with pytest.raises(NonRegularType) as exc:
        cartan_flag(padic.diag(Fraction(1, P), Fraction(1, P), P * P), P)
    assert exc.value.wall == 1


def test_cartan_flag_equivariance_and_pivot_independence(rng):
    order = [(i, j) for j in range(3) for i in reversed(range(3))]
    done = 0
    while done < 40:
        g = sampling.group_element(rng, P, spread=3)
        vals = padic.smith_decompose(g, P).valuations
        if len(set(vals)) < 3:
            continue
        done += 1
        F = cartan_flag(g, P)
        gap = min(vals[1] - vals[0], vals[2] - vals[1])
        G = cartan_flag(g, P, pivot_order=order)
        assert flag_gap_exponent(F, G, P) >= gap
        k = sampling.unimodular(rng, P)
        H = cartan_flag(padic.mat_mul(k, g), P)
        assert flag_gap_exponent(H, F.act(k), P) >= gap


def test_flag_mod_p_examples(rng):
    std = flag_mod_p(standard_flag(), P)
    assert std == GermChamber(E1, E3, P)
    assert flag_mod_p(Flag((1, P, 0), E3), P) == std
    for _ in range(30):
        F = sampling.flag(rng, P)
        k = sampling.unimodular(rng, P)
        assert flag_mod_p(F.act(k), P) == flag_mod_p(F, P).act(k)


def test_germ_project(rng):
    assert germ_project(O, at(D)) == flag_mod_p(standard_flag(), P)
    with pytest.raises(NonRegularType):
        germ_project(O, at(padic.diag(Fraction(1, P), Fraction(1, P), P * P)))
    done = 0
    while done < 40:
        y = sampling.vertex(rng, P, spread=3)
        if not cartan_type(O, y).coords[0] > cartan_type(O, y).coords[1] > cartan_type(O, y).coords[2]:
            continue
        done += 1
        assert germ_project(O, y) == flag_mod_p(attracting_flag(relative_matrix(O, y), P), P)


def test_sector_examples():
    C = standard_flag()
    assert sector_membership(O, C, O)
    y = at(D)
    assert sector_membership(O, C, y)
    assert retraction_coordinate(O, C, y) == (1, 0, -1)
    z = at(padic.diag(P, 1, Fraction(1, P)))
    assert not sector_membership(O, C, z)
    assert retraction_coordinate(O, C, z) == (-1, 0, 1)


def test_sector_constructive_oracle(rng):
    for _ in range(40):
        x = sampling.vertex(rng, P)
        C = sampling.flag(rng, P)
        h = adapted_basis(x, C)
        assert BuildingVertex.from_basis(h, P) == x
        assert Flag.from_span(*[[h[r][c] for r in range(3)] for c in (0, 1)]) == C
        a = sorted((rng.randint(-3, 3) for _ in range(2)), reverse=True)
        dom = (a[0] + 2, a[0], a[1] - 1)
        m = Fraction(sum(dom), 3)
        y = BuildingVertex.from_basis(padic.mat_mul(h, padic.p_diag(P, [-d for d in dom])), P)
        assert sector_membership(x, C, y)
        assert retraction_coordinate(x, C, y) == tuple(d - m for d in dom)
        rev = (dom[2], dom[1], dom[0])
        y2 = BuildingVertex.from_basis(padic.mat_mul(h, padic.p_diag(P, [-d for d in rev])), P)
        assert not sector_membership(x, C, y2)


def test_json_roundtrip(rng):
    F = sampling.flag(rng, P)
    assert Flag.from_json(F.to_json()) == F
    x = sampling.vertex(rng, P)
    assert BuildingVertex.from_json(x.to_json(), P) == x
    assert all(isinstance(s, str) for s in F.to_json()["line"])
