"""Quotient-ring arithmetic: frozen examples plus randomized ring laws."""

import random
from fractions import Fraction

import pytest

from jetnf.errors import DegenerateDirection, SingularLinearPart, SpaceMismatch
from jetnf.jets import (
    IdealSpec,
    Jet,
    MapJet,
    VariableSpace,
    coefficient_expansion,
    equal_to_order,
    ideal_membership,
    implicit_solve,
    jet_compose,
    jet_from_polynomial,
    jet_multiply,
    map_compose,
    map_invert,
)

S1 = VariableSpace.symplectic(1)
Q1 = VariableSpace.quasi(1)


def brute_multiply(a, b):
    """Independent oracle: full polynomial convolution, then truncation."""
    out = {}
    for ea, ca in a.coeffs.items():
        for eb, cb in b.coeffs.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            out[key] = out.get(key, Fraction(0)) + ca * cb
    order = min(a.order, b.order)
    return Jet(a.space, order, {e: c for e, c in out.items() if sum(e) <= order})


def random_jet(rng, space, order, density=0.5, min_degree=0):
    coeffs = {}
    from itertools import product
    for e in product(range(order + 1), repeat=space.dim):
        if min_degree <= sum(e) <= order and rng.random() < density:
            coeffs[e] = Fraction(rng.randint(-4, 4), rng.randint(1, 3))
    return Jet(space, order, coeffs)


def test_multiply_monomials():
    q = Jet.variable(S1, "q1", 4)
    p = Jet.variable(S1, "p1", 4)
    prod = jet_multiply(q, p)
    assert prod == jet_from_polynomial(S1, 4, {"q1*p1": 1})


def test_multiply_difference_of_squares():
    one_plus = jet_from_polynomial(Q1, 2, {"": 1, "y": 1})
    one_minus = jet_from_polynomial(Q1, 2, {"": 1, "y": -1})
    assert jet_multiply(one_plus, one_minus) == jet_from_polynomial(Q1, 2, {"": 1, "y^2": -1})


def test_multiply_truncates_cube():
    one_plus = jet_from_polynomial(Q1, 2, {"": 1, "y": 1})
    cube = jet_multiply(jet_multiply(one_plus, one_plus), one_plus)
    # oracle: (1+y)^3 = 1 + 3y + 3y^2 + y^3, drop the degree-3 term
    assert cube == jet_from_polynomial(Q1, 2, {"": 1, "y": 3, "y^2": 3})


def test_multiply_requires_matching_order():
    a = Jet.variable(S1, "q1", 3)
    b = Jet.variable(S1, "q1", 4)
    with pytest.raises(SpaceMismatch):
        jet_multiply(a, b)


def test_ring_laws_random():
    rng = random.Random(7)
    for dim_kind in [(VariableSpace.symplectic(3), 4), (VariableSpace.constrained(2), 3)]:
        space, order = dim_kind
        for _ in range(10):
            a = random_jet(rng, space, order, density=0.15)
            b = random_jet(rng, space, order, density=0.15)
            c = random_jet(rng, space, order, density=0.15)
            assert a * b == b * a
            assert (a * b) * c == a * (b * c)
            assert a * (b + c) == a * b + a * c
            assert a * b == brute_multiply(a, b)


def test_compose_identity():
    f = Jet.variable(S1, "p1", 5)
    assert jet_compose(f, MapJet.identity(S1, 5)) == f


def test_compose_scaling():
    f = jet_from_polynomial(S1, 4, {"p1*q1": 1})
    m = MapJet(S1, [jet_from_polynomial(S1, 4, {"p1": 2}),
                    jet_from_polynomial(S1, 4, {"q1": Fraction(1, 2)})])
    assert jet_compose(f, m) == f


def test_compose_shear():
    f = jet_from_polynomial(S1, 2, {"q1^2": 1})
    m = MapJet(S1, [Jet.variable(S1, "p1", 2),
                    jet_from_polynomial(S1, 2, {"q1": 1, "p1": 1})])
    assert jet_compose(f, m) == jet_from_polynomial(S1, 2, {"q1^2": 1, "p1*q1": 2, "p1^2": 1})


def test_compose_associates_with_map_composition():
    rng = random.Random(3)
    space = VariableSpace.symplectic(2)
    order = 4
    for _ in range(5):
        def random_map():
            comps = []
            for i in range(space.dim):
                j = random_jet(rng, space, order, density=0.2, min_degree=2)
                j = j + Jet.coordinate(space, i, order)
                comps.append(j)
            return MapJet(space, comps)
        m1, m2 = random_map(), random_map()
        f = random_jet(rng, space, order, density=0.3)
        assert jet_compose(f, map_compose(m1, m2)) == jet_compose(jet_compose(f, m1), m2)


def test_invert_identity_and_linear():
    ident = MapJet.identity(S1, 3)
    assert map_invert(ident).is_identity()
    m = MapJet(S1, [jet_from_polynomial(S1, 3, {"p1": 2}),
                    jet_from_polynomial(S1, 3, {"q1": Fraction(1, 2)})])
    inv = map_invert(m)
    assert inv.components[0] == jet_from_polynomial(S1, 3, {"p1": Fraction(1, 2)})
    assert inv.components[1] == jet_from_polynomial(S1, 3, {"q1": 2})


def test_invert_nonlinear_frozen():
    m = MapJet(S1, [Jet.variable(S1, "p1", 3),
                    jet_from_polynomial(S1, 3, {"q1": 1, "q1^2": 1})])
    inv = map_invert(m)
    # hand check: q1 - q1^2 + 2q1^3 substituted into q + q^2 returns q1 mod deg 4
    assert inv.components[1] == jet_from_polynomial(S1, 3, {"q1": 1, "q1^2": -1, "q1^3": 2})


def test_invert_round_trip_random():
    rng = random.Random(11)
    space = VariableSpace.symplectic(2)
    order = 4
    for _ in range(8):
        comps = []
        for i in range(space.dim):
            j = random_jet(rng, space, order, density=0.15, min_degree=2)
            comps.append(j + Jet.coordinate(space, i, order))
        m = MapJet(space, comps)
        inv = map_invert(m)
        assert map_compose(m, inv).is_identity()
        assert map_compose(inv, m).is_identity()


def test_invert_singular_linear_part():
    m = MapJet(S1, [Jet.variable(S1, "p1", 3), Jet.variable(S1, "p1", 3)])
    with pytest.raises(SingularLinearPart):
        map_invert(m)


def test_implicit_solve_trivial_and_scaled():
    y = Jet.variable(Q1, "y", 3)
    assert implicit_solve(y, y, 0) == y
    two_y = jet_from_polynomial(Q1, 3, {"y": 2})
    assert implicit_solve(two_y, y, 0) == jet_from_polynomial(Q1, 3, {"y": Fraction(1, 2)})


def test_implicit_solve_quadratic():
    f = jet_from_polynomial(Q1, 3, {"y": 1, "y^2": 1})
    y = Jet.variable(Q1, "y", 3)
    sol = implicit_solve(f, y, 0)
    assert sol == jet_from_polynomial(Q1, 3, {"y": 1, "y^2": -1, "y^3": 2})


def test_implicit_solve_back_substitution_random():
    rng = random.Random(5)
    space = VariableSpace.quasi(1)
    order = 4
    from jetnf.jets import substitute_variable
    for _ in range(8):
        f = random_jet(rng, space, order, density=0.4, min_degree=2)
        f = f + Jet.variable(space, "y", order)
        rhs = random_jet(rng, space, order, density=0.3, min_degree=2)
        rhs = rhs + Jet.variable(space, "y", order)
        sol = implicit_solve(f, rhs, 0)
        assert substitute_variable(f, 0, sol) == rhs.truncate(sol.order)


def test_implicit_solve_degenerate():
    f = jet_from_polynomial(Q1, 3, {"y^2": 1})
    with pytest.raises(DegenerateDirection):
        implicit_solve(f, Jet.variable(Q1, "y", 3), 0)


def test_ideal_membership_examples():
    S2 = VariableSpace.symplectic(2)
    i1 = IdealSpec(S2, 1)
    i2 = IdealSpec(S2, 2)
    assert ideal_membership(jet_from_polynomial(S2, 4, {"q1*p2^2": 1}), i1)
    assert not ideal_membership(Jet.variable(S2, "p2", 4), i2)
    assert ideal_membership(jet_from_polynomial(S2, 4, {"q1": 1, "p1*q2": 1}), i2)


def test_ideal_membership_matches_brute_force():
    rng = random.Random(13)
    S2 = VariableSpace.symplectic(2)
    for level in (1, 2, 3):
        ideal = IdealSpec(S2, level)
        for _ in range(10):
            f = random_jet(rng, S2, 3, density=0.3)
            brute = all(
                any(e[g] > 0 for g in ideal.generators) for e in f.coeffs)
            assert ideal_membership(f, ideal) == brute


def test_coefficient_expansion():
    f = jet_from_polynomial(Q1, 3, {"p1": 1, "q1*y": 1})
    cs = coefficient_expansion(f, 0)
    assert cs[0] == jet_from_polynomial(Q1, 3, {"p1": 1})
    assert cs[1] == jet_from_polynomial(Q1, 2, {"q1": 1})
    f2 = jet_from_polynomial(Q1, 3, {"y^2": 1})
    cs2 = coefficient_expansion(f2, 0)
    assert cs2[0].is_zero() and cs2[1].is_zero()
    assert cs2[2] == Jet.constant(Q1, 1, 1)
    f3 = jet_from_polynomial(Q1, 3, {"p1": 1, "y*p1": 1})
    cs3 = coefficient_expansion(f3, 0)
    assert cs3[0] == jet_from_polynomial(Q1, 3, {"p1": 1})
    assert cs3[1] == jet_from_polynomial(Q1, 2, {"p1": 1})


def test_expansion_reconstructs():
    rng = random.Random(17)
    for _ in range(5):
        f = random_jet(rng, Q1, 4, density=0.5)
        cs = coefficient_expansion(f, 0)
        y = Jet.variable(Q1, "y", 4)
        total = Jet.zero(Q1, 4)
        for k, c in enumerate(cs):
            total = total + c.lift(4) * y.power(k)
        assert equal_to_order(total, f, 4)
