"""Exterior calculus: frozen convention checks and randomized identities."""

import random
from fractions import Fraction

import pytest

from jetnf.errors import SingularAtOrigin
from jetnf.forms import (
    FormJet,
    VectorFieldJet,
    contract,
    d_of_function,
    exterior_derivative,
    flow_box,
    pullback,
    rectify,
    vf_pullback,
    vf_pushforward_residual,
    wedge,
    wedge_power,
)
from jetnf.jets import Jet, MapJet, VariableSpace, jet_from_polynomial, map_compose

S1 = VariableSpace.symplectic(1)
S2 = VariableSpace.symplectic(2)
C1 = VariableSpace.constrained(1)


def rnd_jet(rng, space, order, density=0.3, min_degree=0):
    from itertools import product
    coeffs = {}
    for e in product(range(order + 1), repeat=space.dim):
        if min_degree <= sum(e) <= order and rng.random() < density:
            coeffs[e] = Fraction(rng.randint(-3, 3), rng.randint(1, 2))
    return Jet(space, order, coeffs)


def rnd_form(rng, space, degree, order, density=0.4):
    import itertools
    coeffs = {}
    for idx in itertools.combinations(range(space.dim), degree):
        if rng.random() < density:
            coeffs[idx] = rnd_jet(rng, space, order, density=0.4)
    return FormJet(space, degree, order, coeffs)


def rnd_map(rng, space, order):
    comps = []
    for i in range(space.dim):
        comps.append(Jet.coordinate(space, i, order)
                     + rnd_jet(rng, space, order, density=0.2, min_degree=2))
    return MapJet(space, comps)


def test_exterior_derivative_basic():
    p_dq = FormJet(S1, 1, 3, {(1,): Jet.variable(S1, "p1", 3)})
    d = exterior_derivative(p_dq)
    assert d.coefficient((0, 1)) == Jet.constant(S1, 2, 1)


def test_exterior_derivative_leibniz_term():
    alpha = FormJet(S1, 1, 3, {(0,): jet_from_polynomial(S1, 3, {"q1*p1": 1})})
    d = exterior_derivative(alpha)
    # d(q1 p1 dp1) = p1 dq1^dp1 = -p1 dp1^dq1
    assert d.coefficient((0, 1)) == jet_from_polynomial(S1, 2, {"p1": -1})


def test_dd_zero_random():
    rng = random.Random(2)
    for _ in range(10):
        f = rnd_jet(rng, S2, 4)
        assert exterior_derivative(d_of_function(f)).is_zero()
        alpha = rnd_form(rng, S2, 1, 4)
        assert exterior_derivative(exterior_derivative(alpha)).is_zero()


def test_wedge_conventions():
    dp = d_of_function(Jet.variable(S1, "p1", 3))
    dq = d_of_function(Jet.variable(S1, "q1", 3))
    w = wedge(dp, dq)
    assert w.evaluate_constant((1, 0), (0, 1)) == 1
    assert (wedge(dq, dp) + w).is_zero()


def test_wedge_square_standard():
    from jetnf.symplectic import standard_form
    omega = standard_form(S2, 3)
    sq = wedge_power(omega, 2)
    assert sq.coefficient((0, 1, 2, 3)) == Jet.constant(S2, 3, 2)


def test_contract_conventions():
    from jetnf.symplectic import standard_form
    omega = standard_form(S1, 3)
    dp_dir = VectorFieldJet.coordinate_axis(S1, 0, 3)
    dq_dir = VectorFieldJet.coordinate_axis(S1, 1, 3)
    assert contract(dp_dir, omega).coefficient((1,)) == Jet.constant(S1, 3, 1)
    assert contract(dq_dir, omega).coefficient((0,)) == Jet.constant(S1, 3, -1)
    omega_c = standard_form(C1, 3)
    dx_dir = VectorFieldJet.coordinate_axis(C1, 0, 3)
    res = contract(dx_dir, omega_c)
    assert res.coefficient((1,)) == Jet.constant(C1, 3, 1)
    assert res.coefficient((2,)).is_zero()


def test_pullback_examples():
    from jetnf.symplectic import standard_form
    omega = standard_form(S1, 4)
    assert (pullback(MapJet.identity(S1, 5), omega) - omega.truncate(4)).is_zero()
    m = MapJet(S1, [jet_from_polynomial(S1, 5, {"p1": 2}),
                    jet_from_polynomial(S1, 5, {"q1": Fraction(1, 2)})])
    assert (pullback(m, omega) - omega).is_zero()
    m2 = MapJet(S1, [Jet.variable(S1, "p1", 5),
                     jet_from_polynomial(S1, 5, {"q1": 2})])
    assert (pullback(m2, omega) - omega.scale(2)).is_zero()


def test_pullback_functoriality():
    rng = random.Random(4)
    for _ in range(6):
        m1 = rnd_map(rng, S1, 4)
        m2 = rnd_map(rng, S1, 4)
        alpha = rnd_form(rng, S1, 1, 4)
        lhs = pullback(map_compose(m1, m2), alpha)
        rhs = pullback(m2, pullback(m1, alpha))
        assert (lhs.truncate(rhs.order) - rhs.truncate(lhs.order)).is_zero()


def test_pullback_commutes_with_d():
    rng = random.Random(6)
    for _ in range(6):
        m = rnd_map(rng, S2, 4)
        alpha = rnd_form(rng, S2, 1, 4)
        lhs = pullback(m, exterior_derivative(alpha))
        rhs = exterior_derivative(pullback(m, alpha))
        k = min(lhs.order, rhs.order)
        assert (lhs.truncate(k) - rhs.truncate(k)).is_zero()


def test_contraction_antiderivation():
    rng = random.Random(8)
    for _ in range(8):
        v = VectorFieldJet(S2, [rnd_jet(rng, S2, 4) for _ in range(S2.dim)])
        alpha = rnd_form(rng, S2, 1, 4)
        beta = rnd_form(rng, S2, 2, 4)
        lhs = contract(v, wedge(alpha, beta))
        rhs = wedge(contract(v, alpha), beta) - wedge(alpha, contract(v, beta))
        assert (lhs - rhs).is_zero()


def test_rectify_trivial_and_scaled():
    v = VectorFieldJet.coordinate_axis(C1, 0, 4)
    phi = rectify(v)
    assert phi.truncate(4).is_identity()
    v2 = v.scale(2)
    phi2 = rectify(v2)
    # pushforward of the x axis field must be 2 d/dx: x-component doubles
    assert phi2.components[0] == jet_from_polynomial(C1, phi2.order, {"x": 2})
    assert all(r.is_zero() for r in vf_pushforward_residual(phi2, 0, v2))


def test_rectify_shear_field():
    # V = d/dx + x d/dy
    v = VectorFieldJet(C1, [Jet.constant(C1, 3, 1), Jet.variable(C1, "x", 3),
                            Jet.zero(C1, 3), Jet.zero(C1, 3)])
    phi = rectify(v)
    res = vf_pushforward_residual(phi, 0, v)
    assert all(r.is_zero() for r in res)
    lin = phi.linear_part()
    from jetnf import linalg
    assert linalg.mat_det(lin) != 0
    assert all(c.constant_term() == 0 for c in phi.components)


def test_rectify_random_fields():
    rng = random.Random(10)
    for _ in range(6):
        comps = [rnd_jet(rng, S2, 3, density=0.25) for _ in range(S2.dim)]
        comps[rng.randrange(S2.dim)] += Jet.constant(S2, 3, rng.randint(1, 2))
        v = VectorFieldJet(S2, comps)
        if all(c == 0 for c in v.at_origin()):
            continue
        phi = rectify(v)
        axis = next(i for i, c in enumerate(v.at_origin()) if c != 0)
        res = vf_pushforward_residual(phi, axis, v)
        assert all(r.truncate(v.order).is_zero() for r in res)


def test_rectify_singular_origin():
    v = VectorFieldJet(S1, [Jet.variable(S1, "p1", 3), Jet.zero(S1, 3)])
    with pytest.raises(SingularAtOrigin):
        rectify(v)


def test_flow_box_straightens_and_fixes_section():
    # V = d/dy + p1 d/dp1 on the quasi space: flow from {y=0}
    Q1s = VariableSpace.quasi(1)
    v = VectorFieldJet(Q1s, [Jet.constant(Q1s, 4, 1),
                             Jet.variable(Q1s, "p1", 4),
                             Jet.zero(Q1s, 4)])
    phi = flow_box(v, 0)
    res = vf_pushforward_residual(phi, 0, v)
    assert all(r.truncate(4).is_zero() for r in res)
    # the section y=0 is fixed pointwise
    for i, c in enumerate(phi.components):
        fixed = c.set_vars_zero([0])
        expect = Jet.coordinate(Q1s, i, c.order).set_vars_zero([0])
        assert (fixed - expect).is_zero()


def test_vf_pullback_inverts_pushforward():
    rng = random.Random(12)
    for _ in range(5):
        m = rnd_map(rng, S1, 4)
        v = VectorFieldJet(S1, [rnd_jet(rng, S1, 4, density=0.4) for _ in range(2)])
        w = vf_pullback(m, v)
        # Dm . w = v o m, componentwise
        from jetnf.jets import jet_compose
        for i in range(2):
            lhs = Jet.zero(S1, w.order)
            for j in range(2):
                lhs = lhs + m.components[i].derivative(j).truncate(w.order) * w.components[j]
            rhs = jet_compose(v.components[i], m).truncate(lhs.order)
            assert (lhs - rhs).is_zero()
