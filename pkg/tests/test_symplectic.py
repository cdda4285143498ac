"""Hamiltonian machinery, certification, and the two Darboux reductions."""

import random
from fractions import Fraction

import pytest

from jetnf.errors import TransversalityFailure
from jetnf.forms import FormJet, exterior_derivative, pullback
from jetnf.jets import Jet, MapJet, VariableSpace, jet_from_polynomial, map_compose
from jetnf.symplectic import (
    QuasiSymplecticFormJet,
    SymplecticFormJet,
    darboux_reduce,
    hamiltonian_flow,
    hamiltonian_vf,
    is_symplectomorphism,
    kernel_field,
    poisson_bracket,
    quasi_darboux,
    random_symplectomorphism,
    standard_form,
)

S1 = VariableSpace.symplectic(1)
S2 = VariableSpace.symplectic(2)
C1 = VariableSpace.constrained(1)
Q1 = VariableSpace.quasi(1)


def rnd_jet(rng, space, order, density=0.3, min_degree=0):
    from itertools import product
    coeffs = {}
    for e in product(range(order + 1), repeat=space.dim):
        if min_degree <= sum(e) <= order and rng.random() < density:
            coeffs[e] = Fraction(rng.randint(-3, 3), rng.randint(1, 2))
    return Jet(space, order, coeffs)


def random_closed_form(rng, space, order, density=0.25):
    """Standard part plus d(random 1-form with quadratic-or-higher coefficients)."""
    coeffs = {}
    for i in range(space.dim):
        coeffs[(i,)] = rnd_jet(rng, space, order + 1, density=density, min_degree=2)
    beta = FormJet(space, 1, order + 1, coeffs)
    return standard_form(space, order) + exterior_derivative(beta)


def test_hamiltonian_vf_examples():
    omega = SymplecticFormJet.standard(S1, 4)
    z = hamiltonian_vf(Jet.variable(S1, "p1", 4), omega)
    assert z.components[0].is_zero()
    assert z.components[1] == Jet.constant(S1, 3, -1)

    omega_c = SymplecticFormJet.standard(C1, 4)
    zy = hamiltonian_vf(Jet.variable(C1, "y", 4), omega_c)
    assert zy.components[0] == Jet.constant(C1, 3, 1)
    assert all(zy.components[i].is_zero() for i in (1, 2, 3))

    z2 = hamiltonian_vf(jet_from_polynomial(S1, 4, {"p1^2": Fraction(1, 2)}), omega)
    assert z2.components[1] == jet_from_polynomial(S1, 3, {"p1": -1})


def test_hamiltonian_vf_linearity():
    rng = random.Random(1)
    omega = SymplecticFormJet.standard(S2, 4)
    for _ in range(5):
        f, g = rnd_jet(rng, S2, 4), rnd_jet(rng, S2, 4)
        a, b = Fraction(rng.randint(-3, 3)), Fraction(rng.randint(-3, 3))
        lhs = hamiltonian_vf(f.scale(a) + g.scale(b), omega)
        rhs_f, rhs_g = hamiltonian_vf(f, omega), hamiltonian_vf(g, omega)
        rhs = rhs_f.scale(a) + rhs_g.scale(b)
        assert (lhs - rhs).is_zero()


def test_poisson_examples():
    omega_c = SymplecticFormJet.standard(C1, 4)
    y = Jet.variable(C1, "y", 4)
    h = jet_from_polynomial(C1, 4, {"x^2": 1, "y": 1, "p1": 1})
    br = poisson_bracket(y, h, omega_c)
    assert br == jet_from_polynomial(C1, 3, {"x": 2})
    br2 = poisson_bracket(y, br, omega_c)
    assert br2 == Jet.constant(C1, 2, 2)


def test_poisson_antisymmetry_leibniz_jacobi():
    rng = random.Random(3)
    omega = SymplecticFormJet.standard(S2, 4)
    for _ in range(6):
        f, g, h = (rnd_jet(rng, S2, 4) for _ in range(3))
        assert (poisson_bracket(f, f, omega)).is_zero()
        fg = poisson_bracket(f, g, omega)
        gf = poisson_bracket(g, f, omega)
        assert (fg + gf).is_zero()
        lhs = poisson_bracket(f, g * h, omega)
        rhs = g.truncate(lhs.order) * poisson_bracket(f, h, omega) \
            + h.truncate(lhs.order) * poisson_bracket(f, g, omega)
        assert (lhs - rhs).is_zero()
        jac = poisson_bracket(f, poisson_bracket(g, h, omega), omega) \
            + poisson_bracket(g, poisson_bracket(h, f, omega), omega) \
            + poisson_bracket(h, poisson_bracket(f, g, omega), omega)
        assert jac.is_zero()


def test_is_symplectomorphism_examples():
    omega = SymplecticFormJet.standard(S1, 4)
    assert is_symplectomorphism(MapJet.identity(S1, 5), omega).ok
    good = MapJet(S1, [jet_from_polynomial(S1, 5, {"p1": 2}),
                       jet_from_polynomial(S1, 5, {"q1": Fraction(1, 2)})])
    assert is_symplectomorphism(good, omega).ok
    bad = MapJet(S1, [jet_from_polynomial(S1, 5, {"p1": 2}),
                      Jet.variable(S1, "q1", 5)])
    rep = is_symplectomorphism(bad, omega)
    assert not rep.ok
    assert rep.residual.coefficient((0, 1)) == Jet.constant(S1, 4, 1)


def test_darboux_standard_and_scaled():
    omega = standard_form(S1, 4)
    phi = darboux_reduce(omega)
    assert pullback(phi, omega) - standard_form(S1, 3) == FormJet(S1, 2, 3) \
        or (pullback(phi, omega) - standard_form(S1, 4).truncate(pullback(phi, omega).order)).is_zero()
    twice = omega.scale(2)
    phi2 = darboux_reduce(twice)
    res = pullback(phi2, twice) - standard_form(S1, 4).truncate(phi2.order - 1)
    assert res.is_zero()


def test_darboux_perturbed_forms():
    rng = random.Random(5)
    for n, cases in ((1, 6), (2, 4)):
        space = VariableSpace.symplectic(n)
        for _ in range(cases):
            omega = random_closed_form(rng, space, 4)
            phi = darboux_reduce(omega)
            res = pullback(phi, omega)
            res = res - standard_form(space, res.order)
            assert res.is_zero()


def test_quasi_darboux_trivial_and_scaled():
    omega = standard_form(Q1, 4)
    y = Jet.variable(Q1, "y", 4)
    phi = quasi_darboux(omega, y)
    assert (pullback(phi, omega) - standard_form(Q1, 3)).is_zero()
    from jetnf.jets import jet_compose
    assert jet_compose(y, phi) == Jet.variable(Q1, "y", phi.order).truncate(phi.order)

    two_y = jet_from_polynomial(Q1, 4, {"y": 2})
    phi2 = quasi_darboux(omega, two_y)
    assert jet_compose(two_y, phi2).truncate(4) == Jet.variable(Q1, "y", 4)
    assert (pullback(phi2, omega) - standard_form(Q1, 3)).is_zero()


def test_quasi_darboux_curved_function():
    omega = standard_form(Q1, 3)
    p = jet_from_polynomial(Q1, 3, {"y": 1, "q1^2": 1})
    phi = quasi_darboux(omega, p)
    from jetnf.jets import jet_compose
    res_p = jet_compose(p, phi) - Jet.variable(Q1, "y", phi.order)
    assert res_p.truncate(3).is_zero()
    res_w = pullback(phi, omega) - standard_form(Q1, 2)
    assert res_w.is_zero()


def test_quasi_darboux_transversality_failure():
    omega = standard_form(Q1, 3)
    p = Jet.variable(Q1, "p1", 3)
    with pytest.raises(TransversalityFailure):
        quasi_darboux(omega, p)


def test_kernel_field_of_standard_quasi():
    omega = standard_form(Q1, 3)
    k = kernel_field(omega)
    assert k.components[0].constant_term() != 0
    assert k.components[1].is_zero() and k.components[2].is_zero()


def test_hamiltonian_flow_example():
    # H = p1^2: Z = -2 p1 d/dq1, time-1 flow (p1, q1 - 2 p1)
    h = jet_from_polynomial(S1, 4, {"p1^2": 1})
    m = hamiltonian_flow(h, 4)
    assert m.components[0] == Jet.variable(S1, "p1", 4)
    assert m.components[1] == jet_from_polynomial(S1, 4, {"q1": 1, "p1": -2})


def test_random_symplectomorphism_certifies():
    for space, n_order in ((S1, 5), (S2, 5), (C1, 5)):
        omega = SymplecticFormJet.standard(space, n_order)
        for seed in range(4):
            m = random_symplectomorphism(seed, 4, omega)
            assert is_symplectomorphism(m, omega).ok
    # determinism per seed
    omega = SymplecticFormJet.standard(S2, 5)
    a = random_symplectomorphism(11, 4, omega)
    b = random_symplectomorphism(11, 4, omega)
    assert all(x == y for x, y in zip(a.components, b.components))


def test_random_symplectomorphism_group_closure():
    omega = SymplecticFormJet.standard(S2, 5)
    a = random_symplectomorphism(1, 4, omega)
    b = random_symplectomorphism(2, 4, omega)
    assert is_symplectomorphism(map_compose(a, b), omega).ok


def test_identity_hamiltonian_gives_identity():
    h = Jet.zero(S1, 4)
    assert hamiltonian_flow(h, 4).is_identity()
