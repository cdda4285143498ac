"""Symplectic and quasi-symplectic structures at jet order.

Sign conventions used everywhere: the Hamiltonian field solves Z_f . omega =
df with the field in the first contraction slot, and {f,g} = dg(Z_f).  In the
standard form dp^dq this makes Z_p1 = -d/dq1.  The constructive Darboux
reduction follows the inductive pattern: rectify the Hamiltonian field of a
chosen function, split off dP^dq1, reduce the odd-dimensional remainder by
rectifying its kernel line field and recursing on the base.
"""

import itertools
import random
from fractions import Fraction

from .errors import (
    CertificationError,
    DegenerateForm,
    NotClosed,
    SpaceMismatch,
    TransversalityFailure,
)
from .jets import (
    CONSTRAINED,
    QUASI,
    SYMPLECTIC,
    Jet,
    MapJet,
    VariableSpace,
    implicit_solve,
    jet_compose,
    map_compose,
    map_invert,
)
from .forms import (
    FormJet,
    VectorFieldJet,
    contract,
    d_of_function,
    exterior_derivative,
    flow_box,
    pullback,
    solve_jet_linear,
    vf_pullback,
    wedge,
    wedge_power,
)
from . import linalg


# -- standard forms ------------------------------------------------------


def standard_form(space, order):
    """The fixed standard 2-form of a space: dp^dq, plus dx^dy if constrained."""
    coeffs = {}
    one = Jet.constant(space, order, 1)
    if space.kind == CONSTRAINED:
        coeffs[(0, 1)] = one
    for i in range(1, space.n + 1):
        coeffs[(space.pq_index("p", i), space.pq_index("q", i))] = one
    return FormJet(space, 2, order, coeffs)


class SymplecticFormJet:
    """A closed 2-form with invertible constant part on an even-dimensional space."""

    __slots__ = ("form",)

    def __init__(self, form):
        if form.degree != 2:
            raise DegenerateForm("symplectic structure must be a 2-form")
        if form.space.kind == QUASI:
            raise SpaceMismatch("symplectic structure on an odd-dimensional space")
        if not exterior_derivative(form).is_zero():
            raise NotClosed("symplectic structure must be closed to certified order")
        if linalg.mat_det(form.constant_matrix()) == 0:
            raise DegenerateForm("symplectic structure is degenerate at the origin")
        self.form = form

    @property
    def space(self):
        return self.form.space

    @property
    def order(self):
        return self.form.order

    @classmethod
    def standard(cls, space, order):
        return cls(standard_form(space, order))


class QuasiSymplecticFormJet:
    """A closed 2-form of rank 2n at the origin of a (2n+1)-dimensional space."""

    __slots__ = ("form",)

    def __init__(self, form):
        if form.degree != 2 or form.space.kind != QUASI:
            raise SpaceMismatch("quasi structure must be a 2-form on a quasi space")
        if not exterior_derivative(form).is_zero():
            raise NotClosed("quasi structure must be closed to certified order")
        if linalg.rank_fraction_free(form.constant_matrix()) != 2 * form.space.n:
            raise DegenerateForm("quasi structure must have rank 2n at the origin")
        self.form = form

    @property
    def space(self):
        return self.form.space

    @property
    def order(self):
        return self.form.order

    @classmethod
    def standard(cls, space, order):
        return cls(standard_form(space, order))


def _as_form(omega):
    if isinstance(omega, (SymplecticFormJet, QuasiSymplecticFormJet)):
        return omega.form
    return omega


# -- Hamiltonian fields and brackets --------------------------------------


def hamiltonian_vf(f, omega):
    """The unique V with V . omega = df, solved degree by degree."""
    w = _as_form(omega)
    if f.space != w.space:
        raise SpaceMismatch("hamiltonian_vf: function and form on different spaces")
    order = min(f.order - 1, w.order)
    a = w.coefficient_matrix()
    df = [f.derivative(j) for j in range(f.space.dim)]
    comps = solve_jet_linear(a, df, order)
    return VectorFieldJet(f.space, comps)


def poisson_bracket(f, g, omega):
    """{f, g} = dg(Z_f); bilinear and antisymmetric."""
    zf = hamiltonian_vf(f, omega)
    return zf.apply_to(g)


class CertificationReport:
    """Outcome of a pullback-residual check."""

    __slots__ = ("ok", "residual", "certified_order")

    def __init__(self, ok, residual, certified_order):
        self.ok = ok
        self.residual = residual
        self.certified_order = certified_order

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return f"CertificationReport(ok={self.ok}, certified_order={self.certified_order})"


def is_symplectomorphism(m, omega):
    """Residual pullback(m, omega) - omega, reported at the certified order."""
    w = _as_form(omega)
    res = pullback(m, w) - w.truncate(min(w.order, m.order - 1))
    return CertificationReport(res.is_zero(), res, res.order)


# -- internal helpers ------------------------------------------------------


def _coordinate_map_insert(space_small, space_big, keep, components, fixed_idx, order):
    """Extend a self-map of a subspace to the big space, fixing variable fixed_idx."""
    var_map = {i: keep[i] for i in range(space_small.dim)}
    comps_big = [None] * space_big.dim
    comps_big[fixed_idx] = Jet.coordinate(space_big, fixed_idx, order)
    for i, comp in enumerate(components):
        comps_big[keep[i]] = comp.embed(space_big, var_map)
    return MapJet(space_big, comps_big)


def _flatten_jet(jet, var, certify_order, what):
    """Drop the monomials involving var; they must vanish at certify_order."""
    bad = Jet(jet.space, jet.order,
              {e: c for e, c in jet.coeffs.items() if e[var]})
    if not bad.truncate(min(certify_order, jet.order)).is_zero():
        raise CertificationError(
            f"{what}: unexpected dependence on {jet.space.names[var]} "
            f"at order {certify_order}")
    return jet.set_vars_zero([var])


def _flatten_form_along(form, var, certify_order, what):
    """Remove d(var) components and var-dependence from a form, with checks."""
    out = FormJet(form.space, form.degree, form.order)
    for idx, jet in form.coeffs.items():
        if var in idx:
            if not jet.truncate(min(certify_order, jet.order)).is_zero():
                raise CertificationError(
                    f"{what}: unexpected d{form.space.names[var]} component "
                    f"at order {certify_order}")
            continue
        out.coeffs[idx] = _flatten_jet(jet, var, certify_order, what)
    return out


def _pfaffian(a, idxs, order, space):
    if not idxs:
        return Jet.constant(space, order, 1)
    head = idxs[0]
    total = Jet.zero(space, order)
    for t in range(1, len(idxs)):
        entry = a[head][idxs[t]]
        if entry.is_zero():
            continue
        rest = idxs[1:t] + idxs[t + 1:]
        term = entry.truncate(order) * _pfaffian(a, rest, order, space)
        if t % 2 == 0:
            term = term.scale(-1)
        total = total + term
    return total


def kernel_field(form):
    """Kernel line field of an odd-dimensional 2-form, via sub-Pfaffians.

    For an antisymmetric matrix of odd size the vector of signed principal
    sub-Pfaffians annihilates the matrix identically, which makes the kernel
    exact in the quotient ring with no division.
    """
    space = form.space
    a = form.coefficient_matrix()
    order = form.order
    comps = []
    for i in range(space.dim):
        rest = tuple(j for j in range(space.dim) if j != i)
        pf = _pfaffian(a, rest, order, space)
        comps.append(pf if i % 2 == 0 else pf.scale(-1))
    v = VectorFieldJet(space, comps)
    if all(c == 0 for c in v.at_origin()):
        raise DegenerateForm("form does not have maximal rank at the origin")
    # the defining identity A v = 0 must hold exactly in the quotient
    for j in range(space.dim):
        s = Jet.zero(space, order)
        for i in range(space.dim):
            s = s + comps[i] * a[i][j]
        if not s.is_zero():
            raise CertificationError("sub-Pfaffian kernel identity failed")
    return v


def _odd_pair_reduce(form, p):
    """Normalize (P, omega-hat) on a quasi space to (y, dp^dq).

    Kernel field to d/dy, P to the kernel coordinate y, then Darboux on the
    base.  Requires dP ^ omega-hat^n nonzero at the origin (P transversal to
    the kernel).
    """
    space = form.space
    n = space.n
    yi = 0
    k = kernel_field(form)
    if n > 0:
        top = wedge(d_of_function(p), wedge_power(form, n))
        lead = top.coeffs.get(tuple(range(space.dim)))
        if lead is None or lead.constant_term() == 0:
            raise TransversalityFailure("dP ^ omega^n vanishes at the origin")
    else:
        if p.derivative(yi).constant_term() == 0:
            raise TransversalityFailure("dP vanishes at the origin")

    big_order = p.order + 2
    k0 = k.at_origin()
    basis = linalg.complete_basis([k0], space.dim)
    if basis is None:
        raise DegenerateForm("kernel direction could not be completed to a basis")
    cols = [[basis[r][c] for r in range(space.dim)] for c in range(space.dim)]
    ordered = [cols[0]] + cols[1:]
    mat = [[ordered[c][r] for c in range(space.dim)] for r in range(space.dim)]
    align = MapJet.linear(space, mat, big_order)

    p_a = jet_compose(p, align)
    graph_comps = [Jet.coordinate(space, i, p_a.order) for i in range(space.dim)]
    graph_comps[yi] = p_a
    graph = MapJet(space, graph_comps)
    m = map_invert(graph)
    chain1 = map_compose(align, m)

    k_b = vf_pullback(chain1, k)
    u = k_b.components[yi]
    if u.constant_term() == 0:
        raise TransversalityFailure("kernel is tangent to a level of P")
    k_c = k_b.scale_by_jet(u.inverse())
    box = flow_box(k_c, yi)
    chain2 = map_compose(chain1, box)

    omega_c = pullback(chain2, form)
    omega_c = _flatten_form_along(omega_c, yi, omega_c.order - 1,
                                  "odd reduction: form not basic along kernel")
    if n == 0:
        return chain2
    base = VariableSpace.symplectic(n)
    keep = list(range(1, space.dim))
    base_form = FormJet(base, 2, omega_c.order)
    for idx, jet in omega_c.coeffs.items():
        base_form.coeffs[tuple(i - 1 for i in idx)] = jet.drop_to_subspace(keep, base)
    d = darboux_reduce(base_form)
    ext = _coordinate_map_insert(base, space, keep, d.components, yi,
                                 max(c.order for c in d.components))
    return map_compose(chain2, ext)


def quasi_darboux(omega_hat, p):
    """Send (P, omega-hat) to (the kernel coordinate y, the standard dp^dq)."""
    form = _as_form(omega_hat)
    if form.space.kind != QUASI:
        raise SpaceMismatch("quasi_darboux expects a quasi-space form")
    if not exterior_derivative(form).is_zero():
        raise NotClosed("quasi_darboux: form is not closed")
    if linalg.rank_fraction_free(form.constant_matrix()) != 2 * form.space.n:
        raise DegenerateForm("quasi_darboux: rank at origin is not 2n")
    return _odd_pair_reduce(form, p)


def _reduce_with_function(omega, p, q):
    """Shared engine: normalize (omega, P[, Q]) to (std, p1[, <q1> ideal]).

    Returns (map, P_final, Q_final) with pullback(map, omega) standard,
    P o map = p1 exactly, and Q o map in <q1> when Q is given.
    """
    space = omega.space
    if space.kind != SYMPLECTIC or space.n < 1:
        raise SpaceMismatch("pair reduction needs a symplectic space with n >= 1")
    q1 = space.pq_index("q", 1)
    big_order = omega.order + 2

    z = hamiltonian_vf(p, omega)
    z0 = z.at_origin()
    if all(c == 0 for c in z0):
        raise TransversalityFailure("Hamiltonian field of P vanishes at the origin")
    if q is not None:
        bracket0 = z.apply_to(q).constant_term()
        if bracket0 == 0:
            raise TransversalityFailure("{P,Q}(0) = 0: hypersurface tangent to the flow")

    # linear step: -Z(0) into the q1 slot; remaining columns span ker dQ(0)
    # when Q is given (so the section straightens), anything independent else.
    minus_z0 = [-c for c in z0]
    if q is not None:
        dq0 = [q.derivative(i).constant_term() for i in range(space.dim)]
        kern = []
        piv = next(i for i, c in enumerate(dq0) if c != 0)
        for i in range(space.dim):
            if i == piv:
                continue
            vec = [Fraction(0)] * space.dim
            vec[i] = Fraction(1)
            vec[piv] = -dq0[i] / dq0[piv]
            kern.append(vec)
        cols = [minus_z0] + kern
        mat = [[cols[c][r] for c in range(space.dim)] for r in range(space.dim)]
        if linalg.mat_det(mat) == 0:
            raise TransversalityFailure("could not straighten the section linearly")
        ordered = [None] * space.dim
        ordered[q1] = minus_z0
        oi = 0
        for slot in range(space.dim):
            if slot == q1:
                continue
            ordered[slot] = kern[oi]
            oi += 1
        mat = [[ordered[c][r] for c in range(space.dim)] for r in range(space.dim)]
    else:
        basis = linalg.complete_basis([minus_z0], space.dim)
        cols = [[basis[r][c] for r in range(space.dim)] for c in range(space.dim)]
        ordered = [None] * space.dim
        ordered[q1] = cols[0]
        rest = cols[1:]
        oi = 0
        for slot in range(space.dim):
            if slot == q1:
                continue
            ordered[slot] = rest[oi]
            oi += 1
        mat = [[ordered[c][r] for c in range(space.dim)] for r in range(space.dim)]
    lin = MapJet.linear(space, mat, big_order)

    omega0 = pullback(lin, omega)
    p0 = jet_compose(p, lin)
    q0 = jet_compose(q, lin) if q is not None else None
    z_0 = vf_pullback(lin, z)

    section = None
    if q0 is not None:
        section = implicit_solve(q0, Jet.zero(space, q0.order), q1)
    box = flow_box(z_0.scale(-1), q1, section)

    omega1 = pullback(box, omega0)
    p1_jet = jet_compose(p0, box)
    p1_jet = _flatten_jet(p1_jet, q1, omega1.order,
                          "pair reduction: P depends on the flow coordinate")
    chain = map_compose(lin, box)

    dp1 = d_of_function(p1_jet)
    omega_hat = omega1 - wedge(dp1, d_of_function(Jet.coordinate(space, q1, big_order)))
    omega_hat = _flatten_form_along(omega_hat, q1, omega_hat.order - 1,
                                    "pair reduction: split remainder not basic")

    # odd-dimensional remainder: everything except q1, viewed as a quasi space
    # with y <-> p1 and base pairs <-> (p_{i+1}, q_{i+1})
    quasi = VariableSpace.quasi(space.n - 1)
    keep = [space.pq_index("p", 1)] + [
        space.pq_index(c, i) for i in range(2, space.n + 1) for c in ("p", "q")]
    form_odd = FormJet(quasi, 2, omega_hat.order)
    remap = {full: small for small, full in enumerate(keep)}
    for idx, jet in omega_hat.coeffs.items():
        form_odd.coeffs[tuple(remap[i] for i in idx)] = jet.drop_to_subspace(keep, quasi)
    p_odd = p1_jet.drop_to_subspace(keep, quasi)

    psi_odd = _odd_pair_reduce(form_odd, p_odd)
    psi_full = _coordinate_map_insert(quasi, space, keep, psi_odd.components, q1,
                                      max(c.order for c in psi_odd.components))
    total = map_compose(chain, psi_full)
    p_final = jet_compose(p1_jet, psi_full)
    q_final = jet_compose(q0, map_compose(box, psi_full)) if q0 is not None else None
    return total, p_final, q_final


def darboux_reduce(omega):
    """A map pulling the given closed non-degenerate form back to dp^dq."""
    form = _as_form(omega)
    space = form.space
    if space.kind != SYMPLECTIC:
        raise SpaceMismatch("darboux_reduce expects a symplectic-kind space")
    if not exterior_derivative(form).is_zero():
        raise NotClosed("darboux_reduce: form is not closed")
    const = form.constant_matrix()
    if linalg.mat_det(const) == 0:
        raise DegenerateForm("darboux_reduce: form is degenerate at the origin")
    big_order = form.order + 2
    if space.n == 0:
        return MapJet.identity(space, big_order)

    basis = linalg.symplectic_basis(const)
    if basis is None:
        raise DegenerateForm("darboux_reduce: no symplectic basis at the origin")
    lin = MapJet.linear(space, basis, big_order)
    omega0 = pullback(lin, form)
    if (omega0 - standard_form(space, omega0.order)).is_zero():
        return lin

    p = Jet.coordinate(space, space.pq_index("p", 1), big_order)
    engine_map, _, _ = _reduce_with_function(omega0, p, None)
    total = map_compose(lin, engine_map)
    res = pullback(total, form) - standard_form(space, min(form.order, total.order - 1))
    if not res.is_zero():
        raise CertificationError("darboux_reduce: residual did not vanish")
    return total


# -- certified random symplectomorphisms ----------------------------------


_NILPOTENT_QUADS = ("b2", "a2", "bb", "aa", "ab")


def _conjugate_pairs(space):
    """(momentum-like, position-like) index pairs with omega = sum da^db."""
    pairs = [(space.pq_index("p", i), space.pq_index("q", i))
             for i in range(1, space.n + 1)]
    if space.kind == CONSTRAINED:
        pairs.insert(0, (0, 1))
    return pairs


def _random_nilpotent_linear(rng, space, order):
    """Exact time-1 flow of a random nilpotent quadratic monomial Hamiltonian.

    With pairs (a_i, b_i), the five monomials b_i^2, a_i^2, b_i b_j, a_i a_j
    and a_i b_j (i != j) all have 2-step nilpotent Hamiltonian matrices, so
    exp(t Z) = I + t Z is an exact rational symplectic matrix.
    """
    dim = space.dim
    pairs = _conjugate_pairs(space)
    mat = [[Fraction(int(i == j)) for j in range(dim)] for i in range(dim)]
    kind = rng.choice(_NILPOTENT_QUADS)
    t = Fraction(rng.randint(-2, 2), rng.randint(1, 3))
    i = rng.randrange(len(pairs))
    j = rng.randrange(len(pairs))
    if i == j and kind in ("bb", "aa", "ab"):
        if len(pairs) == 1:
            kind = "b2"
        else:
            j = (i + 1) % len(pairs)
    ai, bi = pairs[i]
    aj, bj = pairs[j]
    if kind == "b2":
        mat[ai][bi] += 2 * t
    elif kind == "a2":
        mat[bi][ai] -= 2 * t
    elif kind == "bb":
        mat[ai][bj] += t
        mat[aj][bi] += t
    elif kind == "aa":
        mat[bi][aj] -= t
        mat[bj][ai] -= t
    else:
        # f = a_i b_j
        mat[aj][ai] += t
        mat[bi][bj] -= t
    return MapJet.linear(space, mat, order)


def hamiltonian_flow(h, order):
    """Time-1 truncated Lie-series flow of Z_h for a polynomial Hamiltonian.

    For h with zero linear and quadratic parts the series terminates within
    the truncation order and the resulting map has identity linear part (so
    its pullback residual against dp^dq vanishes exactly at certified order).
    """
    space = h.space
    z = [Jet.zero(space, order)] * space.dim
    for a, b in _conjugate_pairs(space):
        z[a] = h.derivative(b).lift(order)
        z[b] = h.derivative(a).scale(-1).lift(order)

    def derive_exact(g):
        # h is an exact polynomial, so z and all iterated derivations are
        # exact too; lift after each derivative to avoid losing top degrees.
        out = Jet.zero(space, order)
        for i in range(space.dim):
            if not z[i].is_zero():
                out = out + z[i] * g.derivative(i).lift(order)
        return out

    acc = [Jet.coordinate(space, i, order) for i in range(space.dim)]
    gs = list(acc)
    fact = Fraction(1)
    for k in range(1, order + 1):
        gs = [derive_exact(g) for g in gs]
        if all(g.is_zero() for g in gs):
            break
        fact = fact / k
        acc = [a + g.scale(fact) for a, g in zip(acc, gs)]
    return MapJet(space, acc)


def random_symplectomorphism(seed, max_degree, omega):
    """A certified random symplectomorphism of the standard form.

    Composition of truncated flows of random polynomial Hamiltonians (zero
    linear and quadratic part) with exact nilpotent-generated linear factors;
    deterministic per seed, certifies with exactly zero residual.
    """
    form = _as_form(omega)
    space = form.space
    order = form.order
    if not (form - standard_form(space, order)).is_zero():
        raise SpaceMismatch("random_symplectomorphism generates in standard coordinates")
    rng = random.Random(seed)
    result = MapJet.identity(space, order)
    for _ in range(rng.randint(2, 3)):
        result = map_compose(result, _random_nilpotent_linear(rng, space, order))
    for _ in range(2):
        h = _random_hamiltonian(rng, space, order, max_degree)
        if h.is_zero():
            continue
        result = map_compose(result, hamiltonian_flow(h, order))
    return result


def _random_hamiltonian(rng, space, order, max_degree):
    # two monomials per generator keep the flows lean; genericity comes from
    # the random supports and the composition of several factors
    coeffs = {}
    degree = min(max_degree, order)
    for _ in range(2):
        d = rng.randint(3, max(3, degree))
        exps = [0] * space.dim
        for _ in range(d):
            exps[rng.randrange(space.dim)] += 1
        key = tuple(exps)
        coeffs[key] = coeffs.get(key, Fraction(0)) \
            + Fraction(rng.randint(-2, 2), rng.randint(1, 4))
    return Jet(space, order, coeffs)
