"""The normal-form pipelines: transversal pairs, diffeomorphisms under the
symplectomorphism group, symplectic-form parametrization, glancing checks,
and first-occurring singularities of constrained Hamiltonian pairs.

Every pipeline returns a result object carrying the normalizing map, the
functional invariants, machine-checkable residuals, and the order to which
the construction is certified.  Residuals that the construction forces to
vanish are asserted; a failure raises CertificationError (it indicates a bug,
not bad input).
"""

from fractions import Fraction

from .errors import (
    CertificationError,
    GenericityViolation,
    NotGlancing,
    PivotFailure,
    SingularLinearPart,
    SpaceMismatch,
    TransversalityFailure,
)
from .jets import (
    CONSTRAINED,
    QUASI,
    SYMPLECTIC,
    IdealSpec,
    Jet,
    MapJet,
    VariableSpace,
    coefficient_expansion,
    ideal_membership,
    implicit_solve,
    jet_compose,
    map_compose,
    map_invert,
    substitute_variable,
)
from .forms import (
    FormJet,
    d_of_function,
    pullback,
    rectify,
    wedge,
)
from .symplectic import (
    CertificationReport,
    SymplecticFormJet,
    _as_form,
    _flatten_form_along,
    _flatten_jet,
    _odd_pair_reduce,
    _reduce_with_function,
    darboux_reduce,
    hamiltonian_vf,
    is_symplectomorphism,
    poisson_bracket,
    standard_form,
)
from . import linalg

SUM_LIMIT_NOTE = ("inner sum upper limit implemented as n; the printed 2n-1 "
                  "is treated as a typo")


# -- result containers ----------------------------------------------------


class DiffeoNormalForm:
    """Result of normalizing a diffeomorphism by source symplectomorphisms."""

    __slots__ = ("normalizer", "normalized", "q_invariants", "p_invariants",
                 "coefficient_split", "certification", "relabeling",
                 "certified_order")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])

    def invariant(self, label):
        if label.startswith("Q"):
            return self.q_invariants[int(label[1:]) - 1]
        return self.p_invariants[int(label[1:]) - 2]


class GlancingReport:
    """The four tested quantities behind the simple-tangency conditions."""

    __slots__ = ("bracket_fh", "bracket_ffh", "bracket_hfh", "wedge_values",
                 "wedge_nonzero", "in_s1")

    def __init__(self, bracket_fh, bracket_ffh, bracket_hfh, wedge_values, n):
        self.bracket_fh = bracket_fh
        self.bracket_ffh = bracket_ffh
        self.bracket_hfh = bracket_hfh
        self.wedge_values = wedge_values
        self.wedge_nonzero = any(v != 0 for v in wedge_values.values())
        self.in_s1 = (bracket_fh == 0 and bracket_ffh != 0 and bracket_hfh != 0
                      and (n == 0 or self.wedge_nonzero))

    def failing_condition(self):
        if self.bracket_fh != 0:
            return "{f,h}(0) != 0"
        if self.bracket_ffh == 0:
            return "{f,{f,h}}(0) = 0"
        if self.bracket_hfh == 0:
            return "{h,{f,h}}(0) = 0"
        if not self.wedge_nonzero:
            return "df ^ dh (0) = 0"
        return None


class QuasiPairNormalForm:
    """Normal form of a nonsingular function pair on a quasi-symplectic space."""

    __slots__ = ("normalizer", "r", "p_invariants", "q_invariants", "phi",
                 "diffeo_nf", "certification", "certified_order", "warnings")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


class ConstrainedNormalForm:
    """Normal form of a first-occurring singular pair (f, H = {h = 0})."""

    __slots__ = ("normalizer", "r", "p_invariants", "q_invariants", "phi",
                 "defining_jet", "unit", "quasi_nf", "glancing",
                 "certification", "f_residual", "h_residual",
                 "certified_order", "warnings")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


class SymplecticParam:
    """A symplectic form written as dp1^dQ1-bar + sum d(p_i+P_i-bar)^dQ_i-bar."""

    __slots__ = ("q_bars", "p_bars", "reconstruction", "residual",
                 "certified_order")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


class ImplicitNormalForm:
    """The equivalent presentation with invariants inside the symplectic form."""

    __slots__ = ("f_hat", "r_hat", "psi", "shape_residual", "omega_tilde",
                 "base_parametrization", "certified_order", "warnings")

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


# -- transversal pairs (P, {Q=0}) -----------------------------------------


def normalize_function_pair(p, q, space=None):
    """Send a nonsingular pair to (p1, a function in <q1>) by a symplectomorphism.

    Requires dP(0) != 0, dQ(0) != 0 and {P,Q}(0) != 0 for the standard form.
    Returns (map, P o map, Q o map).
    """
    if space is None:
        space = p.space
    if p.space != space or q.space != space or space.kind != SYMPLECTIC:
        raise SpaceMismatch("pair normalization expects jets on one symplectic space")
    if p.constant_term() != 0 or q.constant_term() != 0:
        raise TransversalityFailure("P and Q must vanish at the origin")
    if all(p.derivative(i).constant_term() == 0 for i in range(space.dim)):
        raise TransversalityFailure("dP(0) = 0")
    if all(q.derivative(i).constant_term() == 0 for i in range(space.dim)):
        raise TransversalityFailure("dQ(0) = 0")
    omega = standard_form(space, max(p.order, q.order))
    psi, p_out, q_out = _reduce_with_function(omega, p, q)
    q1 = space.pq_index("q", 1)
    if any(not e[q1] for e in q_out.coeffs):
        raise CertificationError("pair normalization: Q left the ideal <q1>")
    if q_out.derivative(q1).constant_term() == 0:
        raise CertificationError("pair normalization: Q lost its q1 derivative")
    return psi, p_out, q_out


# -- relabeling (pairing conditions) ---------------------------------------


def _pair_twist_matrix(space, twists, perm):
    """Source matrix for a pair permutation followed by per-pair quarter twists."""
    n = space.n
    dim = space.dim
    mat = [[Fraction(0)] * dim for _ in range(dim)]
    for i in range(1, n + 1):
        j = perm[i - 1] + 1
        pi, qi = space.pq_index("p", i), space.pq_index("q", i)
        pj, qj = space.pq_index("p", j), space.pq_index("q", j)
        t = twists[i - 1] % 4
        # twist: (p,q) -> (-q, p) applied t times on the source pair i,
        # landing in target pair j
        if t == 0:
            mat[pj][pi] = Fraction(1)
            mat[qj][qi] = Fraction(1)
        elif t == 1:
            mat[pj][qi] = Fraction(-1)
            mat[qj][pi] = Fraction(1)
        elif t == 2:
            mat[pj][pi] = Fraction(-1)
            mat[qj][qi] = Fraction(-1)
        else:
            mat[pj][qi] = Fraction(1)
            mat[qj][pi] = Fraction(-1)
    return mat


def renumerate(phi):
    """Pre-compose with a linear symplectic relabeling so the pairing holds.

    Searches pair permutations combined with per-pair quarter twists
    (p,q) -> (-q,p) until every diagonal pairing derivative dP_i/dp_i(0),
    dQ_i/dq_i(0) is nonzero; raises PivotFailure when no member of that
    finite group works.
    """
    space = phi.source
    if space.kind != SYMPLECTIC:
        raise SpaceMismatch("renumerate expects a symplectic source")
    lin = phi.linear_part()
    if linalg.mat_det(lin) == 0:
        raise SingularLinearPart("renumerate: map has singular linear part")
    n = space.n
    import itertools

    def satisfies(mat):
        for i in range(1, n + 1):
            pi, qi = space.pq_index("p", i), space.pq_index("q", i)
            if mat[pi][pi] == 0 or mat[qi][qi] == 0:
                return False
        return True

    for perm in itertools.permutations(range(n)):
        for twists in itertools.product(range(4), repeat=n):
            s = _pair_twist_matrix(space, twists, perm)
            cand = linalg.mat_mul(lin, s)
            if satisfies(cand):
                record = {"permutation": list(perm), "twists": list(twists),
                          "matrix": s,
                          "trivial": all(p == i for i, p in enumerate(perm))
                          and all(t == 0 for t in twists)}
                if record["trivial"]:
                    return phi, record
                smap = MapJet.linear(space, s, phi.order + 1)
                return map_compose(phi, smap), record
    raise PivotFailure("no pair relabeling satisfies the pairing conditions")


def _con2_holds(phi):
    lin = phi.linear_part()
    space = phi.source
    for i in range(1, space.n + 1):
        pi, qi = space.pq_index("p", i), space.pq_index("q", i)
        if lin[pi][pi] == 0 or lin[qi][qi] == 0:
            return False
    return True


# -- the diffeomorphism normal form ----------------------------------------


def _extend_fixing_first(space, inner, pairs_fixed, order):
    """Lift a map of the trailing symplectic block, fixing the first pairs."""
    sub = inner.source
    keep = list(range(2 * pairs_fixed, space.dim))
    var_map = {i: keep[i] for i in range(sub.dim)}
    comps = [Jet.coordinate(space, i, order) for i in range(2 * pairs_fixed)]
    comps += [c.embed(space, var_map) for c in inner.components]
    return MapJet(space, comps)


def isotropy_shape_check(psi):
    """True iff psi fixes p1, q1, the rest ignores them, and the reduced
    block certifies as a symplectomorphism of the restricted form."""
    space = psi.source
    if space.kind != SYMPLECTIC or space.n < 1:
        raise SpaceMismatch("isotropy check expects a symplectic space, n >= 1")
    order = psi.order
    p1 = Jet.coordinate(space, 0, order)
    q1 = Jet.coordinate(space, 1, order)
    if (psi.components[0].truncate(order) - p1).coeffs:
        return False
    if (psi.components[1].truncate(order) - q1).coeffs:
        return False
    for c in psi.components[2:]:
        if any(e[0] or e[1] for e in c.coeffs):
            return False
    if space.n == 1:
        return True
    sub = VariableSpace.symplectic(space.n - 1)
    keep = list(range(2, space.dim))
    reduced = MapJet(sub, [c.drop_to_subspace(keep, sub) for c in psi.components[2:]])
    return is_symplectomorphism(reduced, standard_form(sub, reduced.order)).ok


def _restrict_pair(work, level, space):
    """Restrict components (P_level, Q_level) to the trailing symplectic block."""
    sub = VariableSpace.symplectic(space.n - level + 1)
    keep = list(range(2 * (level - 1), space.dim))
    zeroed = list(range(2 * (level - 1)))
    p = work.components[2 * (level - 1)].set_vars_zero(zeroed)
    q = work.components[2 * (level - 1) + 1].set_vars_zero(zeroed)
    return p.drop_to_subspace(keep, sub), q.drop_to_subspace(keep, sub), sub


def _coefficient_split(space, invariants):
    """Write each invariant as sum of ideal generators times coefficient jets.

    Greedy by generator order: each monomial is assigned to the first
    generator dividing it, so the split is deterministic (the freedom in this
    split is exactly the overcount discussed in the moduli module).
    """
    split = {}
    for label, jet, level in invariants:
        ideal = IdealSpec(space, level)
        buckets = {g: {} for g in ideal.generators}
        for e, c in jet.coeffs.items():
            g = next(g for g in ideal.generators if e[g])
            reduced = list(e)
            reduced[g] -= 1
            buckets[g][tuple(reduced)] = c
        for g in ideal.generators:
            split[(label, space.names[g])] = Jet(space, jet.order, buckets[g])
    return split


def normalize_diffeomorphism(phi):
    """Reduce a diffeomorphism to the normal form (p1, Q1~, p2+P2~, Q2~, ...)
    by a source symplectomorphism of the standard form.

    Proceeds pair by pair: normalize (P_i, Q_i) restricted to the trailing
    symplectic block, extend the normalizer so it fixes the already-finished
    pairs, and repeat.  The relabeling step runs first and is recorded.
    """
    space = phi.source
    if space.kind != SYMPLECTIC or space.n < 1:
        raise SpaceMismatch("diffeomorphism normal form needs a symplectic space")
    if phi.source != phi.target:
        raise SpaceMismatch("diffeomorphism must be a self-map up to relabeling")
    if linalg.mat_det(phi.linear_part()) == 0:
        raise SingularLinearPart("diffeomorphism has singular linear part")
    work, record = renumerate(phi)
    n = space.n
    # the relabeling is itself a linear symplectomorphism of the source and
    # belongs to the normalizer, so that normalized == phi o normalizer
    if record["trivial"]:
        psi_total = MapJet.identity(space, work.order)
    else:
        psi_total = MapJet.linear(space, record["matrix"], phi.order + 1)
    for level in range(1, n + 1):
        p_sub, q_sub, sub = _restrict_pair(work, level, space)
        try:
            b, _, _ = normalize_function_pair(p_sub, q_sub, sub)
        except TransversalityFailure as exc:
            raise TransversalityFailure(
                f"restricted pair at level {level}: {exc}") from exc
        psi = _extend_fixing_first(space, b, level - 1, work.order)
        work = map_compose(work, psi)
        psi_total = map_compose(psi_total, psi)

    order = work.order
    q_invariants = []
    p_invariants = []
    inv_list = []
    for i in range(1, n + 1):
        qi = work.components[2 * i - 1]
        q_invariants.append(qi)
        inv_list.append((f"Q{i}", qi, 2 * i - 1))
        if not ideal_membership(qi, IdealSpec(space, 2 * i - 1)):
            raise CertificationError(f"Q{i} invariant left its ideal")
        if qi.derivative(space.pq_index("q", i)).constant_term() == 0:
            raise CertificationError(f"Q{i} invariant lost its diagonal derivative")
        if i >= 2:
            comp = work.components[2 * i - 2]
            pi = comp - Jet.coordinate(space, 2 * i - 2, comp.order)
            p_invariants.append(pi)
            inv_list.append((f"P{i}", pi, 2 * i - 2))
            if not ideal_membership(pi, IdealSpec(space, 2 * i - 2)):
                raise CertificationError(f"P{i} invariant left its ideal")
    first = work.components[0] - Jet.coordinate(space, 0, order)
    if not first.is_zero():
        raise CertificationError("first component is not exactly p1")

    cert = is_symplectomorphism(psi_total, standard_form(space, order))
    if not cert.ok:
        raise CertificationError("normalizer failed symplectomorphism certification")
    return DiffeoNormalForm(
        normalizer=psi_total,
        normalized=work,
        q_invariants=q_invariants,
        p_invariants=p_invariants,
        coefficient_split=_coefficient_split(space, inv_list),
        certification=cert,
        relabeling=record,
        certified_order=cert.certified_order,
    )


# -- symplectic-form parametrization ---------------------------------------


def parametrize_symplectic_form(omega):
    """Write omega as dp1^dQ1-bar + sum_{i>=2} d(p_i + P_i-bar)^dQ_i-bar.

    A Darboux map for omega is itself normalized under standard-form
    symplectomorphisms; the inverse of the resulting normal-shaped Darboux
    map carries the parametrizing functions.
    """
    form = _as_form(omega)
    space = form.space
    d0 = darboux_reduce(form)
    nf = normalize_diffeomorphism(d0)
    inv = map_invert(nf.normalized)
    n = space.n
    order = inv.order
    q_bars = []
    p_bars = []
    for i in range(1, n + 1):
        qb = inv.components[space.pq_index("q", i)]
        q_bars.append(qb)
        if not ideal_membership(qb, IdealSpec(space, 2 * i - 1)):
            raise CertificationError(f"Q{i}-bar left its ideal")
        if i >= 2:
            pb = inv.components[space.pq_index("p", i)] \
                - Jet.coordinate(space, space.pq_index("p", i), order)
            p_bars.append(pb)
            if not ideal_membership(pb, IdealSpec(space, 2 * i - 2)):
                raise CertificationError(f"P{i}-bar left its ideal")
    if not (inv.components[0] - Jet.coordinate(space, 0, order)).is_zero():
        raise CertificationError("inverse lost the p1 component")

    recon = FormJet(space, 2, order - 1)
    for i in range(1, n + 1):
        left = Jet.coordinate(space, space.pq_index("p", i), order)
        if i >= 2:
            left = left + p_bars[i - 2]
        recon = recon + wedge(d_of_function(left), d_of_function(q_bars[i - 1]))
    residual = recon - form.truncate(recon.order)
    if not residual.is_zero():
        raise CertificationError("parametrization does not reconstruct the form")
    return SymplecticParam(
        q_bars=q_bars,
        p_bars=p_bars,
        reconstruction=recon,
        residual=residual,
        certified_order=residual.order,
    )


# -- glancing conditions ----------------------------------------------------


def check_glancing(f, h):
    """The simple-tangency test for a pair (f, {h = 0}) under the standard form."""
    space = f.space
    if space.kind != CONSTRAINED or f.space != h.space:
        raise SpaceMismatch("glancing check expects a constrained space")
    omega = standard_form(space, max(f.order, h.order))
    fh = poisson_bracket(f, h, omega)
    ffh = poisson_bracket(f, fh, omega)
    hfh = poisson_bracket(h, fh, omega)
    w = wedge(d_of_function(f), d_of_function(h))
    wedge_values = {idx: jet.constant_term() for idx, jet in w.coeffs.items()
                    if jet.constant_term() != 0}
    return GlancingReport(fh.constant_term(), ffh.constant_term(),
                          hfh.constant_term(), wedge_values, space.n)


# -- quasi-symplectic pair normal form --------------------------------------


def normalize_quasi_pair(f, g):
    """Normal form of a nonsingular pair on the standard quasi space:
    f = y, g = r(y) + p1 + sum (p_i+P_i~) y^{2i-2} + sum Q_i~ y^{2i-1} + phi y^{2n}.
    """
    space = f.space
    if space.kind != QUASI or g.space != space:
        raise SpaceMismatch("quasi pair normalization expects one quasi space")
    n = space.n
    yi = 0
    if f.constant_term() != 0 or g.constant_term() != 0:
        raise TransversalityFailure("f and g must vanish at the origin")
    if f.derivative(yi).constant_term() == 0:
        raise TransversalityFailure("df ^ omega^n (0) = 0: f tangent to the kernel")
    if g.derivative(yi).constant_term() == 0:
        raise TransversalityFailure("dg ^ omega^n (0) = 0: g tangent to the kernel")
    if n >= 1:
        df0 = [f.derivative(i).constant_term() for i in range(space.dim)]
        dg0 = [g.derivative(i).constant_term() for i in range(space.dim)]
        if linalg.rank_fraction_free([df0, dg0]) < 2:
            raise TransversalityFailure("df ^ dg (0) = 0")

    order = min(f.order, g.order)
    y_jet = Jet.coordinate(space, yi, order)
    sol = implicit_solve(f, y_jet, yi)
    chi1 = MapJet(space, [sol] + [Jet.coordinate(space, i, sol.order)
                                  for i in range(1, space.dim)])
    g1 = jet_compose(g, chi1)

    pq = list(range(1, space.dim))
    r = g1.set_vars_zero(pq)
    big_g = g1 - r
    if r.derivative(yi).constant_term() == 0:
        raise TransversalityFailure("r'(0) = 0 after normalization")

    warnings = [SUM_LIMIT_NOTE]
    if n == 0:
        cert = CertificationReport(True, FormJet(space, 2, g1.order), g1.order)
        return QuasiPairNormalForm(
            normalizer=chi1, r=r, p_invariants=[], q_invariants=[],
            phi=Jet.zero(space, max(g1.order - 1, 0)), diffeo_nf=None,
            certification=cert, certified_order=g1.order, warnings=warnings)

    cs = coefficient_expansion(big_g, yi)
    base = VariableSpace.symplectic(n)
    keep = pq
    comps = []
    for k in range(2 * n):
        ck = cs[k] if k < len(cs) else Jet.zero(space, max(g1.order - k, 0))
        comps.append(ck.drop_to_subspace(keep, base))
    jac = [[c.derivative(j).constant_term() for j in range(base.dim)]
           for c in comps]
    if linalg.mat_det(jac) == 0:
        raise GenericityViolation(
            "dP1 ^ dQ1 ^ ... ^ dQn (0) = 0: expansion coefficients dependent")
    base_map = MapJet(base, comps)
    t1 = normalize_diffeomorphism(base_map)

    chi2_base = t1.normalizer
    var_map = {i: keep[i] for i in range(base.dim)}
    chi2 = MapJet(space, [Jet.coordinate(space, yi, chi2_base.order)]
                  + [c.embed(space, var_map) for c in chi2_base.components])
    normalizer = map_compose(chi1, chi2)

    q_invariants = [c.embed(space, var_map) for c in t1.q_invariants]
    p_invariants = [c.embed(space, var_map) for c in t1.p_invariants]

    # remainder above y^(2n-1); each term may be lifted to the sum's order
    # because its own data only enters weighted by the matching power of y
    phi_order = max(g1.order - 2 * n, 0)
    y_phi = Jet.coordinate(space, yi, phi_order)
    phi = Jet.zero(space, phi_order)
    for k in range(2 * n, len(cs)):
        ck = cs[k]
        if ck.is_zero():
            continue
        moved = jet_compose(ck.drop_to_subspace(keep, base), chi2_base)
        phi = phi + moved.embed(space, var_map).lift(phi_order) \
            * y_phi.power(k - 2 * n)
    if not phi.set_vars_zero(pq).is_zero():
        raise CertificationError("phi does not vanish on the y axis")

    # exact reconstruction check: g o normalizer equals the normal form data
    # (each piece enters weighted by its own power of y, so lifting it to the
    # assembly order is certified)
    g_final = jet_compose(g, normalizer)
    rebuilt = _assemble_pair_data(space, r, p_invariants, q_invariants, phi,
                                  g_final.order)
    recon_residual = g_final - rebuilt
    if not recon_residual.is_zero():
        raise CertificationError("quasi normal form does not reconstruct g")

    f_res = jet_compose(f, normalizer) - Jet.coordinate(space, yi, normalizer.order)
    if not f_res.truncate(order).is_zero():
        raise CertificationError("f did not normalize to y")

    quasi_std = standard_form(space, normalizer.order)
    res = pullback(normalizer, quasi_std) - quasi_std.truncate(normalizer.order - 1)
    cert = CertificationReport(res.is_zero(), res, res.order)
    if not cert.ok:
        raise CertificationError("quasi normalizer failed form certification")
    return QuasiPairNormalForm(
        normalizer=normalizer, r=r, p_invariants=p_invariants,
        q_invariants=q_invariants, phi=phi, diffeo_nf=t1,
        certification=cert, certified_order=cert.certified_order,
        warnings=warnings)


# -- Weierstrass-style quadratic division -----------------------------------


def weierstrass_quadratic(h, x_idx):
    """Write h = u * (x^2 + a x + b) with a, b free of x and u a unit.

    Degree-by-degree triangular solve in the non-x grading; valid when
    h(0) = 0, dh/dx(0) = 0 and the pure-x^2 coefficient is nonzero.

    The triangular solve fills every coefficient the input jet reaches
    (a, b through degree N-1, u through N-2).  For x-rich jets the top few
    of those degrees can still depend on x-power coefficients beyond the
    input jet (reducing x^{2j} against the quadratic pulls total degree down
    through factors of the linear part of b), so downstream consumers treat
    the last degrees as provisional; the invariance battery pins the orders
    that survive presentation changes of the same germ.
    """
    space = h.space
    order = h.order
    hk = coefficient_expansion(h, x_idx)
    h20 = hk[2].constant_term() if len(hk) > 2 else Fraction(0)
    if h20 == 0:
        raise TransversalityFailure("x^2 coefficient vanishes at the origin")
    if hk[0].constant_term() != 0 or hk[1].constant_term() != 0:
        raise TransversalityFailure("h must vanish to first order in x at 0")

    def parts(jet):
        by_deg = {}
        for e, c in jet.coeffs.items():
            by_deg.setdefault(sum(e), {})[e] = c
        return by_deg

    def conv(pa, pb, d):
        out = {}
        for d1, items in pa.items():
            d2 = d - d1
            if d2 not in pb:
                continue
            for e1, c1 in items.items():
                for e2, c2 in pb[d2].items():
                    key = tuple(a + b for a, b in zip(e1, e2))
                    s = out.get(key, Fraction(0)) + c1 * c2
                    if s:
                        out[key] = s
                    else:
                        del out[key]
        return out

    h_parts = [parts(j) for j in hk]
    max_k = order
    u_parts = [dict() for _ in range(max_k + 1)]
    a_parts = {}
    b_parts = {}
    zero_e = (0,) * space.dim
    inv0 = Fraction(1) / h20
    for k in range(0, max_k - 1):
        val = h_parts[k + 2].get(0, {}).get(zero_e) if k + 2 <= order else None
        if val:
            u_parts[k][0] = {zero_e: val}
    def subtract(into, piece):
        for e, c in piece.items():
            s = into.get(e, Fraction(0)) - c
            if s:
                into[e] = s
            else:
                into.pop(e, None)

    for d in range(1, order):
        # b_d from the x^0 equation (b_parts holds only degrees < d here)
        num_b = dict(h_parts[0].get(d, {}))
        subtract(num_b, conv(u_parts[0], b_parts, d))
        b_parts[d] = {e: c * inv0 for e, c in num_b.items()}
        # a_d from the x^1 equation; [u1 b]_d may use the fresh b_d via u_{1,0}
        num_a = dict(h_parts[1].get(d, {}))
        subtract(num_a, conv(u_parts[0], a_parts, d))
        subtract(num_a, conv(u_parts[1], b_parts, d))
        a_parts[d] = {e: c * inv0 for e, c in num_a.items()}
        # u_{k,d} from the x^{k+2} equations; only lower-degree u's enter
        for k in range(0, max_k - 1):
            if k + 2 + d > order:
                continue
            num = dict(h_parts[k + 2].get(d, {}))
            subtract(num, conv(u_parts[k + 1], a_parts, d))
            if k + 2 <= max_k:
                subtract(num, conv(u_parts[k + 2], b_parts, d))
            u_parts[k][d] = num

    def assemble(parts_by_deg, jet_order):
        coeffs = {}
        for d, items in parts_by_deg.items():
            if d > jet_order:
                continue
            for e, c in items.items():
                if c:
                    coeffs[e] = c
        return Jet(space, jet_order, coeffs)

    a = assemble(a_parts, max(order - 1, 0))
    b = assemble(b_parts, max(order - 1, 0))
    u_order = max(order - 2, 1)
    u = Jet.zero(space, u_order)
    x_jet = Jet.coordinate(space, x_idx, u_order)
    for k in range(0, max_k - 1):
        piece = assemble(u_parts[k], max(u_order - k, 0))
        if piece.is_zero():
            continue
        u = u + piece.lift(u_order) * x_jet.power(k)

    # certification: the division identity must close at min order
    x_full = Jet.coordinate(space, x_idx, order)
    quad = x_full.power(2) + a.lift(order) * x_full + b.lift(order)
    resid = h - u.lift(order) * quad
    if not resid.truncate(u_order).is_zero():
        raise CertificationError("quadratic division residual did not vanish")
    return u, a, b


# -- the constrained-pair normal form ---------------------------------------


def normalize_constrained_pair(f, h):
    """Full pipeline for a first-occurring singular pair (f, H = {h = 0}).

    Rectify the Hamiltonian flow of f, divide h into x^2 + a x + b, complete
    the square, split the form, reduce the odd-dimensional remainder, and
    delegate the residual pair to the quasi-space normal form.
    """
    space = f.space
    if space.kind != CONSTRAINED or h.space != space:
        raise SpaceMismatch("constrained pair expects jets on one constrained space")
    glancing = check_glancing(f, h)
    if not glancing.in_s1:
        raise NotGlancing(f"pair is not simple-tangent: {glancing.failing_condition()}")
    order = min(f.order, h.order)
    omega = standard_form(space, order)
    xi = 0

    zf = hamiltonian_vf(f, omega)
    phi1 = rectify(zf, axis=xi)
    f1 = jet_compose(f, phi1)
    f1 = _flatten_jet(f1, xi, f1.order - 1, "constrained pair: f not flow-invariant")
    h1 = jet_compose(h, phi1)
    omega1 = pullback(phi1, omega)

    u, a, b = weierstrass_quadratic(h1, xi)
    g = b - (a * a).scale(Fraction(1, 4))

    shift_comps = [Jet.coordinate(space, i, a.order + 1) for i in range(space.dim)]
    shift_comps[xi] = shift_comps[xi] - a.scale(Fraction(1, 2)).lift(a.order + 1)
    shift = MapJet(space, shift_comps)
    omega2 = pullback(shift, omega1)
    chain = map_compose(phi1, shift)

    df1 = d_of_function(f1)
    x_jet = Jet.coordinate(space, xi, order)
    omega_hat = omega2 - wedge(d_of_function(x_jet), df1)
    omega_hat = _flatten_form_along(omega_hat, xi, omega_hat.order - 1,
                                    "constrained pair: split remainder not basic")

    quasi = VariableSpace.quasi(space.n)
    keep = list(range(1, space.dim))
    form_q = FormJet(quasi, 2, omega_hat.order)
    for idx, jet in omega_hat.coeffs.items():
        form_q.coeffs[tuple(i - 1 for i in idx)] = jet.drop_to_subspace(keep, quasi)
    fq = f1.drop_to_subspace(keep, quasi)
    gq = _flatten_jet(g, xi, g.order, "constrained pair: g not x-free") \
        .drop_to_subspace(keep, quasi)

    chi0 = _odd_pair_reduce(form_q, fq)
    g3 = jet_compose(gq, chi0)
    chi0_full = _coordinate_map_insert_constrained(quasi, space, keep, chi0, xi)
    chain = map_compose(chain, chi0_full)

    quasi_nf = normalize_quasi_pair(Jet.coordinate(quasi, 0, g3.order), g3)
    chi3_full = _coordinate_map_insert_constrained(quasi, space,
                                                   keep, quasi_nf.normalizer, xi)
    normalizer = map_compose(chain, chi3_full)

    # final residual battery
    cert = is_symplectomorphism(normalizer, omega)
    if not cert.ok:
        raise CertificationError("constrained normalizer failed certification")
    f_res = jet_compose(f, normalizer) \
        - Jet.coordinate(space, 1, normalizer.order)
    if not f_res.truncate(cert.certified_order).is_zero():
        raise CertificationError("f did not pull back to y")

    var_map = {i: keep[i] for i in range(quasi.dim)}
    g_nf = _quasi_reconstruction(quasi_nf, quasi).embed(space, var_map)
    defining = Jet.coordinate(space, xi, order).power(2) + g_nf.lift(order)
    unit_total = jet_compose(u.lift(order),
                             map_compose(shift, map_compose(chi0_full, chi3_full)))
    h_final = jet_compose(h, normalizer)
    h_res = h_final - unit_total.truncate(h_final.order) * defining.truncate(h_final.order)
    h_res_order = min(u.order, quasi_nf.r.order, h_res.order)
    h_res = h_res.truncate(h_res_order)
    if not h_res.is_zero():
        raise CertificationError("h did not pull back into the ideal of x^2 + g")

    r_emb = quasi_nf.r.embed(space, var_map)
    return ConstrainedNormalForm(
        normalizer=normalizer,
        r=r_emb,
        p_invariants=[j.embed(space, var_map) for j in quasi_nf.p_invariants],
        q_invariants=[j.embed(space, var_map) for j in quasi_nf.q_invariants],
        phi=quasi_nf.phi.embed(space, var_map),
        defining_jet=defining,
        unit=unit_total,
        quasi_nf=quasi_nf,
        glancing=glancing,
        certification=cert,
        f_residual=f_res.truncate(cert.certified_order),
        h_residual=h_res,
        certified_order=min(cert.certified_order, h_res_order),
        warnings=list(quasi_nf.warnings),
    )


def _coordinate_map_insert_constrained(quasi, space, keep, inner, fixed_idx):
    order = max(c.order for c in inner.components)
    var_map = {i: keep[i] for i in range(quasi.dim)}
    comps = [None] * space.dim
    comps[fixed_idx] = Jet.coordinate(space, fixed_idx, order)
    for i, c in enumerate(inner.components):
        comps[keep[i]] = c.embed(space, var_map)
    return MapJet(space, comps)


def _assemble_pair_data(space, r, p_invariants, q_invariants, phi, order):
    """r + p1 + sum (p_i + P_i~) y^{2i-2} + sum Q_i~ y^{2i-1} + phi y^{2n}.

    Each invariant is lifted to the assembly order: its jet enters the sum
    only multiplied by the matching power of y, so degrees beyond its own
    certification never reach degrees <= order of the total.
    """
    n = space.n
    y = Jet.coordinate(space, 0, order)
    out = r.lift(order)
    if n == 0:
        return out
    out = out + Jet.coordinate(space, space.index("p1"), order)
    for i in range(2, n + 1):
        pi = Jet.coordinate(space, space.pq_index("p", i), order)
        out = out + (pi + p_invariants[i - 2].lift(order)) * y.power(2 * i - 2)
    for i in range(1, n + 1):
        out = out + q_invariants[i - 1].lift(order) * y.power(2 * i - 1)
    out = out + phi.lift(order) * y.power(2 * n)
    return out


def _quasi_reconstruction(quasi_nf, space):
    return _assemble_pair_data(space, quasi_nf.r, quasi_nf.p_invariants,
                               quasi_nf.q_invariants, quasi_nf.phi,
                               quasi_nf.r.order)


# -- the implicit (form-carried) presentation -------------------------------


def to_implicit_form(nf):
    """Move the base invariants into the symplectic form and flatten H to
    {x^2 + y = 0}: returns (f-hat, r-hat, psi, omega-tilde) with residuals.

    The substitution g -> y is performed literally at jet level; its result
    does not reproduce the cited closed shape's unit linear coefficients
    (see shape_residual), which is reported rather than forced.
    """
    quasi_nf = nf.quasi_nf
    warnings = list(nf.warnings)
    if quasi_nf.diffeo_nf is not None:
        base_nf = quasi_nf.diffeo_nf
        base = base_nf.normalized.source
        base_inv = map_invert(base_nf.normalized)
        omega_tilde = pullback(base_inv, standard_form(base, base_inv.order))
        base_param = {
            "q_bars": [base_inv.components[base.pq_index("q", i)]
                       for i in range(1, base.n + 1)],
            "p_bars": [base_inv.components[base.pq_index("p", i)]
                       - Jet.coordinate(base, base.pq_index("p", i), base_inv.order)
                       for i in range(2, base.n + 1)],
        }
        check = pullback(base_nf.normalized, omega_tilde)
        std = standard_form(base, check.order)
        if not (check - std).is_zero():
            raise CertificationError("omega-tilde does not pull back to standard")
    else:
        base = None
        base_inv = None
        omega_tilde = None
        base_param = {"q_bars": [], "p_bars": []}

    quasi = quasi_nf.r.space
    n = quasi.n
    order = quasi_nf.r.order
    y = Jet.coordinate(quasi, 0, order)
    g_hat = quasi_nf.r.truncate(order)
    if n >= 1:
        var_map = {i: i + 1 for i in range(2 * n)}
        phi_moved = quasi_nf.phi
        if base_inv is not None:
            # push the invariants to coordinates: (p_i + P~_i) o inv = p_i etc.
            ck = coefficient_expansion(quasi_nf.phi, 0)
            phi_order = quasi_nf.phi.order
            y_phi = Jet.coordinate(quasi, 0, phi_order)
            phi_moved = Jet.zero(quasi, phi_order)
            for k, c in enumerate(ck):
                if c.is_zero():
                    continue
                moved = jet_compose(c.drop_to_subspace(list(range(1, quasi.dim)),
                                                       base), base_inv)
                phi_moved = phi_moved + moved.embed(quasi, var_map).lift(phi_order) \
                    * y_phi.power(k)
        for i in range(1, n + 1):
            pi = Jet.coordinate(quasi, quasi.pq_index("p", i), order)
            qi = Jet.coordinate(quasi, quasi.pq_index("q", i), order)
            g_hat = g_hat + pi * y.power(2 * i - 2) + qi * y.power(2 * i - 1)
        g_hat = g_hat + phi_moved.truncate(order) * y.power(2 * n)

    f_hat = implicit_solve(g_hat, y, 0)
    back = substitute_variable(g_hat, 0, f_hat)
    if not (back - y.truncate(back.order)).truncate(back.order).is_zero():
        raise CertificationError("implicit substitution failed to invert g")

    pq = list(range(1, quasi.dim))
    r_hat = f_hat.set_vars_zero(pq)
    shape = r_hat.truncate(f_hat.order)
    for i in range(1, n + 1):
        pi = Jet.coordinate(quasi, quasi.pq_index("p", i), f_hat.order)
        qi = Jet.coordinate(quasi, quasi.pq_index("q", i), f_hat.order)
        y_f = Jet.coordinate(quasi, 0, f_hat.order)
        shape = shape + pi * y_f.power(2 * i - 2) + qi * y_f.power(2 * i - 1)
    rem = f_hat - shape
    rem_parts = coefficient_expansion(rem, 0)
    psi_order = max(f_hat.order - 2 * n, 0)
    y_psi = Jet.coordinate(quasi, 0, psi_order)
    psi = Jet.zero(quasi, psi_order)
    shape_residual = Jet.zero(quasi, f_hat.order)
    y_f = Jet.coordinate(quasi, 0, f_hat.order)
    for k, c in enumerate(rem_parts):
        if c.is_zero():
            continue
        if k >= 2 * n:
            psi = psi + c.lift(psi_order) * y_psi.power(k - 2 * n)
        else:
            shape_residual = shape_residual + c.lift(f_hat.order) * y_f.power(k)
    if not shape_residual.is_zero():
        warnings.append("f-hat deviates from the cited closed shape below y^(2n); "
                        "the substitution result is reported as computed")
    if not psi.set_vars_zero(pq).is_zero():
        raise CertificationError("psi does not vanish on the y axis")
    return ImplicitNormalForm(
        f_hat=f_hat,
        r_hat=r_hat,
        psi=psi,
        shape_residual=shape_residual,
        omega_tilde=omega_tilde,
        base_parametrization=base_param,
        certified_order=f_hat.order,
        warnings=warnings,
    )
