"""The acceptance battery: one callable per criterion, shared by the test
suite and the CLI selftest.

Each criterion returns a dict with id, description, passed flag, detail
string, and elapsed seconds.  Residual tolerances are exact: a residual
passes only when it is identically zero at the certified order.  Where a
criterion compares invariants at order N-1, the transformed inputs are
generated at a lifted internal order (the harness owns its inputs as exact
polynomials), because the invariants of an order-N jet are only determined
to lower order; pipelines always report their honest certified orders.
"""

import random
import time
from fractions import Fraction
from itertools import product

from .forms import (
    FormJet,
    VectorFieldJet,
    contract,
    exterior_derivative,
    pullback,
    wedge,
)
from .jets import (
    IdealSpec,
    Jet,
    MapJet,
    VariableSpace,
    equal_to_order,
    ideal_membership,
    jet_compose,
    jet_from_polynomial,
    map_compose,
)
from .moduli import (
    normal_form_coefficient_count,
    orbit_dimension_rank,
    poincare_series,
)
from .normal_forms import (
    check_glancing,
    normalize_constrained_pair,
    normalize_diffeomorphism,
    parametrize_symplectic_form,
)
from .errors import GenericityViolation
from .symplectic import (
    SymplecticFormJet,
    darboux_reduce,
    poisson_bracket,
    random_symplectomorphism,
    standard_form,
)


def _random_jet(rng, space, order, density=0.3, min_degree=0, span=3):
    coeffs = {}
    for e in product(range(order + 1), repeat=space.dim):
        if min_degree <= sum(e) <= order and rng.random() < density:
            coeffs[e] = Fraction(rng.randint(-span, span), rng.randint(1, 2))
    return Jet(space, order, coeffs)


def random_closed_form(rng, space, order, density=0.2):
    """Standard part plus an exact perturbation d(1-form), nondegenerate at 0."""
    coeffs = {}
    for i in range(space.dim):
        coeffs[(i,)] = _random_jet(rng, space, order + 1, density=density,
                                   min_degree=2, span=2)
    return standard_form(space, order) + exterior_derivative(
        FormJet(space, 1, order + 1, coeffs))


def _ideal_monomials(space, level, dmax):
    gens = IdealSpec(space, level).generators
    out = []
    for e in product(range(dmax + 1), repeat=space.dim):
        if 1 <= sum(e) <= dmax and any(e[g] for g in gens):
            out.append(e)
    return out


def random_normal_shaped(rng, space, order, coeff_degree):
    """A map already in normal shape, with random invariants in the ideals.

    Retries until the linear part is invertible with nonzero pairing
    derivatives (a random degree-1 ideal coefficient can cancel a diagonal).
    """
    from . import linalg
    n = space.n
    for _ in range(50):
        comps = []
        for i in range(1, n + 1):
            pi_idx = space.pq_index("p", i)
            qi_idx = space.pq_index("q", i)
            p_comp = Jet.coordinate(space, pi_idx, order)
            if i >= 2:
                for e in _ideal_monomials(space, 2 * i - 2, coeff_degree):
                    if rng.random() < 0.25:
                        p_comp = p_comp + Jet(space, order,
                                              {e: Fraction(rng.randint(-2, 2),
                                                           rng.randint(1, 2))})
            q_comp = Jet.coordinate(space, qi_idx, order)
            for e in _ideal_monomials(space, 2 * i - 1, coeff_degree):
                if rng.random() < 0.25:
                    q_comp = q_comp + Jet(space, order,
                                          {e: Fraction(rng.randint(-2, 2),
                                                       rng.randint(1, 2))})
            comps.append(p_comp)
            comps.append(q_comp)
        m = MapJet(space, comps)
        lin = m.linear_part()
        diag_ok = all(lin[k][k] != 0 for k in range(space.dim))
        if diag_ok and linalg.mat_det(lin) != 0:
            return m
    raise RuntimeError("could not sample a nondegenerate normal-shaped map")


def _criterion(cid, description):
    def wrap(fn):
        def run():
            start = time.perf_counter()
            try:
                passed, detail = fn()
            except Exception as exc:  # a crash counts as a failure, reported
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            return {
                "id": cid,
                "description": description,
                "passed": passed,
                "detail": detail,
                "seconds": round(time.perf_counter() - start, 2),
            }
        run.cid = cid
        run.description = description
        return run
    return wrap


@_criterion(1, "Darboux certification on 100 random closed perturbations")
def criterion_darboux():
    rng = random.Random(101)
    count = 0
    for n, cases in ((1, 50), (2, 50)):
        space = VariableSpace.symplectic(n)
        for _ in range(cases):
            omega = random_closed_form(rng, space, 4)
            phi = darboux_reduce(omega)
            res = pullback(phi, omega)
            res = res - standard_form(space, res.order)
            if not res.is_zero():
                return False, f"nonzero residual at n={n}, case {count}"
            count += 1
    return True, f"{count} reductions, all residuals exactly zero"


@_criterion(2, "Theorem 1 round trip recovers invariants to order N-1")
def criterion_t1_roundtrip():
    n_order = 5
    lift = 2
    checked = 0
    for n, cases in ((1, 50), (2, 50)):
        space = VariableSpace.symplectic(n)
        omega = SymplecticFormJet.standard(space, n_order + lift)
        rng = random.Random(200 + n)
        for case in range(cases):
            # redraw when the composed linear part admits no pair relabeling
            # (a legitimate, spec-reported failure outside the hypotheses)
            from .errors import PivotFailure
            for _ in range(20):
                phi_nf = random_normal_shaped(rng, space, n_order + lift,
                                              n_order - 1)
                psi = random_symplectomorphism(rng.randint(0, 10**6), 4, omega)
                try:
                    nf = normalize_diffeomorphism(map_compose(phi_nf, psi))
                    break
                except PivotFailure:
                    continue
            else:
                return False, f"could not draw an admissible case (n={n})"
            if not nf.certification.ok:
                return False, f"normalizer failed to certify (n={n}, case {case})"
            for i in range(1, n + 1):
                expect = phi_nf.components[2 * i - 1]
                if not equal_to_order(nf.q_invariants[i - 1], expect, n_order - 1):
                    return False, f"Q{i} mismatch (n={n}, case {case})"
                if i >= 2:
                    expect_p = phi_nf.components[2 * i - 2] \
                        - Jet.coordinate(space, 2 * i - 2, n_order + lift)
                    if not equal_to_order(nf.p_invariants[i - 2], expect_p,
                                          n_order - 1):
                        return False, f"P{i} mismatch (n={n}, case {case})"
            checked += 1
    return True, f"{checked} round trips, invariants exact to order {n_order - 1}"


@_criterion(3, "Theorem 1 separates normal forms differing in one coefficient")
def criterion_t1_separation():
    n_order = 5
    rng = random.Random(300)
    separated = 0
    for case in range(50):
        n = 1 if case % 2 == 0 else 2
        space = VariableSpace.symplectic(n)
        phi_a = random_normal_shaped(rng, space, n_order, n_order - 1)
        which = rng.randrange(n)
        level = 2 * which + 1
        mono = rng.choice(_ideal_monomials(space, level, n_order - 1))
        delta = Jet(space, n_order, {mono: Fraction(1, 2)})
        comps = list(phi_a.components)
        comps[2 * which + 1] = comps[2 * which + 1] + delta
        phi_b = MapJet(space, comps)
        nf_a = normalize_diffeomorphism(phi_a)
        nf_b = normalize_diffeomorphism(phi_b)
        same = all(
            equal_to_order(nf_a.q_invariants[i], nf_b.q_invariants[i], n_order - 1)
            for i in range(n)) and all(
            equal_to_order(nf_a.p_invariants[i], nf_b.p_invariants[i], n_order - 1)
            for i in range(n - 1))
        if same:
            return False, f"case {case}: outputs coincide after perturbation"
        separated += 1
    return True, f"{separated} perturbed pairs all separated"


@_criterion(4, "Theorem 2 worked example, Melrose pair rejection, glancing check")
def criterion_t2_worked():
    space = VariableSpace.constrained(1)
    f = Jet.variable(space, "y", 6)
    h = jet_from_polynomial(space, 6, {"x^2": 1, "y": 1, "p1": 1, "q1*y": 1})
    nf = normalize_constrained_pair(f, h)
    k = nf.certified_order
    if not equal_to_order(nf.r, Jet.variable(space, "y", 6), min(k, nf.r.order)):
        return False, "r != y"
    if not equal_to_order(nf.q_invariants[0], Jet.variable(space, "q1", 6),
                          nf.q_invariants[0].order):
        return False, "Q1~ != q1"
    if not nf.phi.is_zero():
        return False, "phi != 0"
    if not (nf.certification.ok and nf.f_residual.is_zero()
            and nf.h_residual.is_zero()):
        return False, "residuals not exactly zero"
    h_mel = jet_from_polynomial(space, 6, {"x^2": 1, "y": 1, "p1": 1})
    if not check_glancing(f, h_mel).in_s1:
        return False, "Melrose pair not recognized as simple-tangent"
    try:
        normalize_constrained_pair(f, h_mel)
        return False, "Melrose pair did not raise GenericityViolation"
    except GenericityViolation:
        pass
    return True, "r=y, Q1~=q1, phi=0 exactly; Melrose pair outside the open set"


@_criterion(5, "Theorem 2 invariance under 50 symplectomorphisms and units")
def criterion_t2_invariance():
    # Run as stated: 50 random certified maps of the extended standard form
    # combined with random unit multiples of h, invariants compared at order
    # N-1 = 5.  The symplectomorphism channel is exactly invariant; the unit
    # channel is jet-limited: an order-M defining function determines the
    # hypersurface division data only to about order M/2 once the unit mixes
    # x with the base variables, so order N-1 is out of reach of order-N
    # inputs (and of any budget-compatible lift).  The criterion is reported
    # honestly; the per-channel tallies are included in the detail.
    space = VariableSpace.constrained(1)
    n_order = 6
    lift = 2
    m = n_order + lift
    f = Jet.variable(space, "y", m)
    h = jet_from_polynomial(space, m, {"x^2": 1, "y": 1, "p1": 1, "q1*y": 1,
                                       "y^2": Fraction(1, 2)})
    base = normalize_constrained_pair(f, h)
    omega = SymplecticFormJet.standard(space, m)
    rng = random.Random(500)
    k = n_order - 1

    def invariants_match(nf, order):
        return (equal_to_order(nf.r, base.r, order)
                and equal_to_order(nf.q_invariants[0], base.q_invariants[0], order)
                and equal_to_order(nf.phi, base.phi, order))

    stated_failures = 0
    psi_only_failures = 0
    psi_only_checked = 0
    floor = k
    for case in range(50):
        psi = random_symplectomorphism(rng.randint(0, 10**6), 4, omega)
        unit = Jet.constant(space, m, rng.randint(1, 2))
        for e in product(range(3), repeat=space.dim):
            if 1 <= sum(e) <= 2 and rng.random() < 0.3:
                unit = unit + Jet(space, m, {e: Fraction(rng.randint(-1, 1),
                                                         rng.randint(1, 2))})
        f2 = jet_compose(f, psi)
        h2s = jet_compose(h, psi)
        if case < 12:
            psi_only_checked += 1
            if not invariants_match(normalize_constrained_pair(f2, h2s), k):
                psi_only_failures += 1
        nf = normalize_constrained_pair(f2, h2s * unit)
        if not invariants_match(nf, k):
            stated_failures += 1
            while floor > 0 and not invariants_match(nf, floor):
                floor -= 1
    if stated_failures == 0:
        return True, f"50 transformed pairs identical to order {k}"
    return False, (
        f"{stated_failures}/50 unit-multiplied cases differ above order {floor} "
        f"(symplectomorphism channel alone: {psi_only_failures}/"
        f"{psi_only_checked} failures at order {k}); the unit channel cannot "
        "reach order N-1 from order-N defining-function jets - see the "
        "decisions ledger for the blocking analysis")


@_criterion(6, "Planar case: r(y) = y - y^2 and invariance under 25 maps")
def criterion_planar():
    space = VariableSpace.constrained(0)
    m = 8
    f = Jet.variable(space, "y", m)
    h = jet_from_polynomial(space, m, {"x^2": 1, "x*y": 2, "y": 1})
    nf = normalize_constrained_pair(f, h)
    expect = jet_from_polynomial(space, nf.r.order, {"y": 1, "y^2": -1})
    if not equal_to_order(nf.r, expect, min(5, nf.r.order)):
        return False, f"r != y - y^2 (got {nf.r.truncate(3)!r})"
    omega = SymplecticFormJet.standard(space, m)
    rng = random.Random(600)
    for case in range(25):
        psi = random_symplectomorphism(rng.randint(0, 10**6), 4, omega)
        nf2 = normalize_constrained_pair(jet_compose(f, psi),
                                         jet_compose(h, psi))
        if not equal_to_order(nf2.r, expect, 5):
            return False, f"case {case}: r not invariant"
    return True, "r = y - y^2 exactly; invariant under 25 planar maps"


@_criterion(7, "Moduli dimensions: two methods agree; series flags n=2 overcount")
def criterion_moduli():
    for n in (1, 2, 3, 4):
        expect = n * (2 * n - 1)
        if normal_form_coefficient_count(n, 1) != expect:
            return False, f"count at n={n}, k=1 is not n(2n-1)"
        if orbit_dimension_rank(n, 1) != expect:
            return False, f"rank at n={n}, k=1 is not n(2n-1)"
    for n in (1, 2):
        for k in (1, 2, 3):
            a = orbit_dimension_rank(n, k)
            b = normal_form_coefficient_count(n, k)
            if a != b:
                return False, f"methods disagree at n={n}, k={k}: {a} vs {b}"
    series1 = poincare_series(1, 6, rank_check_max=2)
    if series1.dims != [0, 1, 3, 6, 10, 15, 21] or not all(series1.agreement):
        return False, "n=1 series does not match t/(1-t)^2"
    series2 = poincare_series(2, 2, rank_check_max=2)
    if series2.dims != [0, 6, 26] or series2.paper_dims != [0, 6, 30]:
        return False, "n=2 exact/closed-form values off"
    if series2.agreement != [True, True, False] or not series2.warnings:
        return False, "n=2 disagreement not flagged"
    return True, "dim M_1 = n(2n-1) for n<=4; 26 vs 30 flagged at n=2, k=2"


@_criterion(8, "Symplectic-form parametrization round trip on 50 random forms")
def criterion_parametrize():
    rng = random.Random(800)
    space = VariableSpace.symplectic(2)
    for case in range(50):
        omega = random_closed_form(rng, space, 4, density=0.15)
        par = parametrize_symplectic_form(omega)
        if not par.residual.is_zero():
            return False, f"case {case}: reconstruction residual nonzero"
        for i, qb in enumerate(par.q_bars, start=1):
            if not ideal_membership(qb, IdealSpec(space, 2 * i - 1)):
                return False, f"case {case}: Q{i}-bar outside its ideal"
        for i, pb in enumerate(par.p_bars, start=2):
            if not ideal_membership(pb, IdealSpec(space, 2 * i - 2)):
                return False, f"case {case}: P{i}-bar outside its ideal"
    return True, "50 forms parametrized, residuals exactly zero, ideals hold"


@_criterion(9, "Calculus law suite: d^2, functoriality, Cartan, Jacobi")
def criterion_calculus():
    rng = random.Random(900)
    space = VariableSpace.symplectic(2)
    omega = SymplecticFormJet.standard(space, 4)

    def rnd_form(degree):
        coeffs = {}
        for idx in _increasing_tuples(space.dim, degree):
            if rng.random() < 0.5:
                coeffs[idx] = _random_jet(rng, space, 4, density=0.25)
        return FormJet(space, degree, 4, coeffs)

    def rnd_map():
        comps = []
        for i in range(space.dim):
            comps.append(Jet.coordinate(space, i, 4)
                         + _random_jet(rng, space, 4, density=0.1, min_degree=2))
        return MapJet(space, comps)

    for case in range(200):
        alpha = rnd_form(1)
        if not exterior_derivative(exterior_derivative(alpha)).is_zero():
            return False, f"case {case}: d^2 != 0"

        m1, m2 = rnd_map(), rnd_map()
        beta = rnd_form(1)
        lhs = pullback(map_compose(m1, m2), beta)
        rhs = pullback(m2, pullback(m1, beta))
        kk = min(lhs.order, rhs.order)
        if not (lhs.truncate(kk) - rhs.truncate(kk)).is_zero():
            return False, f"case {case}: pullback functoriality failed"

        v = VectorFieldJet(space, [_random_jet(rng, space, 4, density=0.3)
                                   for _ in range(space.dim)])
        gamma = rnd_form(2)
        lhs2 = contract(v, wedge(beta, gamma))
        rhs2 = wedge(contract(v, beta), gamma) - wedge(beta, contract(v, gamma))
        if not (lhs2 - rhs2).is_zero():
            return False, f"case {case}: Cartan antiderivation failed"

        fj = _random_jet(rng, space, 4, density=0.4)
        gj = _random_jet(rng, space, 4, density=0.4)
        hj = _random_jet(rng, space, 4, density=0.4)
        jac = poisson_bracket(fj, poisson_bracket(gj, hj, omega), omega) \
            + poisson_bracket(gj, poisson_bracket(hj, fj, omega), omega) \
            + poisson_bracket(hj, poisson_bracket(fj, gj, omega), omega)
        if not jac.is_zero():
            return False, f"case {case}: Jacobi identity failed"
    return True, "200 randomized instances per law, all residuals zero"


def _increasing_tuples(dim, degree):
    from itertools import combinations
    return list(combinations(range(dim), degree))


ALL_CRITERIA = [
    criterion_darboux,
    criterion_t1_roundtrip,
    criterion_t1_separation,
    criterion_t2_worked,
    criterion_t2_invariance,
    criterion_planar,
    criterion_moduli,
    criterion_parametrize,
    criterion_calculus,
]


def run_all(selection=None):
    results = []
    for crit in ALL_CRITERIA:
        if selection and crit.cid not in selection:
            continue
        results.append(crit())
    return results


def format_table(results):
    lines = ["criterion  status  seconds  description"]
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        lines.append(f"{r['id']:>9}  {status:<6}  {r['seconds']:>7}  "
                     f"{r['description']}")
        if not r["passed"]:
            lines.append(f"           detail: {r['detail']}")
    total = sum(1 for r in results if r["passed"])
    lines.append(f"{total}/{len(results)} criteria passed")
    return "\n".join(lines)
