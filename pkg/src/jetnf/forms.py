"""Differential forms and vector fields with jet coefficients.

Conventions are fixed once for the whole package: wedge products are stored on
strictly increasing index tuples, contraction inserts the vector in the first
slot, and every operation propagates the order to which its output is
certified (an exterior derivative of an order-N form is only trustworthy to
order N-1, and so on).
"""

from fractions import Fraction

from .errors import DegenerateForm, SingularAtOrigin, SpaceMismatch
from .jets import Jet, MapJet, VariableSpace, jet_compose, map_compose
from . import linalg


def _merge_sign(indices):
    """Sort an index tuple, returning (sorted tuple, permutation sign) or None on repeats."""
    idx = list(indices)
    sign = 1
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
        if j > 0 and idx[j - 1] == idx[j]:
            return None, 0
    return tuple(idx), sign


class FormJet:
    """A degree-k differential form whose coefficients are jets."""

    __slots__ = ("space", "degree", "order", "coeffs")

    def __init__(self, space, degree, order, coeffs=None):
        self.space = space
        self.degree = degree
        self.order = order
        self.coeffs = {}
        if coeffs:
            for idx, jet in coeffs.items():
                if jet.space != space:
                    raise SpaceMismatch("form coefficient on wrong space")
                srt, sign = _merge_sign(idx)
                if sign == 0:
                    continue
                jet = jet.truncate(order) if sign == 1 else jet.truncate(order).scale(-1)
                if not jet.is_zero():
                    if srt in self.coeffs:
                        jet = self.coeffs[srt] + jet
                    if jet.is_zero():
                        self.coeffs.pop(srt, None)
                    else:
                        self.coeffs[srt] = jet

    @classmethod
    def zero(cls, space, degree, order):
        return cls(space, degree, order)

    @classmethod
    def from_function(cls, jet):
        return cls(jet.space, 0, jet.order, {(): jet})

    def coefficient(self, idx):
        srt, sign = _merge_sign(idx)
        jet = self.coeffs.get(srt)
        if jet is None:
            return Jet.zero(self.space, self.order)
        return jet if sign == 1 else jet.scale(-1)

    def is_zero(self):
        return not self.coeffs

    def truncate(self, k):
        if k >= self.order:
            return self
        out = FormJet(self.space, self.degree, k)
        for idx, jet in self.coeffs.items():
            t = jet.truncate(k)
            if not t.is_zero():
                out.coeffs[idx] = t
        return out

    def __add__(self, other):
        if self.space != other.space or self.degree != other.degree:
            raise SpaceMismatch("form addition across spaces or degrees")
        order = min(self.order, other.order)
        out = FormJet(self.space, self.degree, order)
        for idx in set(self.coeffs) | set(other.coeffs):
            s = (self.coeffs.get(idx, Jet.zero(self.space, order)).truncate(order)
                 + other.coeffs.get(idx, Jet.zero(self.space, order)).truncate(order))
            if not s.is_zero():
                out.coeffs[idx] = s
        return out

    def __neg__(self):
        out = FormJet(self.space, self.degree, self.order)
        out.coeffs = {idx: -jet for idx, jet in self.coeffs.items()}
        return out

    def __sub__(self, other):
        return self + (-other)

    def scale(self, k):
        k = Fraction(k)
        out = FormJet(self.space, self.degree, self.order)
        if k != 0:
            out.coeffs = {idx: jet.scale(k) for idx, jet in self.coeffs.items()}
        return out

    def constant_matrix(self):
        """For 2-forms: the antisymmetric matrix of values at the origin."""
        d = self.space.dim
        m = [[Fraction(0)] * d for _ in range(d)]
        for (i, j), jet in self.coeffs.items():
            c = jet.constant_term()
            m[i][j] = c
            m[j][i] = -c
        return m

    def coefficient_matrix(self):
        """For 2-forms: antisymmetric matrix of jets A[i][j] = form(d_i, d_j)."""
        d = self.space.dim
        zero = Jet.zero(self.space, self.order)
        m = [[zero] * d for _ in range(d)]
        for (i, j), jet in self.coeffs.items():
            m[i][j] = jet
            m[j][i] = jet.scale(-1)
        return m

    def evaluate_constant(self, *vectors):
        """Value at the origin on constant vectors (tuples of Fractions)."""
        total = Fraction(0)
        import itertools
        for idx, jet in self.coeffs.items():
            c = jet.constant_term()
            if c == 0:
                continue
            for perm in itertools.permutations(range(len(idx))):
                sign = _perm_sign(perm)
                prod = Fraction(1)
                for slot, pos in enumerate(perm):
                    prod *= Fraction(vectors[slot][idx[pos]])
                total += c * sign * prod
        return total

    def sorted_items(self):
        return sorted(self.coeffs.items())

    def __repr__(self):
        if not self.coeffs:
            return "0-form"
        parts = []
        for idx, jet in self.sorted_items():
            basis = "^".join(f"d{self.space.names[i]}" for i in idx)
            parts.append(f"({jet!r}) {basis}")
        return " + ".join(parts)


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class VectorFieldJet:
    """A vector field with one jet per coordinate (may be nonzero at the origin)."""

    __slots__ = ("space", "components")

    def __init__(self, space, components):
        comps = tuple(components)
        if len(comps) != space.dim:
            raise SpaceMismatch("component count does not match space dimension")
        for c in comps:
            if c.space != space:
                raise SpaceMismatch("field component on wrong space")
        self.space = space
        self.components = comps

    @classmethod
    def coordinate_axis(cls, space, idx, order):
        comps = [Jet.zero(space, order) for _ in range(space.dim)]
        comps[idx] = Jet.constant(space, order, 1)
        return cls(space, comps)

    @property
    def order(self):
        return min(c.order for c in self.components)

    def at_origin(self):
        return [c.constant_term() for c in self.components]

    def truncate(self, k):
        return VectorFieldJet(self.space, [c.truncate(k) for c in self.components])

    def scale_by_jet(self, u):
        return VectorFieldJet(self.space, [c * u for c in self.components])

    def __add__(self, other):
        return VectorFieldJet(self.space,
                              [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return VectorFieldJet(self.space,
                              [a - b for a, b in zip(self.components, other.components)])

    def scale(self, k):
        return VectorFieldJet(self.space, [c.scale(k) for c in self.components])

    def apply_to(self, f):
        """Derivation: sum_i V_i df/dx_i, certified one order lower."""
        order = min(self.order, f.order - 1)
        out = Jet.zero(self.space, max(order, 0))
        for i, v in enumerate(self.components):
            if not v.is_zero():
                out = out + (v.truncate(out.order) * f.derivative(i).truncate(out.order))
        return out

    def is_zero(self):
        return all(c.is_zero() for c in self.components)

    def __repr__(self):
        parts = [f"({c!r}) d/d{self.space.names[i]}"
                 for i, c in enumerate(self.components) if not c.is_zero()]
        return " + ".join(parts) if parts else "0-field"


# -- the four form operations -------------------------------------------


def exterior_derivative(alpha):
    """d(alpha); coefficients certified to order - 1."""
    order = max(alpha.order - 1, 0)
    out = FormJet(alpha.space, alpha.degree + 1, order)
    for idx, jet in alpha.coeffs.items():
        for i in range(alpha.space.dim):
            dji = jet.derivative(i).truncate(order)
            if dji.is_zero():
                continue
            srt, sign = _merge_sign((i,) + idx)
            if sign == 0:
                continue
            term = dji if sign == 1 else dji.scale(-1)
            acc = out.coeffs.get(srt)
            acc = term if acc is None else acc + term
            if acc.is_zero():
                out.coeffs.pop(srt, None)
            else:
                out.coeffs[srt] = acc
    return out


def d_of_function(f):
    """df as a 1-form."""
    return exterior_derivative(FormJet.from_function(f))


def wedge(alpha, beta):
    if alpha.space != beta.space:
        raise SpaceMismatch("wedge across spaces")
    order = min(alpha.order, beta.order)
    out = FormJet(alpha.space, alpha.degree + beta.degree, order)
    for ia, ja in alpha.coeffs.items():
        for ib, jb in beta.coeffs.items():
            srt, sign = _merge_sign(ia + ib)
            if sign == 0:
                continue
            prod = ja.truncate(order) * jb.truncate(order)
            if prod.is_zero():
                continue
            term = prod if sign == 1 else prod.scale(-1)
            acc = out.coeffs.get(srt)
            acc = term if acc is None else acc + term
            if acc.is_zero():
                out.coeffs.pop(srt, None)
            else:
                out.coeffs[srt] = acc
    return out


def wedge_power(alpha, k):
    result = None
    for _ in range(k):
        result = alpha if result is None else wedge(result, alpha)
    if result is None:
        raise ValueError("wedge_power needs k >= 1")
    return result


def contract(v, alpha):
    """Interior product with the vector inserted in the first slot."""
    if v.space != alpha.space:
        raise SpaceMismatch("contraction across spaces")
    if alpha.degree < 1:
        raise SpaceMismatch("cannot contract a 0-form")
    order = min(v.order, alpha.order)
    out = FormJet(alpha.space, alpha.degree - 1, order)
    for idx, jet in alpha.coeffs.items():
        for t, i in enumerate(idx):
            vi = v.components[i].truncate(order)
            if vi.is_zero():
                continue
            term = vi * jet.truncate(order)
            if t % 2 == 1:
                term = term.scale(-1)
            key = idx[:t] + idx[t + 1:]
            acc = out.coeffs.get(key)
            acc = term if acc is None else acc + term
            if acc.is_zero():
                out.coeffs.pop(key, None)
            else:
                out.coeffs[key] = acc
    return out


def pullback(m, alpha):
    """m^* alpha; certified to min(alpha.order, m.order - 1)."""
    if alpha.space != m.target:
        raise SpaceMismatch("pullback: form must live on the map's target space")
    order = min(alpha.order, m.order - 1)
    src = m.source
    if alpha.degree == 0:
        coeff = alpha.coeffs.get(())
        jet = Jet.zero(src, order) if coeff is None else jet_compose(coeff, m).truncate(order)
        return FormJet(src, 0, order, {(): jet})
    # differentials of the components, as 1-forms on the source
    dm = []
    for comp in m.components:
        coeffs = {}
        for i in range(src.dim):
            der = comp.derivative(i).truncate(order)
            if not der.is_zero():
                coeffs[(i,)] = der
        dm.append(FormJet(src, 1, order, coeffs))
    out = FormJet(src, alpha.degree, order)
    for idx, jet in alpha.coeffs.items():
        pulled = jet_compose(jet, m).truncate(order)
        if pulled.is_zero():
            continue
        block = None
        for i in idx:
            block = dm[i] if block is None else wedge(block, dm[i])
        for bidx, bjet in block.coeffs.items():
            term = pulled * bjet
            if term.is_zero():
                continue
            acc = out.coeffs.get(bidx)
            acc = term if acc is None else acc + term
            if acc.is_zero():
                out.coeffs.pop(bidx, None)
            else:
                out.coeffs[bidx] = acc
    return out


# -- vector field transport and linear systems over the jet ring --------


def solve_jet_linear(a, b, order):
    """Solve x . A = b for a row vector of jets, A with invertible constant part.

    Neumann iteration x = (b - x . A_+) . A0^{-1}; gains one degree per pass
    because A_+ has no constant term.
    """
    dim = len(a)
    space = b[0].space
    a0 = [[a[i][j].constant_term() for j in range(dim)] for i in range(dim)]
    a0inv = linalg.mat_inverse(a0)
    if a0inv is None:
        raise DegenerateForm("linear system has singular constant part")
    aplus = [[a[i][j].truncate(order) - Jet.constant(space, order, a0[i][j])
              for j in range(dim)] for i in range(dim)]
    b = [bj.truncate(order) for bj in b]

    def times_const(vec, mat):
        return [sum((vec[i].scale(mat[i][j]) for i in range(dim)),
                    Jet.zero(space, order)) for j in range(dim)]

    x = times_const(b, a0inv)
    for _ in range(order + 1):
        xa = [sum((x[i] * aplus[i][j] for i in range(dim)), Jet.zero(space, order))
              for j in range(dim)]
        if all(t.is_zero() for t in xa):
            break
        x_new = times_const([b[j] - xa[j] for j in range(dim)], a0inv)
        if all((xn - xo).is_zero() for xn, xo in zip(x_new, x)):
            x = x_new
            break
        x = x_new
    return x


def vf_pullback(m, v):
    """(Dm)^{-1} (V o m): the field seen in the source coordinates of m."""
    if v.space != m.target or m.source.dim != m.target.dim:
        raise SpaceMismatch("vf_pullback needs a self-dimension map on V's space")
    order = min(v.order, m.order - 1)
    src = m.source
    comp = [jet_compose(c, m).truncate(order) for c in v.components]
    jac = [[m.components[i].derivative(j).truncate(order) for i in range(src.dim)]
           for j in range(src.dim)]
    # rows of jac: index j (source direction); columns i (target comp):
    # we need w with Dm . w = comp, i.e. sum_j dm_i/dx_j w_j = comp_i;
    # as a row-vector system: w . (jac with [j][i] = dm_i/dx_j) = comp.
    w = solve_jet_linear(jac, comp, order)
    return VectorFieldJet(src, w)


def vf_pushforward_residual(m, axis, v):
    """Components of Dm . e_axis - V o m (zero iff m rectifies V along axis)."""
    order = min(v.order, m.order - 1)
    res = []
    for i in range(m.source.dim):
        lhs = m.components[i].derivative(axis).truncate(order)
        rhs = jet_compose(v.components[i], m).truncate(order)
        res.append(lhs - rhs)
    return res


# -- flow boxes and rectification ----------------------------------------


def flow_box(v, axis, section=None):
    """Coordinates straightening V to the axis field, by truncated Lie series.

    Returns the map Phi(t, s) = flow of V for time t from the section point
    (s with x_axis replaced by section(s), default 0); its pushforward of the
    axis coordinate field is V.  A flow of an order-M field is certified to
    order M+1, so the output map gains one order over the input field.
    """
    space = v.space
    m_order = v.order
    out_order = m_order + 1
    lifted = VectorFieldJet(space, [c.lift(out_order) for c in v.components])

    if section is None:
        def onto_section(g):
            return g.set_vars_zero([axis])
    else:
        from .jets import substitute_variable
        sec = section.lift(out_order)

        def onto_section(g):
            return substitute_variable(g, axis, sec)

    t = Jet.coordinate(space, axis, out_order)
    t_pow = Jet.constant(space, out_order, 1)
    gs = [Jet.coordinate(space, i, out_order) for i in range(space.dim)]
    acc = [onto_section(g) for g in gs]
    fact = Fraction(1)
    for k in range(1, out_order + 1):
        gs = [lifted.apply_to(g).lift(out_order) for g in gs]
        t_pow = t_pow * t
        fact = fact / k
        if all(g.is_zero() for g in gs):
            break
        for i in range(space.dim):
            term = onto_section(gs[i])
            if not term.is_zero():
                acc[i] = acc[i] + (t_pow * term).scale(fact)
    return MapJet(space, acc)


def rectify(v, axis=None):
    """A map whose pushforward of the chosen coordinate axis field equals V.

    A linear change first aligns V(0) with the axis exactly (not necessarily
    symplectic; used only where arbitrary coordinates are allowed), then the
    Lie-series flow from the transversal section finishes the job.
    """
    v0 = v.at_origin()
    if all(c == 0 for c in v0):
        raise SingularAtOrigin("cannot rectify a field vanishing at the origin")
    if axis is None:
        axis = next(i for i, c in enumerate(v0) if c != 0)
    dim = v.space.dim
    basis = linalg.complete_basis([v0], dim)
    if basis is None:
        raise SingularAtOrigin("could not complete V(0) to a basis")
    # complete_basis puts v0 first; move it to the axis slot
    cols = [[basis[r][c] for r in range(dim)] for c in range(dim)]
    others = cols[1:]
    ordered = []
    oi = 0
    for slot in range(dim):
        if slot == axis:
            ordered.append(cols[0])
        else:
            ordered.append(others[oi])
            oi += 1
    mat = [[ordered[c][r] for c in range(dim)] for r in range(dim)]
    align = MapJet.linear(v.space, mat, v.order + 1)
    w = vf_pullback(align, VectorFieldJet(v.space, [c.lift(v.order + 1)
                                                    for c in v.components]))
    box = flow_box(w, axis)
    return map_compose(align, box)
