"""Truncated multivariate power series with exact rational coefficients.

Everything downstream computes in the quotient ring Q[x1..xm]/m^(N+1): a
``Jet`` stores the coefficients of a polynomial of total degree <= N over a
fixed ``VariableSpace``; its ``order`` N is both the truncation degree and the
certification bound (the jet is a faithful representative of its class modulo
degree > N).  All values are immutable after construction and every operation
is a pure function.
"""

from fractions import Fraction
from math import factorial

from .errors import (
    DegenerateDirection,
    JetError,
    NonOriginPreserving,
    SingularLinearPart,
    SpaceMismatch,
)
from . import linalg

SYMPLECTIC = "symplectic"
QUASI = "quasi"
CONSTRAINED = "constrained"

# exponents are packed into one int, 6 bits per variable, inside hot loops;
# valid because every stored exponent is bounded by the truncation order
_PACK_BITS = 6
_PACK_MASK = (1 << _PACK_BITS) - 1


def _pack(exps, dim):
    key = 0
    for i in range(dim):
        key |= exps[i] << (_PACK_BITS * i)
    return key


def _unpack(key, dim):
    return tuple((key >> (_PACK_BITS * i)) & _PACK_MASK for i in range(dim))


def _common_denominator(coeffs):
    den = 1
    for c in coeffs.values():
        d = c.denominator
        if d != 1:
            g = _gcd_int(den, d)
            den = den // g * d
    return den


def _gcd_int(a, b):
    while b:
        a, b = b, a % b
    return a


def _names(kind, n):
    pq = [f"{c}{i}" for i in range(1, n + 1) for c in ("p", "q")]
    if kind == SYMPLECTIC:
        return pq
    if kind == QUASI:
        return ["y"] + pq
    if kind == CONSTRAINED:
        return ["x", "y"] + pq
    raise ValueError(f"unknown space kind {kind!r}")


class VariableSpace:
    """An ordered list of coordinates: symplectic (p1,q1,..), quasi (y,p,q), or constrained (x,y,p,q)."""

    __slots__ = ("kind", "n", "names", "dim")

    def __init__(self, kind, n):
        if n < 0:
            raise ValueError("n must be nonnegative")
        self.kind = kind
        self.n = n
        self.names = tuple(_names(kind, n))
        self.dim = len(self.names)

    @classmethod
    def symplectic(cls, n):
        return cls(SYMPLECTIC, n)

    @classmethod
    def quasi(cls, n):
        return cls(QUASI, n)

    @classmethod
    def constrained(cls, n):
        return cls(CONSTRAINED, n)

    def index(self, name):
        return self.names.index(name)

    def pq_index(self, c, i):
        """Index of p_i or q_i (1-based i)."""
        return self.index(f"{c}{i}")

    def __eq__(self, other):
        return (isinstance(other, VariableSpace)
                and self.kind == other.kind and self.n == other.n)

    def __hash__(self):
        return hash((self.kind, self.n))

    def __repr__(self):
        return f"VariableSpace({self.kind!r}, n={self.n})"


class IdealSpec:
    """The monomial ideal generated by a prefix of the reversed Darboux coordinates.

    Level i corresponds to generators q1,p1,q2,p2,... (first i of that list),
    1 <= i <= 2n-1.
    """

    __slots__ = ("space", "level", "generators")

    def __init__(self, space, level):
        if space.kind != SYMPLECTIC:
            raise SpaceMismatch("ideals are defined on symplectic spaces")
        if not 1 <= level <= 2 * space.n - 1:
            raise ValueError(f"ideal level {level} out of range for n={space.n}")
        rev = []
        for i in range(1, space.n + 1):
            rev.append(space.pq_index("q", i))
            rev.append(space.pq_index("p", i))
        self.space = space
        self.level = level
        self.generators = tuple(rev[:level])

    def __repr__(self):
        names = ",".join(self.space.names[g] for g in self.generators)
        return f"IdealSpec(<{names}>)"


class Jet:
    """A polynomial of total degree <= order with Fraction coefficients.

    Jets are immutable once handed out; the packed-integer view used by the
    multiplication hot path is cached on first use.
    """

    __slots__ = ("space", "order", "coeffs", "_fast")

    def __init__(self, space, order, coeffs=None):
        if order < 0:
            raise ValueError("order must be nonnegative")
        self.space = space
        self.order = order
        self._fast = None
        self.coeffs = {}
        if coeffs:
            for exps, c in coeffs.items():
                c = Fraction(c)
                if c != 0 and sum(exps) <= order:
                    self.coeffs[tuple(exps)] = c

    def _fast_view(self):
        """(common denominator, {degree: [(packed key, int numerator)]})."""
        fv = self._fast
        if fv is None:
            den = _common_denominator(self.coeffs)
            dim = self.space.dim
            by_deg = {}
            for e, c in self.coeffs.items():
                by_deg.setdefault(sum(e), []).append(
                    (_pack(e, dim), c.numerator * (den // c.denominator)))
            fv = (den, by_deg)
            self._fast = fv
        return fv

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, space, order):
        return cls(space, order)

    @classmethod
    def constant(cls, space, order, value):
        j = cls(space, order)
        v = Fraction(value)
        if v != 0:
            j.coeffs[(0,) * space.dim] = v
        return j

    @classmethod
    def coordinate(cls, space, idx, order):
        j = cls(space, order)
        e = [0] * space.dim
        e[idx] = 1
        j.coeffs[tuple(e)] = Fraction(1)
        return j

    @classmethod
    def variable(cls, space, name, order):
        return cls.coordinate(space, space.index(name), order)

    # -- basic queries ------------------------------------------------

    def is_zero(self):
        return not self.coeffs

    def constant_term(self):
        return self.coeffs.get((0,) * self.space.dim, Fraction(0))

    def linear_coefficient(self, idx):
        e = [0] * self.space.dim
        e[idx] = 1
        return self.coeffs.get(tuple(e), Fraction(0))

    def degree(self):
        """Largest total degree with a nonzero coefficient (-1 for zero)."""
        return max((sum(e) for e in self.coeffs), default=-1)

    def __eq__(self, other):
        return (isinstance(other, Jet) and self.space == other.space
                and self.order == other.order and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.space, self.order, frozenset(self.coeffs.items())))

    # -- ring operations ----------------------------------------------
    # Binary operators certify to the min of the operand orders; the
    # spec-level wrappers below require equal orders instead.

    def __add__(self, other):
        if isinstance(other, Jet):
            if self.space != other.space:
                raise SpaceMismatch("jet addition across spaces")
            order = min(self.order, other.order)
            out = dict(self.coeffs)
            for e, c in other.coeffs.items():
                s = out.get(e, Fraction(0)) + c
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
            return Jet(self.space, order, out)
        return self + Jet.constant(self.space, self.order, other)

    def __neg__(self):
        j = Jet(self.space, self.order)
        j.coeffs = {e: -c for e, c in self.coeffs.items()}
        return j

    def __sub__(self, other):
        if isinstance(other, Jet):
            return self + (-other)
        return self + (-Fraction(other))

    def scale(self, k):
        k = Fraction(k)
        j = Jet(self.space, self.order)
        if k != 0:
            j.coeffs = {e: c * k for e, c in self.coeffs.items()}
        return j

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        if self.space != other.space:
            raise SpaceMismatch("jet multiplication across spaces")
        order = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return Jet(self.space, order)
        if len(a) > len(b):
            a, b = b, a
        # integer fast path: clear denominators once, multiply packed-int
        # exponent keys with plain int arithmetic, normalize once at the end
        den_a = _common_denominator(a)
        den_b = _common_denominator(b)
        dim = self.space.dim
        a_items = [(_pack(e, dim), sum(e), (c.numerator * (den_a // c.denominator)))
                   for e, c in a.items()]
        by_deg = {}
        for e, c in b.items():
            by_deg.setdefault(sum(e), []).append(
                (_pack(e, dim), c.numerator * (den_b // c.denominator)))
        out = {}
        get = out.get
        for ea, da, ca in a_items:
            for db, items in by_deg.items():
                if da + db > order:
                    continue
                for eb, cb in items:
                    key = ea + eb
                    out[key] = get(key, 0) + ca * cb
        den = den_a * den_b
        j = Jet(self.space, order)
        coeffs = {}
        for key, v in out.items():
            if v:
                coeffs[_unpack(key, dim)] = Fraction(v, den)
        j.coeffs = coeffs
        return j

    __rmul__ = __mul__
    __radd__ = __add__

    def power(self, k):
        if k < 0:
            raise ValueError("negative jet power")
        result = Jet.constant(self.space, self.order, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def inverse(self):
        """Multiplicative inverse; requires a nonzero constant term."""
        c0 = self.constant_term()
        if c0 == 0:
            raise JetError("jet with zero constant term has no inverse")
        inv0 = Fraction(1) / c0
        rest = self - Jet.constant(self.space, self.order, c0)
        # geometric series in rest/c0, terminates at the truncation order
        term = Jet.constant(self.space, self.order, inv0)
        acc = term
        for _ in range(self.order):
            term = term * rest
            term = term.scale(-inv0)
            if term.is_zero():
                break
            acc = acc + term
        return acc

    def divide(self, other):
        return self * other.inverse()

    # -- truncation and reinterpretation --------------------------------

    def truncate(self, k):
        """The same class viewed modulo degree > k (k <= order)."""
        if k >= self.order:
            return self
        j = Jet(self.space, k)
        j.coeffs = {e: c for e, c in self.coeffs.items() if sum(e) <= k}
        return j

    def lift(self, k):
        """Reinterpret as exact up to order k >= order (zero-padding).

        Only valid when the caller knows the jet is an exact polynomial
        (constructed data, not a pipeline output).
        """
        if k <= self.order:
            return self.truncate(k)
        j = Jet(self.space, k)
        j.coeffs = dict(self.coeffs)
        return j

    def derivative(self, idx):
        """Partial derivative; certified one order lower."""
        out = {}
        for e, c in self.coeffs.items():
            if e[idx]:
                key = e[:idx] + (e[idx] - 1,) + e[idx + 1:]
                out[key] = c * e[idx]
        j = Jet(self.space, max(self.order - 1, 0))
        j.coeffs = {e: c for e, c in out.items() if sum(e) <= j.order}
        return j

    def set_vars_zero(self, idxs):
        """Substitute 0 for the given variables (stay on the same space)."""
        idxs = set(idxs)
        out = {e: c for e, c in self.coeffs.items() if all(e[i] == 0 for i in idxs)}
        j = Jet(self.space, self.order)
        j.coeffs = out
        return j

    def drop_to_subspace(self, keep, space):
        """Move to a smaller space; monomials using dropped variables must be absent."""
        out = {}
        keep = list(keep)
        dropped = [i for i in range(self.space.dim) if i not in keep]
        for e, c in self.coeffs.items():
            if any(e[i] for i in dropped):
                raise JetError("jet depends on a dropped variable")
            out[tuple(e[i] for i in keep)] = c
        j = Jet(space, self.order)
        j.coeffs = out
        return j

    def embed(self, space, var_map):
        """Move to a bigger space; var_map[i] is the new index of old variable i."""
        out = {}
        for e, c in self.coeffs.items():
            key = [0] * space.dim
            for i, ei in enumerate(e):
                key[var_map[i]] = ei
            out[tuple(key)] = c
        j = Jet(space, self.order)
        j.coeffs = out
        return j

    # -- display -------------------------------------------------------

    def sorted_terms(self):
        """(exps, coefficient) pairs in graded-lex order."""
        return sorted(self.coeffs.items(), key=lambda t: (sum(t[0]), t[0]))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                f"{self.space.names[i]}^{k}" if k > 1 else self.space.names[i]
                for i, k in enumerate(e) if k)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


class MapJet:
    """A tuple of jets with zero constant term: a map germ at jet order.

    ``source`` is the space the component jets live on; ``target`` the space
    whose coordinates the components represent (equal to ``source`` for the
    self-maps used everywhere except explicit restrictions).
    """

    __slots__ = ("source", "target", "components")

    def __init__(self, source, components, target=None):
        self.source = source
        self.target = target if target is not None else source
        comps = tuple(components)
        if len(comps) != self.target.dim:
            raise SpaceMismatch("component count does not match target dimension")
        for c in comps:
            if c.space != source:
                raise SpaceMismatch("component jets must live on the source space")
            if c.constant_term() != 0:
                raise NonOriginPreserving("map components must vanish at the origin")
        self.components = comps

    @classmethod
    def identity(cls, space, order):
        return cls(space, [Jet.coordinate(space, i, order) for i in range(space.dim)])

    @classmethod
    def linear(cls, space, matrix, order):
        """Map with components sum_j M[i][j] x_j."""
        comps = []
        for i in range(space.dim):
            coeffs = {}
            for j in range(space.dim):
                v = Fraction(matrix[i][j])
                if v:
                    e = [0] * space.dim
                    e[j] = 1
                    coeffs[tuple(e)] = v
            comps.append(Jet(space, order, coeffs))
        return cls(space, comps)

    @property
    def order(self):
        return min(c.order for c in self.components)

    def linear_part(self):
        """Jacobian at the origin as a Fraction matrix (target x source)."""
        return [[c.linear_coefficient(j) for j in range(self.source.dim)]
                for c in self.components]

    def truncate(self, k):
        return MapJet(self.source, [c.truncate(k) for c in self.components], self.target)

    def is_identity(self):
        return all(c == Jet.coordinate(self.source, i, c.order)
                   for i, c in enumerate(self.components))

    def __repr__(self):
        return "MapJet(" + ", ".join(repr(c) for c in self.components) + ")"


# -- spec-level operations ---------------------------------------------


def jet_multiply(a, b):
    """Product in the quotient ring; operands must share space and order."""
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        raise TypeError("jet_multiply expects Jets")
    if a.space != b.space or a.order != b.order:
        raise SpaceMismatch("jet_multiply requires equal spaces and orders")
    return a * b


def jet_compose(f, m):
    """f composed with the map m (substitution of m's components into f).

    Well defined in the quotient ring because every component of m has zero
    constant term.  Horner evaluation axis by axis keeps the number of jet
    multiplications at roughly dim * order.
    """
    if f.space != m.target:
        raise SpaceMismatch("jet_compose: f must live on the map's target space")
    order = min([f.order] + [c.order for c in m.components])
    comps = [c.truncate(order) for c in m.components]
    src = m.source
    zero_key = (0,) * f.space.dim

    def rec(coeffs, axis):
        if not coeffs:
            return Jet.zero(src, order)
        if axis < 0:
            return Jet.constant(src, order, coeffs.get(zero_key, Fraction(0)))
        buckets = {}
        for e, c in coeffs.items():
            k = e[axis]
            key = e[:axis] + (0,) + e[axis + 1:]
            buckets.setdefault(k, {})[key] = c
        top = max(buckets)
        res = rec(buckets[top], axis - 1)
        for k in range(top - 1, -1, -1):
            res = res * comps[axis]
            if k in buckets:
                res = res + rec(buckets[k], axis - 1)
        return res

    return rec(dict(f.coeffs), f.space.dim - 1)


def map_compose(outer, inner):
    """outer after inner: components of outer composed with inner."""
    if outer.source != inner.target:
        raise SpaceMismatch("map_compose: spaces do not chain")
    return MapJet(inner.source, [jet_compose(c, inner) for c in outer.components],
                  outer.target)


def map_invert(m):
    """Inverse map jet, by Newton iteration gaining one degree per step."""
    if m.source != m.target:
        raise SpaceMismatch("map_invert requires a self-map")
    space = m.source
    order = m.order
    lin = m.linear_part()
    linv = linalg.mat_inverse(lin)
    if linv is None:
        raise SingularLinearPart("map has singular linear part")
    g = MapJet.linear(space, linv, order)
    ident = MapJet.identity(space, order)
    for _ in range(order + 1):
        err = [jet_compose(c, g) - ident.components[i]
               for i, c in enumerate(m.components)]
        if all(e.is_zero() for e in err):
            break
        comps = []
        for i in range(space.dim):
            corr = Jet.zero(space, order)
            for j in range(space.dim):
                if linv[i][j]:
                    corr = corr + err[j].scale(linv[i][j])
            comps.append(g.components[i] - corr)
        g = MapJet(space, comps)
    return g


def substitute_variable(f, idx, value):
    """Replace variable idx by the jet ``value`` (other variables fixed).

    Horner in the single substituted variable; value must have zero constant
    term for the substitution to be well defined in the quotient ring.
    """
    if value.space != f.space:
        raise SpaceMismatch("substitute_variable: value on wrong space")
    if value.constant_term() != 0:
        raise NonOriginPreserving("substituted value must vanish at the origin")
    order = min(f.order, value.order)
    buckets = {}
    for e, c in f.coeffs.items():
        k = e[idx]
        key = e[:idx] + (0,) + e[idx + 1:]
        buckets.setdefault(k, {})[key] = c
    if not buckets:
        return Jet(f.space, order)
    val = value.truncate(order)
    top = max(buckets)
    res = Jet(f.space, order, buckets[top])
    for k in range(top - 1, -1, -1):
        res = res * val
        if k in buckets:
            res = res + Jet(f.space, order, buckets[k])
    return res


def implicit_solve(f, rhs, var):
    """Solve f(.., Y, ..) = rhs for the jet Y substituted at position var.

    Newton iteration from the identity; requires a nonvanishing derivative of
    f along var at the origin.  When rhs does not involve var the solution is
    var-free as well.
    """
    if f.space != rhs.space:
        raise SpaceMismatch("implicit_solve: f and rhs must share a space")
    c = f.derivative(var).constant_term()
    if c == 0:
        raise DegenerateDirection("df/dvar vanishes at the origin")
    if f.constant_term() != rhs.constant_term():
        raise JetError("implicit_solve: constant terms disagree, no origin solution")
    order = min(f.order, rhs.order)
    f = f.truncate(order)
    rhs = rhs.truncate(order)
    inv = Fraction(1) / c
    # start from the linear solve so the first error is already quadratic
    lin = Jet(f.space, order)
    for i in range(f.space.dim):
        a = f.linear_coefficient(i) if i != var else Fraction(0)
        b = rhs.linear_coefficient(i)
        v = (b - a) * inv
        if v:
            e = [0] * f.space.dim
            e[i] = 1
            lin.coeffs[tuple(e)] = v
    yv = rhs.linear_coefficient(var) * inv
    if yv:
        e = [0] * f.space.dim
        e[var] = 1
        lin.coeffs[tuple(e)] = lin.coeffs.get(tuple(e), Fraction(0)) + yv
        if not lin.coeffs[tuple(e)]:
            del lin.coeffs[tuple(e)]
    y = lin
    for _ in range(order + 1):
        err = substitute_variable(f, var, y) - rhs
        if err.is_zero():
            break
        y = y - err.scale(inv)
    return y


def ideal_membership(f, ideal):
    """True iff every monomial of f is divisible by some ideal generator."""
    if f.space != ideal.space:
        raise SpaceMismatch("ideal_membership: jet and ideal on different spaces")
    gens = ideal.generators
    return all(any(e[g] for g in gens) for e in f.coeffs)


def coefficient_expansion(f, var):
    """Coefficients c_k with f = sum c_k * var^k; c_k certified to order - k."""
    out = [dict() for _ in range(f.order + 1)]
    for e, c in f.coeffs.items():
        k = e[var]
        key = e[:var] + (0,) + e[var + 1:]
        out[k][key] = c
    jets = []
    for k, coeffs in enumerate(out):
        j = Jet(f.space, max(f.order - k, 0))
        j.coeffs = {e: c for e, c in coeffs.items() if sum(e) <= j.order}
        jets.append(j)
    return jets


def jet_from_polynomial(space, order, terms):
    """Build a jet from {name_powers: coeff} with name_powers like 'p1*q1^2'."""
    coeffs = {}
    for mono, c in terms.items():
        e = [0] * space.dim
        if mono:
            for factor in mono.split("*"):
                if "^" in factor:
                    name, k = factor.split("^")
                    e[space.index(name)] += int(k)
                else:
                    e[space.index(factor)] += 1
        key = tuple(e)
        coeffs[key] = coeffs.get(key, Fraction(0)) + Fraction(c)
    return Jet(space, order, coeffs)


def equal_to_order(a, b, k):
    """True iff a and b agree on all monomials of degree <= k."""
    return (a - b).truncate(min(k, a.order, b.order)).is_zero()


def flow_time_factor(k):
    return Fraction(1, factorial(k))
