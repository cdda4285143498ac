"""Lossless JSON-friendly encoding of jets, forms, and maps.

Coefficients travel as decimal-string numerator/denominator pairs (JSON
numbers are never used for coefficients); jets are lists of
(numerator, denominator, exponent-vector) triples in graded-lex order, forms
are lists of (index-tuple, jet) pairs sorted lexicographically.
"""

from fractions import Fraction

from .errors import ParseError
from .forms import FormJet
from .jets import CONSTRAINED, QUASI, SYMPLECTIC, Jet, MapJet, VariableSpace

_KINDS = {SYMPLECTIC, QUASI, CONSTRAINED}


def space_to_json(space):
    return {"kind": space.kind, "n": space.n}


def space_from_json(data):
    if not isinstance(data, dict):
        raise ParseError("space must be an object", field="space")
    kind = data.get("kind")
    if kind not in _KINDS:
        raise ParseError(f"unknown space kind {kind!r}", field="space.kind")
    n = data.get("n")
    if not isinstance(n, int) or n < 0:
        raise ParseError("space.n must be a nonnegative integer", field="space.n")
    return VariableSpace(kind, n)


def jet_to_json(jet):
    return [[str(c.numerator), str(c.denominator), list(e)]
            for e, c in jet.sorted_terms()]


def jet_from_json(data, space, order, field="jet"):
    if not isinstance(data, list):
        raise ParseError(f"{field}: expected a list of coefficient triples",
                         field=field)
    coeffs = {}
    for i, triple in enumerate(data):
        if (not isinstance(triple, (list, tuple)) or len(triple) != 3):
            raise ParseError(f"{field}[{i}]: expected [num, den, exponents]",
                             field=field)
        num, den, exps = triple
        try:
            value = Fraction(int(str(num)), int(str(den)))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{field}[{i}]: bad coefficient: {exc}",
                             field=field) from exc
        if (not isinstance(exps, list) or len(exps) != space.dim
                or not all(isinstance(k, int) and k >= 0 for k in exps)):
            raise ParseError(
                f"{field}[{i}]: exponent vector must have {space.dim} "
                "nonnegative integers", field=field)
        if sum(exps) > order:
            raise ParseError(
                f"{field}[{i}]: monomial degree {sum(exps)} exceeds order "
                f"{order}", field=field)
        key = tuple(exps)
        coeffs[key] = coeffs.get(key, Fraction(0)) + value
    return Jet(space, order, coeffs)


def form_to_json(form):
    return {
        "degree": form.degree,
        "order": form.order,
        "coefficients": [[list(idx), jet_to_json(jet)]
                         for idx, jet in form.sorted_items()],
    }


def form_from_json(data, space, order, field="form"):
    if isinstance(data, dict):
        entries = data.get("coefficients")
        degree = data.get("degree", 2)
        order = data.get("order", order)
    else:
        entries = data
        degree = 2
    if not isinstance(entries, list):
        raise ParseError(f"{field}: expected a coefficient list", field=field)
    coeffs = {}
    for i, pair in enumerate(entries):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ParseError(f"{field}[{i}]: expected [indices, jet]", field=field)
        idx, jet_data = pair
        if (not isinstance(idx, list) or len(idx) != degree
                or not all(isinstance(k, int) and 0 <= k < space.dim for k in idx)):
            raise ParseError(f"{field}[{i}]: bad index tuple", field=field)
        jet = jet_from_json(jet_data, space, order, field=f"{field}[{i}]")
        coeffs[tuple(idx)] = jet
    return FormJet(space, degree, order, coeffs)


def map_to_json(m):
    return {"components": [jet_to_json(c) for c in m.components],
            "order": m.order}


def map_from_json(data, space, order, field="map"):
    if isinstance(data, dict):
        comps_data = data.get("components")
        order = data.get("order", order)
    else:
        comps_data = data
    if not isinstance(comps_data, list) or len(comps_data) != space.dim:
        raise ParseError(
            f"{field}: expected {space.dim} component jets", field=field)
    comps = [jet_from_json(c, space, order, field=f"{field}[{i}]")
             for i, c in enumerate(comps_data)]
    try:
        return MapJet(space, comps)
    except Exception as exc:
        raise ParseError(f"{field}: {exc}", field=field) from exc


def fraction_to_json(value):
    value = Fraction(value)
    return [str(value.numerator), str(value.denominator)]
