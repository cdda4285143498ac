"""Moduli dimensions: the two exact methods agree with each other and with
the frozen hand counts; the closed-form series matches only for n = 1."""

from jetnf.moduli import (
    group_jet_dimension,
    jet_space_dimension,
    normal_form_coefficient_count,
    orbit_dimension_rank,
    paper_series_increments,
    poincare_series,
)


def test_coefficient_count_frozen_values():
    # q1, q1 p1, q1^2 at n=1, k=2
    assert normal_form_coefficient_count(1, 2) == 3
    # 1 + 2 + 3 generators at degree 1 for n=2
    assert normal_form_coefficient_count(2, 1) == 6
    # 5 + 9 + 12 across the three ideals
    assert normal_form_coefficient_count(2, 2) == 26


def test_rank_method_small():
    assert orbit_dimension_rank(1, 1) == 1
    assert orbit_dimension_rank(2, 1) == 6


def test_rank_equals_count():
    for n in (1, 2):
        for k in (1, 2, 3):
            assert orbit_dimension_rank(n, k) == normal_form_coefficient_count(n, k)


def test_action_is_free_at_generic_jet():
    # rank equals the full group dimension for the tested sizes
    for n in (1, 2):
        for k in (1, 2):
            dim = jet_space_dimension(n, k)
            assert dim - orbit_dimension_rank(n, k) == group_jet_dimension(n, k)


def test_first_moduli_dimension_closed_form():
    for n in (1, 2, 3, 4):
        assert normal_form_coefficient_count(n, 1) == n * (2 * n - 1)
    for n in (1, 2, 3, 4):
        assert orbit_dimension_rank(n, 1) == n * (2 * n - 1)


def test_series_n1_matches_closed_form():
    series = poincare_series(1, 6, rank_check_max=2)
    # t/(1-t)^2 integrates to the triangular numbers
    assert series.dims == [0, 1, 3, 6, 10, 15, 21]
    assert all(series.agreement)
    assert not series.warnings


def test_series_n2_flags_disagreement():
    series = poincare_series(2, 2, rank_check_max=2)
    assert series.dims == [0, 6, 26]
    assert series.paper_dims == [0, 6, 30]
    assert series.agreement == [True, True, False]
    assert series.warnings
    assert series.rank_checked[2] == 26


def test_increment_shift_consistency():
    # graded pieces of the moduli match the symplectic-structure pieces
    # shifted by one degree: increments[k+1] counts degree-(k+1) monomials
    # across the ideals, which is the degree-k piece of the form data
    series = poincare_series(1, 5, rank_check_max=1)
    assert series.increments[1] == 1
    inc = paper_series_increments(1, 5)
    assert series.increments == inc  # n = 1: everything agrees
