from fractions import Fraction

import pytest
import sympy
from hypothesis import assume, given, strategies as st

from vacua_lab.series import DomainError, FormalSeries, formal_exp, formal_log, schwarzian, series
from oracles import sympy_flow, sympy_schwarzian

ORDER = 7
rat = st.fractions(min_value=-3, max_value=3, max_denominator=4)


def unipotent(draw_coeffs):
    return FormalSeries({1: Fraction(1), **{k + 2: c for k, c in enumerate(draw_coeffs)}}, ORDER)


coeff_lists = st.lists(rat, min_size=1, max_size=4)


def test_compose_and_inverse():
    h = series([0, 1, 2, -1], order=ORDER)
    hinv = h.comp_inverse()
    assert h.compose(hinv).truncate(ORDER) == FormalSeries.identity(ORDER)
    assert hinv.compose(h).truncate(ORDER) == FormalSeries.identity(ORDER)


def test_residue_and_derivative():
    f = FormalSeries({-1: Fraction(5), 0: Fraction(1), 2: Fraction(3)}, 4)
    assert f.residue() == 5
    assert f.derivative().coeffs == {-2: -5, 1: 6}


def test_exp_of_xi_squared_is_geometric():
    l = FormalSeries({2: Fraction(1)}, ORDER)
    assert formal_exp(l, ORDER) == FormalSeries({k: Fraction(1) for k in range(1, ORDER)}, ORDER)


def test_exp_of_linear_field_keeps_the_scale_exact():
    l = FormalSeries({1: sympy.log(3)}, ORDER)
    h = formal_exp(l, ORDER)
    assert h.coeffs == {1: Fraction(3)}


def test_log_of_identity_is_zero():
    assert not formal_log(FormalSeries.identity(ORDER), ORDER).coeffs


def test_log_domain_errors():
    with pytest.raises(DomainError):
        formal_log(FormalSeries({1: Fraction(-2)}, ORDER), ORDER)
    with pytest.raises(DomainError):
        formal_log(FormalSeries({2: Fraction(1)}, ORDER), ORDER)
    with pytest.raises(DomainError):
        formal_exp(FormalSeries({0: Fraction(1)}, ORDER), ORDER)


@given(coeff_lists)
def test_exp_inverts_log_unipotent(cs):
    h = unipotent(cs)
    assert formal_exp(formal_log(h, ORDER), ORDER) == h


@given(st.lists(rat, min_size=1, max_size=3))
def test_log_inverts_exp_for_lowering_fields(cs):
    l = FormalSeries({k + 2: c for k, c in enumerate(cs)}, ORDER)
    assert formal_log(formal_exp(l, ORDER), ORDER) == l


@given(st.lists(rat, min_size=1, max_size=3))
def test_exp_matches_sympy_flow(cs):
    field = {k + 2: c for k, c in enumerate(cs) if c}
    assume(field)
    got = formal_exp(FormalSeries(field, ORDER), ORDER)
    assert dict(got.coeffs) == sympy_flow(field, ORDER)


@pytest.mark.parametrize("a", [Fraction(2), Fraction(1, 3)])
def test_log_exp_with_scaling(a):
    h = FormalSeries({1: a, 2: Fraction(1), 3: Fraction(-1, 2)}, 5)
    assert formal_exp(formal_log(h, 5), 5) == h


def test_schwarzian_examples():
    mobius = FormalSeries({k: Fraction(1) for k in range(1, 12)}, 12)  # xi / (1 - xi)
    assert not schwarzian(mobius, 8).coeffs
    assert not schwarzian(FormalSeries({1: Fraction(5)}, 10), 8).coeffs
    a = Fraction(3, 2)
    assert schwarzian(FormalSeries({1: Fraction(1), 2: a}, 10), 6)[0] == -6 * a * a


@given(rat, rat, rat.filter(lambda x: x != 0))
def test_schwarzian_matches_sympy(b, c, a):
    coeffs = {1: abs(a), 2: b, 3: c}
    got = schwarzian(FormalSeries(coeffs, 10), 4)
    assert dict(got.coeffs) == sympy_schwarzian({k: v for k, v in coeffs.items() if v}, 4)


@given(rat, rat)
def test_schwarzian_vanishes_on_mobius(b, c):
    # (a xi) / (1 + c xi) is Mobius, expand to order 10
    a = Fraction(1) + b * b
    h = FormalSeries({k: a * (-c) ** (k - 1) for k in range(1, 12)}, 12)
    assert not schwarzian(h, 8).coeffs
