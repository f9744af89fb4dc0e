from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from icbrackets.series import SeriesPoly, compose
from icbrackets.symexpr import ONE, ZERO, Expr, Symbol, differentiate, exp, substitute

a, b = Symbol("a", False, 0), Symbol("b", False, 1)
x = Symbol("x", False, 2)
A, B, X = a.as_expr(), b.as_expr(), x.as_expr()


def test_slots_beyond_order_are_undefined():
    s = SeriesPoly([A, B])
    with pytest.raises(IndexError):
        s[2]


def test_product_truncates_to_smaller_order():
    s = SeriesPoly([A, B, ONE]) * SeriesPoly([ONE, ONE])
    assert s.order == 1


def test_leibniz_product():
    # (a + b t)^2 = a^2 + 2ab t + b^2 t^2 -> derivative coefficients a^2, 2ab, 2b^2
    s = SeriesPoly([A, B, ZERO]) ** 2
    assert list(s.coeffs) == [A * A, 2 * A * B, 2 * B * B]


def test_exp_series_matches_derivatives():
    # exp(-(a + b t)): n-th derivative at 0 is (-b)^n exp(-a)
    s = SeriesPoly([A, B, ZERO, ZERO]).__neg__().exp()
    for n in range(4):
        assert s[n] == (-B) ** n * exp(-A)


def test_compose_of_substitution_example():
    # x^2 z with x -> a + b t, z constant
    z = Symbol("z", False, 3)
    s = compose(X * X * z.as_expr(), {x: SeriesPoly([A, B, ZERO])})
    assert list(s.coeffs) == [A * A * z.as_expr(), 2 * A * B * z.as_expr(), 2 * B * B * z.as_expr()]


coeff = st.sampled_from([A, B, ONE, Expr(2), A * B, Expr(Fraction(-1, 2))])
poly = st.lists(st.tuples(st.integers(0, 3), coeff), min_size=1, max_size=4).map(
    lambda terms: sum((c * X ** k for k, c in terms), ZERO)
)


@settings(max_examples=40, deadline=None)
@given(poly, st.lists(coeff, min_size=4, max_size=4))
def test_compose_agrees_with_taylor_formula(f, cs):
    """Series of f(x(t)) equals derivatives of f(x(t)) computed by the chain rule."""
    xs = SeriesPoly(cs)
    got = compose(f, {x: xs}, order=3)
    # independent route: x(t) as a polynomial in a time symbol, differentiate n times
    t = Symbol("t", False, 9)
    fact = [1, 1, 2, 6]
    xt = sum((c * t.as_expr() ** n * Fraction(1, fact[n]) for n, c in enumerate(cs)), ZERO)
    ft = substitute(f, {x: xt})
    for n in range(4):
        assert substitute(ft, {t: ZERO}) == got[n]
        ft = differentiate(ft, t)
