import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planar_riccati.coeffexpr import (ExprSyntaxError, SingularPointError, UnknownIdentifierError, as_expr,
                                      evaluate, parse, render, sign_certify)


def test_parse_shapes():
    assert render(parse("cos(t)")) == "cos(t)"
    assert render(parse("t^3*cos(t)")) == "t^3.0*cos(t)"


def test_unbalanced_paren_reports_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("sin(")
    assert err.value.offset == 4
    assert "offset 4" in str(err.value)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse("foo(t)")


@pytest.mark.parametrize("src, t, want", [("cos(t)", 0.0, 1.0), ("t^2", 3.0, 9.0), ("exp(-t)", 1.0, math.exp(-1)),
                                          ("-2^2", 0.0, -4.0), ("2^3^2", 0.0, 512.0)])
def test_evaluate(src, t, want):
    assert evaluate(src, t) == pytest.approx(want, rel=1e-15)


def test_singular_point():
    with pytest.raises(SingularPointError):
        evaluate("1/t", 0.0)


def test_sign_certificates():
    assert sign_certify("sin(t)^2", [0, 100]).verdict == "NonNegative"
    c = sign_certify("cos(t)", [0, 100])
    assert c.verdict == "Mixed"
    signs = {np.sign(v) for _, v in c.witnesses}
    assert signs == {1.0, -1.0}
    assert sign_certify("t^3*cos(t)", [1, 50]).verdict == "Mixed"


def test_vectorised_matches_scalar():
    e = as_expr("t*sin(t) + exp(-t/3)")
    t = np.linspace(0, 20, 101)
    assert np.allclose(e(t), [evaluate(e, x) for x in t], rtol=0, atol=1e-14)


coef = st.floats(-5, 5, allow_nan=False)


@given(coef, coef, st.floats(0, 10))
def test_render_round_trip(a, b, t):
    e = as_expr(f"{a!r}*sin(t) + {b!r}*t^2")
    again = parse(render(e))
    assert evaluate(again, t) == pytest.approx(evaluate(e, t), rel=1e-12, abs=1e-12)


@given(coef, coef, st.floats(0, 10))
def test_algebra_matches_numbers(a, b, t):
    x, y = as_expr(f"{a!r} + cos(t)"), as_expr(f"{b!r}*t")
    assert (x + y)(t) == pytest.approx(x(t) + y(t), abs=1e-12)
    assert (x * y)(t) == pytest.approx(x(t) * y(t), abs=1e-12)
    assert (-x)(t) == pytest.approx(-x(t), abs=1e-15)
