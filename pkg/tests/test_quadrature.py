import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planar_riccati.quadrature import (classify_improper, cumulative, transform_Iminus, transform_Iplus,
                                       transform_J, transform_mu_nu, windowed_bounded)


def test_J_examples():
    assert transform_J("1", "0", 0, 7) == 1.0
    assert transform_J("1", "1", 0, 1) == pytest.approx(math.e, rel=1e-12)
    assert transform_J("sin(t)", "cos(t)", 0, math.pi) == pytest.approx(1.0, abs=1e-12)


def test_Iplus_examples():
    assert transform_Iplus("1", "0", 0, 3) == pytest.approx(3.0)
    v = transform_Iplus("1", "2", 0, math.inf)
    assert v.converged and v.value == pytest.approx(0.5, abs=1e-6)
    assert transform_Iplus("1", "-1", 0, math.inf).diverges_plus


def test_Iminus_examples():
    assert transform_Iminus("0", "1", 0, 2.5) == pytest.approx(2.5)
    assert transform_Iminus("1", "1", 0, 1) == pytest.approx(1 - math.exp(-1), rel=1e-10)
    assert transform_Iminus("1", "0", 0, 1) == 0.0


def test_mu_nu_examples():
    v = transform_mu_nu("1", "0", "1", 0, math.inf)
    assert v.converged and v.value == pytest.approx(0.5, abs=1e-6)
    assert transform_mu_nu("1", "0", "0", 0, math.inf).diverges_plus
    assert transform_mu_nu("1", "0", "1", 0, 1) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-10)


def test_improper_verdicts():
    v = classify_improper("1/t^2", 1)
    assert v.converged and abs(v.value - 1) < 1e-6
    assert classify_improper("1/t", 1).diverges_plus
    assert classify_improper("-exp(t/10)", 0).diverges_minus
    assert classify_improper("sin(t)", 0).kind == "Undetermined"


def test_windowed_bounded_rule():
    t = np.linspace(0, 100, 5001)
    assert windowed_bounded(t, np.sin(t))["bounded"]
    assert not windowed_bounded(t, t * np.sin(t))["bounded"]


@given(st.floats(0.1, 3), st.floats(0, 5))
def test_cumulative_matches_antiderivative(w, T):
    cum = cumulative(f"cos({w!r}*t)", 0.0, T + 1.0)
    ts = np.linspace(0, T + 1.0, 7)
    assert np.allclose(cum(ts), np.sin(w * ts) / w, atol=1e-9)


@given(st.floats(0.2, 3), st.floats(0.5, 6))
def test_Iplus_constant_weight_closed_form(k, t):
    # int_0^t exp(-k s) ds
    assert transform_Iplus("1", f"{k!r}", 0, t) == pytest.approx((1 - math.exp(-k * t)) / k, rel=1e-9)


@given(st.floats(-2, 2), st.floats(0.5, 5))
def test_J_is_multiplicative(c, t):
    a = transform_J("1", f"{c!r} + sin(t)", 0, t / 2)
    b = transform_J("1", f"{c!r} + sin(t)", t / 2, t)
    assert a * b == pytest.approx(transform_J("1", f"{c!r} + sin(t)", 0, t), rel=1e-10)
