import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planar_riccati.integrate import RiccatiSpec, solve_riccati
from planar_riccati.riccati import (NoRegularSolutionError, aitken_limit, classify_solution_role,
                                    comparison_check, extremal_from_normal, extremal_log_integral_check,
                                    SignPattern, find_bracket, reciprocal_spec, reg_boundary, sign_pattern_check,
                                    sign_pattern_observe, sign_pattern_predict)

TANH = RiccatiSpec.of(a="1", c="-1")
FREE = RiccatiSpec.of(a="1")
TAN = RiccatiSpec.of(a="1", c="1")


def _residual(spec, traj, t):
    return np.abs(spec.residual(t, traj(t, 0), traj.derivative(t)[:, 0]))


def test_reciprocal_maps_solutions():
    spec = RiccatiSpec.of(a="1", b="0.3*sin(t)", c="-1 - 0.2*cos(t)")
    x = solve_riccati(spec, 2.0, (0, 5), tol=1e-11)
    u = solve_riccati(reciprocal_spec(spec), 0.5, (0, 5), tol=1e-11)
    t = np.linspace(0, 5, 51)
    assert np.max(np.abs(u(t, 0) * x(t, 0) - 1)) < 1e-8


def test_reciprocal_of_trivial_spec():
    u = solve_riccati(reciprocal_spec(RiccatiSpec.of()), 0.5, (0, 3))
    assert np.allclose(u(np.linspace(0, 3, 7), 0), 0.5)


def test_extremal_from_constant_seed():
    x0 = solve_riccati(TANH, 1.0, (0, 40))
    xs = extremal_from_normal(TANH, x0)
    assert xs.meta["nu"][0] == pytest.approx(0.5, abs=1e-6)
    t = np.linspace(0, xs.meta["t_reliable"], 101)
    assert np.max(np.abs(xs(t, 0) + 1)) < 1e-6


def test_extremal_from_hyperbola():
    x0 = solve_riccati(FREE, 2.0, (0, 40))
    xs = extremal_from_normal(FREE, x0)
    # the tail of nu decays only algebraically here, so the error is larger
    assert np.max(np.abs(xs(np.array([0.0, 10.0, 30.0]), 0))) < 1e-4


def test_reg_boundary():
    assert abs(reg_boundary(TANH, 0, (-2, 0), 50) + 1) < 1e-6
    assert abs(reg_boundary(FREE, 0, (-1, 1), 50, extrapolate=True)) < 1e-6
    # without extrapolation the end sits at -1/T
    assert reg_boundary(FREE, 0, (-1, 1), 50) == pytest.approx(-0.02, abs=1e-6)


def test_no_regular_solution():
    with pytest.raises(NoRegularSolutionError) as err:
        find_bracket(TAN, 0, 50, limit=1e4, both_directions=True)
    assert err.value.probes and not any(ok for _, ok in err.value.probes)


@pytest.mark.parametrize("x, role", [(0.0, "Normal"), (-1.0, "Extremal"), (-1.5, "NotRegular")])
def test_roles(x, role):
    r = classify_solution_role(TANH, x, 0, horizon=30)
    assert r.role == role
    if role == "NotRegular":
        assert r.blowup is not None


def test_sign_patterns():
    p = sign_pattern_predict(TANH, -0.5, 0, 30)
    assert p.signs == ("-", "0", "+")
    rec = sign_pattern_check(p, solve_riccati(TANH, -0.5, (0, 30)))
    assert rec.verdict == "Pass"
    zero = [seg for seg in rec["segments"] if seg[2] == "0"][0]
    assert zero[0] == pytest.approx(math.atanh(0.5), abs=1e-6)
    assert sign_pattern_predict(TANH, 0.5, 0, 30).signs == ("+",)
    assert sign_pattern_predict(TAN, 1.0, 0, 30).clause == "Cor2.2"


def test_pattern_check_rejects_wrong_sign():
    sin_traj = solve_riccati(RiccatiSpec.of(a="0", c="-cos(t)"), math.sin(0.1), (0.1, 10))
    rec = sign_pattern_check(SignPattern(("+",)), sin_traj)
    assert rec.verdict == "Fail"
    const = solve_riccati(TANH, -1.0, (0, 10))
    assert sign_pattern_observe(const).signs == ("-",)
    assert sign_pattern_check(SignPattern(("-",)), const).verdict == "Pass"


def test_comparison_identical_and_shifted():
    x1 = solve_riccati(FREE, 0.0, (0, 10))
    assert comparison_check(FREE, TANH, x1, None, 0.0).verdict == "Pass"
    x = solve_riccati(TANH, 0.0, (0, 10))
    assert comparison_check(TANH, TANH, x, None, 0.0).verdict == "Pass"


@given(st.floats(0, 1), st.floats(0.2, 2), st.floats(0, 2))
def test_comparison_random_pairs(shift, w, x_init):
    spec = RiccatiSpec.of(a="1", b="0.2*sin(t)", c=f"-1 - 0.3*cos({w!r}*t)")
    spec1 = RiccatiSpec.of(a="1", b="0.2*sin(t)", c=f"-1 - 0.3*cos({w!r}*t) + {shift!r}")
    x1 = solve_riccati(spec1, x_init, (0, 10))
    assert comparison_check(spec1, spec, x1, None, x_init).verdict == "Pass"


def test_extremal_log_integral():
    x0 = solve_riccati(TANH, 1.0 / math.tanh(1.0), (0, 30))
    rec = extremal_log_integral_check(TANH, x0, 5.0)
    assert rec.verdict == "Pass"


def test_aitken_limit_cases():
    assert aitken_limit(-0.04, -0.02, -0.01)[0] == pytest.approx(0.0, abs=1e-15)
    assert aitken_limit(1.0, 1.0, 1.0)[0] == 1.0
    assert aitken_limit(0.0, 1.0, 3.0)[0] == 3.0


@given(st.floats(0.1, 3), st.floats(-0.9, 0.9))
def test_tanh_family_residual(k, frac):
    x_init = frac * k
    spec = RiccatiSpec.of(a="1", c=f"-{k * k!r}")
    x = solve_riccati(spec, x_init, (0, 10), tol=1e-10)
    t = np.linspace(0, 10, 41)
    exact = k * np.tanh(k * t + math.atanh(frac))
    assert np.max(_residual(spec, x, t)) < 1e-6
    assert np.max(np.abs(x(t, 0) - exact)) < 1e-7
