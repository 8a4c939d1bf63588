import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planar_riccati.integrate import (RiccatiSpec, SystemSpec, lift_riccati, riccati_residual, solve_riccati,
                                      solve_riccati_complex, solve_system, system_residual, to_csv, zero_sets)

HARMONIC = SystemSpec.of(a12="1", a21="-1")
T = np.linspace(0, 20, 201)


def test_harmonic_rotation():
    tr = solve_system(HARMONIC, (0.0, 1.0), (0, 20))
    assert np.max(np.abs(tr(T, "phi") - np.sin(T))) < 1e-8
    assert np.max(np.abs(tr(T, "psi") - np.cos(T))) < 1e-8
    assert np.max(np.abs(system_residual(HARMONIC, tr))) < 1e-7


def test_cos_system_closed_form():
    sys = SystemSpec.of(a12="cos(t)", a21="-cos(t)")
    tr = solve_system(sys, (0.0, 1.0), (0, 20))
    assert np.max(np.abs(tr(T, "phi") - np.sin(np.sin(T)))) < 1e-8
    assert np.max(np.abs(tr(T, "psi") - np.cos(np.sin(T)))) < 1e-8


def test_exp_sin_branch():
    sys = SystemSpec.of(a12="1", a21="cos(t)^2 - sin(t)")
    tr = solve_system(sys, (1.0, 1.0), (0, 20))
    assert np.max(np.abs(tr(T, "phi") - np.exp(np.sin(T)))) < 1e-7


def test_blowups():
    r = solve_riccati(RiccatiSpec.of(a="1"), -1.0, (0, 3))
    assert r.blowup.direction == "MinusInfinity" and abs(r.blowup.t_escape - 1.0) < 1e-4
    r = solve_riccati(RiccatiSpec.of(a="1", c="1"), 0.0, (0, 3))
    assert abs(r.blowup.t_escape - math.pi / 2) < 1e-4


def test_tanh():
    r = solve_riccati(RiccatiSpec.of(a="1", c="-1"), 0.0, (0, 10))
    assert r.blowup is None
    t = np.linspace(0, 10, 101)
    assert np.max(np.abs(r(t, "x") - np.tanh(t))) < 1e-8


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_complex_solution_stationary(lam):
    sys = SystemSpec.of(a12=f"cos({lam}*t)", a21=f"-cos({lam}*t)")
    z = solve_riccati_complex(sys, (0, 30), tol=1e-11)
    t = np.linspace(0, 30, 61)
    v = z(t)
    assert np.max(np.abs(v[:, 0])) < 1e-9 and np.max(np.abs(v[:, 1])) < 1e-9
    assert np.max(np.abs(v[:, 2] - np.sin(lam * t) / lam)) < 1e-8


def test_lift_cosh_minimal():
    sys = SystemSpec.of(a12="1", a21="1")
    pair = lift_riccati(sys, solve_riccati(sys.riccati(), -1.0, (0, 5)), 1.0)
    t = np.linspace(0, 5, 11)
    assert np.allclose(pair(t, "phi"), np.exp(-t), atol=1e-9)
    assert np.allclose(pair(t, "psi"), -np.exp(-t), atol=1e-9)


def test_lift_decoupled():
    sys = SystemSpec.of(a11="sin(t)")
    pair = lift_riccati(sys, solve_riccati(sys.riccati(), 0.0, (0, 5)), 1.0)
    assert pair(5.0, "phi") == pytest.approx(math.exp(1 - math.cos(5.0)), rel=1e-9)


def test_zero_sets():
    tr = solve_system(HARMONIC, (0.0, 1.0), (0, 10))
    starts = [z.start for z in zero_sets(tr, "phi")]
    assert np.allclose(starts, [0, math.pi, 2 * math.pi, 3 * math.pi], atol=1e-9)
    const = solve_system(SystemSpec.of(), (1.0, 0.0), (0, 10))
    assert zero_sets(const, "phi") == []


def test_to_csv_header(tmp_path):
    tr = solve_system(HARMONIC, (1.0, 0.0), (0, 2))
    p = tmp_path / "h.csv"
    to_csv(tr, p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["t", "phi", "psi"]
    assert float(rows[-1][0]) == pytest.approx(2.0)


def _rand_sys(a, b, c, d, w):
    return SystemSpec.of(f"{a!r}*sin({w!r}*t)", f"1 + {b!r}*cos(t)", f"{c!r} - 1", f"{d!r}*cos({w!r}*t)")


small = st.floats(-0.4, 0.4)


@given(small, small, small, small, st.floats(0.2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_superposition(a, b, c, d, w, p, q):
    sys = _rand_sys(a, b, c, d, w)
    e1 = solve_system(sys, (1.0, 0.0), (0, 15), tol=1e-11)
    e2 = solve_system(sys, (0.0, 1.0), (0, 15), tol=1e-11)
    mix = solve_system(sys, (p, q), (0, 15), tol=1e-11)
    t = np.linspace(0, 15, 31)
    scale = 1 + np.abs(e1(t)).max() + np.abs(e2(t)).max()
    assert np.max(np.abs(mix(t) - p * e1(t) - q * e2(t))) < 1e-7 * scale * (1 + abs(p) + abs(q))


@given(small, small, small, small, st.floats(0.2, 2))
def test_complex_chart_stays_in_upper_half_plane(a, b, c, d, w):
    z = solve_riccati_complex(_rand_sys(a, b, c, d, w), (0, 100))
    t = z.refined_times(2)
    assert np.min(np.exp(z(t, "lny"))) > 1e-12


@given(small, small, small, small, st.floats(0.2, 2))
def test_ratio_solves_riccati(a, b, c, d, w):
    sys = _rand_sys(a, b, c, d, w)
    tr = solve_system(sys, (1.0, 0.3), (0, 30), tol=1e-10)
    assert np.max(np.abs(riccati_residual(sys, tr))) < 1e-6
