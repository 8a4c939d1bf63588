import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planar_riccati._report import HypothesisError
from planar_riccati.acceptance import mathieu_monodromy_trace
from planar_riccati.integrate import SystemSpec, solve_system
from planar_riccati.oscillation import (classify_oscillation, fundamental_frame, leighton_test,
                                        principles_check, ring_radii, second_order_system)

HARMONIC = SystemSpec.of(a12="1", a21="-1")


def test_harmonic_frame():
    fr = fundamental_frame(HARMONIC, (0, 20))
    t = np.linspace(0, 20, 81)
    assert np.allclose(fr.y0(t), 1.0, atol=1e-12)
    assert np.allclose(fr.theta(t), t, atol=1e-8)
    pp, _ = fr.plus(t)
    pm, _ = fr.minus(t)
    assert np.allclose(pp, np.cos(t), atol=1e-8)
    assert np.allclose(pm, np.sin(t), atol=1e-8)


def test_cos_frame_phase():
    fr = fundamental_frame(SystemSpec.of(a12="cos(t)", a21="-cos(t)"), (0, 20))
    t = np.linspace(0, 20, 81)
    assert np.allclose(fr.y0(t), 1.0, atol=1e-10)
    assert np.allclose(fr.theta(t), np.sin(t), atol=1e-8)


def _rand(a, b, c, d, w):
    return SystemSpec.of(f"{a!r}*sin({w!r}*t)", f"1 + {b!r}*cos(t)", f"-1 + {c!r}*sin(t)", f"{d!r}*cos(t)")


small = st.floats(-0.3, 0.3)


@given(small, small, small, small, st.floats(0.2, 2))
def test_frame_identities_random(a, b, c, d, w):
    fr = fundamental_frame(_rand(a, b, c, d, w), (0, 50))
    assert max(fr.checks["identities"].values()) < 1e-6
    assert fr.checks["liouville"] < 1e-7


@given(st.floats(0.0, math.pi), st.floats(0.5, 2.0))
def test_family_member_solves_system(nu, mu):
    sys = SystemSpec.of(a11="0.1*sin(t)", a12="1", a21="-1 - 0.2*cos(t)")
    fr = fundamental_frame(sys, (0, 20))
    t = np.linspace(0, 20, 41)
    phi, psi = fr.family(nu, t, mu)
    ref = solve_system(sys, (phi[0], psi[0]), (0, 20), tol=1e-11)
    assert np.max(np.abs(ref(t, "phi") - phi)) < 1e-6 * (1 + np.max(np.abs(phi)))


@pytest.mark.parametrize("sys, want", [
    (HARMONIC, "Oscillatory"),
    (SystemSpec.of(a12="1", a21="cos(t)^2 - sin(t)"), "HalfOscillatory"),
    (SystemSpec.of("3*cos(t)", "-2*cos(t)", "4*cos(t)", "-3*cos(t)"), "Singular"),
    (SystemSpec.of(a12="cos(2*t)", a21="-cos(2*t)"), "WeakNonOscillatory"),
    (SystemSpec.of(a12="1", a21="1"), "NonOscillatory"),
])
def test_classes(sys, want):
    assert classify_oscillation(sys, 200.0).cls == want


def test_leighton():
    assert leighton_test(HARMONIC).verdict == "Oscillatory"
    assert leighton_test(SystemSpec.of(a12="1", a21="-1/t", t0=1)).verdict == "Oscillatory"
    assert leighton_test(SystemSpec.of(a12="1", a21="-1/(4*t^2)", t0=1)).verdict == "Inconclusive"


def test_second_order_reduction():
    sys = second_order_system("4", 0.0, p="1", q="0")
    tr = solve_system(sys, (0.0, 2.0), (0, 5))
    t = np.linspace(0, 5, 21)
    assert np.allclose(tr(t, "phi"), np.sin(2 * t), atol=1e-8)
    damped = second_order_system("1", 0.0, p="1", q="0.2")
    assert damped.a22(1.0) == pytest.approx(-0.2)


def test_harmonic_principles():
    rec = principles_check("1", 0.0, horizon=200.0)
    assert rec["principles"]["A"] == "Consistent"
    assert rec["principles"]["C"] == "Consistent"


def test_airy_principles():
    rec = principles_check("t", 1.0, horizon=300.0)
    assert rec["principles"]["A"] == "Consistent"
    assert rec["principles"]["B"] == "Consistent"
    assert min(s["zeros"] for s in rec["solutions"]) >= 50


def test_mathieu_stable_and_unstable():
    assert abs(mathieu_monodromy_trace(0.6, 0.2)) < 2
    assert principles_check("0.6 + 0.2*cos(t)", 0.0, 300.0)["principles"]["C"] == "Consistent"
    # inside the first resonance tongue solutions grow
    assert abs(mathieu_monodromy_trace(0.25, 0.3)) > 2
    assert principles_check("0.25 + 0.3*cos(t)", 0.0, 300.0)["principles"]["C"] == "NotApplicable"


@pytest.mark.parametrize("init, radius", [((1.0, 0.0), 1.0), ((2.0, 1.0), math.sqrt(5.0))])
def test_ring_radii_harmonic(init, radius):
    rr = ring_radii(HARMONIC, solve_system(HARMONIC, init, (0, 50), tol=1e-11))
    assert rr["r"] == pytest.approx(radius, rel=1e-8) and rr["R"] == pytest.approx(radius, rel=1e-8)


def test_ring_radii_rejects_growth():
    sys = SystemSpec.of(a12="1", a21="1")
    with pytest.raises(HypothesisError):
        ring_radii(sys, solve_system(sys, (1.0, 0.0), (0, 20)))
