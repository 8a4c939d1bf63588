import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planar_riccati._report import HypothesisError
from planar_riccati.integrate import SystemSpec, solve_prufer, solve_system
from planar_riccati.nonconj import case_of, case_report, nonconjugation_check, to_polar

HARMONIC = SystemSpec.of(a12="1", a21="-1")
COSH = SystemSpec.of(a12="1", a21="1")


def test_polar_harmonic():
    pt = to_polar(HARMONIC, solve_system(HARMONIC, (0.0, 1.0), (0, 20)))
    t = np.linspace(0, 20, 41)
    assert np.allclose(pt.theta(t), math.pi / 2 - t, atol=1e-8)
    assert pt.checks["reconstruction"] < 1e-7


def test_polar_cosh():
    # e^t (1, 1) keeps a fixed direction
    pt = to_polar(COSH, solve_system(COSH, (1.0, 1.0), (0, 10)))
    assert np.allclose(pt.theta(np.linspace(0, 10, 11)), math.pi / 4, atol=1e-9)
    other = to_polar(COSH, solve_system(COSH, (1.0, 0.0), (0, 10)))
    th = other.theta(np.linspace(0, 10, 101))
    assert np.all(np.diff(th) > 0) and abs(th[-1] - math.pi / 4) < 1e-6


def test_prufer_matches_polar_zero_angles():
    sys = SystemSpec.of(a11="0.3", a12="1", a21="-1 - 0.5*sin(t)", a22="-0.2")
    pr = solve_prufer(sys, 0.3, (0, 30))
    tr = solve_system(sys, (math.cos(0.3), math.sin(0.3)), (0, 30))
    t = np.linspace(0, 30, 301)
    # the angle of (phi, psi) is unchanged by the common positive weight
    ang = np.unwrap(np.arctan2(tr(t, "psi"), tr(t, "phi")))
    assert np.max(np.abs(pr(t, "theta") - ang)) < 1e-7


def test_case_split():
    assert case_of(COSH, 40)[0] == "I"
    assert case_of(HARMONIC, 40)[0] == "II"
    with pytest.raises(HypothesisError):
        nonconjugation_check(SystemSpec.of(a12="cos(t)", a21="1"), 40)


def test_nonconj_cosh_and_sin_cos():
    v = nonconjugation_check(COSH, 40, 32)
    assert v.verdict == "Satisfied" and v.max_items <= 1 and len(v.counts) == 32
    assert nonconjugation_check(SystemSpec.of("0", "sin(t)^2", "cos(t)^2", "0"), 100).verdict == "Satisfied"


@settings(max_examples=10)
@given(st.floats(0, 1), st.floats(0.1, 1), st.floats(0, 1), st.floats(0.1, 1), st.floats(-0.5, 0.5))
def test_nonconj_property(a, b, c, d, e):
    sys = SystemSpec.of(f"{e!r}", f"{a!r} + {b!r}*exp(-t/5)", f"{c!r} + {d!r}*sin(t)^2", f"-{e!r}*cos(t)")
    assert nonconjugation_check(sys, 60, 8).max_items <= 1


def test_case_reports():
    r = case_report(COSH, 40)
    assert r.verdict == "Pass" and r["clause"] == "3.8.A2"
    sols = r["solutions"]
    assert sols["phi_min"]["phi_t0"] > 0 and sols["phi_min"]["psi_t0"] < 0
    r2 = case_report(SystemSpec.of("0", "exp(-t)", "-exp(-t)", "0"), 40)
    assert r2.verdict == "Pass" and r2["clause"] == "3.11"
    r3 = case_report(HARMONIC, 40)
    assert r3.verdict != "Pass" and "leighton" in r3.details
