import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planar_riccati._report import HypothesisError
from planar_riccati.integrate import SystemSpec, solve_system
from planar_riccati.systemreg import classify_regularity, minimal_solution, ratio_box_check, ratio_limit

COSH = SystemSpec.of(a12="1", a21="1")
BOX = SystemSpec.of("t^2", "t*sin(t)", "t^3*cos(t)", "-t^2", t0=1.0)


@pytest.mark.parametrize("sys, want", [
    (COSH, "ExtremalSystem"),
    (SystemSpec.of(a12="1", a21="-1"), "NotRegular"),
    (SystemSpec.of(a12="1", a21="cos(t)^2 - sin(t)"), "ExtremalSystem"),
])
def test_regularity_classes(sys, want):
    assert classify_regularity(sys, 40.0).cls == want


def test_minimal_cosh_solution():
    pair, rec = minimal_solution(COSH, 40.0)
    assert rec.verdict == "Pass"
    t = np.linspace(0, 20, 41)
    assert np.max(np.abs(pair(t, "phi") - np.exp(-t))) < 1e-8
    assert np.max(np.abs(pair(t, "psi") + np.exp(-t))) < 1e-8
    growing = solve_system(COSH, (1.0, 0.0), (0, 40))
    assert ratio_limit(pair, growing).verdict == "Zero"


def test_ratio_limits():
    a = solve_system(COSH, (1.0, 0.0), (0, 30))
    b = solve_system(COSH, (0.0, 1.0), (0, 30))
    r = ratio_limit(a, b)
    assert r.verdict == "Finite" and r["limit"] == pytest.approx(1.0, abs=1e-6)
    decay = solve_system(COSH, (1.0, -1.0), (0, 30))
    assert ratio_limit(decay, a).verdict == "Zero"


@pytest.mark.parametrize("ratio", [0.0, 0.5, -0.5, 1.0, -1.0])
def test_ratio_box(ratio):
    rec = ratio_box_check(BOX, "-t", "t", "-t^3", "t^3", [ratio], horizon=100.0)
    assert rec.verdict == "Contained"
    item = rec["inits"][0]
    assert item["max_violation"] <= 1e-7
    if abs(ratio) < 1:
        assert item["I_phi"]["bounded"]


def test_ratio_box_gate_failure():
    with pytest.raises(HypothesisError):
        ratio_box_check(BOX, "t", "t", "-t^3", "t^3", [0.0], horizon=20.0)


@settings(max_examples=8)
@given(st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(-0.2, 0.2))
def test_minimal_ratio_decays(p, q, s):
    sys = SystemSpec.of(f"{s!r}*sin(t)", f"{p!r}", f"{q!r}", f"-{s!r}*sin(t)")
    pair, rec = minimal_solution(sys, 40.0)
    other = solve_system(sys, (1.0, 0.0), (0, 40))
    assert ratio_limit(pair, other).verdict == "Zero"
