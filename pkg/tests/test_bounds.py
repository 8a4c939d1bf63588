import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planar_riccati._report import HypothesisError
from planar_riccati.bounds import (BoundEnvelope, classical_envelopes, envelope_verify, example38_system,
                                   log_integral_bounds, riccati_envelope, stability_check, system_envelopes)
from planar_riccati.integrate import RiccatiSpec, SystemSpec, solve_system

SIN2 = SystemSpec.of("0", "sin(t)^2", "cos(t)^2", "0")
COSH = SystemSpec.of(a12="1", a21="1")
BASE = {"lam": -1, "mu": 1, "nu": 1, "alpha": 0, "beta": 0, "gamma": -1.5, "t0": 1}


def test_stability_verdicts():
    v = stability_check(SIN2, 200.0)
    assert v.verdict == "Unstable"
    assert v.witnesses["criterion"]["F1"]["slope"] == pytest.approx(0.5, abs=0.02)
    assert stability_check(SystemSpec.of(a12="exp(-t)", a21="exp(-t)"), 100.0).verdict == "Stable"
    assert stability_check(SystemSpec.of(a12="1"), 100.0).verdict == "Unstable"


def test_bounded_criterion_is_not_enough_alone():
    # criterion functions stay bounded but every solution grows like e^t
    v = stability_check(SystemSpec.of(a11="1"), 100.0)
    assert v.verdict == "Undetermined"
    assert v.witnesses["notes"]


def test_envelope_verify_basics():
    tr = solve_system(SystemSpec.of(a12="1", a21="-1"), (0.0, 1.0), (0, 20))
    env = BoundEnvelope("const", (0.0, 20.0), lambda t: -np.ones_like(t), lambda t: np.ones_like(t), component="phi")
    rec = envelope_verify(tr, env)
    assert rec.verdict == "Pass" and rec["violation"] == 0.0
    grow = solve_system(SystemSpec.of(a11="1"), (1.0, 0.0), (0, 10))
    env = BoundEnvelope("exp", (0.0, 10.0), upper=lambda t: np.exp(0.9 * t), component="phi")
    rec = envelope_verify(grow, env)
    assert rec.verdict == "Fail" and rec["violation"] > 0


def test_riccati_envelopes():
    tanh = riccati_envelope(RiccatiSpec.of(a="1", c="-1"), 0.0, 30.0)
    assert tanh.check.verdict == "Pass"
    hyper = riccati_envelope(RiccatiSpec.of(a="1"), 1.0, 30.0)
    t = np.linspace(0, 30, 61)
    lo, _ = hyper.bounds(t)
    assert np.max(np.abs(lo - 1 / (1 + t))) < 1e-9
    assert np.max(np.abs(hyper.measured(hyper.solution, t) - lo)) < 1e-8
    with pytest.raises(HypothesisError):
        riccati_envelope(RiccatiSpec.of(a="1", c="1"), 0.0, 10.0)


def test_riccati_envelope_with_decaying_forcing():
    assert riccati_envelope(RiccatiSpec.of(a="1", b="2", c="-exp(-t)"), 0.7, 30.0).check.verdict == "Pass"


@settings(max_examples=15)
@given(st.floats(0.1, 1), st.floats(-0.5, 0.5), st.floats(0, 1), st.floats(0, 2))
def test_riccati_envelope_random(a, b, c, x):
    spec = RiccatiSpec.of(f"{a!r} + 0.5*sin(t)^2", f"{b!r}*cos(t)", f"-{c!r}*exp(-t/4)")
    env = riccati_envelope(spec, x, 20.0)
    assert env.check.verdict == "Pass"


@settings(max_examples=10)
@given(st.floats(0, 1), st.floats(0, 1))
def test_lower_envelope_monotone_in_initial_value(x, dx):
    spec = RiccatiSpec.of("1", "0.3*sin(t)", "-0.5")
    t = np.linspace(0, 15, 31)
    lo1, _ = riccati_envelope(spec, x, 15.0).bounds(t)
    lo2, _ = riccati_envelope(spec, x + dx, 15.0).bounds(t)
    assert np.all(lo2 >= lo1 - 1e-12)


def test_log_integral_normal_and_extremal():
    spec = RiccatiSpec.of(a="1", c="-1")
    for which in ("normal_254", "extremal_255"):
        assert log_integral_bounds(spec, which, 40.0).check.verdict == "Pass"
    decaying = RiccatiSpec.of(a="exp(-t)", c="-exp(-t)")
    assert log_integral_bounds(decaying, "extremal_256", 40.0).check.verdict == "Pass"


def test_log_integral_tight_for_constant_coefficients():
    env = log_integral_bounds(RiccatiSpec.of(a="1", b="0.5", c="-1"), "normal_254", 40.0)
    t = np.array([10.0, 20.0, 30.0, 40.0])
    gap = env.bounds(t)[1] - env.measured(env.solution, t)
    assert np.ptp(gap) < 1e-4 and np.all(gap >= 0)


def test_positive_solution_clause():
    env = log_integral_bounds(RiccatiSpec.of(a="1", c="0.25"), "positive_258", 3.0, x_init=10.0)
    assert env.check.verdict == "Pass"
    with pytest.raises(HypothesisError):
        log_integral_bounds(RiccatiSpec.of(a="1", c="-1"), "positive_258", 10.0, x_init=1.0)


@pytest.mark.parametrize("which", ["eq344", "eq345", "eq347", "eq348", "eq349", "eq350", "eq361", "eq362"])
def test_system_envelopes_cosh(which):
    assert system_envelopes(COSH, (1.0, 1.0), which, 20.0).check.verdict == "Pass"


def test_system_envelope_sin2_case():
    assert system_envelopes(SIN2, (1.0, 0.0), "eq344", 30.0).check.verdict == "Pass"
    assert system_envelopes(COSH, (1.0, 0.0), "eq358", 20.0).check.verdict == "Pass"


def test_positive_start_envelope_is_inside_general_one():
    # with I+ infinite the positive-start upper bound sits below the general one
    t = np.linspace(1, 20, 39)
    general = system_envelopes(COSH, (1.0, 1.0), "eq344", 20.0).bounds(t)[1]
    positive = system_envelopes(COSH, (1.0, 1.0), "eq347", 20.0).bounds(t)[1]
    assert np.all(positive <= general)


def test_classical_family():
    fam = classical_envelopes(BASE, 50.0, init=(1.0, 0.5))
    assert fam.envelopes["(3.52)"].check.verdict == "Pass"
    assert fam.envelopes["(3.53)"].check.verdict == "Pass"
    assert fam.ordering[0] == "(3.54)"


@pytest.mark.parametrize("beta, fires", [(1.0, True), (0.5, True), (0.0, False)])
def test_sharpness_rule_sweep(beta, fires):
    fam = classical_envelopes(dict(BASE, nu=0.25, beta=beta), 50.0)
    rule = fam.sharpness["rule_53_vs_54"]
    assert rule["fires"] is fires and rule["consistent"]


def test_asymptotic_showcase():
    params = dict(BASE, mu=3, t0=50)
    fam = classical_envelopes(params, 300.0)
    assert fam.sharpness["asymptotic"] == {"riccati_certifies": True, "wazevski_bounded": False}
    assert stability_check(example38_system(params), 300.0).verdict == "AsymptoticallyStable"


def test_parameter_constraints():
    with pytest.raises(ValueError):
        classical_envelopes(dict(BASE, gamma=-0.5), 20.0)
