"""Lyapunov stability through Riccati criterion functions, and solution envelopes.

Envelopes are evaluable functions of ``t``. Where a bound involves an
integral over an unknown solution (a multiplicative constant, an additive
offset) the constant is estimated from the constructed solutions and the
envelope is labelled ``empirical-constant``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._report import HypothesisError, Record, jsonable
from .coeffexpr import as_expr, sign_certify
from .integrate import RiccatiSpec, SystemSpec, Trajectory, solve_riccati, solve_system
from .quadrature import Cumulative, HorizonPolicy, as_signal, iplus_path, transform_Iplus, windowed_bounded
from .riccati import extremal_from_normal, survives, tail_path
from .systemreg import _drift

__all__ = [
    "BoundEnvelope",
    "StabilityVerdict",
    "stability_check",
    "riccati_envelope",
    "log_integral_bounds",
    "system_envelopes",
    "classical_envelopes",
    "example38_system",
    "envelope_verify",
]

STABILITY_CLASSES = ("Stable", "AsymptoticallyStable", "Unstable", "Undetermined")
LOG_INTEGRAL_CLAUSES = ("normal_254", "extremal_255", "extremal_256", "positive_258")
SYSTEM_CLAUSES = ("eq344", "eq345", "eq347", "eq348", "eq349", "eq350", "eq358", "eq361", "eq362")


# ---------------------------------------------------------------- envelope type


@dataclass
class BoundEnvelope:
    """``lower(t) <= m(t) <= upper(t)`` for the measured quantity ``m`` of a trajectory.

    ``measure`` is ``value`` (the named component), ``abs`` (its modulus) or
    ``norm`` (Euclidean norm of all components).
    """

    provenance: str
    span: tuple
    lower: Optional[Callable] = None
    upper: Optional[Callable] = None
    component: object = 0
    measure: str = "value"
    label: str = "exact"
    gates: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    check: Optional[Record] = None
    nodes: Optional[np.ndarray] = None  # where a tabulated bound is exact
    solution: Optional[Trajectory] = None

    def bounds(self, t):
        t = np.asarray(t, float)
        # exponential envelopes may leave the float range; that only makes them trivial
        with np.errstate(over="ignore", invalid="ignore"):
            lo = np.asarray(self.lower(t), float) if self.lower is not None else np.full(t.shape, -np.inf)
            hi = np.asarray(self.upper(t), float) if self.upper is not None else np.full(t.shape, np.inf)
        return np.where(np.isnan(lo), -np.inf, lo), np.where(np.isnan(hi), np.inf, hi)

    def measured(self, traj: Trajectory, t) -> np.ndarray:
        v = traj(t)
        if self.measure == "norm":
            return np.sqrt(np.sum(v * v, axis=-1))
        x = v[..., traj.index(self.component)]
        return np.abs(x) if self.measure == "abs" else x

    def as_dict(self) -> dict:
        lo, hi = self.span
        ts = np.linspace(lo, hi, 5)
        blo, bhi = self.bounds(ts)
        return jsonable({
            "provenance": self.provenance, "span": list(self.span), "component": self.component,
            "measure": self.measure, "label": self.label, "gates": self.gates,
            "constants": self.constants, "check": self.check,
            "preview": {"t": ts, "lower": blo, "upper": bhi},
        })


def _tabulated(grid, values):
    grid = np.asarray(grid, float)
    values = np.asarray(values, float)
    return lambda t: np.interp(np.asarray(t, float), grid, values)


def envelope_verify(traj: Trajectory, env: BoundEnvelope, slack: float = 1e-7, samples: int = 2001) -> Record:
    """Largest signed violation of ``env`` by ``traj`` over their common span.

    Violations are relative to ``max(1, |bound|)`` so exponential envelopes can
    be checked with the same slack as bounded ones.
    """
    lo = max(traj.t_start, env.span[0])
    hi = min(traj.t_end, env.span[1])
    if not lo < hi:
        raise ValueError(f"trajectory span {traj.span} and envelope span {env.span} do not overlap")
    if env.nodes is not None:
        nodes = np.asarray(env.nodes, float)
        ts = nodes[(nodes >= lo) & (nodes <= hi)]
    else:
        ts = traj.times[(traj.times >= lo) & (traj.times <= hi)]
        ts = np.union1d(ts, np.linspace(lo, hi, samples))
    m = env.measured(traj, ts)
    blo, bhi = env.bounds(ts)
    with np.errstate(invalid="ignore", over="ignore"):
        up = np.where(np.isfinite(bhi), (m - bhi) / np.maximum(1.0, np.abs(bhi)), -np.inf)
        dn = np.where(np.isfinite(blo), (blo - m) / np.maximum(1.0, np.abs(blo)), -np.inf)
    worst = np.maximum(up, dn)
    bad = ~np.isfinite(m)
    worst[bad] = np.inf
    k = int(np.argmax(worst))
    margin = float(worst[k])
    side = "upper" if up[k] >= dn[k] else "lower"
    det = {"provenance": env.provenance, "violation": max(margin, 0.0), "margin": margin,
           "t_worst": float(ts[k]), "side": side, "slack": slack, "samples": int(ts.size),
           "span": [lo, hi], "label": env.label}
    return Record("envelope_verify", "Pass" if margin < slack else "Fail", det)


# ---------------------------------------------------------------- gates and paths


def _gate(expr, span, kind: str, name: str) -> dict:
    cert = sign_certify(expr, span)
    if kind == "le0":
        ok = cert.nonpositive
    else:
        ok = cert.nonnegative
        if ok and kind == "gt0":
            ts = np.linspace(span[0], span[1], 2001)
            ok = bool(np.min(as_expr(expr)(ts)) > 0)
    if not ok:
        raise HypothesisError(name, f"sign certificate {cert.verdict}", cert)
    return {name: cert.as_dict()}


def _cum(expr, t0: float, T: float) -> Cumulative:
    s = as_signal(expr)
    return Cumulative(s.fn, t0, T, breakpoints=s.breakpoints)


def _iminus(u, v, t0: float, T: float, x_init: float = 0.0, lift=None, tol=None) -> Trajectory:
    """``x_init J_{-u} + I-_{u,v}`` as the solution of ``y' = -u y + v``; with
    ``lift=(w, k)`` the component ``L`` carries ``int (w y + k)``."""
    spec = RiccatiSpec(0.0, u, -as_expr(v), t0)
    traj = solve_riccati(spec, x_init, (t0, T), tol, lift=lift, escape=math.inf)
    if traj.t_end < T:
        raise HypothesisError("finite I-", f"linear comparison equation stopped at t={traj.t_end}")
    return traj


def _iplus_verdict(u, v, t0: float, T: float, policy=None):
    # the improper verdict looks a fixed multiple of the horizon ahead
    if policy is None:
        policy = HorizonPolicy(t_max=t0 + 16.0 * (T - t0))
    return transform_Iplus(u, v, t0, math.inf, policy)


def _grid(t0: float, T: float, n: int) -> np.ndarray:
    return np.linspace(t0, T, n)


# ---------------------------------------------------------------- stability


@dataclass
class StabilityVerdict:
    verdict: str
    witnesses: dict = field(default_factory=dict)

    def __str__(self):
        return self.verdict

    def as_dict(self) -> dict:
        return jsonable({"verdict": self.verdict, **self.witnesses})


def _log_windows(t0: float, T: float):
    L = T - t0
    return [(t0 + L / 64, t0 + L / 16), (t0 + L / 16, t0 + L / 4), (t0 + L / 4, T)]


def growth_profile(t, values, t0: float, T: float, slack: float = 0.01) -> dict:
    """Sups over three log-spaced windows and a Bounded / Unbounded / Undetermined tag."""
    t = np.asarray(t, float)
    v = np.abs(np.asarray(values, float))
    sups = []
    for a, b in _log_windows(t0, T):
        sel = (t >= a) & (t <= b)
        sups.append(float(np.max(v[sel])) if np.any(sel) else math.nan)
    rule = windowed_bounded(t, v, t0, T, slack)
    s1, s2, s3 = sups
    if not np.all(np.isfinite(v)):
        tag = "Unbounded"
    elif rule["bounded"]:
        tag = "Bounded"
    elif s3 > (1 + 10 * slack) * s2 and s2 > (1 + slack) * s1:
        tag = "Unbounded"
    else:
        tag = "Undetermined"
    return {"tag": tag, "window_sups": sups, "rule": rule}


def _criterion(J: Cumulative, P: Cumulative, sign: float, grid):
    return np.exp(sign * J(grid)) * P(grid)


def stability_check(sys: SystemSpec, horizon: float = 200.0, tol=None, samples: int = 4001,
                    slack: float = 0.01, growth_factor: float = 10.0, decay_level: float = 1e-3) -> StabilityVerdict:
    """Lyapunov stability for ``a12 >= 0, a21 >= 0`` from the boundedness of
    ``F1 = J_{a11} I+_{a12,B}(t0; t)`` and ``F2 = J_{a22} I+_{a21,-B}(t0; t)``.

    The fundamental solutions are integrated as a cross-check: an unbounded
    criterion needs a solution that grows ``growth_factor``-fold, a bounded
    one needs bounded solutions; otherwise the verdict is Undetermined.
    """
    t0, T = sys.t0, float(horizon)
    if not T > t0:
        raise ValueError("horizon must exceed t0")
    span = (t0, T)
    gates = {}
    gates.update(_gate(sys.a12, span, "ge0", "a12 >= 0"))
    gates.update(_gate(sys.a21, span, "ge0", "a21 >= 0"))
    grid = _grid(t0, T, samples)
    B = sys.B
    J11, J22 = _cum(sys.a11, t0, T), _cum(sys.a22, t0, T)
    P12 = iplus_path(sys.a12, B, t0, T)
    P21 = iplus_path(sys.a21, -B, t0, T)
    F1 = np.exp(J11(grid)) * P12(grid)
    F2 = np.exp(J22(grid)) * P21(grid)
    g1 = growth_profile(grid, F1, t0, T, slack)
    g2 = growth_profile(grid, F2, t0, T, slack)
    slope1 = float(np.polyfit(grid, F1, 1)[0])
    slope2 = float(np.polyfit(grid, F2, 1)[0])

    # pairing with the J factors exchanged, reported for comparison only
    G1 = np.exp(J22(grid)) * P12(grid)
    G2 = np.exp(J11(grid)) * P21(grid)
    transpose_pairing = {"G1": growth_profile(grid, G1, t0, T, slack)["tag"],
                         "G2": growth_profile(grid, G2, t0, T, slack)["tag"]}
    # J_{a11} and J_{a22} lower-bound the fundamental solutions, so they must stay bounded too
    jtags = {"J_a11": growth_profile(grid, np.exp(J11(grid)), t0, T, slack)["tag"],
             "J_a22": growth_profile(grid, np.exp(J22(grid)), t0, T, slack)["tag"]}

    sols = {}
    for name, init in (("e1", (1.0, 0.0)), ("e2", (0.0, 1.0))):
        traj = solve_system(sys, init, span, tol)
        norm = np.hypot(traj(grid, 0), traj(grid, 1))
        prof = growth_profile(grid, norm, t0, T, slack)
        sols[name] = {"sup": float(np.max(norm)), "final": float(norm[-1]), "tag": prof["tag"],
                      "window_sups": prof["window_sups"]}
    sup_all = max(s["sup"] for s in sols.values())
    grows = sup_all >= growth_factor
    sol_bounded = all(s["tag"] == "Bounded" or s["sup"] < growth_factor and s["tag"] != "Unbounded"
                      for s in sols.values())
    decays = all(s["final"] <= decay_level and s["window_sups"][2] <= s["window_sups"][1]
                 for s in sols.values())

    crit = (g1["tag"], g2["tag"])
    notes = []
    if "Unbounded" in crit:
        if grows:
            verdict = "Unstable"
        else:
            verdict = "Undetermined"
            notes.append(f"criterion unbounded but no fundamental solution grew {growth_factor:g}-fold")
    elif crit == ("Bounded", "Bounded"):
        if sol_bounded:
            verdict = "AsymptoticallyStable" if decays else "Stable"
        else:
            verdict = "Undetermined"
            notes.append("criterion bounded but sampled solutions grow")
    else:
        verdict = "Undetermined"
        notes.append("criterion growth not resolved within the horizon")

    wit = {
        "horizon": T, "gates": gates,
        "criterion": {"F1": {"tag": g1["tag"], "window_sups": g1["window_sups"], "slope": slope1,
                             "final": float(F1[-1])},
                      "F2": {"tag": g2["tag"], "window_sups": g2["window_sups"], "slope": slope2,
                             "final": float(F2[-1])}},
        "transpose_pairing": transpose_pairing, "J_factors": jtags,
        "solutions": sols, "notes": notes,
    }
    return StabilityVerdict(verdict, wit)


# ---------------------------------------------------------------- scalar envelopes


def _riccati_gates(spec: RiccatiSpec, x_init: float, T: float, policy=None) -> dict:
    t0 = spec.t0
    gates = {}
    gates.update(_gate(spec.a, (t0, T), "ge0", "a >= 0"))
    gates.update(_gate(spec.c, (t0, T), "le0", "c <= 0"))
    v = _iplus_verdict(spec.a, spec.b, t0, T, policy)
    if v.converged:
        floor = -1.0 / v.value if v.value > 0 else -math.inf
    elif v.diverges_plus:
        floor = 0.0
    else:
        # only the finite-horizon part is known; stay on the safe side of it
        part = transform_Iplus(spec.a, spec.b, t0, T)
        floor = -1.0 / part if part > 0 else -math.inf
    gates["I+[a,b](t0)"] = v.as_dict()
    gates["x_init floor"] = floor
    if x_init < floor:
        raise HypothesisError("x_init >= -1/I+", f"x_init={x_init} below {floor}", gates)
    return gates


def riccati_envelope(spec: RiccatiSpec, x_init: float, horizon: float = 50.0, tol=None,
                     slack: float = 1e-7, policy=None) -> BoundEnvelope:
    """``x J_{-b}/(1 + x I+_{a,b}) <= x(t) <= x J_{-b} - I-_{b,c}`` for ``a >= 0, c <= 0``.

    The solution through ``x_init`` is integrated and checked against the
    envelope; the record is attached as ``check``.
    """
    t0, T = spec.t0, float(horizon)
    x_init = float(x_init)
    gates = _riccati_gates(spec, x_init, T, policy)
    Jb = _cum(spec.b, t0, T)
    P = iplus_path(spec.a, spec.b, t0, T)
    upper_traj = _iminus(spec.b, -spec.c, t0, T, x_init=x_init, tol=tol)

    def lower(t):
        t = np.asarray(t, float)
        den = 1.0 + x_init * P(t)
        with np.errstate(divide="ignore"):
            return np.where(den > 0, x_init * np.exp(-Jb(t)) / np.where(den > 0, den, 1.0), -np.inf)

    def upper(t):
        return upper_traj(np.asarray(t, float), 0)

    env = BoundEnvelope("(2.18)", (t0, T), lower, upper, "x", "value", "exact", gates,
                        {"x_init": x_init})
    sol = solve_riccati(spec, x_init, (t0, T), tol)
    if sol.blowup is not None:
        raise HypothesisError("regular solution", f"solution blows up at t={sol.blowup.t_escape}",
                              sol.blowup)
    env.solution = sol
    env.check = envelope_verify(sol, env, slack)
    return env


def _cs_bound(spec: RiccatiSpec, t0: float, T: float, x_start: float = 0.0):
    """``-1/2 int b + 1/2 sqrt(int a * [4 x_start + int (b^2 - 4ac)/a])``."""
    Ib = _cum(spec.b, t0, T)
    Ia = _cum(spec.a, t0, T)
    Id = _cum((spec.b * spec.b - 4.0 * spec.a * spec.c) / spec.a, t0, T)

    def f(t):
        t = np.asarray(t, float)
        inner = np.maximum(Ia(t) * (4.0 * x_start + Id(t)), 0.0)
        return -0.5 * Ib(t) + 0.5 * np.sqrt(inner)

    return f


def _accumulated(spec: RiccatiSpec, traj: Trajectory, grid) -> Trajectory:
    """``int_{t0}^t a x`` of a trajectory, as a Hermite trajectory on ``grid``."""
    t0 = float(grid[0])
    C = Cumulative(lambda s: spec.a(s) * traj(s, 0), t0, float(grid[-1]), breakpoints=traj.times)
    vals = C(grid)
    return Trajectory.from_hermite("Accumulated", grid, vals, spec.a(grid) * traj(grid, 0), ("A",))


def _negative_normal(spec: RiccatiSpec, x_star0: float, T: float, tol=None):
    for f in (0.5, 0.25, 0.75, 0.1, 0.9):
        x = f * x_star0
        ok, traj = survives(spec, x, spec.t0, T, tol)
        if ok and np.max(traj.column(0)) < 0:
            return x, traj
    raise HypothesisError("negative normal solution", f"no negative survivor below 0 above x*={x_star0}")


def log_integral_bounds(spec: RiccatiSpec, which: str, horizon: float = 50.0, x_init: Optional[float] = None,
                        solution: Optional[Trajectory] = None, x_N: Optional[float] = None, tol=None,
                        slack: float = 1e-7, policy=None) -> BoundEnvelope:
    """Cauchy-Schwarz envelopes on ``A(t) = int_{t0}^t a x``.

    ``normal_254``  upper bound for the solution with ``x(t0) = 0`` (``a > 0, c <= 0``);
    ``extremal_255`` lower bound for the extremal solution via ``nu`` of that solution;
    ``extremal_256`` lower bound with ``ln I+_{a,b}(t, inf)`` and a negative normal
    solution ``x_N`` (needs both ``I+_{a,b}`` and ``I+_{-c,-b}`` finite);
    ``positive_258`` upper bound for a positive regular solution when ``c >= 0`` and
    ``I+_{a,b} = inf``.
    """
    if which not in LOG_INTEGRAL_CLAUSES:
        raise ValueError(f"unknown clause {which!r}; expected one of {LOG_INTEGRAL_CLAUSES}")
    t0, T = spec.t0, float(horizon)
    span = (t0, T)
    gates = _gate(spec.a, span, "gt0", "a > 0")
    constants = {}
    label = "exact"

    if which == "positive_258":
        gates.update(_gate(spec.c, span, "ge0", "c >= 0"))
        v = _iplus_verdict(spec.a, spec.b, t0, T, policy)
        gates["I+[a,b](t0)"] = v.as_dict()
        if not v.diverges_plus:
            raise HypothesisError("I+[a,b] = inf", f"verdict {v.kind}", v)
        if solution is None:
            if x_init is None:
                raise ValueError("positive_258 needs a regular solution or its initial value")
            solution = solve_riccati(spec, x_init, span, tol, lift=(spec.a, 0.0))
        if solution.blowup is not None or solution.t_end < T:
            raise HypothesisError("regular solution", "supplied solution does not reach the horizon")
        if np.min(solution.column(0)) <= 0:
            raise HypothesisError("x > 0", "supplied solution is not positive on the span")
        x_start = float(solution(t0, 0))
        upper = _cs_bound(spec, t0, T, x_start)
        measured = _accumulated(spec, solution, np.union1d(solution.times, _grid(t0, T, 2001)))
        env = BoundEnvelope("(2.58)", span, None, upper, "A", "value", label, gates, {"x_t0": x_start})

    else:
        gates.update(_gate(spec.c, span, "le0", "c <= 0"))
        x0 = solve_riccati(spec, 0.0, span, tol, lift=(spec.a, 0.0))
        if x0.blowup is not None:
            raise HypothesisError("x0 regular", "the solution from 0 blows up", x0.blowup)
        cs = _cs_bound(spec, t0, T)
        if which == "normal_254":
            env = BoundEnvelope("(2.54)", span, None, cs, "L", "value", label, gates, {})
            measured = x0
        else:
            xs = extremal_from_normal(spec, x0, t0)
            nu = xs.meta["nu"]
            grid = xs.times
            measured = _accumulated(spec, xs, grid)
            constants["t_reliable"] = xs.meta["t_reliable"]
            constants["nu_t0"] = float(nu[0])
            if which == "extremal_255":
                lognu = np.log(nu / nu[0])
                Ib = _cum(spec.b, t0, T)(grid)
                # cs = -Ib/2 + R, so -Ib/2 - R + ln(nu/nu0) is -cs - Ib + ln(nu/nu0)
                vals = -cs(grid) - Ib + lognu
                lower = _tabulated(grid, vals)
                env = BoundEnvelope("(2.55)", span, lower, None, "A", "value", label, gates, constants,
                                    nodes=grid)
            else:
                v1 = _iplus_verdict(spec.a, spec.b, t0, T, policy)
                v2 = _iplus_verdict(-spec.c, -spec.b, t0, T, policy)
                gates["I+[a,b](t0)"] = v1.as_dict()
                gates["I+[-c,-b](t0)"] = v2.as_dict()
                if not (v1.converged and v2.converged):
                    raise HypothesisError("I+[a,b] < inf and I+[-c,-b] < inf",
                                          f"verdicts {v1.kind}, {v2.kind}", gates)
                x_star0 = float(xs(t0, 0))
                if x_N is None:
                    x_N, xN = _negative_normal(spec, x_star0, T, tol)
                else:
                    ok, xN = survives(spec, x_N, t0, T, tol)
                    if not ok or np.max(xN.column(0)) >= 0:
                        raise HypothesisError("negative normal solution", f"x_N={x_N} is not negative to T")
                # int_{t0}^inf a (x0 - x_N), extrapolated from three horizons
                D = Cumulative(lambda s: spec.a(s) * (x0(s, 0) - xN(s, 0)), t0, T,
                               breakpoints=np.union1d(x0.times, xN.times))
                L = T - t0
                parts = [float(D(t0 + f * L)) for f in (0.25, 0.5, 1.0)]
                lim, err, _ = _drift(parts)
                if lim is None:
                    lim, err = parts[-1], math.inf
                c_const = -2.0 * lim - math.log(nu[0])
                c_printed = -lim - math.log(nu[0])
                tail, info = tail_path(grid, spec.a, spec.b)
                vals = -cs(grid) - _cum(spec.b, t0, T)(grid) + np.log(tail) + c_const
                lower = _tabulated(grid, vals)
                label = "empirical-constant"
                constants.update({"c": c_const, "c_err": 2.0 * err, "c_as_printed": c_printed,
                                  "x_N_init": x_N, "int_a(x0-xN)": lim, "tail_model": info["tail_model"]})
                env = BoundEnvelope("(2.56)", span, lower, None, "A", "value", label, gates, constants,
                                    nodes=grid)

    env.solution = measured
    env.check = envelope_verify(measured, env, slack)
    return env


# ---------------------------------------------------------------- system envelopes


def _pos_ratio_int(spec: RiccatiSpec, r: float, T: float, tol=None) -> Trajectory:
    """Ratio solution through ``r`` with ``L = int a12 x`` accumulated."""
    traj = solve_riccati(spec, r, (spec.t0, T), tol, lift=(spec.a, 0.0))
    if traj.blowup is not None:
        raise HypothesisError("regular ratio", f"ratio from {r} blows up at t={traj.blowup.t_escape}")
    return traj


def _empirical(traj_x: Trajectory, traj_ref: Trajectory, T: float):
    """exp(int_{t0}^T a (x - x_ref)) with the drift across L/4, L/2, L as error bar."""
    t0 = traj_x.t_start
    L = T - t0
    parts = [float(traj_x(t0 + f * L, 1) - traj_ref(t0 + f * L, 1)) for f in (0.25, 0.5, 1.0)]
    lim, err, _ = _drift(parts)
    return math.exp(parts[-1]), {"log_value_at_T": parts[-1], "log_limit": lim,
                                 "log_err": err if lim is not None else math.inf}


def _phi_side(sys: SystemSpec, init, which: str, T: float, tol=None, policy=None):
    """Envelope on the first component; the second is handled on the transpose."""
    t0 = sys.t0
    span = (t0, T)
    phi0, psi0 = float(init[0]), float(init[1])
    gates = {}
    constants = {}
    label = "exact"
    spec = sys.riccati()
    gates.update(_gate(sys.a12, span, "ge0", "a12 >= 0"))
    gates.update(_gate(sys.a21, span, "ge0", "a21 >= 0"))
    # E(t) = int [a11 + a12 I-_{B,a21}]
    base = _iminus(sys.B, sys.a21, t0, T, lift=(sys.a12, sys.a11), tol=tol)

    def E(t):
        return base(np.asarray(t, float), 1)

    if which == "344":
        if phi0 <= 0:
            raise HypothesisError("phi(t0) > 0", f"phi(t0)={phi0}")
        r = psi0 / phi0
        v = _iplus_verdict(sys.a12, sys.B, t0, T, policy)
        gates["I+[a12,B](t0)"] = v.as_dict()
        floor = 0.0 if v.diverges_plus else (-1.0 / v.value if v.converged and v.value > 0 else -math.inf)
        if not (v.converged or v.diverges_plus):
            part = transform_Iplus(sys.a12, sys.B, t0, T)
            floor = -1.0 / part if part > 0 else -math.inf
        if r < floor:
            raise HypothesisError("psi(t0)/phi(t0) >= -1/I+", f"ratio {r} below {floor}", gates)
        J11 = _cum(sys.a11, t0, T)
        P = iplus_path(sys.a12, sys.B, t0, T)

        def lower(t):
            t = np.asarray(t, float)
            return phi0 * np.exp(J11(t)) * (1.0 + r * P(t))

        def upper(t):
            t = np.asarray(t, float)
            return phi0 * np.exp(r * P(t) + E(t))

        return lower, upper, "value", label, gates, constants

    if which == "347":
        if phi0 <= 0 or psi0 <= 0:
            raise HypothesisError("phi(t0) > 0, psi(t0) > 0", f"init ({phi0}, {psi0})")
        x = _pos_ratio_int(spec, psi0 / phi0, T, tol)
        x0 = _pos_ratio_int(spec, 0.0, T, tol)
        c1, ev = _empirical(x, x0, T)
        constants.update({"c1": c1, **ev})

        def upper(t):
            return phi0 * c1 * np.exp(E(t))

        return None, upper, "value", "empirical-constant", gates, constants

    if which == "349":
        # write the solution through two positive ones with ratios 1 and 2
        x0 = _pos_ratio_int(spec, 0.0, T, tol)
        cs = []
        for r in (1.0, 2.0):
            c, ev = _empirical(_pos_ratio_int(spec, r, T, tol), x0, T)
            cs.append(c)
            constants[f"c1[ratio={r:g}]"] = ev
        n1, n2 = 2.0 * phi0 - psi0, psi0 - phi0
        C1 = abs(n1) * cs[0] + abs(n2) * cs[1]
        constants.update({"C1": C1, "coefficients": [n1, n2]})

        def upper(t):
            return C1 * np.exp(E(t))

        return None, upper, "abs", "empirical-constant", gates, constants

    if which in ("358", "361"):
        gates.update(_gate(sys.a12, span, "gt0", "a12 > 0"))
        IS = _cum(sys.S, t0, T)
        Ia = _cum(sys.a12, t0, T)
        Id = _cum((sys.B * sys.B + 4.0 * sys.a12 * sys.a21) / sys.a12, t0, T)

        def expo(t):
            t = np.asarray(t, float)
            return 0.5 * IS(t) + 0.5 * np.sqrt(np.maximum(Ia(t) * Id(t), 0.0))

        if which == "358":
            if not (phi0 == 1.0 and psi0 == 0.0):
                raise HypothesisError("init (1, 0)", f"init ({phi0}, {psi0})")
            return None, lambda t: np.exp(expo(t)), "value", label, gates, constants
        x0 = _pos_ratio_int(spec, 0.0, T, tol)
        x1 = _pos_ratio_int(spec, 1.0, T, tol)
        N, ev = _empirical(x1, x0, T)
        n0, n1 = phi0 - psi0, psi0
        M = abs(n0) + abs(n1) * N
        constants.update({"N": N, **ev, "M": M, "coefficients": [n0, n1]})
        return None, lambda t: M * np.exp(expo(t)), "abs", "empirical-constant", gates, constants

    raise ValueError(which)


def system_envelopes(sys: SystemSpec, init, which: str, horizon: float = 50.0, tol=None,
                     slack: float = 1e-7, policy=None) -> BoundEnvelope:
    """Envelope on ``phi`` (eq344, eq347, eq349, eq358, eq361) or on ``psi``
    (eq345, eq348, eq350, eq362) for ``a12 >= 0, a21 >= 0``.

    The second-component bounds are the first-component bounds of the
    transposed system ``(psi, phi)``. The solution through ``init`` is
    integrated and checked; the record is attached as ``check``.
    """
    if which not in SYSTEM_CLAUSES:
        raise ValueError(f"unknown clause {which!r}; expected one of {SYSTEM_CLAUSES}")
    T = float(horizon)
    init = (float(init[0]), float(init[1]))
    twin = {"345": "344", "348": "347", "350": "349", "362": "361"}
    tag = which[2:]
    if tag in twin:
        work, winit, base, comp = sys.transpose(), (init[1], init[0]), twin[tag], "psi"
    else:
        work, winit, base, comp = sys, init, tag, "phi"
    lower, upper, measure, label, gates, constants = _phi_side(work, winit, base, T, tol, policy)
    env = BoundEnvelope(f"({tag[0]}.{tag[1:]})", (sys.t0, T), lower, upper, comp, measure, label,
                        gates, constants)
    sol = solve_system(sys, init, (sys.t0, T), tol)
    env.solution = sol
    env.check = envelope_verify(sol, env, slack)
    return env


# ---------------------------------------------------------------- the power-law family


def _params(p) -> dict:
    q = {"lam": -1.0, "mu": 1.0, "nu": 1.0, "alpha": 0.0, "beta": 0.0, "gamma": -1.5, "t0": 1.0}
    q.update({k: float(v) for k, v in dict(p).items()})
    return q


def example38_system(params) -> SystemSpec:
    """``phi' = lam t^alpha phi + mu t^beta psi``, ``psi' = nu t^gamma phi + lam t^alpha psi``."""
    p = _params(params)
    diag = f"{p['lam']!r}*t^{p['alpha']!r}"
    return SystemSpec.of(diag, f"{p['mu']!r}*t^{p['beta']!r}", f"{p['nu']!r}*t^{p['gamma']!r}", diag,
                         p["t0"])


def _power_exponents(p):
    """Exponent functions of (3.52)-(3.57), without their multiplicative constants."""
    lam, mu, nu, al, be, ga, t0 = (p[k] for k in ("lam", "mu", "nu", "alpha", "beta", "gamma", "t0"))
    base = lambda t: lam / (al + 1) * t ** (al + 1)  # noqa: E731
    out = {
        "(3.52)": lambda t: base(t) + mu * nu * t0 ** (ga + 1) / ((be + 1) * abs(ga + 1)) * t ** (be + 1),
        "(3.53)": lambda t: base(t) + mu * nu / ((be + 1) * (be + ga + 2)) * t ** (be + ga + 2),
        "(3.54)": lambda t: base(t) + mu / (2 * (be + 1)) * t ** (be + 1),
        "(3.56)": lambda t: 2 * abs(lam) / (al + 1) * t ** (al + 1) + mu / (be + 1) * t ** (be + 1),
        "(3.57)": lambda t: lam * t ** (al + 1) + mu / (be + 1) * t ** (be + 1),
    }

    def lyap_rate(s):
        s = np.asarray(s, float)
        return np.maximum(np.sqrt(lam**2 * s ** (2 * al) + nu**2 * s ** (2 * ga)),
                          np.sqrt(lam**2 * s ** (2 * al) + mu**2 * s ** (2 * be)))

    out["(3.55)"] = lyap_rate
    return out


def _offsets(p):
    """Constants dropped when passing from (3.49)/(3.50) to (3.52)/(3.53)."""
    lam, mu, nu, al, be, ga, t0 = (p[k] for k in ("lam", "mu", "nu", "alpha", "beta", "gamma", "t0"))
    k0 = -lam * t0 ** (al + 1) / (al + 1)
    s = be + ga + 2
    k1 = k0 - mu * nu * t0**s / ((be + 1) * abs(ga + 1)) + mu * nu * t0**s / (abs(ga + 1) * s)
    k2 = k0 - mu * nu * t0**s / ((be + 1) * s)
    return k1, k2


@dataclass
class EnvelopeFamily:
    envelopes: dict
    ordering: list
    sharpness: dict
    params: dict

    def as_dict(self) -> dict:
        return jsonable({"params": self.params, "ordering": self.ordering, "sharpness": self.sharpness,
                         "envelopes": self.envelopes})


def classical_envelopes(params, horizon: float = 50.0, init=None, tol=None, slack: float = 1e-7) -> EnvelopeFamily:
    """Riccati-based (3.52)/(3.53) and classical (3.54)-(3.57) envelopes for the power-law system.

    Classical envelopes bound the Euclidean norm, the Riccati ones bound
    ``|phi|`` and ``|psi|``; all are built with unit constants for the
    sharpness comparison at ``horizon``. With ``init`` the (3.52)/(3.53)
    constants are calibrated from (3.49)/(3.50) and the solution is checked.
    """
    p = _params(params)
    lam, mu, nu, al, be, ga, t0 = (p[k] for k in ("lam", "mu", "nu", "alpha", "beta", "gamma", "t0"))
    problems = [msg for ok, msg in ((mu > 0, "mu > 0"), (nu > 0, "nu > 0"), (al > -1, "alpha > -1"),
                                    (be > -1, "beta > -1"), (ga < -1, "gamma < -1"), (t0 > 0, "t0 > 0"),
                                    (be >= al, "beta >= alpha"), (be + ga + 2 > 0, "beta + gamma + 2 > 0"))
                if not ok]
    if problems:
        raise HypothesisError(problems[0], f"parameters {p} violate " + ", ".join(problems))
    T = float(horizon)
    ex = _power_exponents(p)
    lyap = Cumulative(ex["(3.55)"], t0, T)
    log_at = {k: float(f(T)) for k, f in ex.items() if k != "(3.55)"}
    log_at["(3.55)"] = float(lyap(T))

    envs = {}
    for tag in ("(3.54)", "(3.55)", "(3.56)", "(3.57)"):
        f = (lambda t: np.exp(lyap(np.asarray(t, float)))) if tag == "(3.55)" else \
            (lambda t, g=ex[tag]: np.exp(g(np.asarray(t, float))))
        envs[tag] = BoundEnvelope(tag, (t0, T), None, f, 0, "norm", "unit-constant")
    for tag, comp in (("(3.52)", "phi"), ("(3.53)", "psi")):
        envs[tag] = BoundEnvelope(tag, (t0, T), None, lambda t, g=ex[tag]: np.exp(g(np.asarray(t, float))),
                                  comp, "abs", "unit-constant")

    classical = sorted(("(3.54)", "(3.55)", "(3.56)", "(3.57)"), key=lambda k: log_at[k])
    fires = be + ga + 1 > al or (be + ga + 1 == al and nu < (al + 1) / 2)
    observed = log_at["(3.53)"] < log_at["(3.54)"]
    sharp = {
        "log_envelopes_at_horizon": log_at, "sharpest_classical": classical[0],
        "rule_53_vs_54": {"fires": fires, "observed_53_sharper": observed,
                          "consistent": (not fires) or observed},
        "rule_52_vs_54": {"fires": be >= al and t0 ** (ga + 1) < abs(ga + 1) / (2 * nu),
                          "observed_52_sharper": log_at["(3.52)"] < log_at["(3.54)"]},
        "asymptotic": {"riccati_certifies": _decays(ex["(3.52)"], T) and _decays(ex["(3.53)"], T),
                       "wazevski_bounded": _bounded_growth(ex["(3.54)"], T)},
    }

    if init is not None:
        sys = example38_system(p)
        k1, k2 = _offsets(p)
        e49 = system_envelopes(sys, init, "eq349", T, tol, slack)
        e50 = system_envelopes(sys, init, "eq350", T, tol, slack)
        C1 = e49.constants["C1"] * math.exp(k1)
        C2 = e50.constants["C1"] * math.exp(k2)
        for tag, C, src in (("(3.52)", C1, e49), ("(3.53)", C2, e50)):
            env = envs[tag]
            env.upper = lambda t, g=ex[tag], C=C: C * np.exp(g(np.asarray(t, float)))
            env.label = "empirical-constant"
            env.constants = {"C": C, "from": src.provenance, "from_constants": src.constants}
            env.solution = src.solution
            env.check = envelope_verify(src.solution, env, slack)
        for tag in ("(3.49)", "(3.50)"):
            envs[tag] = e49 if tag == "(3.49)" else e50
    return EnvelopeFamily(envs, classical, sharp, p)


def _decays(g, T: float) -> bool:
    ts = np.array([T / 4, T / 2, T, 2 * T, 4 * T])
    v = g(ts)
    return bool(np.all(np.diff(v) < 0) and v[-1] < -1.0)


def _bounded_growth(g, T: float) -> bool:
    ts = np.array([T, 2 * T, 4 * T, 8 * T])
    v = g(ts)
    return bool(np.all(np.diff(v) <= 1e-12 * np.maximum(1.0, np.abs(v[:-1]))))
