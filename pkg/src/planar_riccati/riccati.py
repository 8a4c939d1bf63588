"""Regular, normal and extremal solutions of scalar Riccati equations.

All equations are ``x' + a x^2 + b x + c = 0``. A solution is *regular*
from ``t1`` when it exists on the whole ray, which numerically means it
survives to the chosen horizon without escaping past ``1e8``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._report import HypothesisError, Record, jsonable
from .coeffexpr import sign_certify
from .integrate import (
    BlowUpReport,
    RiccatiSpec,
    Trajectory,
    solve_riccati,
    zero_sets,
)
from .quadrature import (
    HorizonPolicy,
    IntegralVerdict,
    _WK,
    _XK,
    _gk,
    classify_improper,
    cumulative,
    integrate_adaptive,
    weighted,
)

__all__ = [
    "DEFAULT_HORIZON",
    "BracketError",
    "NoRegularSolutionError",
    "SolutionRole",
    "SignPattern",
    "CLAUSES",
    "reciprocal_spec",
    "survives",
    "extremal_from_normal",
    "nu_path",
    "reg_boundary",
    "aitken_limit",
    "find_bracket",
    "classify_solution_role",
    "integral_verdicts",
    "sign_pattern_predict",
    "sign_pattern_observe",
    "sign_pattern_check",
    "linear_eta",
    "comparison_check",
    "extremal_log_integral_check",
]

DEFAULT_HORIZON = 50.0


class BracketError(ValueError):
    """Both bracket ends survive, or both blow up."""

    def __init__(self, message: str, probes=()):
        self.probes = list(probes)
        super().__init__(message)


class NoRegularSolutionError(BracketError):
    pass


# ---------------------------------------------------------------- reciprocal forms


def reciprocal_spec(spec: RiccatiSpec, form: str = "inverse") -> RiccatiSpec:
    """Equation satisfied by ``u = 1/x`` (``form="inverse"``) or ``v = -1/x`` (``"negative_inverse"``).

    u = 1/x:   u' + (-c) u^2 + (-b) u + (-a) = 0
    v = -1/x:  v' + c v^2 + (-b) v + a = 0
    """
    if form == "inverse":
        return RiccatiSpec(-spec.c, -spec.b, -spec.a, spec.t0)
    if form == "negative_inverse":
        return RiccatiSpec(spec.c, -spec.b, spec.a, spec.t0)
    raise ValueError(f"unknown reciprocal form {form!r}")


# ---------------------------------------------------------------- survival probing


def _horizon(spec: RiccatiSpec, t1: Optional[float], horizon: Optional[float]):
    t1 = spec.t0 if t1 is None else float(t1)
    T = t1 + DEFAULT_HORIZON if horizon is None else float(horizon)
    if T <= t1:
        raise ValueError("horizon must exceed t1")
    return t1, T


def survives(spec: RiccatiSpec, x_init: float, t1=None, horizon=None, tol=None) -> tuple:
    """(survived?, trajectory) for the solution through ``(t1, x_init)``."""
    t1, T = _horizon(spec, t1, horizon)
    traj = solve_riccati(spec, x_init, (t1, T), tol)
    return traj.blowup is None, traj


def aitken_limit(v0: float, v1: float, v2: float, max_ratio: float = 0.9):
    """Limit of a sequence sampled at horizons L/4, L/2, L, with its error estimate.

    Returns ``(v2, |v2 - v1|)`` unchanged when the differences do not contract
    geometrically, which covers both converged and runaway sequences.
    """
    d1, d2 = v1 - v0, v2 - v1
    if d1 == 0 or abs(d2) <= 1e-12 * max(1.0, abs(v2)):
        return v2, abs(d2)
    q = d2 / d1
    if not 0 < q < max_ratio:
        return v2, abs(d2)
    corr = d2 * q / (1.0 - q)
    return v2 + corr, abs(corr)


def reg_boundary(spec: RiccatiSpec, t1=None, bracket: Sequence[float] = (-1e4, 1e4), horizon=None,
                 rel_width: float = 1e-8, tol=None, check_sign: bool = True, extrapolate: bool = False) -> float:
    """Bisection estimate of the left end of the regular set at ``t1``.

    ``bracket[0]`` must blow up before the horizon and ``bracket[1]`` must survive.
    The finite-horizon end lies below the true one; with ``extrapolate`` the
    ends at a quarter, half and full horizon are combined by an Aitken step,
    which is exact for boundaries converging like 1/T or geometrically.
    """
    t1, T = _horizon(spec, t1, horizon)
    if extrapolate:
        ends = [reg_boundary(spec, t1, bracket, t1 + f * (T - t1), rel_width, tol, check_sign)
                for f in (0.25, 0.5, 1.0)]
        return aitken_limit(*ends)[0]
    if check_sign:
        cert = sign_certify(spec.a, (t1, T))
        if not cert.nonnegative:
            raise HypothesisError("a >= 0", "the regular set is a half-line only for a >= 0", cert)
    lo, hi = float(bracket[0]), float(bracket[1])
    s_lo = survives(spec, lo, t1, T, tol)[0]
    s_hi = survives(spec, hi, t1, T, tol)[0]
    if s_lo or not s_hi:
        what = "both ends survive" if s_lo and s_hi else ("neither end survives" if not s_hi and not s_lo
                                                           else "bracket reversed")
        raise BracketError(f"invalid bracket [{lo}, {hi}]: {what}", [(lo, s_lo), (hi, s_hi)])
    while hi - lo > rel_width * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if survives(spec, mid, t1, T, tol)[0]:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def find_bracket(spec: RiccatiSpec, t1=None, horizon=None, start: float = 0.0, limit: float = 1e4,
                 tol=None, both_directions: bool = False) -> tuple:
    """Widen geometrically from ``start`` until a (blow-up, survivor) pair is found.

    Returns ``(lo, hi, probes)``; raises NoRegularSolutionError when no probe in
    ``[-limit, limit]`` survives.
    """
    t1, T = _horizon(spec, t1, horizon)
    probes = []

    def probe(x):
        ok = survives(spec, x, t1, T, tol)[0]
        probes.append((float(x), bool(ok)))
        return ok

    def ladder(sign):
        out, step = [], 1.0
        while True:
            x = start + sign * step
            if abs(x) >= limit:
                out.append(sign * limit if abs(start) < limit else x)
                return out
            out.append(x)
            step *= 2.0

    s0 = probe(start)
    if s0:
        prev = start
        for x in ladder(-1.0):
            if not probe(x):
                if both_directions:
                    for y in ladder(1.0):
                        probe(y)
                return x, prev, probes
            prev = x
        raise BracketError(f"every probe down to {-limit} survives; no lower boundary", probes)
    prev = start
    for x in ladder(1.0):
        if probe(x):
            if both_directions:
                for y in ladder(-1.0):
                    probe(y)
            return prev, x, probes
        prev = x
    for x in ladder(-1.0):
        probe(x)
    raise NoRegularSolutionError(f"no probe in [-{limit}, {limit}] survives to t={T}", probes)


@dataclass(frozen=True)
class SolutionRole:
    role: str  # Regular | Normal | Extremal | NotRegular
    t1: float
    x_init: float
    evidence: dict = field(default_factory=dict)
    blowup: Optional[BlowUpReport] = None

    @property
    def regular(self) -> bool:
        return self.role in ("Regular", "Normal", "Extremal")

    def as_dict(self) -> dict:
        return jsonable({"role": self.role, "t1": self.t1, "x_init": self.x_init,
                         "blowup": self.blowup, **self.evidence})


def classify_solution_role(spec: RiccatiSpec, x_init: float, t1=None, probe: Optional[float] = None,
                           horizon=None, tol=None) -> SolutionRole:
    """Normal when both ``x_init +- eps`` survive, Extremal when exactly the lower probe fails."""
    t1, T = _horizon(spec, t1, horizon)
    eps = 1e-4 * max(1.0, abs(x_init)) if probe is None else float(probe)
    ok, base = survives(spec, x_init, t1, T, tol)
    ev = {"horizon": T, "eps": eps, "base": {"survived": ok, "t_end": base.t_end}}
    if not ok:
        return SolutionRole("NotRegular", t1, float(x_init), ev, base.blowup)
    up, tu = survives(spec, x_init + eps, t1, T, tol)
    dn, td = survives(spec, x_init - eps, t1, T, tol)
    ev["upper_probe"] = {"x": x_init + eps, "survived": up, "t_end": tu.t_end}
    ev["lower_probe"] = {"x": x_init - eps, "survived": dn, "t_end": td.t_end}
    if up and dn:
        role = "Normal"
    elif up != dn:
        role = "Extremal"
    else:
        role = "Regular"
    return SolutionRole(role, t1, float(x_init), ev)


# ---------------------------------------------------------------- tail integrals and the extremal formula


def _fd(f: Callable, s: np.ndarray) -> np.ndarray:
    e = 1e-6 * np.maximum(1.0, np.abs(s))
    return (f(s + e) - f(s - e)) / (2 * e)


def _refine_grid(grid: np.ndarray, rate: Callable, limit: float = 1.0) -> np.ndarray:
    """Split segments on which |rate| * h exceeds ``limit``."""
    r = np.abs(rate(grid))
    h = np.diff(grid)
    worst = np.maximum(r[:-1], r[1:]) * h
    parts = np.maximum(1, np.ceil(worst / limit)).astype(int)
    if np.all(parts == 1):
        return grid
    pieces = [np.linspace(a, b, p + 1)[:-1] for a, b, p in zip(grid[:-1], grid[1:], parts)]
    return np.append(np.concatenate(pieces), grid[-1])


def _fitted_tail(amp: Callable, rate: Callable, grid: np.ndarray, T: float, samples: int = 256):
    """Tail integral from the mean exponential or power-law decay over the last quarter.

    Used when the local log-slope oscillates; returns None when neither fit decays
    fast enough or the amplitude changes sign.
    """
    q = 0.25 * (T - grid[0])
    s = np.linspace(T - q, T, samples)
    inc, _ = _gk(rate, s[:-1], s[1:])
    R = np.append(np.cumsum(inc[::-1])[::-1], 0.0)  # int_s^T rate
    a = amp(s)
    if not (np.all(a > 0) or np.all(a < 0)):
        return None
    y = np.log(np.abs(a)) + R
    fits = []
    for x, kind in ((s - T, "exp"), (np.log(s / T), "pow")):
        A = np.column_stack([np.ones_like(x), x])
        coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
        rss = float(res[0]) if res.size else float(np.sum((A @ coef - y) ** 2))
        fits.append((rss, kind, coef))
    for rss, kind, (alpha, slope) in sorted(fits, key=lambda f: f[0]):
        if kind == "exp" and slope < 0:
            return math.copysign(math.exp(alpha) / -slope, a[-1])
        if kind == "pow" and slope < -1 and T > 0:
            return math.copysign(math.exp(alpha) * T / (-slope - 1.0), a[-1])
    return None


def tail_path(grid: np.ndarray, amp: Callable, rate: Callable, dlog_amp: Optional[Callable] = None):
    """N(t_k) = int_{t_k}^inf amp(s) exp(-int_{t_k}^s rate) ds on ``grid``.

    The part beyond ``grid[-1]`` uses the local model ``g ~ (1 + (s-T)/tau)^-p``
    matched to the first two log-derivatives of the integrand at ``T``, which
    is exact for both exponential and power-law decay.

    Returns ``(N, info)``; ``info['tail_share']`` is the fraction of each
    value contributed by the extrapolated tail.
    """
    grid = np.asarray(grid, float)
    a, b = grid[:-1], grid[1:]
    # exponent increments along each segment, and the weighted pieces
    seg_D, _ = _gk(rate, a, b)
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    nodes = c[:, None] + h[:, None] * _XK[None, :]
    flat = nodes.ravel()
    left = np.repeat(a, _XK.size)
    partial, _ = _gk(rate, left, flat)
    integrand = amp(flat) * np.exp(-partial)
    pieces = h * (integrand.reshape(nodes.shape) @ _WK)

    T = grid[-1]
    if dlog_amp is None:
        def dlog_amp(s):
            return _fd(amp, s) / amp(s)
    span = T - grid[0]
    d = min(b[-1] - a[-1], 0.01 * span) if span > 0 else 1e-3
    s3 = np.array([T, T - d, T - 2 * d])
    lp = dlog_amp(s3) - rate(s3)
    l1 = lp[0]
    l2 = (3 * lp[0] - 4 * lp[1] + lp[2]) / (2 * d)
    denom = l1 * l1 - l2
    model = "local"
    if l1 < 0 and denom > 0 and math.isfinite(denom):
        n_tail = amp(np.array([T]))[0] * (-l1) / denom
    else:
        # oscillating log-slope: fit the mean decay over the last quarter instead
        n_tail = _fitted_tail(amp, rate, grid, T)
        model = "fit"
        if n_tail is None:
            raise HypothesisError("nu converges", f"integrand not decaying at t={T} (log-slope {l1:.3g})")

    N = np.empty(grid.size)
    share = np.empty(grid.size)
    N[-1] = n_tail
    decay = 1.0  # exp(-int_{t_k}^T rate)
    share[-1] = 1.0
    for k in range(grid.size - 2, -1, -1):
        w = math.exp(-seg_D[k])
        N[k] = pieces[k] + w * N[k + 1]
        decay *= w
        share[k] = decay * n_tail / N[k] if N[k] != 0 else math.inf
    return N, {"tail_value": n_tail, "log_slope": l1, "log_curvature": l2, "tail_share": share,
               "tail_model": model}


def nu_path(spec: RiccatiSpec, x0_traj: Trajectory, t1=None, subdiv: int = 2):
    """nu_{x0}(t) on the refined trajectory grid from ``t1``; returns ``(grid, nu, info)``."""
    t1 = x0_traj.t_start if t1 is None else float(t1)
    if x0_traj.blowup is not None:
        raise HypothesisError("x0 regular", "seed solution blows up", x0_traj.blowup)
    grid = x0_traj.refined_times(subdiv)
    grid = grid[grid >= t1]
    if grid[0] > t1:
        grid = np.concatenate([[t1], grid])

    def rate(s):
        return 2 * spec.a(s) * x0_traj(s, 0) + spec.b(s)

    grid = _refine_grid(grid, rate)
    nu, info = tail_path(grid, spec.a, rate)
    return grid, nu, info


def extremal_from_normal(spec: RiccatiSpec, x0_traj: Trajectory, t1=None, subdiv: int = 2,
                         share_limit: float = 1e-6) -> Trajectory:
    """x*(t) = x0(t) - 1/nu_{x0}(t), as a Hermite trajectory.

    Slopes come from ``nu' = (2 a x0 + b) nu - a`` and the seed's own
    equation, so the Riccati residual of the result is an independent check.
    ``meta['t_reliable']`` is the last time at which the extrapolated tail
    contributes less than ``share_limit`` of nu.
    """
    grid, nu, info = nu_path(spec, x0_traj, t1, subdiv)
    if not np.all(np.isfinite(nu)) or np.any(nu == 0):
        raise HypothesisError("nu nonzero", "nu vanishes or is not finite")
    x0 = x0_traj(grid, 0)
    a, b, c = spec.a(grid), spec.b(grid), spec.c(grid)
    dx0 = -(a * x0 * x0 + b * x0 + c)
    dnu = (2 * a * x0 + b) * nu - a
    xs = x0 - 1.0 / nu
    dxs = dx0 + dnu / nu**2
    share = info["tail_share"]
    ok = np.nonzero(share <= share_limit)[0]
    t_rel = float(grid[ok[-1]]) if ok.size else float(grid[0])
    traj = Trajectory.from_hermite(
        "RealScalar", grid, xs, dxs, ("x",),
        meta={"nu": nu, "tail_share": share, "t_reliable": t_rel, "seed": "normal",
              "tail_value": info["tail_value"]},
    )
    return traj


# ---------------------------------------------------------------- integral verdicts and clause tables


def integral_verdicts(spec: RiccatiSpec, t0=None, policy: Optional[HorizonPolicy] = None) -> dict:
    """The I+ verdicts that the sign-pattern clauses refer to, keyed by name."""
    t0 = spec.t0 if t0 is None else float(t0)
    return {
        "I+[a,b]": classify_improper(weighted(spec.a, spec.b, t0).signal(), t0, policy),
        "I+[c,-b]": classify_improper(weighted(spec.c, -spec.b, t0).signal(), t0, policy),
        "I+[-c,-b]": classify_improper(weighted(-spec.c, -spec.b, t0).signal(), t0, policy),
    }


def _inf(v: IntegralVerdict, sign: int) -> bool:
    return v.diverges_plus if sign > 0 else v.diverges_minus


def _fin(v: IntegralVerdict) -> bool:
    return v.converged


# Each clause: id, certificates (a, c), integral condition, and a rule mapping
# (x_init relative to the boundary values) to a predicted sign sequence.
CLAUSES = (
    {"id": "Cor2.2", "case": "a>=0,c>=0", "needs": "I+[a,b]=+inf and I+[c,-b]=+inf",
     "test": lambda v: _inf(v["I+[a,b]"], 1) and _inf(v["I+[c,-b]"], 1)},
    {"id": "2.4.I*", "case": "a>=0,c>=0", "needs": "I+[a,b]=+inf",
     "test": lambda v: _inf(v["I+[a,b]"], 1)},
    {"id": "2.4.II*", "case": "a>=0,c>=0", "needs": "I+[c,-b]=+inf",
     "test": lambda v: _inf(v["I+[c,-b]"], 1)},
    {"id": "2.4.III*", "case": "a>=0,c>=0", "needs": "I+[a,b]<inf and I+[c,-b]<inf",
     "test": lambda v: _fin(v["I+[a,b]"]) and _fin(v["I+[c,-b]"])},
    {"id": "2.3.III", "case": "a>=0,c<=0", "needs": "I+[a,b]=+inf or I+[c,-b]=-inf (also read as I+[-c,-b]=+inf)",
     "test": lambda v: _inf(v["I+[a,b]"], 1) or _inf(v["I+[c,-b]"], -1) or _inf(v["I+[-c,-b]"], 1)},
    {"id": "2.3.VI", "case": "a>=0,c<=0", "needs": "I+[a,b]<inf and I+[-c,-b]<inf",
     "test": lambda v: _fin(v["I+[a,b]"]) and _fin(v["I+[-c,-b]"])},
)


@dataclass(frozen=True)
class SignPattern:
    """Ordered sign segments. ``segments`` holds intervals when observed, ``None`` when predicted."""

    signs: Optional[tuple]
    segments: Optional[tuple] = None
    clause: str = ""
    note: str = ""
    evidence: dict = field(default_factory=dict)

    @property
    def regular(self) -> bool:
        return self.signs is not None

    def as_dict(self) -> dict:
        return jsonable({
            "signs": list(self.signs) if self.signs is not None else None,
            "segments": [[lo, hi, s] for lo, hi, s in self.segments] if self.segments else None,
            "clause": self.clause, "note": self.note, "evidence": self.evidence,
        })


def _boundary_value(spec, t1, T, start, tol, eventually_positive=None):
    """x*(t1), or with ``eventually_positive`` the split between staying negative and turning positive."""
    if eventually_positive is None:
        lo, hi, _ = find_bracket(spec, t1, T, start=start, tol=tol)
        return reg_boundary(spec, t1, (lo, hi), T, tol=tol, check_sign=False)

    def turns(x):
        ok, tr = survives(spec, x, t1, T, tol)
        return ok and tr(tr.t_end, 0) > 0

    lo, hi = eventually_positive
    if turns(lo) or not turns(hi):
        return None
    while hi - lo > 1e-8 * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if turns(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def sign_pattern_predict(spec: RiccatiSpec, x_init: float, t0=None, horizon=None,
                         policy: Optional[HorizonPolicy] = None, tol=None) -> SignPattern:
    """Sign sequence of the solution through ``(t0, x_init)`` predicted by the clause tables."""
    t0, T = _horizon(spec, t0, horizon)
    ca = sign_certify(spec.a, (t0, T))
    cc = sign_certify(spec.c, (t0, T))
    if not ca.nonnegative:
        raise HypothesisError("a >= 0", "no clause table applies", ca)
    if cc.nonpositive and not cc.identically_zero:
        case = "a>=0,c<=0"
    elif cc.nonnegative and not cc.identically_zero:
        case = "a>=0,c>=0"
    else:
        raise HypothesisError("sign of c", "c is neither certified <= 0 nor >= 0", cc)
    v = integral_verdicts(spec, t0, policy)
    ev = {"certificates": {"a": ca.as_dict(), "c": cc.as_dict()},
          "integrals": {k: x.as_dict() for k, x in v.items()}, "case": case}
    fired = next((cl for cl in CLAUSES if cl["case"] == case and cl["test"](v)), None)
    x = float(x_init)

    if case == "a>=0,c<=0":
        if x > 0:
            return SignPattern(("+",), None, "2.3.I", "positive start stays positive", ev)
        if x == 0:
            return SignPattern(("0", "+"), None, "2.3.I", "zero start turns positive", ev)
        xs = _boundary_value(spec, t0, T, 0.0, tol)
        ev["x_star"] = xs
        if abs(x - xs) <= 1e-7 * max(1.0, abs(xs)):
            return SignPattern(("-",), None, "2.3.II", "the extremal solution is negative", ev)
        if x < xs:
            return SignPattern(None, None, "Lemma2.1", "below the extremal value: not regular", ev)
        if fired is None:
            return SignPattern(None, None, "", "no clause fired for the integral verdicts", ev)
        if fired["id"] == "2.3.III":
            return SignPattern(("-", "0", "+"), None, "2.3.III", fired["needs"], ev)
        xn = _boundary_value(spec, t0, T, 0.0, tol, eventually_positive=(xs + 1e-9, 0.0))
        ev["x_normal_negative"] = xn
        if xn is not None and x > xn:
            return SignPattern(("-", "0", "+"), None, "2.3.VI", fired["needs"], ev)
        return SignPattern(("-",), None, "2.3.VI", "at or below the negative normal solution", ev)

    # a >= 0, c >= 0
    if fired is not None and fired["id"] == "Cor2.2":
        return SignPattern(None, None, "Cor2.2", "no regular solution exists", ev)
    try:
        xs = _boundary_value(spec, t0, T, 0.0, tol)
    except NoRegularSolutionError:
        return SignPattern(None, None, "Thm2.4 premise", "no regular solution found", ev)
    ev["x_star"] = xs
    if x < xs - 1e-7 * max(1.0, abs(xs)):
        return SignPattern(None, None, "Lemma2.1", "below the extremal value: not regular", ev)
    if fired is None:
        return SignPattern(None, None, "", "no clause fired for the integral verdicts", ev)
    cid = fired["id"]
    if cid == "2.4.I*":
        return SignPattern(("+",), None, cid, "every regular solution is positive", ev)
    if cid == "2.4.II*":
        if x > 0:
            return SignPattern(("+", "0", "-"), None, cid, fired["needs"], ev)
        return SignPattern(("0", "-") if x == 0 else ("-",), None, cid, fired["needs"], ev)
    # III*: positive starts below the positive normal solution turn negative
    if x < 0:
        return SignPattern(("-",), None, cid, fired["needs"], ev)
    if x == 0:
        return SignPattern(("0", "-"), None, cid, fired["needs"], ev)
    return SignPattern(None, None, cid, "positive start: sign depends on the positive normal solution", ev)


def sign_pattern_observe(traj: Trajectory, component=0, tol: float = 1e-10) -> SignPattern:
    """Observed sign segments of a trajectory component."""
    lo, hi = traj.span
    items = zero_sets(traj, component, tol_abs=tol)
    segs = []
    cursor = lo
    for it in items:
        if it.start > cursor:
            mid = 0.5 * (cursor + it.start)
            segs.append((cursor, it.start, "+" if traj(mid, component) > 0 else "-"))
        segs.append((it.start, it.end, "0"))
        cursor = it.end
    if cursor < hi:
        mid = 0.5 * (cursor + hi)
        segs.append((cursor, hi, "+" if traj(mid, component) > 0 else "-"))
    merged = []
    for s in segs:
        if merged and merged[-1][2] == s[2]:
            merged[-1] = (merged[-1][0], s[1], s[2])
        else:
            merged.append(s)
    return SignPattern(tuple(s[2] for s in merged), tuple(merged), "observed")


def sign_pattern_check(predicted: SignPattern, traj: Trajectory, tol: float = 1e-10, component=0) -> Record:
    obs = sign_pattern_observe(traj, component, tol)
    det = {"predicted": predicted.signs, "observed": obs.signs, "segments": obs.segments,
           "clause": predicted.clause}
    if predicted.signs is None:
        return Record("sign_pattern", "NotApplicable", det)
    for i, (p, o) in enumerate(zip(predicted.signs, obs.signs)):
        if p != o:
            det["first_mismatch"] = {"index": i, "expected": p, "got": o, "t": obs.segments[i][0]}
            return Record("sign_pattern", "Fail", det)
    if len(predicted.signs) != len(obs.signs):
        i = min(len(predicted.signs), len(obs.signs))
        t = obs.segments[i][0] if i < len(obs.segments) else traj.t_end
        det["first_mismatch"] = {"index": i, "expected": predicted.signs[i:] or None,
                                 "got": obs.signs[i:] or None, "t": t}
        return Record("sign_pattern", "Fail", det)
    return Record("sign_pattern", "Pass", det)


# ---------------------------------------------------------------- comparison theorem


def linear_eta(spec: RiccatiSpec, eta_init: float, span, tol=None) -> Trajectory:
    """Solution of ``eta' + b eta + c = 0``; for a >= 0 it satisfies the comparison inequality."""
    lin = RiccatiSpec(0.0, spec.b, spec.c, spec.t0)
    return solve_riccati(lin, eta_init, span, tol, escape=np.inf)


def comparison_check(spec1: RiccatiSpec, spec: RiccatiSpec, x1_traj: Trajectory,
                     eta0_traj: Optional[Trajectory], x_init: float, slack: float = 1e-7,
                     tol=None) -> Record:
    """Hypothesis integral of the comparison theorem plus the pointwise domination ``x0 >= x1``."""
    t0, T = x1_traj.span
    cert = sign_certify(spec.a, (t0, T))
    if not cert.nonnegative:
        raise HypothesisError("a >= 0", evidence=cert)
    if eta0_traj is None:
        eta0_traj = linear_eta(spec, float(x1_traj(t0, 0)), (t0, T), tol)
    T = min(T, eta0_traj.t_end)
    if x_init < x1_traj(t0, 0) - slack:
        raise HypothesisError("x_init >= x1(t0)")
    x1 = lambda s: x1_traj(s, 0)
    eta = lambda s: eta0_traj(s, 0)
    bp = np.union1d(x1_traj.times, eta0_traj.times)
    bp = bp[bp <= T]

    def gap(s):
        return ((spec1.a(s) - spec.a(s)) * x1(s) ** 2 + (spec1.b(s) - spec.b(s)) * x1(s)
                + spec1.c(s) - spec.c(s))

    expo = cumulative(lambda s: spec.a(s) * (eta(s) + x1(s)) + spec.b(s), t0, T, breakpoints=bp)
    H = cumulative(lambda s: np.exp(expo(s)) * gap(s), t0, T, breakpoints=bp)
    grid = np.linspace(t0, T, 401)
    h = H(grid)
    det = {"hypothesis_min": float(np.min(h)), "hypothesis_trace": np.column_stack([grid, h])[::20],
           "certificate_a": cert.as_dict()}
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.min(h) < -1e-9 * scale:
        det["hypothesis_violated_at"] = float(grid[np.argmin(h)])
        return Record("comparison", "HypothesisViolated", det)
    x0 = solve_riccati(spec, x_init, (t0, T), tol)
    det["x0_blowup"] = x0.blowup
    if x0.blowup is not None:
        det["violation"] = math.inf
        return Record("comparison", "ConclusionViolated", det)
    tt = np.union1d(x0.refined_times(2), x1_traj.times[x1_traj.times <= T])
    diff = x1(tt) - x0(tt, 0)
    viol = float(np.max(diff))
    det["violation"] = viol
    return Record("comparison", "Pass" if viol < slack * max(1.0, np.max(np.abs(x1(tt)))) else
                  "ConclusionViolated", det)


# ---------------------------------------------------------------- log-integral identity


def extremal_log_integral_check(spec: RiccatiSpec, x0_traj: Trajectory, t: float, t0=None,
                                rtol: float = 1e-6) -> Record:
    """Compare int_{t0}^t a x* computed directly against the closed identity in terms of ``x0``.

    identity: -ln nu(t0) + ln[ exp(int a x0) * int_t^inf (a x0/x0(t0)) exp(int_{t0}^s (c/x0 - a x0)) ds ]
    """
    t0 = x0_traj.t_start if t0 is None else float(t0)
    grid = x0_traj.refined_times(4)
    vals = x0_traj(grid, 0)
    if np.any(vals == 0) or (np.min(vals) < 0 < np.max(vals)):
        raise HypothesisError("x0 != 0", "the seed solution vanishes on its span")
    xs = extremal_from_normal(spec, x0_traj, t0)
    nu0 = xs.meta["nu"][0]
    direct = integrate_adaptive(lambda s: spec.a(s) * xs(s, 0), t0, t, breakpoints=xs.times)[0]
    ax0 = integrate_adaptive(lambda s: spec.a(s) * x0_traj(s, 0), t0, t, breakpoints=x0_traj.times)[0]
    x00 = float(x0_traj(t0, 0))

    def rate(s):
        x = x0_traj(s, 0)
        return -(spec.c(s) / x - spec.a(s) * x)

    def amp(s):
        return spec.a(s) * x0_traj(s, 0) / x00

    def dlog_amp(s):
        x = x0_traj(s, 0)
        dx = -(spec.a(s) * x * x + spec.b(s) * x + spec.c(s))
        return _fd(spec.a, s) / spec.a(s) + dx / x

    g = grid[grid >= t]
    if g[0] > t:
        g = np.concatenate([[t], g])
    g = _refine_grid(g, rate)
    N, info = tail_path(g, amp, rate, dlog_amp)
    R = integrate_adaptive(rate, t0, t, breakpoints=x0_traj.times)[0]
    identity = -math.log(nu0) + ax0 - R + math.log(N[0])
    diff = direct - identity
    det = {"t": t, "direct": direct, "identity": identity, "difference": diff, "nu_t0": nu0,
           "tail_share": float(info["tail_share"][0])}
    ok = abs(diff) <= rtol * max(1.0, abs(direct))
    return Record("extremal_log_integral", "Pass" if ok else "Discrepancy", det)
