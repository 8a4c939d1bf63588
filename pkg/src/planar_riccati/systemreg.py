"""Regularity taxonomy of planar systems, minimal solutions and ratio bounds.

A system is classified through the regular set of its Riccati equation
``x' + a12 x^2 + B x - a21 = 0`` at ``t1``: the initial ratios ``psi/phi``
whose solutions survive to the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._report import HypothesisError, Record, jsonable
from .coeffexpr import as_expr, sign_certify
from .integrate import RiccatiSpec, SystemSpec, Trajectory, lift_riccati, solve_riccati
from .quadrature import HorizonPolicy, Signal, classify_improper, cumulative, windowed_bounded
from .riccati import (
    NoRegularSolutionError,
    classify_solution_role,
    extremal_from_normal,
    find_bracket,
    survives,
)

__all__ = [
    "REGULARITY_CLASSES",
    "SystemRegularityClass",
    "classify_regularity",
    "minimal_solution",
    "ratio_limit",
    "ratio_box_check",
]

REGULARITY_CLASSES = ("NotRegular", "Exotic", "NormalSystem", "ExtremalSystem", "SuperExtremal", "Undetermined")

PROBE_LIMIT = 1e4
EXOTIC_WIDTH = 1e-6
DRIFT_RATIO = 0.75


@dataclass
class SystemRegularityClass:
    cls: str
    boundaries: tuple = ()  # reg-set endpoints of the Riccati equation at t1, per horizon
    witnesses: tuple = ()  # extremal initial ratios
    evidence: dict = field(default_factory=dict)

    def __str__(self):
        return self.cls

    def as_dict(self) -> dict:
        return jsonable({"class": self.cls, "boundaries": self.boundaries, "witnesses": self.witnesses,
                         **self.evidence})


def _bisect(spec, t1, T, fail, ok, tol, rel_width=1e-8):
    """Boundary between a blowing-up initial value ``fail`` and a survivor ``ok``."""
    while abs(ok - fail) > rel_width * max(1.0, abs(ok)):
        mid = 0.5 * (ok + fail)
        if mid in (ok, fail):
            break
        if survives(spec, mid, t1, T, tol)[0]:
            ok = mid
        else:
            fail = mid
    return 0.5 * (ok + fail)


def _ladder(limit=PROBE_LIMIT):
    xs = [0.0]
    s = 1.0 / 64
    while s < limit:
        xs += [s, -s]
        s *= 2.0
    xs += [limit, -limit]
    return sorted(xs)


def _reg_interval(spec, t1, T, tol, limit=PROBE_LIMIT):
    """Scan a symmetric geometric ladder, then bisect both ends of the survivor run.

    Returns ``(lo, hi, probes)`` where ``lo``/``hi`` is ``-inf``/``inf`` when the
    ladder end itself survives, or ``None`` when nothing survives.
    """
    xs = _ladder(limit)
    alive = [bool(survives(spec, x, t1, T, tol)[0]) for x in xs]
    probes = list(zip(xs, alive))
    idx = [i for i, a in enumerate(alive) if a]
    if not idx:
        return None, probes
    runs = np.split(np.asarray(idx), np.nonzero(np.diff(idx) > 1)[0] + 1)
    i0, i1 = int(runs[0][0]), int(runs[-1][-1])
    lo = -math.inf if i0 == 0 else _bisect(spec, t1, T, xs[i0 - 1], xs[i0], tol)
    hi = math.inf if i1 == len(xs) - 1 else _bisect(spec, t1, T, xs[i1 + 1], xs[i1], tol)
    return (lo, hi, len(runs)), probes


def _isolated_survivor(spec, t1, T, tol, limit=PROBE_LIMIT, n=4001):
    """Look for a thin survivor band missed by the ladder: a sign flip of the escape direction."""
    xs = np.concatenate([-np.geomspace(limit, 1e-3, n // 2), [0.0], np.geomspace(1e-3, limit, n // 2)])
    sides = []
    for x in xs[:: max(1, len(xs) // 200)]:
        ok, tr = survives(spec, float(x), t1, T, tol)
        sides.append((float(x), 0 if ok else (1 if tr.blowup.direction == "PlusInfinity" else -1)))
    flips = [(a, b) for a, b in zip(sides[:-1], sides[1:]) if a[1] != b[1] and 0 not in (a[1], b[1])]
    return flips


def _drift(values):
    """Aitken limit of boundary values at horizons L/4, L/2, L; None when not contracting."""
    v0, v1, v2 = values
    d1, d2 = v1 - v0, v2 - v1
    scale = max(1.0, abs(v2))
    if abs(d2) <= 1e-7 * scale:
        return v2, abs(d2), 0.0
    if d1 == 0 or d2 / d1 <= 0:
        return None, math.inf, math.nan
    q = d2 / d1
    if q > DRIFT_RATIO:
        return None, math.inf, q
    return v2 + d2 * q / (1.0 - q), abs(d2 * q / (1.0 - q)), q


def classify_regularity(sys: SystemSpec, horizon: float, t1: Optional[float] = None, tol=None,
                        drift_tol: float = 0.05) -> SystemRegularityClass:
    """Classify the system from the regular set of its Riccati equation at three horizons.

    For sign-definite ``a12`` the regular set is a half-line whose endpoint
    moves monotonically with the horizon. An endpoint whose drift contracts
    (geometrically or like a power of the horizon) marks one extremal solution;
    one that escapes the probe range means normal solutions only. For
    sign-indefinite ``a12`` both ends are probed; two converging finite ends
    mean two extremal solutions.
    """
    t1 = sys.t0 if t1 is None else float(t1)
    H = float(horizon)
    if H <= t1:
        raise ValueError("horizon must exceed t1")
    spec = sys.riccati()
    cert = sign_certify(sys.a12, (t1, H))
    definite = cert.nonnegative or cert.nonpositive
    horizons = tuple(t1 + f * (H - t1) for f in (0.25, 0.5, 1.0))
    found = []
    n_probes = []
    for T in horizons:
        res, probes = _reg_interval(spec, t1, T, tol)
        n_probes.append(len(probes))
        found.append(res)
    ev = {"horizons": list(horizons), "a12_sign": cert.verdict, "probes_per_horizon": n_probes}

    if all(r is None for r in found):
        if not definite:
            flips = _isolated_survivor(spec, t1, H, tol)
            ev["escape_direction_flips"] = flips
            if flips:
                return SystemRegularityClass("Undetermined", (), (), ev | {"note": "thin survivor band suspected"})
        return SystemRegularityClass("NotRegular", (), (), ev)
    if found[-1] is None:
        return SystemRegularityClass("Undetermined", tuple(found), (), ev | {"note": "probes disagree across horizons"})
    # the regular set shrinks as the horizon grows, so early misses are contradictions only at the end
    if any(r is None for r in found):
        return SystemRegularityClass("Undetermined", tuple(found), (), ev | {"note": "probes disagree across horizons"})

    ends = [(r[0], r[1]) for r in found]
    ev["survivor_runs"] = [r[2] for r in found]
    lo, hi = ends[-1]

    def limit_of(k):
        vals = [e[k] for e in ends]
        if any(math.isinf(v) for v in vals):
            return (vals[-1], 0.0, 0.0) if all(v == vals[-1] for v in vals) else (None, math.inf, math.nan)
        return _drift(vals)

    lo_lim, hi_lim = limit_of(0), limit_of(1)
    ev["lower_limit"] = {"value": lo_lim[0], "error": lo_lim[1], "drift_ratio": lo_lim[2]}
    ev["upper_limit"] = {"value": hi_lim[0], "error": hi_lim[1], "drift_ratio": hi_lim[2]}

    def settled(lim):
        v, err, _ = lim
        return v is not None and (math.isinf(v) or err <= drift_tol * max(1.0, abs(v)))

    finite = [v for v in (lo, hi) if math.isfinite(v)]
    width = [e[1] - e[0] for e in ends]
    if len(finite) == 2 and width[-1] < EXOTIC_WIDTH and width[-2] < EXOTIC_WIDTH:
        return SystemRegularityClass("Exotic", tuple(ends), (0.5 * (lo + hi),), ev)
    if not finite:
        return SystemRegularityClass("NormalSystem", tuple(ends), (), ev)
    if definite and len(finite) == 2:
        return SystemRegularityClass("Undetermined", tuple(ends), (),
                                     ev | {"note": "bounded regular set for sign-definite a12"})
    if len(finite) == 2:
        if settled(lo_lim) and settled(hi_lim):
            return SystemRegularityClass("SuperExtremal", tuple(ends), (lo_lim[0], hi_lim[0]), ev)
        return SystemRegularityClass("Undetermined", tuple(ends), (), ev | {"note": "boundaries drift with the horizon"})
    lim = lo_lim if math.isfinite(lo) else hi_lim
    if settled(lim):
        return SystemRegularityClass("ExtremalSystem", tuple(ends), (lim[0],), ev)
    if lim[0] is None and not math.isnan(lim[2]):
        # drift not contracting: the end is running away
        return SystemRegularityClass("Undetermined", tuple(ends), (),
                                     ev | {"note": "boundary runs away with the horizon; normal system suspected"})
    return SystemRegularityClass("Undetermined", tuple(ends), (), ev | {"note": "boundary drifts with the horizon"})


# ---------------------------------------------------------------- minimal solution


def _weighted_phi_integrand(sys: SystemSpec, pair: Trajectory, t1: float):
    """a12 J_S / phi^2 as a signal on the pair's span, in log space."""
    S = cumulative(sys.S, t1, pair.t_end, breakpoints=pair.times)

    def f(t):
        t = np.asarray(t, float)
        return sys.a12(t) * np.exp(S(t) - 2.0 * pair(t, "logabsphi"))

    return Signal(f, (t1, pair.t_end), pair.times, "a12*J_S/phi^2")


def _contracting(verdict, policy: HorizonPolicy) -> bool:
    """Increments shrink geometrically (power-law tails converge too slowly for the absolute test)."""
    partial = [p for _, p in verdict.evidence]
    incs = np.diff(partial)
    if incs.size < 4:
        return False
    r = np.abs(incs[-3:] / incs[-4:-1])
    return bool(np.all(np.sign(incs[-4:]) == np.sign(incs[-1])) and np.all(r <= policy.converge_ratio))


def _seed(spec: RiccatiSpec, t1: float, T: float, tol):
    lo, hi, probes = find_bracket(spec, t1, T, tol=tol)
    # stay clear of the boundary: near it a finite horizon cannot tell normal from extremal
    x = hi + max(1.0, abs(hi))
    for _ in range(8):
        role = classify_solution_role(spec, x, t1, horizon=T, tol=tol)
        if role.role == "Normal":
            return x, role
        x = x + max(1.0, abs(x))
    raise HypothesisError("normal seed", "no normal solution found above the regular boundary")


def seed_pair(sys: SystemSpec, t1: float, T: float, tol=None, x_init: Optional[float] = None):
    """A regular ratio solution on [t1, T] (normal unless ``x_init`` is given) and its lift."""
    spec = sys.riccati()
    if x_init is None:
        try:
            x_init, _ = _seed(spec, t1, T, tol)
        except NoRegularSolutionError as exc:
            raise HypothesisError("regular seed", "no regular solution found", exc.probes) from exc
    x0 = solve_riccati(spec, x_init, (t1, T), tol)
    if x0.blowup is not None:
        raise HypothesisError("regular seed", f"psi0/phi0 = {x_init} blows up at {x0.blowup.t_escape:.6g}")
    return x0, lift_riccati(sys, x0, 1.0, t1)


def extremal_pair(sys: SystemSpec, x0: Trajectory, t1: float):
    """Extremal ratio from a normal seed and the pair it generates, phi(t1) = 1."""
    xs = extremal_from_normal(sys.riccati(), x0, t1)
    return xs, lift_riccati(sys, xs, 1.0, t1)


def minimal_solution(sys: SystemSpec, horizon: float = 40.0, seed: Optional[Sequence[float]] = None,
                     t1: Optional[float] = None, tol=None, windows: int = 6):
    """Minimal pair ``(phi*, psi*)`` with ``phi*(t1) = 1`` and its verification record.

    The extremal ratio comes from ``x* = x0 - 1/nu_{x0}`` on a normal seed;
    ``seed=(phi0, psi0)`` supplies the regular solution whose weighted integral
    gates the construction. Returns ``(pair, record)``.
    """
    t1 = sys.t0 if t1 is None else float(t1)
    T = float(horizon)
    x_init = None
    if seed is not None:
        phi0, psi0 = map(float, seed)
        if phi0 == 0:
            raise HypothesisError("regular seed", "phi0 must be nonzero")
        x_init = psi0 / phi0
    x0, pair0 = seed_pair(sys, t1, T, tol, x_init)
    x_init = float(x0(t1, 0))

    policy = HorizonPolicy(t_max=T)
    gate = classify_improper(_weighted_phi_integrand(sys, pair0, t1), t1, policy)
    if not (gate.converged or _contracting(gate, policy)):
        raise HypothesisError("weighted integral of the seed converges",
                              f"int a12 J_S/phi0^2 is {gate.kind}", gate)
    part = cumulative(_weighted_phi_integrand(sys, pair0, t1).fn, t1, T, breakpoints=pair0.times)
    tg = pair0.times
    tail = gate.value - part(tg)
    vanish = tg[np.abs(tail) <= 1e-12 * max(1.0, abs(gate.value))]
    t_nonzero_ok = vanish.size == 0 or float(vanish[0]) >= T - 0.05 * (T - t1)

    xs, pair = extremal_pair(sys, x0, t1)
    t_rel = float(xs.meta["t_reliable"])

    t_check = t_rel if t_rel > t1 + 0.5 * (T - t1) else xs.t_end
    grid = t1 + (t_check - t1) * np.linspace(0.25, 1.0, windows)
    own = classify_improper(_weighted_phi_integrand(sys, pair, t1), t1, HorizonPolicy(t_max=t_check))
    log_ratio = pair(grid, "logabsphi") - pair0(grid, "logabsphi")
    decreasing = bool(np.all(np.diff(log_ratio) < 0))
    ratio_small = bool(log_ratio[-1] - log_ratio[0] < math.log(0.1))
    verdict = "Pass" if own.kind.startswith("Diverges") and decreasing and ratio_small else "Inconclusive"
    rec = Record("minimal_solution", verdict, {
        "t1": t1, "horizon": T, "t_reliable": t_rel, "seed_ratio": x_init,
        "seed_weighted_integral": gate, "seed_tail_nonzero": t_nonzero_ok,
        "minimal_weighted_integral": own,
        "ratio_times": grid, "log_ratio_to_seed": log_ratio,
        "ratio_decreasing": decreasing, "seed_gate_mode": "converged" if gate.converged else "contracting", "x_star_t1": float(xs(t1, 0)),
    })
    return pair, rec


# ---------------------------------------------------------------- ratio limits


def _component_values(traj: Trajectory, t, component):
    """Values with overflow-safe magnitude when a ``logabsphi`` column is present."""
    v = traj(t, component)
    if component == "phi" and "logabsphi" in traj.components:
        return np.sign(v), traj(t, "logabsphi")
    with np.errstate(divide="ignore"):
        return np.sign(v), np.log(np.abs(v))


def ratio_limit(sol1: Trajectory, sol2: Trajectory, tail_fraction: float = 0.25, component="phi",
                samples: int = 401) -> Record:
    """Tail estimate of lim phi1/phi2 from three consecutive tail windows.

    Aitken acceleration is applied when the window values contract
    geometrically; the error bar is the size of the last correction.
    """
    lo = max(sol1.t_start, sol2.t_start)
    hi = min(sol1.t_end, sol2.t_end)
    if hi <= lo:
        raise ValueError("trajectories do not overlap")
    t_tail = hi - tail_fraction * (hi - lo)
    t = np.linspace(t_tail, hi, samples)
    s2, l2 = _component_values(sol2, t, component)
    if np.any(s2 == 0) or np.any(np.diff(s2) != 0):
        raise ValueError("denominator vanishes on the tail")
    s1, l1 = _component_values(sol1, t, component)
    with np.errstate(over="ignore", under="ignore"):
        r = s1 * s2 * np.exp(l1 - l2)
    k = np.linspace(0, samples - 1, 4).astype(int)[1:]
    m = r[k]
    d1, d2 = m[1] - m[0], m[2] - m[1]
    limit, err = float(m[2]), abs(float(d2))
    if d1 != 0 and 0 < d2 / d1 < 1 and d2 != d1:
        acc = m[2] - d2 * d2 / (d2 - d1)
        err = max(abs(acc - m[2]) * 1e-3, abs(d2) * (d2 / d1) ** 2)
        limit = float(acc)
    lr = l1 - l2
    scale = max(1.0, abs(limit))
    if lr[-1] > math.log(1e12) and np.all(np.diff(lr[k]) > 0):
        verdict = "Unbounded"
    elif abs(limit) <= max(err, 1e-12) or lr[-1] < math.log(1e-12):
        verdict = "Zero"
    elif err <= 1e-3 * scale:
        verdict = "Finite"
    else:
        verdict = "Undetermined"
    return Record("ratio_limit", verdict, {"limit": limit, "error": err, "window_values": m,
                                           "tail": [t_tail, hi], "component": component})


# ---------------------------------------------------------------- Theorem-style ratio box


def _deriv(expr, t):
    h = 1e-5 * np.maximum(1.0, np.abs(t))
    return (expr(t + h) - expr(t - h)) / (2 * h)


def _strict(expr, interval, sign):
    cert = sign_certify(sign * expr, interval)
    ok = cert.nonnegative and not cert.identically_zero
    mn = min((v for _, v in cert.witnesses), default=math.nan)
    return {"ok": bool(ok and mn > 0) if cert.witnesses else ok, "certificate": cert.as_dict()}


def _gates(sys, a1, a2, c1, c2, span, samples=20001):
    g = {}
    g["-a1 > 0"] = _strict(-a1, span, 1.0)
    g["a2 > 0"] = _strict(a2, span, 1.0)
    g["-c1 > 0"] = _strict(-c1, span, 1.0)
    g["c2 > 0"] = _strict(c2, span, 1.0)
    for name, e in (("a12 - a1 >= 0", sys.a12 - a1), ("a2 - a12 >= 0", a2 - sys.a12),
                    ("-a21 - c1 >= 0", -sys.a21 - c1), ("c2 + a21 >= 0", c2 + sys.a21)):
        cert = sign_certify(e, span)
        g[name] = {"ok": cert.nonnegative, "certificate": cert.as_dict()}
    if not all(g[k]["ok"] for k in ("-a1 > 0", "a2 > 0", "-c1 > 0", "c2 > 0")):
        for j in (1, 2):
            g[f"B inequality j={j}"] = {"ok": False, "skipped": "needs the strict sign gates"}
        return g
    t = np.linspace(span[0], span[1], samples)
    B = sys.B(t)
    for j, (a, c) in enumerate(((a1, c1), (a2, c2)), start=1):
        av, cv = a(t), c(t)
        rhs = 0.5 * (_deriv(a, t) / av - _deriv(c, t) / cv) + 2 * (-1) ** j * np.sqrt(av * cv)
        margin = B - rhs
        tolm = 1e-7 * (1.0 + np.abs(B) + np.abs(rhs))
        i = int(np.argmin(margin + tolm))
        g[f"B inequality j={j}"] = {"ok": bool(np.all(margin >= -tolm)), "min_margin": float(margin[i]),
                                    "at": float(t[i]), "samples": samples}
    return g


def ratio_box_check(sys: SystemSpec, a1, a2, c1, c2, inits: Sequence, horizon: float = 100.0,
                    t1: Optional[float] = None, slack: float = 1e-7, tol=None) -> Record:
    """Band ``-sqrt(c2/a2) <= psi/phi <= sqrt(c1/a1)`` for initial ratios in the band.

    ``inits`` are initial ratios psi/phi at ``t1``. Every hypothesis gate is
    certified first; any failure raises HypothesisError naming the gate. For
    ratios strictly inside the band the weighted integral
    ``I_phi(t) = int a12 exp(-int (B + 2 a12 x))`` is tested for boundedness.
    """
    a1, a2, c1, c2 = map(as_expr, (a1, a2, c1, c2))
    t1 = sys.t0 if t1 is None else float(t1)
    T = float(horizon)
    gates = _gates(sys, a1, a2, c1, c2, (t1, T))
    for name, g in gates.items():
        if not g["ok"]:
            raise HypothesisError(name, "gate not certified on the horizon", g)

    def band(t):
        return -np.sqrt(c2(t) / a2(t)), np.sqrt(c1(t) / a1(t))

    spec = sys.riccati()
    lo0, hi0 = (float(v) for v in band(np.array(t1)))
    rows = []
    all_ok = True
    for r0 in inits:
        r0 = float(r0)
        row = {"init_ratio": r0}
        if not (lo0 - slack <= r0 <= hi0 + slack):
            row["status"] = "outside band"
            rows.append(row)
            continue
        traj = solve_riccati(spec, r0, (t1, T), tol, lift=(sys.a12, sys.a11))
        if traj.blowup is not None:
            row.update(status="blow-up", t_escape=traj.blowup.t_escape)
            all_ok = False
            rows.append(row)
            continue
        t = traj.refined_times(2)
        x = traj(t, "x")
        blo, bhi = band(t)
        viol = float(max(np.max(blo - x), np.max(x - bhi)))
        row.update(status="contained" if viol <= slack else "escaped", max_violation=viol, samples=t.size)
        all_ok &= viol <= slack
        if lo0 < r0 < hi0:
            S = cumulative(sys.S, t1, T, breakpoints=traj.times)
            L = traj(t, "L")
            w = sys.a12(t) * np.exp(S(t) - 2.0 * L)
            I = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(t))])
            b = windowed_bounded(t, I, t1, T)
            row["I_phi"] = {"sup": float(np.max(np.abs(I))), "final": float(I[-1]), **b}
            all_ok &= b["bounded"]
        rows.append(row)
    verdict = "Contained" if all_ok else "Violated"
    return Record("ratio_box_check", verdict, {"gates": gates, "band_at_t1": [lo0, hi0], "inits": rows,
                                               "span": [t1, T], "slack": slack})
