"""Oscillation of planar systems through the complex Riccati solution.

With ``z0 = x0 + i y0`` the solution of the system Riccati equation with
``z0(t0) = i`` and ``Theta = int a12 y0``, every real solution is, up to the
factor ``mu``,

    phi = J_{S/2} / sqrt(y0) * sin(Theta + nu)
    psi = J_{S/2} sqrt(x0^2 + y0^2) / sqrt(y0) * cos(Theta + nu - alpha0),

``alpha0 = arctan(x0 / y0)``. Zeros therefore sit where ``Theta + nu`` or
``Theta + nu - alpha0 - pi/2`` crosses a multiple of pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._report import HypothesisError, Record, jsonable
from .coeffexpr import as_expr, sign_certify
from .integrate import SystemSpec, Trajectory, solve_riccati_complex, solve_system
from .quadrature import HorizonPolicy, classify_improper, cumulative, weighted, windowed_bounded

__all__ = [
    "CLASSES",
    "FundamentalFrame",
    "OscillationClass",
    "fundamental_frame",
    "level_crossings",
    "oscillation_status",
    "classify_oscillation",
    "leighton_test",
    "second_order_system",
    "principles_check",
    "ring_radii",
]

CLASSES = ("Oscillatory", "NonOscillatory", "WeakOscillatory", "WeakNonOscillatory",
           "HalfOscillatory", "Singular", "Undetermined")


class FundamentalFrame:
    """Amplitude–phase description of all real solutions built from ``z0``."""

    def __init__(self, sys: SystemSpec, z: Trajectory):
        self.sys = sys
        self.z = z
        self.span = z.span
        self.checks: dict = {}

    # scalar fields
    def x0(self, t):
        return self.z(t, "x")

    def y0(self, t):
        return np.exp(self.z(t, "lny"))

    def theta(self, t):
        return self.z(t, "theta")

    def lam(self, t):
        """log J_{S/2}."""
        return self.z(t, "lam")

    def alpha0(self, t):
        return np.arctan(self.x0(t) / self.y0(t))

    def _parts(self, t):
        v = self.z(t)
        x0, y0 = v[..., 0], np.exp(v[..., 1])
        amp = np.exp(v[..., 3] - 0.5 * v[..., 1])
        return x0, y0, v[..., 2], amp

    def plus(self, t):
        """(phi+, psi+) with phi+(t0) = 1, psi+(t0) = 0."""
        x0, y0, th, amp = self._parts(t)
        return amp * np.cos(th), amp * (x0 * np.cos(th) - y0 * np.sin(th))

    def minus(self, t):
        """(phi-, psi-) with phi-(t0) = 0, psi-(t0) = 1."""
        x0, y0, th, amp = self._parts(t)
        return amp * np.sin(th), amp * (x0 * np.sin(th) + y0 * np.cos(th))

    def family(self, nu: float, t, mu: float = 1.0):
        x0, y0, th, amp = self._parts(t)
        al = np.arctan(x0 / y0)
        return (mu * amp * np.sin(th + nu),
                mu * np.hypot(x0, y0) * amp * np.cos(th + nu - al))

    def identity_residuals(self, t, phi_plus, psi_plus, phi_minus, psi_minus) -> dict:
        """Relative residuals of the three frame identities for externally computed solutions."""
        x0, y0, th, amp = self._parts(t)
        c, s = np.cos(th), np.sin(th)
        r1 = phi_plus * c + phi_minus * s - amp
        r2 = psi_minus * c - psi_plus * s - amp * y0
        r3 = psi_minus * s + psi_plus * c - amp * x0
        n1 = np.abs(phi_plus * c) + np.abs(phi_minus * s) + amp
        n2 = np.abs(psi_minus * c) + np.abs(psi_plus * s) + amp * y0
        n3 = np.abs(psi_minus * s) + np.abs(psi_plus * c) + amp * np.abs(x0) + amp * y0
        return {"(phi)": float(np.max(np.abs(r1) / n1)),
                "(psi-cos)": float(np.max(np.abs(r2) / n2)),
                "(psi-sin)": float(np.max(np.abs(r3) / n3))}

    def as_dict(self) -> dict:
        return jsonable({"span": self.span, "nodes": self.z.times.size, "checks": self.checks})


def fundamental_frame(sys: SystemSpec, span, tol=None, cross_check: bool = True) -> FundamentalFrame:
    z = solve_riccati_complex(sys, span, tol, rtol=1e-10 if tol is None else None,
                              atol=1e-13 if tol is None else None)
    frame = FundamentalFrame(sys, z)
    if cross_check:
        lo, hi = z.span
        p = solve_system(sys, (1.0, 0.0), (lo, hi), rtol=1e-11, atol=1e-14)
        m = solve_system(sys, (0.0, 1.0), (lo, hi), rtol=1e-11, atol=1e-14)
        t = np.linspace(lo, hi, 2001)
        P, M = p(t), m(t)
        fp, gp = frame.plus(t)
        fm, gm = frame.minus(t)
        scale_p = np.hypot(P[:, 0], P[:, 1]) + np.hypot(M[:, 0], M[:, 1])
        dev = max(np.max(np.abs(P[:, 0] - fp) / scale_p), np.max(np.abs(P[:, 1] - gp) / scale_p),
                  np.max(np.abs(M[:, 0] - fm) / scale_p), np.max(np.abs(M[:, 1] - gm) / scale_p))
        det = P[:, 0] * M[:, 1] - M[:, 0] * P[:, 1]
        liou = np.exp(2 * frame.lam(t))
        frame.checks = {
            "closed_form_vs_direct": float(dev),
            "identities": frame.identity_residuals(t, P[:, 0], P[:, 1], M[:, 0], M[:, 1]),
            # relative to the size of the two products, which is what rounding scales with
            "liouville": float(np.max(np.abs(det - liou)
                                      / np.maximum(liou, np.abs(P[:, 0] * M[:, 1]) + np.abs(M[:, 0] * P[:, 1])))),
            "liouville_vs_value": float(np.max(np.abs(det - liou) / liou)),
            "min_y0": float(np.min(frame.y0(t))),
        }
        frame.direct = (p, m)
    return frame


# ---------------------------------------------------------------- zero counting


def level_crossings(t: np.ndarray, g: np.ndarray, period: float = math.pi) -> np.ndarray:
    """Times where the continuous samples ``g`` cross a multiple of ``period`` (linear interpolation)."""
    k = np.floor(g / period)
    jumps = np.nonzero(k[1:] != k[:-1])[0]
    out = []
    for i in jumps:
        lo_k, hi_k = k[i], k[i + 1]
        step = 1 if hi_k > lo_k else -1
        levels = np.arange(lo_k + (1 if step > 0 else 0), hi_k + (1 if step > 0 else 0), step)
        for lev in levels:
            target = lev * period
            frac = (target - g[i]) / (g[i + 1] - g[i])
            out.append(t[i] + frac * (t[i + 1] - t[i]))
    return np.asarray(out)


def oscillation_status(zeros: np.ndarray, t0: float, horizon: float, zero_min: int = 5,
                       gap_factor: float = 4.0) -> dict:
    """Finite-horizon surrogate for 'has arbitrarily large zeros'.

    Oscillating: at least ``zero_min`` zeros, and neither the last gap nor the
    distance from the last zero to the horizon exceeds ``gap_factor`` times the
    largest gap seen in the first half of the span. Non-oscillating: no zeros in
    the second half. Anything else is undetermined.
    """
    zeros = np.sort(np.asarray(zeros, float))
    mid = 0.5 * (t0 + horizon)
    late = int(np.sum(zeros > mid))
    info = {"count": int(zeros.size), "late": late,
            "last": float(zeros[-1]) if zeros.size else None}
    if late == 0:
        return {"status": "non", **info}
    if zeros.size >= zero_min:
        gaps = np.diff(zeros)
        first = gaps[zeros[1:] <= mid]
        ref = float(np.max(first)) if first.size else float(np.max(gaps))
        tail = horizon - zeros[-1]
        info.update(ref_gap=ref, last_gap=float(gaps[-1]), tail_gap=float(tail))
        if gaps[-1] <= gap_factor * ref and tail <= gap_factor * ref:
            return {"status": "osc", **info}
    return {"status": "undetermined", **info}


@dataclass
class OscillationClass:
    cls: str
    witnesses: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)

    def __str__(self):
        return self.cls

    def as_dict(self) -> dict:
        return jsonable({"class": self.cls, "evidence": self.evidence, "witnesses": self.witnesses})


def _decide(tags: Sequence[str]) -> str:
    s = set(tags)
    if "undetermined" in s:
        return "Undetermined"
    if s == {"both"}:
        return "Oscillatory"
    if s == {"none"}:
        return "NonOscillatory"
    if s == {"one"}:
        return "HalfOscillatory"
    if "both" in s and "none" in s:
        return "Singular"
    if s == {"both", "one"}:
        return "WeakOscillatory"
    if s == {"none", "one"}:
        return "WeakNonOscillatory"
    return "Undetermined"


def classify_oscillation(sys: SystemSpec, horizon: float, nu_grid: int = 64, zero_min: int = 5,
                         gap_factor: float = 4.0, tol=None, frame: Optional[FundamentalFrame] = None,
                         subdiv: int = 8) -> OscillationClass:
    t0 = sys.t0
    if frame is None:
        frame = fundamental_frame(sys, (t0, horizon), tol, cross_check=False)
    t = frame.z.refined_times(subdiv)
    x0, y0, th, _ = frame._parts(t)
    al = np.arctan(x0 / y0)
    witnesses, tags = [], []
    for nu in np.arange(nu_grid) * math.pi / nu_grid:
        zp = level_crossings(t, th + nu)
        zq = level_crossings(t, th + nu - al - 0.5 * math.pi)
        sp = oscillation_status(zp, t0, horizon, zero_min, gap_factor)
        sq = oscillation_status(zq, t0, horizon, zero_min, gap_factor)
        st = (sp["status"], sq["status"])
        if "undetermined" in st:
            tag = "undetermined"
        else:
            tag = {0: "none", 1: "one", 2: "both"}[st.count("osc")]
        tags.append(tag)
        witnesses.append({"nu": float(nu), "tag": tag, "phi": sp, "psi": sq})
    cls = _decide(tags)
    ev = {
        "horizon": horizon, "nu_grid": nu_grid, "zero_min": zero_min, "gap_factor": gap_factor,
        "theta_range": [float(np.min(th)), float(np.max(th))],
        "theta_at_horizon": float(th[-1]),
        "tag_counts": {k: tags.count(k) for k in ("both", "one", "none", "undetermined")},
        "sample_note": f"{nu_grid} phase offsets sampled; the class quantifies over this family only",
    }
    return OscillationClass(cls, witnesses, ev)


# ---------------------------------------------------------------- Leighton-type test


def leighton_test(sys: SystemSpec, policy: Optional[HorizonPolicy] = None, cert_span: float = 1000.0) -> Record:
    t0 = sys.t0
    cert = sign_certify(sys.a12, (t0, t0 + cert_span), budget=max(2001, int(10 * cert_span)))
    det = {"certificate_a12": cert.as_dict()}
    if not cert.nonnegative:
        det["failed_gate"] = "a12 >= 0"
        return Record("leighton", "Inconclusive", det)
    v1 = classify_improper(weighted(sys.a12, sys.B, t0).signal(), t0, policy)
    det["int a12 exp(-int B)"] = v1.as_dict()
    if not v1.diverges_plus:
        det["failed_gate"] = "int a12 exp(-int B) = +inf"
        return Record("leighton", "Inconclusive", det)
    v2 = classify_improper(weighted(-sys.a21, -sys.B, t0).signal(), t0, policy)
    det["int -a21 exp(int B)"] = v2.as_dict()
    if not v2.diverges_plus:
        det["failed_gate"] = "int -a21 exp(int B) = +inf"
        return Record("leighton", "Inconclusive", det)
    return Record("leighton", "Oscillatory", det)


# ---------------------------------------------------------------- second-order equations


def second_order_system(r, t0: float = 0.0, p="1", q="0") -> SystemSpec:
    """(p phi')' + q phi' + r phi = 0 as a planar system with psi = p phi'.

    phi' = psi / p,  psi' = -r phi - (q/p) psi.
    """
    p, q, r = as_expr(p), as_expr(q), as_expr(r)
    a12 = 1 / p if not (p.is_constant and p.eval(0.0) == 1.0) else as_expr(1.0)
    a22 = -(q / p) if not (q.is_constant and q.eval(0.0) == 0.0) else as_expr(0.0)
    return SystemSpec(0.0, a12, -r, a22, t0)


def _windows(t0: float, horizon: float, start: float, n: int) -> np.ndarray:
    lo = max(start, t0)
    return np.geomspace(lo, horizon, n + 1) if lo > 0 else np.linspace(lo, horizon, n + 1)


def _level(sups, tol):
    """Sup over the last two windows no more than ``tol`` above the earlier ones (first excluded)."""
    if len(sups) < 4:
        return False
    return max(sups[-2:]) <= (1.0 + tol) * max(sups[1:-2])


def principles_check(r, t0: float = 0.0, horizon: float = 300.0, init_grid: int = 8,
                     windows: int = 6, window_start: float = 5.0, zero_min: int = 5,
                     ring_tol: float = 0.05, tol=None) -> Record:
    """Measure the three qualitative principles for ``phi'' + r phi = 0`` on sampled solutions."""
    sys = second_order_system(r, t0)
    edges = _windows(t0, horizon, t0 + window_start, windows)
    sols = []
    for k in range(init_grid):
        ang = math.pi * k / init_grid
        tr = solve_system(sys, (math.cos(ang), math.sin(ang)), (t0, horizon), tol)
        t = tr.refined_times(4)
        y = tr(t)
        phi, dphi = y[:, 0], y[:, 1]
        rad = np.hypot(phi, dphi)
        w_sup_phi, w_sup_dphi, w_rmin, w_rmax = [], [], [], []
        for a, b in zip(edges[:-1], edges[1:]):
            m = (t >= a) & (t <= b)
            w_sup_phi.append(float(np.max(np.abs(phi[m]))))
            w_sup_dphi.append(float(np.max(np.abs(dphi[m]))))
            w_rmin.append(float(np.min(rad[m])))
            w_rmax.append(float(np.max(rad[m])))
        zeros = _sign_changes(t, phi)
        osc = oscillation_status(zeros, t0, horizon, zero_min)
        sols.append({
            "init_angle": ang, "zeros": int(zeros.size), "oscillation": osc["status"],
            "sup_phi": w_sup_phi, "sup_dphi": w_sup_dphi, "ring_min": w_rmin, "ring_max": w_rmax,
            "phi_bounded": windowed_bounded(t, phi)["bounded"],
            "dphi_bounded": windowed_bounded(t, dphi)["bounded"],
            # equal-length windows: a quasi-periodic sup keeps filling in on longer ones
            "phi_level": _level(w_sup_phi, ring_tol),
            "dphi_level": _level(w_sup_dphi, ring_tol),
        })

    def strictly(seq, up):
        d = np.diff(seq)
        return bool(np.all(d > 0) if up else np.all(d < 0))

    all_bounded = all(s["phi_bounded"] for s in sols)
    decaying = all(strictly(s["sup_phi"], up=False) for s in sols)
    dphi_grows = all(strictly(s["sup_dphi"], up=True) for s in sols)
    oscillatory = all(s["oscillation"] == "osc" for s in sols)
    dphi_persists = all(s["sup_dphi"][-1] >= 0.5 * s["sup_dphi"][0] for s in sols)
    stable = all(s["phi_level"] and s["dphi_level"] for s in sols)

    report = {}
    if all_bounded:
        report["A"] = "Consistent" if (oscillatory and dphi_persists) else "Violated"
    else:
        report["A"] = "NotApplicable"
    if decaying:
        report["B"] = "Consistent" if dphi_grows else "Violated"
    else:
        report["B"] = "NotApplicable"
    if stable:
        ok = True
        for s in sols:
            r1, r2 = s["ring_min"][-2:], s["ring_max"][-2:]
            if not (r1[-1] > 0 and r2[-1] < math.inf):
                ok = False
            if abs(r1[1] - r1[0]) > ring_tol * r1[0] or abs(r2[1] - r2[0]) > ring_tol * r2[0]:
                ok = False
        report["C"] = "Consistent" if ok else "Violated"
    else:
        report["C"] = "NotApplicable"
    det = {"principles": report, "windows": edges, "solutions": sols,
           "measured": {"all_bounded": all_bounded, "all_decaying": decaying,
                        "derivative_sup_increasing": dphi_grows, "all_oscillatory": oscillatory,
                        "lyapunov_stable": stable},
           "sample_note": f"{init_grid} sampled solutions; hypotheses are checked on this sample only"}
    verdict = "Violated" if "Violated" in report.values() else "Consistent"
    return Record("principles", verdict, det)


def _sign_changes(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    s = np.sign(v)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return t[idx] - v[idx] * (t[idx + 1] - t[idx]) / (v[idx + 1] - v[idx])


def ring_radii(sys: SystemSpec, solution: Trajectory, gate_slack: float = 0.01) -> dict:
    """inf and sup of ``J_{-S/2} |(phi, psi)|`` over the solution span."""
    lo, hi = solution.span
    t = solution.refined_times(4)
    S = sys.S
    if S.is_constant and S.eval(0.0) == 0.0:
        lam = np.zeros_like(t)
    else:
        lam = cumulative(lambda s: 0.5 * S(s), lo, hi, breakpoints=solution.times)(t)
    y = solution(t)
    norm = np.hypot(y[:, 0], y[:, 1]) * np.exp(-lam)
    gate = windowed_bounded(t, norm, slack=gate_slack)
    if not gate["bounded"]:
        raise HypothesisError("normalised solution bounded", f"growth ratio {gate['ratio']:.4g}", gate)
    r, R = float(np.min(norm)), float(np.max(norm))
    if not r > 0:
        raise HypothesisError("normalised solution bounded away from zero", evidence=gate)
    return {"r": r, "R": R, "gate": gate}
