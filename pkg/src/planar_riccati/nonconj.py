"""Polar form, the non-conjugation property and sign-definite case analysis.

Polar coordinates use ``phi = J_{a11} rho cos(theta)``, ``psi = J_{a22} rho sin(theta)``
with weights ``A12 = a12 J_{-B}`` and ``A21 = a21 J_B``, so that

    theta' = A21 cos^2(theta) - A12 sin^2(theta),
    rho'   = (A12 + A21) rho sin(theta) cos(theta).

Zeros of ``phi`` and ``psi`` are the times at which ``theta`` meets
``pi/2 + k pi`` and ``k pi``; counting them on ``theta`` is free of the
amplitude, which may span hundreds of orders of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._report import HypothesisError, Record, jsonable
from .coeffexpr import sign_certify
from .integrate import SystemSpec, Trajectory, solve_polar, solve_prufer, zero_items_sampled
from .quadrature import HorizonPolicy, Signal, classify_improper, cumulative, transform_Iplus
from .riccati import NoRegularSolutionError, find_bracket
from .systemreg import _contracting, extremal_pair, ratio_limit, seed_pair

__all__ = [
    "PolarTrajectory",
    "NonConjVerdict",
    "to_polar",
    "polar_family",
    "nonconjugation_check",
    "case_of",
    "case_report",
]


# ---------------------------------------------------------------- polar form


@dataclass
class PolarTrajectory:
    sys: SystemSpec
    polar: Trajectory  # components theta, logrho, intB
    int_a11: object  # cumulative int_{t0}^t a11
    int_a22: object
    checks: dict = field(default_factory=dict)

    @property
    def span(self):
        return self.polar.span

    def theta(self, t):
        return self.polar(t, "theta")

    def rho(self, t):
        return np.exp(self.polar(t, "logrho"))

    def A12(self, t):
        return self.sys.a12(t) * np.exp(-self.polar(t, "intB"))

    def A21(self, t):
        return self.sys.a21(t) * np.exp(self.polar(t, "intB"))

    def reconstruct(self, t):
        """(phi, psi) from the polar state."""
        th, lr = self.theta(t), self.polar(t, "logrho")
        return (np.exp(self.int_a11(t) + lr) * np.cos(th), np.exp(self.int_a22(t) + lr) * np.sin(th))

    def residuals(self, subdiv: int = 2) -> dict:
        """Max residuals of the angle and amplitude equations on the dense output."""
        t = self.polar.refined_times(subdiv)
        th = self.theta(t)
        d = self.polar.derivative(t)
        a12, a21 = self.A12(t), self.A21(t)
        s, c = np.sin(th), np.cos(th)
        r_th = d[:, 0] - (a21 * c * c - a12 * s * s)
        r_rho = d[:, 1] - (a12 + a21) * s * c
        scale = 1.0 + np.abs(a12) + np.abs(a21)
        return {"theta": float(np.max(np.abs(r_th) / scale)), "logrho": float(np.max(np.abs(r_rho) / scale))}

    def as_dict(self) -> dict:
        return jsonable({"span": self.span, "checks": self.checks})


def _initial_polar(sys: SystemSpec, t1: float, phi: float, psi: float):
    """theta and log rho at ``t1`` for the state (phi, psi), with J's anchored at t0."""
    if phi == 0 and psi == 0:
        raise ValueError("the trivial solution has no polar form")
    if t1 == sys.t0:
        i11 = i22 = 0.0
    else:
        i11 = float(cumulative(sys.a11, sys.t0, t1)(t1))
        i22 = float(cumulative(sys.a22, sys.t0, t1)(t1))
    # work with scaled components to avoid overflow
    l1 = -i11 + (math.log(abs(phi)) if phi else -math.inf)
    l2 = -i22 + (math.log(abs(psi)) if psi else -math.inf)
    m = max(l1, l2)
    X = math.copysign(math.exp(l1 - m), phi) if phi else 0.0
    Y = math.copysign(math.exp(l2 - m), psi) if psi else 0.0
    return math.atan2(Y, X), m + 0.5 * math.log(X * X + Y * Y)


def polar_family(sys: SystemSpec, theta1: float, span, logrho1: float = 0.0, tol=None) -> PolarTrajectory:
    """Polar solution with ``theta(t0) = theta1``; ``span[0]`` must be t0, where the J weights are anchored."""
    t1, T = float(span[0]), float(span[1])
    if t1 != sys.t0:
        raise ValueError("polar integration starts at t0; map the initial state back first")
    pol = solve_polar(sys, theta1, logrho1, (t1, T), tol)
    i11 = cumulative(sys.a11, sys.t0, T, breakpoints=pol.times)
    i22 = cumulative(sys.a22, sys.t0, T, breakpoints=pol.times)
    return PolarTrajectory(sys, pol, i11, i22)


def to_polar(sys: SystemSpec, traj: Trajectory, tol=None, check_points: int = 400) -> PolarTrajectory:
    """Polar form of a system trajectory, integrating the angle equation as a state.

    The trajectory must start at t0. ``checks`` records the reconstruction
    error against ``traj`` and the residuals of the polar equations.
    """
    t1 = traj.t_start
    if abs(t1 - sys.t0) > 1e-12 * max(1.0, abs(t1)):
        raise ValueError("to_polar needs a trajectory starting at t0")
    phi0, psi0 = float(traj(t1, 0)), float(traj(t1, 1))
    if phi0 == 0 and psi0 == 0:
        raise ValueError("the trivial solution has no polar form")
    th0, lr0 = _initial_polar(sys, t1, phi0, psi0)
    pt = polar_family(sys, th0, (t1, traj.t_end), lr0, tol)
    t = np.linspace(t1, traj.t_end, check_points)
    phi, psi = pt.reconstruct(t)
    ref = traj(t)[:, :2]
    scale = np.hypot(ref[:, 0], ref[:, 1])
    err = np.hypot(phi - ref[:, 0], psi - ref[:, 1]) / np.where(scale > 0, scale, 1.0)
    pt.checks = {"reconstruction": float(np.max(err)), **pt.residuals()}
    return pt


# ---------------------------------------------------------------- non-conjugation


def _level_items(pt, offset: float, t_from: float, subdiv: int = 8) -> list:
    """Zero items of sin(theta - offset) on [t_from, end]: phi uses offset pi/2, psi offset 0.

    ``pt`` is a PolarTrajectory or a trajectory with a ``theta`` column.
    """
    traj = pt.polar if isinstance(pt, PolarTrajectory) else pt
    theta = pt.theta if isinstance(pt, PolarTrajectory) else (lambda s: traj(s, "theta"))
    grid = traj.refined_times(subdiv)
    grid = grid[grid >= t_from]
    v = np.sin(theta(grid) - offset)

    def f(s):
        return float(np.sin(theta(s) - offset))

    return zero_items_sampled(grid, v, tol_abs=1e-12, refine=f, window=4 * subdiv)


@dataclass
class NonConjVerdict:
    verdict: str  # Satisfied | Violated | Undetermined
    theorem: str
    t_from: float
    counts: list = field(default_factory=list)  # per init: (theta0, n_phi, n_psi)
    witness: Optional[dict] = None
    gates: dict = field(default_factory=dict)

    @property
    def max_items(self) -> int:
        return max((max(c[1], c[2]) for c in self.counts), default=0)

    def as_dict(self) -> dict:
        return jsonable({"verdict": self.verdict, "theorem": self.theorem, "t_from": self.t_from,
                         "max_items": self.max_items, "counts": self.counts, "witness": self.witness,
                         "gates": self.gates})


def _certs(sys: SystemSpec, span):
    return sign_certify(sys.a12, span), sign_certify(sys.a21, span)


def case_of(sys: SystemSpec, horizon: float) -> tuple:
    """(case, working system, certificates). Cases III and IV map to I and II via phi -> -phi."""
    c12, c21 = _certs(sys, (sys.t0, horizon))
    certs = {"a12": c12.as_dict(), "a21": c21.as_dict()}
    if c12.nonnegative and c21.nonnegative:
        return "I", sys, certs
    if c12.nonnegative and c21.nonpositive:
        return "II", sys, certs
    if c12.nonpositive and c21.nonpositive:
        return "III", sys.negate_phi(), certs
    if c12.nonpositive and c21.nonnegative:
        return "IV", sys.negate_phi(), certs
    return None, sys, certs


def _phi_witness(sys: SystemSpec, horizon: float, tol):
    """Earliest probe time T from which some solution keeps phi != 0 up to the horizon."""
    spec = sys.riccati()
    for frac in (0.0, 0.125, 0.25, 0.5):
        T = sys.t0 + frac * (horizon - sys.t0)
        try:
            lo, hi, _ = find_bracket(spec, T, horizon, tol=tol)
        except NoRegularSolutionError:
            continue
        return T, {"t_from": T, "psi_over_phi": hi}
    return None, None


def nonconjugation_check(sys: SystemSpec, horizon: float, init_grid: int = 16, tol=None) -> NonConjVerdict:
    """Zero-item counts of phi and psi over a grid of initial angles.

    Applies when a12 and a21 are certified to share a sign (no-conjugation from
    t0), or to have opposite signs with a witness solution whose phi stays
    nonzero from some T on (no-conjugation from T). Any component with two or
    more zero items is re-checked at a tighter tolerance before ``Violated`` is
    reported.
    """
    case, work, certs = case_of(sys, horizon)
    if case is None:
        raise HypothesisError("sign-definite a12 and a21", "coefficients change sign", certs)
    gates = {"case": case, **certs}
    if case in ("I", "III"):
        theorem, t_from = "3.7", sys.t0
    else:
        T, wit = _phi_witness(work, horizon, tol)
        if T is None:
            raise HypothesisError("phi-nonvanishing witness", "no solution keeps phi != 0 up to the horizon", gates)
        theorem, t_from = "3.12", T
        gates["witness"] = wit
    thetas = np.pi * np.arange(init_grid) / init_grid
    counts = []
    witness = None
    for th in thetas:
        n = _count(sys, th, horizon, t_from, tol)
        if max(n) >= 2:
            tight = 1e-3 * (tol if tol is not None else 1e-9)
            n2 = _count(sys, th, horizon, t_from, tight)
            if max(n2) >= 2 and witness is None:
                witness = {"theta0": float(th), "phi_items": n2[0], "psi_items": n2[1], "tol": tight}
            n = n2
        counts.append((float(th), n[0], n[1]))
    verdict = "Violated" if witness else "Satisfied"
    return NonConjVerdict(verdict, theorem, t_from, counts, witness, gates)


def _count(sys, th, horizon, t_from, tol):
    # both angle forms agree at t0, where every J weight is 1
    pt = solve_prufer(sys, float(th), (sys.t0, horizon), tol=tol)
    return len(_level_items(pt, 0.5 * math.pi, t_from)), len(_level_items(pt, 0.0, t_from))


# ---------------------------------------------------------------- case analysis


def _transpose_pair(pair: Trajectory) -> Trajectory:
    """Swap the components of a lifted pair."""
    v = pair.values
    derivs = pair.derivative(pair.times)
    vals = np.column_stack([v[:, 1], v[:, 0]])
    ders = np.column_stack([derivs[:, 1], derivs[:, 0]])
    return Trajectory.from_hermite("RealPair", pair.times, vals, ders, ("phi", "psi"), meta=dict(pair.meta))


def _sign_tail(traj: Trajectory, comp: str, t_stop: float) -> dict:
    """Sign of a component and the time from which it is constant."""
    t = traj.refined_times(4)
    t = t[t <= t_stop]
    v = traj(t, comp)
    s = np.sign(v)
    final = float(s[-1])
    bad = np.nonzero(s != final)[0]
    since = float(t[bad[-1] + 1]) if bad.size else float(t[0])
    return {"sign": "+" if final > 0 else ("-" if final < 0 else "0"), "since": since}


def _weighted_integral(sys: SystemSpec, pair: Trajectory, comp: str, t1: float, T: float):
    """Verdict for int a12 J_S / phi^2 (comp='phi') or int |a21| J_S / psi^2 (comp='psi')."""
    S = cumulative(sys.S, t1, pair.t_end, breakpoints=pair.times)

    def f(t):
        t = np.asarray(t, float)
        v = pair(t, comp)
        w = sys.a12(t) if comp == "phi" else np.abs(sys.a21(t))
        with np.errstate(over="ignore", divide="ignore"):
            return w * np.exp(S(t)) / (v * v)

    return classify_improper(Signal(f, (t1, pair.t_end), pair.times), t1, HorizonPolicy(t_max=T))


def _distinguished(work: SystemSpec, case: str, t1: float, T: float, tol):
    """phi-minimal pair from the extremal solution of the ratio equation and the
    psi-minimal pair from the extremal solution of the reciprocal equation."""
    out = {}
    x0, seed = seed_pair(work, t1, T, tol)
    xs, phi_min = extremal_pair(work, x0, t1)
    out["phi_min"] = (phi_min, seed, xs)
    # reciprocal: u = phi/psi (case I, a21 >= 0) or z = -phi/psi (case II, -a21 >= 0)
    flip = case == "II"
    recip = work.transpose().negate_phi() if flip else work.transpose()
    u0, useed = seed_pair(recip, t1, T, tol)
    us, umin = extremal_pair(recip, u0, t1)
    # (Phi, Psi) of the reciprocal system is (psi, phi) or (-psi, phi); in the second
    # case the solution (-phi, psi) = -(phi, -psi) keeps psi(t1) = 1
    psi_min = _transpose_pair(umin)
    psi_seed = _transpose_pair(useed)
    if flip:
        psi_min = _negate(psi_min, 0)
        psi_seed = _negate(psi_seed, 0)
    out["psi_min"] = (psi_min, psi_seed, us)
    return out


def _negate(pair: Trajectory, col: int) -> Trajectory:
    sgn = np.ones(2)
    sgn[col] = -1.0
    d = pair.derivative(pair.times)
    return Trajectory.from_hermite("RealPair", pair.times, pair.values[:, :2] * sgn, d[:, :2] * sgn,
                                   ("phi", "psi"), meta=pair.meta)


CLAUSE_TEXT = {
    "3.8.A2": "I+[a12,B] or I+[a21,-B] infinite: one solution with phi* > 0, psi* < 0, minimal in both components",
    "3.8.B2": "both integrals finite: (phi**, psi0) and (phi0, psi**) with phi** > 0, psi** > 0",
    "3.10.A2": "non-oscillatory, I+[a12,B] infinite: phi-minimal pair with psi00 > 0",
    "3.10.B2": "non-oscillatory, I+[a21,-B] = -inf: phi** > 0, psi00 < 0, psi** < 0",
    "3.11": "both integrals finite: non-oscillatory; phi* > 0, psi0 < 0, psi* > 0",
}

# asserted sign patterns per clause: (pair key, component, sign)
CLAUSE_SIGNS = {
    "3.8.A2": [("phi_min", "phi", "+"), ("phi_min", "psi", "-")],
    "3.8.B2": [("phi_min", "phi", "+"), ("psi_min", "psi", "+")],
    "3.10.A2": [("phi_min", "phi", "+"), ("phi_min", "psi", "+")],
    "3.10.B2": [("phi_min", "phi", "+"), ("phi_min", "psi", "-"), ("psi_min", "psi", "-")],
    "3.11": [("phi_min", "phi", "+"), ("phi_min", "psi", "-"), ("psi_min", "psi", "+")],
}


def case_report(sys: SystemSpec, horizon: float = 40.0, tol=None, policy: Optional[HorizonPolicy] = None,
                oscillation=None, ratio_tol: float = 1e-3) -> Record:
    """Case split, clause selection and verified distinguished solutions.

    ``oscillation`` may carry a precomputed oscillation class for the
    non-oscillation prerequisite of the case-II theorem; otherwise it is
    computed. Returns a Record whose verdict is Pass when every asserted sign
    pattern, ratio limit and weighted-integral divergence is confirmed.
    """
    t0 = sys.t0
    T = float(horizon)
    case, work, certs = case_of(sys, T)
    if case is None:
        raise HypothesisError("case", "a12 and a21 are not sign-definite", certs)
    base = "I" if case in ("I", "III") else "II"
    policy = policy or HorizonPolicy(t_max=max(T, 1000.0))
    i12 = transform_Iplus(work.a12, work.B, t0, math.inf, policy)
    i21 = transform_Iplus(work.a21, -work.B, t0, math.inf, policy)
    details = {"case": case, "reduced_to": base, "certificates": certs,
               "integrals": {"I+[a12,B]": i12, "I+[a21,-B]": i21}, "errata": []}
    fin12, fin21 = i12.converged, i21.converged
    inf12 = i12.diverges_plus
    clause = None
    if base == "I":
        if inf12 or i21.diverges_plus:
            clause = "3.8.A2"
        elif fin12 and fin21:
            clause = "3.8.B2"
    else:
        details["errata"].append("angle is non-increasing in case II; the printed statement bounds the angle itself")
        if fin12 and fin21:
            clause = "3.11"
        else:
            if oscillation is None:
                from .oscillation import classify_oscillation

                oscillation = classify_oscillation(work, T).cls
            details["oscillation"] = str(oscillation)
            if str(oscillation) != "NonOscillatory":
                details["note"] = "non-oscillation prerequisite not established; see the Leighton verdict"
                from .oscillation import leighton_test

                details["leighton"] = leighton_test(work)
                return Record("case_report", "NotApplicable", details)
            if inf12:
                clause = "3.10.A2"
            elif i21.diverges_minus:
                clause = "3.10.B2"
    details["clause"] = clause
    if clause is None:
        details["note"] = "integral verdicts do not select a clause"
        return Record("case_report", "Undetermined", details)
    details["clause_text"] = CLAUSE_TEXT[clause]

    sols = _distinguished(work, base, t0, T, tol)
    checks = {}
    ok = True
    # signs
    signs = {}
    for key, comp, want in CLAUSE_SIGNS[clause]:
        pair = sols[key][0]
        t_rel = float(sols[key][2].meta.get("t_reliable", pair.t_end))
        st = _sign_tail(pair, comp, max(t_rel, t0 + 0.5 * (T - t0)))
        good = st["sign"] == want and st["since"] <= t0 + 0.5 * (T - t0)
        signs[f"{key}.{comp}"] = {**st, "expected": want, "ok": good}
        ok &= good
    if base == "II":
        p = sols["psi_min"][0]
        signs["psi_min.phi (reported)"] = _sign_tail(p, "phi", T)
        if clause == "3.11":
            details["errata"].append("the companion phi0 = -v* psi* is positive; the printed statement says negative")
    checks["signs"] = signs
    # ratio limits and weighted integrals
    limits = {}
    divergences = {}
    for key, comp in (("phi_min", "phi"), ("psi_min", "psi")):
        pair, other, ext = sols[key]
        try:
            lim = ratio_limit(pair, other, component=comp)
            good = lim.verdict == "Zero" or abs(lim["limit"]) < ratio_tol
            limits[key] = {**lim.details, "verdict": lim.verdict, "ok": good}
        except ValueError as exc:
            limits[key] = {"verdict": "NotApplicable", "reason": str(exc), "ok": False}
            good = False
        if key == "phi_min" or clause != "3.8.A2":
            ok &= good
        t_chk = float(ext.meta.get("t_reliable", pair.t_end))
        t_chk = t_chk if t_chk > t0 + 0.5 * (T - t0) else pair.t_end
        wv = _weighted_integral(work, pair, comp, t0, t_chk)
        divergences[key] = wv
        ok &= wv.diverges_plus or (wv.kind == "Undetermined" and not _contracting(wv, HorizonPolicy()))
    if clause == "3.8.A2":
        # a single solution is minimal in both components
        pm = sols["phi_min"][0]
        try:
            lim = ratio_limit(pm, sols["phi_min"][1], component="psi")
            limits["phi_min.psi"] = {**lim.details, "verdict": lim.verdict,
                                     "ok": lim.verdict == "Zero" or abs(lim["limit"]) < ratio_tol}
            ok &= limits["phi_min.psi"]["ok"]
        except ValueError as exc:
            limits["phi_min.psi"] = {"verdict": "NotApplicable", "reason": str(exc), "ok": False}
    checks["ratio_limits"] = limits
    checks["weighted_integrals"] = divergences
    # linear independence of the two distinguished pairs
    a, b = sols["phi_min"][0], sols["psi_min"][0]
    w = float(a(t0, "phi") * b(t0, "psi") - a(t0, "psi") * b(t0, "phi"))
    scale = float(np.hypot(a(t0, "phi"), a(t0, "psi")) * np.hypot(b(t0, "phi"), b(t0, "psi")))
    checks["wronskian_t0"] = w / scale if scale else math.nan
    if clause != "3.8.A2":
        ok &= abs(checks["wronskian_t0"]) >= 1e-8
    details["checks"] = checks
    details["solutions"] = {k: {"phi_t0": float(v[0](t0, "phi")), "psi_t0": float(v[0](t0, "psi")),
                                "t_reliable": float(v[2].meta.get("t_reliable", math.nan))}
                            for k, v in sols.items()}
    details["_pairs"] = {k: v[0] for k, v in sols.items()}
    if case != base:
        details["note"] = "solutions are for the reduced system (-phi, psi)"
    return Record("case_report", "Pass" if ok else "Fail", details)
