"""Adaptive integration of planar linear systems and Riccati equations.

Trajectories keep the Dormand–Prince dense output, so every solution can be
evaluated (and differentiated) anywhere inside its span without re-solving.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .coeffexpr import CoeffExpr, as_expr, render

__all__ = [
    "SystemSpec",
    "RiccatiSpec",
    "BlowUpReport",
    "Trajectory",
    "ZeroItem",
    "IntegrationError",
    "StepCollapseError",
    "PositivityLossError",
    "SpanError",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
    "ESCAPE_THRESHOLD",
    "solve_system",
    "solve_riccati",
    "solve_riccati_complex",
    "solve_polar",
    "solve_prufer",
    "lift_riccati",
    "zero_sets",
    "zero_items_sampled",
    "system_residual",
    "riccati_residual",
    "to_csv",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
ESCAPE_THRESHOLD = 1e8
ESCAPE_LOCALISATION = 1e-7
MAX_STEPS = 20_000_000


class IntegrationError(RuntimeError):
    pass


class StepCollapseError(IntegrationError):
    def __init__(self, t: float, detail: str = "step size collapsed"):
        self.t = t
        super().__init__(f"{detail} near t={t!r} (coefficient singularity?)")


class PositivityLossError(IntegrationError):
    pass


class SpanError(ValueError):
    pass


# ---------------------------------------------------------------- specs


def _programs(exprs: Sequence[CoeffExpr]):
    progs = [e.program() for e in exprs]
    L = max(1, max(p[0].shape[0] for p in progs))
    C = max(1, max(p[1].shape[0] for p in progs))
    codes = np.zeros((len(progs), L, 2), dtype=np.int64)
    consts = np.zeros((len(progs), C))
    lens = np.zeros(len(progs), dtype=np.int64)
    for i, (c, k) in enumerate(progs):
        codes[i, : c.shape[0]] = c
        consts[i, : k.shape[0]] = k
        lens[i] = c.shape[0]
    return codes, consts, lens


@dataclass(frozen=True)
class SystemSpec:
    """phi' = a11 phi + a12 psi,  psi' = a21 phi + a22 psi  for t >= t0."""

    a11: CoeffExpr
    a12: CoeffExpr
    a21: CoeffExpr
    a22: CoeffExpr
    t0: float = 0.0

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        object.__setattr__(self, "t0", float(self.t0))

    @classmethod
    def of(cls, a11="0", a12="0", a21="0", a22="0", t0=0.0) -> "SystemSpec":
        return cls(a11, a12, a21, a22, t0)

    @property
    def B(self) -> CoeffExpr:
        return self.a11 - self.a22

    @property
    def S(self) -> CoeffExpr:
        return self.a11 + self.a22

    def coefficients(self, t):
        t = np.asarray(t, dtype=float)
        return self.a11(t), self.a12(t), self.a21(t), self.a22(t)

    def rhs(self, t, phi, psi):
        a11, a12, a21, a22 = self.coefficients(t)
        return a11 * phi + a12 * psi, a21 * phi + a22 * psi

    def riccati(self) -> "RiccatiSpec":
        """z' + a12 z^2 + B z - a21 = 0, the equation solved by psi/phi."""
        return RiccatiSpec(self.a12, self.B, -self.a21, self.t0)

    def negate_phi(self) -> "SystemSpec":
        """System satisfied by (-phi, psi)."""
        return SystemSpec(self.a11, -self.a12, -self.a21, self.a22, self.t0)

    def transpose(self) -> "SystemSpec":
        """System satisfied by (psi, phi)."""
        return SystemSpec(self.a22, self.a21, self.a12, self.a11, self.t0)

    def programs(self):
        return _programs([self.a11, self.a12, self.a21, self.a22])

    def as_dict(self) -> dict:
        return {k: render(getattr(self, k)) for k in ("a11", "a12", "a21", "a22")} | {"t0": self.t0}


@dataclass(frozen=True)
class RiccatiSpec:
    """x' + a x^2 + b x + c = 0 for t >= t0."""

    a: CoeffExpr
    b: CoeffExpr
    c: CoeffExpr
    t0: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        object.__setattr__(self, "t0", float(self.t0))

    @classmethod
    def of(cls, a="0", b="0", c="0", t0=0.0) -> "RiccatiSpec":
        return cls(a, b, c, t0)

    def rhs(self, t, x):
        t = np.asarray(t, dtype=float)
        return -(self.a(t) * x * x + self.b(t) * x + self.c(t))

    def residual(self, t, x, dx):
        t = np.asarray(t, dtype=float)
        return dx + self.a(t) * x * x + self.b(t) * x + self.c(t)

    def as_dict(self) -> dict:
        return {k: render(getattr(self, k)) for k in ("a", "b", "c")} | {"t0": self.t0}


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class BlowUpReport:
    t_escape: float
    direction: str  # PlusInfinity | MinusInfinity
    last_value: float

    def as_dict(self):
        return {"t_escape": self.t_escape, "direction": self.direction, "last_value": self.last_value}


_REVERSE = np.array(
    [
        [-1.0, 0.0, 0.0, 0.0],
        [-2.0, 1.0, 0.0, 0.0],
        [-3.0, 3.0, -1.0, 0.0],
        [-4.0, 6.0, -4.0, 1.0],
    ]
)


class Trajectory:
    """Sampled path with piecewise quartic dense output.

    ``values[i, j]`` is component ``j`` at ``times[i]`` and on
    ``[times[i], times[i+1]]`` the state is
    ``values[i] + dense[i] @ (s, s^2, s^3, s^4)`` with ``s`` the local
    fraction of the step.
    """

    def __init__(self, kind: str, times, values, dense, components: Sequence[str],
                 blowup: Optional[BlowUpReport] = None, meta: Optional[dict] = None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        dense = np.asarray(dense, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("trajectory needs at least one sample")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        self.kind = kind
        self.times = times
        self.values = values
        self.dense = dense
        self.components = tuple(components)
        self.blowup = blowup
        self.meta = dict(meta or {})
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    # construction helpers
    @classmethod
    def from_hermite(cls, kind, times, values, derivs, components, blowup=None, meta=None):
        """Cubic Hermite interpolant through ``values`` with slopes ``derivs``."""
        times = np.asarray(times, float)
        values = np.asarray(values, float)
        derivs = np.asarray(derivs, float)
        if values.ndim == 1:
            values = values[:, None]
            derivs = derivs[:, None]
        h = np.diff(times)[:, None]
        y0, y1 = values[:-1], values[1:]
        f0, f1 = derivs[:-1] * h, derivs[1:] * h
        delta = y1 - y0
        dense = np.zeros((times.size - 1, values.shape[1], 4))
        dense[:, :, 0] = f0
        dense[:, :, 1] = 3 * delta - 2 * f0 - f1
        dense[:, :, 2] = f0 + f1 - 2 * delta
        return cls(kind, times, values, dense, components, blowup, meta)

    @classmethod
    def _from_kernel(cls, kind, ts, ys, dense, components, blowup=None, meta=None):
        if ts.size > 1 and ts[-1] < ts[0]:
            ts = ts[::-1].copy()
            ys = ys[::-1].copy()
            dense = np.einsum("ndk,kj->ndj", dense[::-1], _REVERSE)
        return cls(kind, ts, ys, dense, components, blowup, meta)

    # access
    @property
    def span(self):
        return float(self.times[0]), float(self.times[-1])

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    def index(self, component) -> int:
        if isinstance(component, (int, np.integer)):
            return int(component)
        try:
            return self.components.index(component)
        except ValueError:
            raise KeyError(f"no component {component!r}; have {self.components}") from None

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.span
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise SpanError(f"t outside trajectory span [{lo}, {hi}]")
        t = np.clip(t, lo, hi)
        n = self.times.size
        if n == 1:
            return t, np.zeros(t.shape, int), np.zeros(t.shape)
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, n - 2)
        h = self.times[idx + 1] - self.times[idx]
        s = (t - self.times[idx]) / h
        return t, idx, s

    def __call__(self, t, component=None):
        t, idx, s = self._locate(t)
        if self.times.size == 1:
            out = np.broadcast_to(self.values[0], t.shape + self.values.shape[1:]).copy()
        else:
            basis = np.stack([s, s * s, s**3, s**4], axis=-1)
            out = self.values[idx] + np.einsum("...dk,...k->...d", self.dense[idx], basis)
            at_end = s == 1.0
            if np.any(at_end):
                out[at_end] = self.values[idx[at_end] + 1]
        if component is None:
            return out
        return out[..., self.index(component)]

    def derivative(self, t, component=None):
        t, idx, s = self._locate(t)
        h = self.times[idx + 1] - self.times[idx]
        basis = np.stack([np.ones_like(s), 2 * s, 3 * s * s, 4 * s**3], axis=-1)
        out = np.einsum("...dk,...k->...d", self.dense[idx], basis) / h[..., None]
        if component is None:
            return out
        return out[..., self.index(component)]

    def column(self, component) -> np.ndarray:
        return self.values[:, self.index(component)]

    def refined_times(self, subdiv: int = 4) -> np.ndarray:
        if self.times.size == 1 or subdiv <= 1:
            return self.times.copy()
        frac = np.arange(subdiv) / subdiv
        h = np.diff(self.times)
        grid = (self.times[:-1, None] + h[:, None] * frac[None, :]).ravel()
        return np.append(grid, self.times[-1])

    # complex-scalar helpers (state x, ln y, Theta, Lambda)
    def z(self, t):
        v = self(t)
        return v[..., 0] + 1j * np.exp(v[..., 1])

    def __repr__(self):
        lo, hi = self.span
        extra = f", blowup at {self.blowup.t_escape:.6g}" if self.blowup else ""
        return f"Trajectory({self.kind}, {self.components}, [{lo:.6g}, {hi:.6g}], n={self.times.size}{extra})"


@dataclass(frozen=True)
class ZeroItem:
    start: float
    end: float

    @property
    def is_point(self) -> bool:
        return self.start == self.end

    def as_list(self):
        return [self.start, self.end]


# ---------------------------------------------------------------- solvers


def _span(span, t0):
    if span is None:
        raise ValueError("span required")
    if np.isscalar(span):
        return float(t0), float(span)
    a, b = span
    return float(a), float(b)


def _tols(tol, rtol, atol):
    if tol is not None:
        return float(tol), float(tol) * 1e-3
    return (DEFAULT_RTOL if rtol is None else float(rtol)), (DEFAULT_ATOL if atol is None else float(atol))


def _run(mode, progs, t_start, y0, t_end, rtol, atol, escape=np.inf, esc_idx=-1,
         h_max=np.inf, max_steps=MAX_STEPS):
    codes, consts, lens = progs
    cap = 1024
    ts, ys, dense, status, nfev = K.dopri5(
        mode, codes, consts, lens, float(t_start), np.asarray(y0, float), float(t_end),
        rtol, atol, 0.0, float(h_max), float(escape), int(esc_idx), ESCAPE_LOCALISATION,
        int(max_steps), cap,
    )
    return ts, ys, dense, int(status), int(nfev)


def _check(status, ts, what):
    if status in (K.STATUS_STEP_COLLAPSE, K.STATUS_NONFINITE):
        raise StepCollapseError(float(ts[-1]), f"{what}: step size collapse or non-finite right-hand side")
    if status == K.STATUS_MAX_STEPS:
        raise IntegrationError(f"{what}: step budget exhausted near t={ts[-1]!r}")


def solve_system(sys: SystemSpec, init, span, tol=None, *, rtol=None, atol=None,
                 h_max=np.inf) -> Trajectory:
    """Integrate the planar system from ``init = (phi, psi)`` over ``span``."""
    t_start, t_end = _span(span, sys.t0)
    rtol, atol = _tols(tol, rtol, atol)
    ts, ys, dense, status, nfev = _run(K.MODE_SYSTEM, sys.programs(), t_start, init, t_end, rtol, atol,
                                       h_max=h_max)
    _check(status, ts, "solve_system")
    return Trajectory._from_kernel("RealPair", ts, ys, dense, ("phi", "psi"),
                                   meta={"nfev": nfev, "rtol": rtol, "atol": atol})


def solve_riccati(spec: RiccatiSpec, x_init: float, span, tol=None, *, rtol=None, atol=None,
                  escape: float = ESCAPE_THRESHOLD, lift=None, h_max=np.inf) -> Trajectory:
    """Integrate ``x' = -(a x^2 + b x + c)``; finite-time escape is reported in-band.

    ``lift=(w, k)`` additionally accumulates ``L = int (w x + k)``, e.g.
    ``(a12, a11)`` gives ``log(phi/phi(t1))`` for the system equation.
    """
    t_start, t_end = _span(span, spec.t0)
    rtol, atol = _tols(tol, rtol, atol)
    w, k = lift if lift is not None else (0.0, 0.0)
    progs = _programs([spec.a, spec.b, spec.c, as_expr(w), as_expr(k)])
    x_init = float(x_init)
    if abs(x_init) > escape:
        raise ValueError(f"initial value {x_init} beyond escape threshold {escape}")
    ts, ys, dense, status, nfev = _run(K.MODE_RICCATI, progs, t_start, [x_init, 0.0], t_end,
                                       rtol, atol, escape=escape, esc_idx=0, h_max=h_max)
    blow = None
    if status == K.STATUS_ESCAPE:
        last = float(ys[-1, 0])
        blow = BlowUpReport(float(ts[-1]), "PlusInfinity" if last > 0 else "MinusInfinity", last)
    elif status in (K.STATUS_STEP_COLLAPSE, K.STATUS_NONFINITE):
        # a pole can also show up as a non-finite stage very close to it
        last = float(ys[-1, 0])
        if abs(last) > 1e4:
            blow = BlowUpReport(float(ts[-1]), "PlusInfinity" if last > 0 else "MinusInfinity", last)
        else:
            _check(status, ts, "solve_riccati")
    else:
        _check(status, ts, "solve_riccati")
    return Trajectory._from_kernel("RealScalar", ts, ys, dense, ("x", "L"), blow,
                                   meta={"nfev": nfev, "x_init": x_init, "rtol": rtol, "atol": atol})


def solve_riccati_complex(sys: SystemSpec, span, tol=None, *, rtol=None, atol=None) -> Trajectory:
    """The solution z0 of the system Riccati equation with z0(t0) = i.

    State columns: ``x`` = Re z0, ``lny`` = log Im z0, ``theta`` = int a12 Im z0,
    ``lam`` = int S/2 (so J_{S/2} = exp(lam)).
    """
    t_start, t_end = _span(span, sys.t0)
    if abs(t_start - sys.t0) > 0:
        raise ValueError("the complex Riccati solution is anchored at t0")
    rtol, atol = _tols(tol, rtol, atol)
    ts, ys, dense, status, nfev = _run(K.MODE_COMPLEX, sys.programs(), t_start, [0.0, 0.0, 0.0, 0.0],
                                       t_end, rtol, atol)
    if status == K.STATUS_NONFINITE or status == K.STATUS_STEP_COLLAPSE:
        raise PositivityLossError(
            f"complex Riccati solution lost accuracy near t={ts[-1]!r}; tighten the tolerance"
        )
    _check(status, ts, "solve_riccati_complex")
    y = np.exp(ys[:, 1])
    if not np.all(y > 0) or not np.all(np.isfinite(y)):
        raise PositivityLossError("Im z0 left (0, inf); tighten the tolerance")
    return Trajectory._from_kernel("ComplexScalar", ts, ys, dense, ("x", "lny", "theta", "lam"),
                                   meta={"nfev": nfev, "rtol": rtol, "atol": atol})


def solve_polar(sys: SystemSpec, theta0: float, logrho0: float, span, tol=None, *, rtol=None,
                atol=None) -> Trajectory:
    """Polar form: phi = J_{a11} rho cos(theta), psi = J_{a22} rho sin(theta)."""
    t_start, t_end = _span(span, sys.t0)
    rtol, atol = _tols(tol, rtol, atol)
    ts, ys, dense, status, nfev = _run(K.MODE_POLAR, sys.programs(), t_start,
                                       [float(theta0), float(logrho0), 0.0], t_end, rtol, atol)
    _check(status, ts, "solve_polar")
    return Trajectory._from_kernel("Polar", ts, ys, dense, ("theta", "logrho", "intB"),
                                   meta={"nfev": nfev})


def solve_prufer(sys: SystemSpec, theta0: float, span, logrho0: float = 0.0, tol=None, *, rtol=None,
                 atol=None) -> Trajectory:
    """Trace-free angle: phi = J_{S/2} rho cos(theta), psi = J_{S/2} rho sin(theta).

    The angle equation has bounded coefficients whatever the growth of
    J_{a11 - a22}, so it stays non-stiff where the J-scaled polar form does not.
    """
    t_start, t_end = _span(span, sys.t0)
    rtol, atol = _tols(tol, rtol, atol)
    ts, ys, dense, status, nfev = _run(K.MODE_PRUFER, sys.programs(), t_start,
                                       [float(theta0), float(logrho0)], t_end, rtol, atol)
    _check(status, ts, "solve_prufer")
    return Trajectory._from_kernel("Polar", ts, ys, dense, ("theta", "logrho"), meta={"nfev": nfev})


def lift_riccati(sys: SystemSpec, z_traj: Trajectory, phi_at_t1: float, t1: Optional[float] = None,
                 subdiv: int = 4) -> Trajectory:
    """phi = phi(t1) exp(int_{t1}^t [a12 z + a11]),  psi = z phi.

    The returned pair carries a ``logabsphi`` column so that fast-growing
    solutions can be compared without overflow.
    """
    from .quadrature import cumulative

    if phi_at_t1 == 0:
        raise ValueError("phi(t1) must be nonzero")
    t1 = z_traj.t_start if t1 is None else float(t1)
    lo, hi = z_traj.span
    if t1 < lo or t1 > hi:
        raise SpanError("t1 outside the Riccati trajectory span")
    col = "x" if "x" in z_traj.components else 0

    def integrand(t):
        return sys.a12(t) * z_traj(t, col) + sys.a11(t)

    nodes = z_traj.times[z_traj.times >= t1]
    if nodes.size == 0 or nodes[0] > t1:
        nodes = np.concatenate([[t1], nodes])
    cum = cumulative(integrand, t1, float(nodes[-1]), breakpoints=nodes)
    if nodes.size > 1:
        # cubic Hermite on exp(L) has relative error ~ (L' h)^4 / 384, so cap L' h
        h = np.diff(nodes)
        mid = nodes[:-1] + 0.5 * h
        rate = np.maximum(np.abs(integrand(nodes[:-1])), np.abs(integrand(mid)))
        rate = np.maximum(rate, np.abs(integrand(nodes[1:])))
        per = np.clip(np.ceil(rate * h / 0.02), subdiv, 4096).astype(int)
        grid = np.concatenate([a + (b - a) * np.arange(n) / n for a, b, n in zip(nodes[:-1], nodes[1:], per)]
                              + [nodes[-1:]])
    else:
        grid = nodes
    L = cum(grid)
    z = z_traj(grid, col)
    logabs = math.log(abs(phi_at_t1)) + L
    with np.errstate(over="ignore"):
        phi = math.copysign(1.0, phi_at_t1) * np.exp(logabs)
    psi = z * phi
    a11, a12, a21, a22 = sys.coefficients(grid)
    dphi = (a11 + a12 * z) * phi
    dpsi = a21 * phi + a22 * psi
    dlog = a11 + a12 * z
    vals = np.column_stack([phi, psi, logabs])
    ders = np.column_stack([dphi, dpsi, dlog])
    return Trajectory.from_hermite("RealPair", grid, vals, ders, ("phi", "psi", "logabsphi"),
                                   meta={"lifted_from": "riccati", "t1": t1})


# ---------------------------------------------------------------- zero sets


def _local_scale(v: np.ndarray, window: int) -> np.ndarray:
    from scipy.ndimage import maximum_filter1d

    return maximum_filter1d(np.abs(v), size=2 * window + 1, mode="nearest")


def zero_items_sampled(t: np.ndarray, v: np.ndarray, tol_abs: float = 1e-12, refine=None,
                       window: int = 32, xtol: float = 1e-12) -> list:
    """Zero items of samples ``v`` on the grid ``t``.

    ``refine(t)`` evaluates the underlying function for bisection; without it
    crossings are located by linear interpolation.
    """
    t = np.asarray(t, float)
    v = np.asarray(v, float)
    if t.size == 0:
        return []
    scale = _local_scale(v, window)
    scale = np.where(scale > 0, scale, 1.0)
    near = np.abs(v) <= tol_abs * scale
    items = []
    n = t.size
    i = 0
    while i < n:
        if near[i]:
            j = i
            while j + 1 < n and near[j + 1]:
                j += 1
            if j > i:
                items.append(ZeroItem(float(t[i]), float(t[j])))
            else:
                tz = float(t[i])
                if v[i] != 0.0 and refine is not None:
                    # polish a near-zero sample inside a sign change
                    lo = t[i - 1] if i > 0 else t[i]
                    hi = t[i + 1] if i + 1 < n else t[i]
                    flo = v[i - 1] if i > 0 else v[i]
                    fhi = v[i + 1] if i + 1 < n else v[i]
                    if flo * fhi < 0:
                        tz = brentq(refine, lo, hi, xtol=xtol)
                items.append(ZeroItem(tz, tz))
            i = j + 1
            continue
        if i + 1 < n and not near[i + 1] and v[i] * v[i + 1] < 0:
            a, b = t[i], t[i + 1]
            if refine is not None:
                tz = brentq(refine, a, b, xtol=xtol)
            else:
                tz = a - v[i] * (b - a) / (v[i + 1] - v[i])
            items.append(ZeroItem(float(tz), float(tz)))
        i += 1
    return items


def zero_sets(traj: Trajectory, component=0, tol_abs: float = 1e-12, subdiv: int = 8) -> list:
    """Zero items (points or intervals) of one trajectory component."""
    idx = traj.index(component)
    grid = traj.refined_times(subdiv)
    vals = traj(grid)[:, idx]

    def f(t):
        return float(traj(t)[idx])

    return zero_items_sampled(grid, vals, tol_abs=tol_abs, refine=f, window=4 * subdiv)


# ---------------------------------------------------------------- residuals and export


def system_residual(sys: SystemSpec, traj: Trajectory, points: str = "mid") -> np.ndarray:
    """Relative residual |y' - A y| / (|A| |y| + |y'|) at step midpoints."""
    if points == "mid":
        t = 0.5 * (traj.times[:-1] + traj.times[1:])
    else:
        t = traj.times
    y = traj(t)
    dy = traj.derivative(t)
    f1, f2 = sys.rhs(t, y[:, 0], y[:, 1])
    num = np.hypot(dy[:, 0] - f1, dy[:, 1] - f2)
    a11, a12, a21, a22 = sys.coefficients(t)
    amp = np.sqrt(a11**2 + a12**2 + a21**2 + a22**2) * np.hypot(y[:, 0], y[:, 1])
    den = amp + np.hypot(dy[:, 0], dy[:, 1])
    return num / np.where(den > 0, den, 1.0)


def riccati_residual(sys: SystemSpec, traj: Trajectory, min_phi: float = 1e-6,
                     subdiv: int = 2) -> np.ndarray:
    """Residual of x = psi/phi in the system Riccati equation, using dense-output slopes."""
    t = traj.refined_times(subdiv)
    y = traj(t)
    dy = traj.derivative(t)
    phi, psi = y[:, 0], y[:, 1]
    keep = np.abs(phi) > min_phi * np.max(np.abs(y[:, :2]), axis=1)
    t, phi, psi, dphi, dpsi = t[keep], phi[keep], psi[keep], dy[keep, 0], dy[keep, 1]
    x = psi / phi
    dx = (dpsi * phi - psi * dphi) / phi**2
    a11, a12, a21, a22 = sys.coefficients(t)
    res = dx + a12 * x * x + (a11 - a22) * x - a21
    scale = 1.0 + np.abs(a12) * x * x + np.abs(a11 - a22) * np.abs(x) + np.abs(a21)
    return res / scale


def to_csv(traj: Trajectory, path, components: Optional[Sequence] = None, times=None) -> None:
    comps = list(components) if components is not None else list(traj.components)
    t = traj.times if times is None else np.asarray(times, float)
    vals = traj(t)
    idx = [traj.index(c) for c in comps]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [str(c) for c in comps])
        for i, ti in enumerate(t):
            w.writerow([repr(float(ti))] + [repr(float(vals[i, j])) for j in idx])
