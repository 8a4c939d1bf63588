"""Weighted integral transforms and improper-integral verdicts.

Notation, with weights written out explicitly:

* ``J(a, u; t1, t)   = exp(int_{t1}^t a u)``
* ``I+(u, v; t1, t)  = int_{t1}^t u(s) exp(-int_{t1}^s v) ds``
* ``I-(u, v; t1, t)  = int_{t1}^t exp(-int_s^t u) v(s) ds``
* ``mu_u(t1; t)      = int_{t1}^t a(s) exp(-int_{t1}^s (2 a u + b)) ds``;
  ``nu_u(t1)`` is the same integral up to infinity.

Finite integrals use adaptive Gauss–Kronrod (7/15) bisection; improper ones
are judged on doubling windows ``t1 + h 2^k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coeffexpr import CoeffExpr, as_expr
from .integrate import SpanError, Trajectory

__all__ = [
    "Signal",
    "as_signal",
    "IntegralVerdict",
    "HorizonPolicy",
    "Cumulative",
    "cumulative",
    "integrate_adaptive",
    "transform_J",
    "transform_Iplus",
    "transform_Iminus",
    "transform_mu_nu",
    "iplus_path",
    "iminus_path",
    "weighted",
    "classify_improper",
    "windowed_bounded",
]

EPSABS = 1e-12
EPSREL = 1e-9

# Kronrod 15 / Gauss 7 on [-1, 1]
_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


# ---------------------------------------------------------------- signals


class Signal:
    """Vectorised real function with a span and optional smoothness breakpoints."""

    def __init__(self, fn: Callable, span=(-math.inf, math.inf), breakpoints=None, label: str = ""):
        self.fn = fn
        self.span = (float(span[0]), float(span[1]))
        self.breakpoints = None if breakpoints is None else np.asarray(breakpoints, float)
        self.label = label

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.span
        tol = 1e-12 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0, abs(hi) if math.isfinite(hi) else 1.0)
        if t.size and (np.min(t) < lo - tol or np.max(t) > hi + tol):
            raise SpanError(f"signal {self.label or ''} evaluated outside its span {self.span}")
        out = np.asarray(self.fn(t), dtype=float)
        return np.broadcast_to(out, t.shape).copy() if out.shape != t.shape else out

    def covers(self, a: float, b: float) -> bool:
        lo, hi = self.span
        tol = 1e-12 * max(1.0, abs(a), abs(b))
        return lo - tol <= min(a, b) and max(a, b) <= hi + tol

    def require(self, a: float, b: float):
        if not self.covers(a, b):
            raise SpanError(f"signal {self.label or ''} with span {self.span} does not cover [{a}, {b}]")

    # combinators
    @staticmethod
    def _join(a: "Signal", b: "Signal"):
        span = (max(a.span[0], b.span[0]), min(a.span[1], b.span[1]))
        if a.breakpoints is None:
            bp = b.breakpoints
        elif b.breakpoints is None:
            bp = a.breakpoints
        else:
            bp = np.union1d(a.breakpoints, b.breakpoints)
        return span, bp

    def __mul__(self, other):
        other = as_signal(other)
        span, bp = Signal._join(self, other)
        return Signal(lambda t: self.fn(t) * other.fn(t), span, bp, f"({self.label})*({other.label})")

    __rmul__ = __mul__

    def __add__(self, other):
        other = as_signal(other)
        span, bp = Signal._join(self, other)
        return Signal(lambda t: self.fn(t) + other.fn(t), span, bp, f"({self.label})+({other.label})")

    __radd__ = __add__

    def __neg__(self):
        return Signal(lambda t: -self.fn(t), self.span, self.breakpoints, f"-({self.label})")

    def __sub__(self, other):
        return self + (-as_signal(other))

    def scaled(self, alpha: float) -> "Signal":
        return Signal(lambda t: alpha * self.fn(t), self.span, self.breakpoints, f"{alpha}*({self.label})")


def as_signal(x, component=None) -> Signal:
    if isinstance(x, Signal):
        return x
    if isinstance(x, Trajectory):
        comp = 0 if component is None else component
        idx = x.index(comp)
        return Signal(lambda t: x(t)[..., idx], x.span, x.times, f"traj[{comp}]")
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], Trajectory):
        return as_signal(x[0], x[1])
    if isinstance(x, (CoeffExpr, str, int, float, np.floating, np.integer)):
        e = as_expr(x)
        if e.is_constant:
            v = e.eval(0.0)
            return Signal(lambda t: np.full(np.shape(t), v), label=str(e))
        return Signal(e, label=str(e))
    if callable(x):
        return Signal(x, label=getattr(x, "__name__", "fn"))
    raise TypeError(f"cannot use {x!r} as a signal")


# ---------------------------------------------------------------- adaptive quadrature


def _gk(f, a: np.ndarray, b: np.ndarray):
    """Kronrod and Gauss estimates on many panels at once."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * _XK[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        bad = np.argwhere(~np.isfinite(fx))[0]
        raise FloatingPointError(f"non-finite integrand near t={x[tuple(bad)]!r}")
    k = h * (fx @ _WK)
    g = h * (fx @ _WG)
    return k, np.abs(k - g)


def _initial_edges(a: float, b: float, breakpoints=None, max_panel: Optional[float] = None):
    edges = [a, b]
    if breakpoints is not None and len(breakpoints):
        bp = np.asarray(breakpoints, float)
        bp = bp[(bp > a) & (bp < b)]
        edges = np.concatenate([[a], bp, [b]])
    edges = np.asarray(edges, float)
    if max_panel is not None and max_panel > 0:
        out = [edges[0]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            m = int(math.ceil((hi - lo) / max_panel))
            if m > 1:
                out.extend(np.linspace(lo, hi, m + 1)[1:].tolist())
            else:
                out.append(hi)
        edges = np.asarray(out)
    return edges


def _panels(f, edges: np.ndarray, epsabs: float, epsrel: float, max_rounds: int = 60):
    """Adaptively bisect panels until each meets its tolerance; returns sorted edges and values."""
    a = edges[:-1].copy()
    b = edges[1:].copy()
    total_len = max(edges[-1] - edges[0], 1e-300)
    done_a, done_b, done_v, done_e = [], [], [], []
    for _ in range(max_rounds):
        if a.size == 0:
            break
        k, e = _gk(f, a, b)
        tol = np.maximum(epsabs * (b - a) / total_len, epsrel * np.abs(k))
        tiny = (b - a) <= 1e-13 * np.maximum(1.0, np.abs(a))
        ok = (e <= tol) | tiny
        done_a.append(a[ok]); done_b.append(b[ok]); done_v.append(k[ok]); done_e.append(e[ok])
        a, b = a[~ok], b[~ok]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
    if a.size:
        k, e = _gk(f, a, b)
        done_a.append(a); done_b.append(b); done_v.append(k); done_e.append(e)
    A = np.concatenate(done_a)
    Bv = np.concatenate(done_b)
    V = np.concatenate(done_v)
    E = np.concatenate(done_e)
    order = np.argsort(A)
    return A[order], Bv[order], V[order], E[order]


def integrate_adaptive(f, a: float, b: float, epsabs: float = EPSABS, epsrel: float = EPSREL,
                       breakpoints=None) -> tuple:
    """(value, error estimate) of int_a^b f."""
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    edges = _initial_edges(a, b, breakpoints)
    _, _, v, e = _panels(f, edges, epsabs, epsrel)
    return sign * float(math.fsum(v)), float(np.sum(e))


class Cumulative:
    """F(t) = int_{t1}^t f on [t1, T], evaluable anywhere inside, extendable to the right."""

    def __init__(self, f, t1: float, T: float, epsabs: float = EPSABS, epsrel: float = EPSREL,
                 breakpoints=None, max_panel: Optional[float] = None):
        self.f = f
        self.t1 = float(t1)
        self.epsabs = epsabs
        self.epsrel = epsrel
        self.breakpoints = breakpoints
        self.max_panel = max_panel
        self.edges = np.array([self.t1])
        self.values = np.array([0.0])
        self.err = 0.0
        if T > t1:
            self.extend_to(T)

    @property
    def T(self) -> float:
        return float(self.edges[-1])

    def extend_to(self, T: float):
        T = float(T)
        if T <= self.T:
            return self
        edges = _initial_edges(self.T, T, self.breakpoints, self.max_panel)
        A, Bv, V, E = _panels(self.f, edges, self.epsabs, self.epsrel)
        cum = self.values[-1] + np.cumsum(V)
        self.edges = np.concatenate([self.edges, Bv])
        self.values = np.concatenate([self.values, cum])
        self.err += float(np.sum(E))
        return self

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        tol = 1e-12 * max(1.0, abs(self.T))
        if np.any(t < self.t1 - tol) or np.any(t > self.T + tol):
            raise SpanError(f"cumulative integral evaluated outside [{self.t1}, {self.T}]")
        t = np.clip(t, self.t1, self.T)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, max(self.edges.size - 2, 0))
        base = self.values[idx]
        left = self.edges[idx]
        out = base.copy()
        part = t > left
        if np.any(part):
            k, _ = _gk(self.f, left[part], t[part])
            out[part] += k
        return float(out[0]) if scalar else out


def cumulative(f, t1: float, T: float, epsabs: float = EPSABS, epsrel: float = EPSREL,
               breakpoints=None, max_panel=None) -> Cumulative:
    """``t -> int_{t1}^t f`` on ``[t1, T]``; ``f`` is a callable, expression or trajectory."""
    if not callable(f) or isinstance(f, Trajectory):
        f = as_signal(f).fn
    return Cumulative(f, t1, T, epsabs, epsrel, breakpoints, max_panel)


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class IntegralVerdict:
    kind: str  # Converged | DivergesPlus | DivergesMinus | Undetermined
    value: float = math.nan
    err: float = math.nan
    evidence: tuple = ()
    note: str = ""

    @property
    def converged(self) -> bool:
        return self.kind == "Converged"

    @property
    def diverges_plus(self) -> bool:
        return self.kind == "DivergesPlus"

    @property
    def diverges_minus(self) -> bool:
        return self.kind == "DivergesMinus"

    @property
    def finite(self) -> bool:
        return self.converged

    def as_float(self) -> Optional[float]:
        if self.converged:
            return self.value
        if self.diverges_plus:
            return math.inf
        if self.diverges_minus:
            return -math.inf
        return None

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": None if math.isnan(self.value) else self.value,
            "err": None if math.isnan(self.err) else self.err,
            "evidence": [[float(a), float(b)] for a, b in self.evidence],
            "note": self.note,
        }


@dataclass(frozen=True)
class HorizonPolicy:
    """Doubling windows T_k = t1 + h 2^k, k = 0..doublings, ending exactly at t_max when given."""

    t_max: Optional[float] = None
    doublings: int = 20
    h: float = 1.0
    atol: float = 1e-5
    rtol: float = 1e-6
    converge_ratio: float = 0.6
    diverge_ratio: float = 0.98
    magnitude: float = 1e8
    min_window: float = 1e-3

    def windows(self, t1: float, span_end: float = math.inf) -> np.ndarray:
        t_max = self.t_max
        if t_max is None and math.isfinite(span_end):
            t_max = span_end
        if t_max is not None:
            t_max = min(t_max, span_end)
            length = t_max - t1
            if length <= 0:
                raise SpanError("horizon does not exceed t1")
            k = int(self.doublings)
            while k > 3 and length / 2**k < self.min_window:
                k -= 1
            h = length / 2**k
        else:
            k, h = int(self.doublings), self.h
        ends = t1 + h * 2.0 ** np.arange(k + 1)
        if t_max is not None:
            ends[-1] = t_max
        return ends


def classify_improper(f, t1: float, policy: Optional[HorizonPolicy] = None) -> IntegralVerdict:
    """Converged / DivergesPlus / DivergesMinus / Undetermined for int_{t1}^inf f."""
    policy = policy or HorizonPolicy()
    sig = as_signal(f)
    ends = policy.windows(float(t1), sig.span[1])
    sig.require(t1, float(ends[-1]))
    partial = 0.0
    prev = float(t1)
    incs: list = []
    evidence: list = []
    qerr = 0.0
    stopped_early = False
    mono_ok = True
    for k, T in enumerate(ends):
        T = float(T)
        bp = sig.breakpoints
        inc, e = integrate_adaptive(sig.fn, prev, T, breakpoints=bp)
        qerr += e
        # sub-window monotonicity for the later windows
        if k >= len(ends) - 3:
            sub = np.linspace(prev, T, 9)
            vals = [integrate_adaptive(sig.fn, sub[i], sub[i + 1], breakpoints=bp)[0] for i in range(8)]
            s = np.sign([v for v in vals if v != 0.0])
            if s.size and not (np.all(s > 0) or np.all(s < 0)):
                mono_ok = False
        partial += inc
        incs.append(inc)
        evidence.append((T, partial))
        prev = T
        if abs(partial) > policy.magnitude:
            stopped_early = True
            break
        if len(incs) >= 4 and _is_converged(incs, partial, policy):
            break
    ev = tuple(evidence)
    if _is_converged(incs, partial, policy):
        r = _ratios(incs[-4:])
        rr = min(float(np.mean(r)), 0.95)
        tail = incs[-1] * rr / (1.0 - rr)
        return IntegralVerdict("Converged", partial + tail, abs(tail) + qerr + 1e-15, ev)
    last = incs[-4:]
    if len(last) >= 4 and mono_ok and (all(x > 0 for x in last) or all(x < 0 for x in last)):
        r = _ratios(last)
        growing = stopped_early or abs(partial) > policy.magnitude or bool(np.all(r >= policy.diverge_ratio))
        if growing:
            kind = "DivergesPlus" if partial > 0 else "DivergesMinus"
            note = "magnitude threshold" if abs(partial) > policy.magnitude else "non-decaying window increments"
            return IntegralVerdict(kind, math.nan, math.nan, ev, note)
    return IntegralVerdict("Undetermined", partial, math.nan, ev, "no convergence or divergence pattern")


def _ratios(incs) -> np.ndarray:
    out = []
    for a, b in zip(incs[:-1], incs[1:]):
        if a == 0.0:
            out.append(0.0 if b == 0.0 else math.inf)
        else:
            out.append(abs(b / a))
    return np.asarray(out)


def _is_converged(incs, partial, policy: HorizonPolicy) -> bool:
    if len(incs) < 4:
        return False
    r = _ratios(incs[-4:])
    return bool(np.all(r <= policy.converge_ratio)) and abs(incs[-1]) < policy.atol + policy.rtol * abs(partial)


# ---------------------------------------------------------------- transforms


def _product(a: Signal, u: Signal):
    return lambda t: a.fn(t) * u.fn(t)


def transform_J(a, u, t1: float, t: float) -> float:
    """exp(int_{t1}^t a u)."""
    a, u = as_signal(a), as_signal(u)
    a.require(t1, t)
    u.require(t1, t)
    bp = Signal._join(a, u)[1]
    val, _ = integrate_adaptive(_product(a, u), t1, t, breakpoints=bp)
    return math.exp(val)


class weighted:
    """Integrand ``u(s) exp(-int_{t1}^s w v)`` with the exponent tracked lazily."""

    def __init__(self, u, v, t1: float, weight=1.0, T: Optional[float] = None):
        self.u = as_signal(u)
        self.v = as_signal(v)
        self.w = as_signal(weight)
        self.t1 = float(t1)
        span, bp = Signal._join(self.u, self.v)
        span = (max(span[0], self.w.span[0]), min(span[1], self.w.span[1]))
        self.span = span
        self.breakpoints = bp
        inner = _product(self.w, self.v)
        self.V = Cumulative(inner, self.t1, self.t1, breakpoints=bp)
        if T is not None:
            self.V.extend_to(T)

    def exponent(self, t):
        t = np.asarray(t, float)
        if t.size and np.max(t) > self.V.T:
            self.V.extend_to(float(np.max(t)))
        return self.V(t)

    def __call__(self, t):
        t = np.asarray(t, float)
        return self.u.fn(t) * np.exp(-self.exponent(t))

    def signal(self) -> Signal:
        return Signal(self, (max(self.span[0], self.t1), self.span[1]), self.breakpoints, "weighted")


def transform_Iplus(u, v, t1: float, t=math.inf, policy: Optional[HorizonPolicy] = None, weight=1.0):
    """int_{t1}^t u(s) exp(-int_{t1}^s weight*v) ds; an IntegralVerdict when t is infinite."""
    g = weighted(u, v, t1, weight)
    sig = g.signal()
    if math.isinf(t):
        return classify_improper(sig, t1, policy)
    sig.require(t1, t)
    return integrate_adaptive(g, t1, float(t), breakpoints=g.breakpoints)[0]


def iplus_path(u, v, t1: float, T: float, weight=1.0) -> Cumulative:
    """I+(u, v; t1, .) as a cumulative function on [t1, T]."""
    g = weighted(u, v, t1, weight, T)
    g.signal().require(t1, T)
    return Cumulative(g, t1, T, breakpoints=g.breakpoints)


def transform_Iminus(u, v, t1: float, t: float, weight=1.0) -> float:
    """int_{t1}^t exp(-int_s^t weight*u) v(s) ds."""
    if t == t1:
        return 0.0
    u, v, w = as_signal(u), as_signal(v), as_signal(weight)
    for s in (u, v, w):
        s.require(t1, t)
    bp = Signal._join(u, v)[1]
    U = Cumulative(_product(w, u), t1, t, breakpoints=bp)
    Ut = U(t)
    return integrate_adaptive(lambda s: np.exp(U(s) - Ut) * v.fn(s), t1, t, breakpoints=bp)[0]


def iminus_path(u, v, t1: float, grid, weight=1.0) -> np.ndarray:
    """I-(u, v; t1, t) on an increasing grid starting at t1, by the stable recursion
    I(t_{k+1}) = exp(-int_{t_k}^{t_{k+1}} u) I(t_k) + int_{t_k}^{t_{k+1}} exp(-int_s^{t_{k+1}} u) v(s) ds.
    """
    grid = np.asarray(grid, float)
    u, v, w = as_signal(u), as_signal(v), as_signal(weight)
    T = float(grid[-1])
    for s in (u, v, w):
        s.require(t1, T)
    bp = Signal._join(u, v)[1]
    U = Cumulative(_product(w, u), t1, T, breakpoints=bp)
    Ug = U(grid)
    out = np.zeros(grid.size)
    for k in range(1, grid.size):
        a, b = grid[k - 1], grid[k]
        Ub = Ug[k]
        piece = integrate_adaptive(lambda s: np.exp(U(s) - Ub) * v.fn(s), a, b, breakpoints=bp)[0]
        out[k] = math.exp(Ug[k - 1] - Ub) * out[k - 1] + piece
    return out


def transform_mu_nu(a, b, u, t1: float, t=math.inf, policy: Optional[HorizonPolicy] = None):
    """mu_u(t1; t) for finite t, the verdict for nu_u(t1) when t is infinite."""
    a_s, b_s, u_s = as_signal(a), as_signal(b), as_signal(u)
    span, bp = Signal._join(a_s, b_s)
    span2, bp2 = Signal._join(Signal(lambda x: x, span, bp), u_s)
    expo = Signal(lambda x: 2.0 * a_s.fn(x) * u_s.fn(x) + b_s.fn(x), span2, bp2, "2au+b")
    return transform_Iplus(a_s, expo, t1, t, policy)


def windowed_bounded(times, values, t0: Optional[float] = None, T: Optional[float] = None,
                     slack: float = 0.01) -> dict:
    """Finite-horizon boundedness rule for a sampled function.

    Bounded when the sup of |values| over ``[t0 + L/4, T]`` is within ``slack``
    of the sup over ``[t0 + L/16, t0 + L/4]``. The ratio doubles as a growth
    measure.
    """
    times = np.asarray(times, float)
    v = np.abs(np.asarray(values, float))
    t0 = float(times[0]) if t0 is None else float(t0)
    T = float(times[-1]) if T is None else float(T)
    L = T - t0
    early = (times >= t0 + L / 16) & (times <= t0 + L / 4)
    late = (times >= t0 + L / 4) & (times <= T)
    s_early = float(np.max(v[early])) if np.any(early) else math.nan
    s_late = float(np.max(v[late])) if np.any(late) else math.nan
    ratio = s_late / s_early if s_early > 0 else (1.0 if s_late == 0 else math.inf)
    return {"bounded": bool(ratio <= 1.0 + slack), "sup_early": s_early, "sup_late": s_late,
            "ratio": ratio, "window": [t0 + L / 16, t0 + L / 4, T]}
