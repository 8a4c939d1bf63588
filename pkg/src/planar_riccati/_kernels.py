"""Hot loops: postfix coefficient evaluation and an adaptive Dormand–Prince 5(4) stepper.

All functions here are JIT-compiled through :func:`planar_riccati._jit.njit`
and use only numpy arrays and scalars so the interpreted fallback runs the
very same code.

Programs are packed as ``codes[p, k, 2]`` (opcode, argument), ``consts[p, m]``
and ``lens[p]``.  The right-hand side is selected by an integer mode:

* ``MODE_SYSTEM``   state (phi, psi); programs a11, a12, a21, a22
* ``MODE_RICCATI``  state (x, L); programs a, b, c, w, k with
  ``x' = -(a x^2 + b x + c)`` and ``L' = w x + k``
* ``MODE_COMPLEX``  state (x, ln y, Theta, Lambda) for the complex Riccati
  solution of the system equation; ``Theta' = a12 y``, ``Lambda' = S/2``
* ``MODE_POLAR``    state (theta, ln rho, int B)
* ``MODE_CHAIN``    state y; program i gives ``y_i'`` and may read the state
* ``MODE_PRUFER``   state (theta, ln rho) of the trace-free system
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit

MODE_SYSTEM = 0
MODE_RICCATI = 1
MODE_COMPLEX = 2
MODE_POLAR = 3
MODE_CHAIN = 4
MODE_PRUFER = 5

STATUS_OK = 0
STATUS_ESCAPE = 1
STATUS_STEP_COLLAPSE = 2
STATUS_MAX_STEPS = 3
STATUS_NONFINITE = 4

# Dormand–Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

# Dense output: y(t + s h) = y + h * K^T P [s, s^2, s^3, s^4]
DENSE_P = np.array(
    [
        [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
        [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
        [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
        [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
        [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
    ]
)


@njit
def rpn_eval(codes, consts, n, t, y):
    stack = np.empty(64)
    sp = 0
    for i in range(n):
        op = codes[i, 0]
        if op == 0:
            stack[sp] = consts[codes[i, 1]]
            sp += 1
        elif op == 1:
            stack[sp] = t
            sp += 1
        elif op == 15:
            stack[sp] = y[codes[i, 1]]
            sp += 1
        elif op == 7:
            stack[sp - 1] = -stack[sp - 1]
        elif op <= 6:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == 2:
                r = a + b
            elif op == 3:
                r = a - b
            elif op == 4:
                r = a * b
            elif op == 5:
                if b == 0.0:
                    r = np.nan
                else:
                    r = a / b
            else:
                if a < 0.0 and b != math.floor(b):
                    r = np.nan
                elif a == 0.0 and b < 0.0:
                    r = np.nan
                else:
                    r = math.pow(a, b)
            stack[sp - 1] = r
        elif op <= 12:
            a = stack[sp - 1]
            if op == 8:
                r = math.sin(a)
            elif op == 9:
                r = math.cos(a)
            elif op == 10:
                r = math.exp(a)
            elif op == 11:
                if a > 0.0:
                    r = math.log(a)
                else:
                    r = np.nan
            else:
                r = abs(a)
            stack[sp - 1] = r
        else:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == 13:
                stack[sp - 1] = a if a <= b else b
            else:
                stack[sp - 1] = a if a >= b else b
    return stack[0]


@njit
def rpn_eval_many(codes, consts, n, ts):
    out = np.empty(ts.shape[0])
    dummy = np.zeros(1)
    for i in range(ts.shape[0]):
        out[i] = rpn_eval(codes, consts, n, ts[i], dummy)
    return out


@njit
def rhs(mode, codes, consts, lens, t, y, out):
    if mode == 0:
        a11 = rpn_eval(codes[0], consts[0], lens[0], t, y)
        a12 = rpn_eval(codes[1], consts[1], lens[1], t, y)
        a21 = rpn_eval(codes[2], consts[2], lens[2], t, y)
        a22 = rpn_eval(codes[3], consts[3], lens[3], t, y)
        out[0] = a11 * y[0] + a12 * y[1]
        out[1] = a21 * y[0] + a22 * y[1]
    elif mode == 1:
        a = rpn_eval(codes[0], consts[0], lens[0], t, y)
        b = rpn_eval(codes[1], consts[1], lens[1], t, y)
        c = rpn_eval(codes[2], consts[2], lens[2], t, y)
        w = rpn_eval(codes[3], consts[3], lens[3], t, y)
        k = rpn_eval(codes[4], consts[4], lens[4], t, y)
        x = y[0]
        out[0] = -((a * x + b) * x + c)
        out[1] = w * x + k
    elif mode == 2:
        a11 = rpn_eval(codes[0], consts[0], lens[0], t, y)
        a12 = rpn_eval(codes[1], consts[1], lens[1], t, y)
        a21 = rpn_eval(codes[2], consts[2], lens[2], t, y)
        a22 = rpn_eval(codes[3], consts[3], lens[3], t, y)
        bb = a11 - a22
        x = y[0]
        yy = math.exp(y[1])
        out[0] = -a12 * (x * x - yy * yy) - bb * x + a21
        out[1] = -2.0 * a12 * x - bb
        out[2] = a12 * yy
        out[3] = 0.5 * (a11 + a22)
    elif mode == 3:
        a11 = rpn_eval(codes[0], consts[0], lens[0], t, y)
        a12 = rpn_eval(codes[1], consts[1], lens[1], t, y)
        a21 = rpn_eval(codes[2], consts[2], lens[2], t, y)
        a22 = rpn_eval(codes[3], consts[3], lens[3], t, y)
        ib = y[2]
        big12 = a12 * math.exp(-ib)
        big21 = a21 * math.exp(ib)
        th = y[0]
        s = math.sin(th)
        c = math.cos(th)
        out[0] = big21 * c * c - big12 * s * s
        out[1] = (big12 + big21) * s * c
        out[2] = a11 - a22
    elif mode == 5:
        a11 = rpn_eval(codes[0], consts[0], lens[0], t, y)
        a12 = rpn_eval(codes[1], consts[1], lens[1], t, y)
        a21 = rpn_eval(codes[2], consts[2], lens[2], t, y)
        a22 = rpn_eval(codes[3], consts[3], lens[3], t, y)
        bb = a11 - a22
        s = math.sin(y[0])
        c = math.cos(y[0])
        out[0] = a21 * c * c - a12 * s * s - bb * s * c
        out[1] = 0.5 * bb * (c * c - s * s) + (a12 + a21) * s * c
    else:
        for i in range(y.shape[0]):
            out[i] = rpn_eval(codes[i], consts[i], lens[i], t, y)


@njit
def _all_finite(v):
    for i in range(v.shape[0]):
        if not np.isfinite(v[i]):
            return False
    return True


@njit
def dopri5(mode, codes, consts, lens, t0, y0, t_end, rtol, atol, h_init, h_max,
           escape, esc_idx, loc_tol, max_steps, cap):
    """Integrate from t0 to t_end (either direction).

    Returns (ts[n], ys[n, d], dense[n-1, d, 4], status, nfev).
    """
    d = y0.shape[0]
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    ts = np.empty(cap)
    ys = np.empty((cap, d))
    dense = np.empty((cap, d, 4))
    P = DENSE_P
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    k5 = np.empty(d)
    k6 = np.empty(d)
    k7 = np.empty(d)
    tmp = np.empty(d)
    ynew = np.empty(d)
    y = y0.copy()
    t = t0
    ts[0] = t
    ys[0, :] = y
    n = 1
    nfev = 0
    status = STATUS_OK
    if span == 0.0:
        return ts[:1].copy(), ys[:1].copy(), dense[:0].copy(), status, nfev
    rhs(mode, codes, consts, lens, t, y, k1)
    nfev += 1
    if not _all_finite(k1):
        return ts[:1].copy(), ys[:1].copy(), dense[:0].copy(), STATUS_NONFINITE, nfev
    # initial step (Hairer's heuristic)
    if h_init > 0.0:
        h = h_init
    else:
        d0 = 0.0
        d1 = 0.0
        for i in range(d):
            sc = atol + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k1[i] / sc) ** 2
        d0 = math.sqrt(d0 / d)
        d1 = math.sqrt(d1 / d)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        h0 = min(h0, span)
        for i in range(d):
            tmp[i] = y[i] + direction * h0 * k1[i]
        rhs(mode, codes, consts, lens, t + direction * h0, tmp, k2)
        nfev += 1
        d2 = 0.0
        for i in range(d):
            sc = atol + rtol * abs(y[i])
            d2 += ((k2[i] - k1[i]) / sc) ** 2
        d2 = math.sqrt(d2 / d) / h0
        if not np.isfinite(d2):
            h = h0 * 1e-3
        elif max(d1, d2) <= 1e-15:
            h = max(1e-6, h0 * 1e-3)
        else:
            h = (0.01 / max(d1, d2)) ** 0.2
        h = min(100.0 * h0, h)
    h = min(h, h_max, span)
    h_cap = h_max
    steps = 0
    h_min_rel = 1e-14
    while True:
        remaining = (t_end - t) * direction
        if remaining <= 1e-15 * max(1.0, abs(t_end)):
            break
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h > remaining:
            h = remaining
        if h > h_cap:
            h = h_cap
        if h < h_min_rel * max(1.0, abs(t)):
            status = STATUS_STEP_COLLAPSE
            break
        hs = direction * h
        for i in range(d):
            tmp[i] = y[i] + hs * A21 * k1[i]
        rhs(mode, codes, consts, lens, t + C2 * hs, tmp, k2)
        for i in range(d):
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        rhs(mode, codes, consts, lens, t + C3 * hs, tmp, k3)
        for i in range(d):
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(mode, codes, consts, lens, t + C4 * hs, tmp, k4)
        for i in range(d):
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(mode, codes, consts, lens, t + C5 * hs, tmp, k5)
        for i in range(d):
            tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs(mode, codes, consts, lens, t + hs, tmp, k6)
        for i in range(d):
            ynew[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        rhs(mode, codes, consts, lens, t + hs, ynew, k7)
        nfev += 6
        steps += 1
        err = 0.0
        finite = True
        for i in range(d):
            e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            q = e / sc
            if not np.isfinite(q) or not np.isfinite(ynew[i]) or not np.isfinite(k7[i]):
                finite = False
            err += q * q
        if not finite:
            h *= 0.25
            continue
        err = math.sqrt(err / d)
        if err > 1.0:
            fac = max(0.2, 0.9 * err ** -0.2)
            h *= fac
            continue
        # escape localisation: shrink the step until the crossing step is short
        if esc_idx >= 0 and abs(ynew[esc_idx]) > escape:
            if h > loc_tol * max(1.0, abs(t)):
                h_cap = 0.5 * h
                h = h_cap
                continue
        # accept
        if n >= cap - 1:
            cap2 = cap * 2
            ts2 = np.empty(cap2)
            ys2 = np.empty((cap2, d))
            de2 = np.empty((cap2, d, 4))
            ts2[:n] = ts[:n]
            ys2[:n] = ys[:n]
            de2[: n - 1] = dense[: n - 1]
            ts, ys, dense, cap = ts2, ys2, de2, cap2
        for i in range(d):
            for j in range(4):
                dense[n - 1, i, j] = hs * (
                    k1[i] * P[0, j] + k3[i] * P[2, j] + k4[i] * P[3, j]
                    + k5[i] * P[4, j] + k6[i] * P[5, j] + k7[i] * P[6, j]
                )
        t = t + hs
        for i in range(d):
            y[i] = ynew[i]
            k1[i] = k7[i]
        ts[n] = t
        ys[n, :] = y
        n += 1
        if esc_idx >= 0 and abs(y[esc_idx]) > escape:
            status = STATUS_ESCAPE
            break
        if err < 1e-10:
            fac = 5.0
        else:
            fac = min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = min(h * fac, h_max)
    return ts[:n].copy(), ys[:n].copy(), dense[: n - 1].copy(), status, nfev
