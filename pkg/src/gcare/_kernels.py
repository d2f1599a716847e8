"""Hot numerical kernels: Dormand-Prince 5(4) integration of matrix ODEs.

Everything here is written in the numba-compatible subset of numpy and is
compiled by :func:`gcare._accel.njit` unless acceleration is disabled.
States are always 2-D float64 arrays (a vector state is an ``n x 1`` matrix).

Integrator status codes returned by the ``integrate_*`` kernels:

    0  reached the last output time
    1  stationary: ``|dY/dt|`` stayed below the thresholds for ``window`` steps
    2  ``max|Y|`` exceeded the ceiling
    3  step size underflow
    4  step budget exhausted
"""

import numpy as np

from ._accel import njit

REACHED_END = 0
STATIONARY = 1
CEILING = 2
STEP_UNDERFLOW = 3
MAX_STEPS = 4

STATUS_NAMES = {
    REACHED_END: "reached-end",
    STATIONARY: "stationary",
    CEILING: "ceiling",
    STEP_UNDERFLOW: "step-underflow",
    MAX_STEPS: "max-steps",
}

# Dormand-Prince tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# difference between the 5th and embedded 4th order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True)
def riccati_rhs(X, A, B, Q, S, Rp):
    """``X A + A^T X - (S + X B) Rp (S + X B)^T + Q``."""
    SX = S + X @ B
    return X @ A + A.T @ X - SX @ (Rp @ SX.T) + Q


@njit(cache=True)
def hermite_eval(ts, Ys, dYs, t):
    """Cubic Hermite interpolation of matrix knots; constant if one knot."""
    k = ts.shape[0]
    if k == 1:
        return Ys[0].copy()
    if t <= ts[0]:
        return Ys[0].copy()
    if t >= ts[k - 1]:
        return Ys[k - 1].copy()
    i = np.searchsorted(ts, t) - 1
    if i < 0:
        i = 0
    h = ts[i + 1] - ts[i]
    s = (t - ts[i]) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * Ys[i] + (h10 * h) * dYs[i] + h01 * Ys[i + 1] + (h11 * h) * dYs[i + 1]


@njit(cache=True)
def linear_eval(ts, Ys, t):
    """Piecewise-linear interpolation of matrix knots, clamped at the ends."""
    k = ts.shape[0]
    if k == 1 or t <= ts[0]:
        return Ys[0].copy()
    if t >= ts[k - 1]:
        return Ys[k - 1].copy()
    i = np.searchsorted(ts, t) - 1
    if i < 0:
        i = 0
    w = (t - ts[i]) / (ts[i + 1] - ts[i])
    return (1.0 - w) * Ys[i] + w * Ys[i + 1]


RICCATI_FIELD = 0
FEEDBACK_FIELD = 1


@njit(cache=True)
def _field(kind, t, Y, p):
    # p = (A, B, Q, S, Rp, G, gain_t, gain_K, gain_dK, v_t, v_val)
    if kind == RICCATI_FIELD:
        return riccati_rhs(Y, p[0], p[1], p[2], p[3], p[4])
    K = hermite_eval(p[6], p[7], p[8], t)
    v = linear_eval(p[9], p[10], t)
    u = -(K @ Y) + p[5] @ v
    return p[0] @ Y + p[1] @ u


@njit(cache=True)
def _err_norm(E, Y0, Y1, rtol, atol):
    return np.max(np.abs(E) / (atol + rtol * np.maximum(np.abs(Y0), np.abs(Y1))))


@njit(cache=True)
def _dopri(kind, symmetric, Y0, t_out, params, rtol, atol, h0, h_min, max_steps,
           ceiling, stat_rel, res_tol, window):
    """DOPRI5 driver for the vector field selected by ``kind``.

    Advances from ``t_out[0]`` and lands exactly on every entry of ``t_out``,
    recording the state there. Accepted states are re-symmetrised when
    ``symmetric`` is set.
    """
    n_out = t_out.shape[0]
    r, c = Y0.shape
    nA = np.sqrt(np.sum(params[0] * params[0]))
    nB = np.sqrt(np.sum(params[1] * params[1]))
    nQ = np.sqrt(np.sum(params[2] * params[2]))
    nS = np.sqrt(np.sum(params[3] * params[3]))
    nRp = np.sqrt(np.sum(params[4] * params[4]))
    rec_t = np.empty(n_out + 1)
    rec_Y = np.empty((n_out + 1, r, c))
    t = t_out[0]
    Y = Y0.copy()
    if symmetric:
        Y = 0.5 * (Y + Y.T)
    k1 = _field(kind, t, Y, params)
    rec_t[0] = t
    rec_Y[0] = Y
    n_rec = 1
    nxt = 1
    n_acc = 0
    n_rej = 0
    status = REACHED_END
    quiet = 0

    span = t_out[n_out - 1] - t
    h = h0
    if h <= 0.0:
        sc = atol + rtol * np.abs(Y)
        d0 = np.sqrt(np.mean((Y / sc) ** 2))
        d1 = np.sqrt(np.mean((k1 / sc) ** 2))
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
        if span > 0.0 and h > span:
            h = span

    while nxt < n_out:
        if n_acc + n_rej >= max_steps:
            status = MAX_STEPS
            break
        target = t_out[nxt]
        gap = target - t
        if gap <= 1e-13 * max(1.0, abs(target)):
            t = target
            rec_t[n_rec] = t
            rec_Y[n_rec] = Y
            n_rec += 1
            nxt += 1
            continue
        hit = h >= gap
        hs = gap if hit else h
        if hs < h_min:
            status = STEP_UNDERFLOW
            break

        k2 = _field(kind, t + _C2 * hs, Y + hs * (_A21 * k1), params)
        k3 = _field(kind, t + _C3 * hs, Y + hs * (_A31 * k1 + _A32 * k2), params)
        k4 = _field(kind, t + _C4 * hs, Y + hs * (_A41 * k1 + _A42 * k2 + _A43 * k3), params)
        k5 = _field(kind, t + _C5 * hs,
                   Y + hs * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), params)
        k6 = _field(kind, t + hs,
                   Y + hs * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
                   params)
        Yn = Y + hs * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = _field(kind, t + hs, Yn, params)
        E = hs * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        err = _err_norm(E, Y, Yn, rtol, atol)

        if err <= 1.0:
            n_acc += 1
            if hit:
                t = target
            else:
                t = t + hs
            if symmetric:
                Y = 0.5 * (Yn + Yn.T)
                k1 = 0.5 * (k7 + k7.T)
            else:
                Y = Yn
                k1 = k7
            if hit:
                rec_t[n_rec] = t
                rec_Y[n_rec] = Y
                n_rec += 1
                nxt += 1
            if np.max(np.abs(Y)) > ceiling:
                status = CEILING
                break
            if window > 0:
                dn = np.sqrt(np.sum(k1 * k1))
                yn = np.sqrt(np.sum(Y * Y))
                # the residual test is relative to the size of its terms
                sxb = nS + yn * nB
                rscale = 1.0 + nQ + 2.0 * nA * yn + sxb * sxb * nRp
                if dn <= stat_rel * (1.0 + yn) and dn <= res_tol * rscale:
                    quiet += 1
                else:
                    quiet = 0
                if quiet >= window:
                    status = STATIONARY
                    break
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * err ** -0.2))
            h_new = hs * fac
            if hit and h_new < h:
                # a step clipped to an output time says little about the scale
                h_new = h
            h = h_new
        else:
            n_rej += 1
            if err != err:
                h = 0.1 * hs
            else:
                h = hs * max(0.1, 0.9 * err ** -0.2)

    if rec_t[n_rec - 1] < t:
        rec_t[n_rec] = t
        rec_Y[n_rec] = Y
        n_rec += 1
    return rec_t[:n_rec], rec_Y[:n_rec], status, t, Y, n_acc, n_rej


def integrate_riccati(X0, t_out, A, B, Q, S, Rp, rtol, atol, h0, h_min, max_steps,
                      ceiling, stat_rel, res_tol, window):
    """Integrate ``dX/dt = riccati_rhs(X)`` from ``X(t_out[0]) = X0``."""
    m = B.shape[1]
    e1, e2, e3 = np.zeros(1), np.zeros((1, m, X0.shape[0])), np.zeros((1, m, 1))
    params = (A, B, Q, S, Rp, np.zeros((m, m)), e1, e2, e2, e1, e3)
    return _dopri(RICCATI_FIELD, True, X0, t_out, params, rtol, atol, h0, h_min,
                  max_steps, ceiling, stat_rel, res_tol, window)


def integrate_feedback(x0, t_out, A, B, G, gain_t, gain_K, gain_dK, v_t, v_val,
                       rtol, atol, h0, h_min, max_steps, ceiling):
    """Integrate ``dx/dt = A x + B (-K(t) x + G v(t))``; ``x0`` is ``n x 1``.

    The gain is a cubic Hermite schedule over ``gain_t``; the free signal is
    piecewise linear over ``v_t`` (``v_val`` has shape ``(k, m, 1)``).
    """
    n, m = B.shape
    dummy = np.zeros((n, n))
    params = (A, B, dummy, np.zeros((n, m)), np.zeros((m, m)), G,
              gain_t, gain_K, gain_dK, v_t, v_val)
    return _dopri(FEEDBACK_FIELD, False, x0, t_out, params, rtol, atol, h0, h_min,
                  max_steps, ceiling, 0.0, 0.0, 0)
