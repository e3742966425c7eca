"""Pure numpy implementations of the hot kernels.

Signatures match the compiled ``_kernels`` module exactly; ``nmode._backend``
picks one of the two at import time.  Inputs are assumed validated by the
caller (strictly positive amplitudes, contiguous float64/intp arrays).
"""

import numpy as np

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _rows(indptr):
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def residual_positive(q, indptr, indices, eta, omega, sigma):
    n = q.shape[0]
    sq = np.sqrt(q)
    s = np.bincount(_rows(indptr), weights=sq[indices], minlength=n)
    return -s / sq + eta * q ** sigma - omega


def jacobian_positive(q, indptr, indices, eta, sigma):
    n = q.shape[0]
    rows = _rows(indptr)
    sq = np.sqrt(q)
    s = np.bincount(rows, weights=sq[indices], minlength=n)
    J = np.zeros((n + 1, n + 1))
    J[rows, indices] = -0.5 / (sq[rows] * sq[indices])
    J[np.arange(n), np.arange(n)] = 0.5 * s / (q * sq) + eta * sigma * q ** (sigma - 1)
    J[:n, n] = -1.0
    J[n, :n] = 1.0
    return J


def nmode_rhs(y, indptr, indices, data, epsc, sigma, hbar):
    """Time derivative of ``y = [Re d, Im d]`` for ``i hbar d' = T d + epsc |d|^(2 sigma) d``."""
    n = y.shape[0] // 2
    x, v = y[:n], y[n:]
    rows = _rows(indptr)
    Tx = np.bincount(rows, weights=data * x[indices], minlength=n)
    Tv = np.bincount(rows, weights=data * v[indices], minlength=n)
    g = epsc * (x * x + v * v) ** sigma
    out = np.empty_like(y)
    out[:n] = (Tv + g * v) / hbar
    out[n:] = -(Tx + g * x) / hbar
    return out


def dopri5(y0, indptr, indices, data, epsc, sigma, hbar, t_eval, h0, rtol, atol, max_steps, h_min):
    """Adaptive Dormand-Prince 5(4) landing exactly on every ``t_eval`` entry.

    Returns ``(Y, n_accepted, n_rejected, status)`` with ``status`` 0 on
    success, 1 when ``max_steps`` was exhausted and 2 on step underflow.  On
    failure the rows of ``Y`` past the last reached sample are left as NaN.
    """
    m = t_eval.shape[0]
    Y = np.full((m, y0.shape[0]), np.nan)
    Y[0] = y0
    y = y0.copy()
    t = t_eval[0]
    h = h0
    f = nmode_rhs(y, indptr, indices, data, epsc, sigma, hbar)
    k = np.empty((7, y0.shape[0]))
    n_acc = n_rej = 0
    for i in range(1, m):
        target = t_eval[i]
        while t < target:
            if n_acc + n_rej >= max_steps:
                return Y, n_acc, n_rej, 1
            if h < h_min:
                return Y, n_acc, n_rej, 2
            step = min(h, target - t)
            k[0] = f
            for s in range(1, 7):
                acc = y.copy()
                for r, a in enumerate(_A[s]):
                    if a != 0.0:
                        acc += step * a * k[r]
                k[s] = nmode_rhs(acc, indptr, indices, data, epsc, sigma, hbar)
            y_new = acc  # stage 7 argument is the 5th-order solution (FSAL)
            err_vec = step * (_E @ k)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            with np.errstate(over="ignore"):  # inf just forces a rejection
                err = np.sqrt(np.mean((err_vec / scale) ** 2))
            if err <= 1.0:
                t = target if step == target - t else t + step
                y = y_new
                f = k[6].copy()  # k is overwritten by the next attempt
                n_acc += 1
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                # a step clipped to land on a sample does not shrink the next one
                h = max(h, step * fac) if step < h else step * fac
            else:
                n_rej += 1
                h = step * max(0.2, 0.9 * err ** -0.2)
        Y[i] = y
    return Y, n_acc, n_rej, 0
