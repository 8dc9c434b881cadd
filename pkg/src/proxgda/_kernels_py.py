"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so that both backends
produce bit-identical results. Keep the arithmetic order in sync when
editing either file.
"""
import math

import numpy as np

# method codes
ALT, SIM, EG, GDMAX = 0, 1, 2, 3
# metric codes
MAX_GRAD, GRAD_NORM = 0, 1
# termination codes
CONVERGED, MAX_ITERS, BUDGET, DIVERGED, NONFINITE, INNER_FAILED = range(6)


def project_simplex(v):
    """Euclidean projection of a 1-d array onto the unit simplex.

    Sorted-threshold rule: sort descending, find the last index where the
    shifted cumulative mean stays below the entry, shift and clip.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = 0
    for j in range(n):
        if u[j] - (css[j] - 1.0) / (j + 1) > 0.0:
            rho = j
    tau = (css[rho] - 1.0) / (rho + 1)
    w = np.maximum(v - tau, 0.0)
    # v - tau cancels badly for large |v|; re-centre the support once using
    # the O(1) output entries (summed in index order, as the compiled kernel)
    s, cnt = 0.0, 0
    for j in range(n):
        if w[j] > 0.0:
            s += float(w[j])
            cnt += 1
    tau = (s - 1.0) / cnt
    return np.maximum(np.where(w > 0.0, w - tau, 0.0), 0.0)


def _best_response(x, y, b, c, step, tol, max_inner):
    r = math.inf
    for _ in range(max_inner):
        g = b * x + c * y
        yn = y + step * g
        d = y - yn
        r = math.sqrt(d * d) / step
        y = yn
        if r <= tol:
            return y, r, True
    return y, r, False


def run_scalar_quadratic(a, b, c, method, eta_x, eta_y, x, y, tol, metric,
                         inner_steps, br_step, br_tol, br_max_inner,
                         max_iters, max_calls, div_threshold):
    """Run one GDA variant on Phi(x, y) = a/2 x^2 + b x y + c/2 y^2 in 1-d.

    Returns ``(reason, k, calls_x, calls_y, x, y, residual)``.
    """
    calls_x = 0
    calls_y = 0
    if method == ALT or method == SIM:
        cost = 2
    elif method == EG:
        cost = 4
    else:
        cost = inner_steps + 1
    residual = math.nan
    k = 0
    while k < max_iters:
        if metric == MAX_GRAD:
            ys, _, ok = _best_response(x, y, b, c, br_step, br_tol, br_max_inner)
            if not ok:
                return INNER_FAILED, k, calls_x, calls_y, x, y, residual
            g = a * x + b * ys
            residual = math.sqrt(g * g)
        else:
            gx = a * x + b * y
            gy = b * x + c * y
            residual = math.sqrt(gx * gx + gy * gy)
        if residual <= tol:
            return CONVERGED, k, calls_x, calls_y, x, y, residual
        if calls_x + calls_y + cost > max_calls:
            return BUDGET, k, calls_x, calls_y, x, y, residual

        if method == ALT:
            gx = a * x + b * y
            if not math.isfinite(gx):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            gy = b * xn + c * y
            if not math.isfinite(gy):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            yn = y + eta_y * gy
            calls_x += 1
            calls_y += 1
        elif method == SIM:
            gx = a * x + b * y
            gy = b * x + c * y
            if not (math.isfinite(gx) and math.isfinite(gy)):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            yn = y + eta_y * gy
            calls_x += 1
            calls_y += 1
        elif method == EG:
            gx = a * x + b * y
            gy = b * x + c * y
            if not (math.isfinite(gx) and math.isfinite(gy)):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xb = x - eta_x * gx
            yb = y + eta_y * gy
            gx = a * xb + b * yb
            gy = b * xb + c * yb
            if not (math.isfinite(gx) and math.isfinite(gy)):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            yn = y + eta_y * gy
            calls_x += 2
            calls_y += 2
        else:
            yn = y
            for _ in range(inner_steps):
                gy = b * x + c * yn
                if not math.isfinite(gy):
                    return NONFINITE, k, calls_x, calls_y, x, y, residual
                yn = yn + eta_y * gy
            gx = a * x + b * yn
            if not math.isfinite(gx):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            calls_x += 1
            calls_y += inner_steps
        x = xn
        y = yn
        k += 1
        if not (abs(x) <= div_threshold and abs(y) <= div_threshold):
            return DIVERGED, k, calls_x, calls_y, x, y, residual
    return MAX_ITERS, k, calls_x, calls_y, x, y, residual
