# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled kernels. Must stay operation-for-operation in sync with
``_kernels_py.py``; compile without -ffast-math and with -ffp-contract=off."""
import numpy as np

from libc.math cimport sqrt, fabs, isfinite, NAN

cdef enum:
    ALT = 0
    SIM = 1
    EG = 2
    GDMAX = 3

cdef enum:
    MAX_GRAD = 0
    GRAD_NORM = 1

cdef enum:
    CONVERGED = 0
    MAX_ITERS = 1
    BUDGET = 2
    DIVERGED = 3
    NONFINITE = 4
    INNER_FAILED = 5


def project_simplex(v):
    cdef double[::1] src = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0]
    cdef double[::1] u = np.ascontiguousarray(np.sort(src)[::-1])
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] w = out
    cdef double css = 0.0, css_rho = 0.0, tau, s = 0.0
    cdef Py_ssize_t j, rho = 0, cnt = 0
    for j in range(n):
        css = css + u[j]
        if u[j] - (css - 1.0) / (j + 1) > 0.0:
            rho = j
            css_rho = css
    tau = (css_rho - 1.0) / (rho + 1)
    for j in range(n):
        w[j] = src[j] - tau
        if w[j] > 0.0:
            s = s + w[j]
            cnt += 1
        else:
            w[j] = 0.0
    # second pass on the O(1) outputs removes the cancellation in src - tau
    tau = (s - 1.0) / cnt
    for j in range(n):
        if w[j] > 0.0:
            w[j] = w[j] - tau
            if w[j] < 0.0:
                w[j] = 0.0
    return out


cdef inline bint _best_response(double x, double* y, double b, double c,
                                double step, double tol, long max_inner):
    cdef double g, yn, d, r
    cdef long i
    for i in range(max_inner):
        g = b * x + c * y[0]
        yn = y[0] + step * g
        d = y[0] - yn
        r = sqrt(d * d) / step
        y[0] = yn
        if r <= tol:
            return True
    return False


def run_scalar_quadratic(double a, double b, double c, int method,
                         double eta_x, double eta_y, double x, double y,
                         double tol, int metric, long inner_steps,
                         double br_step, double br_tol, long br_max_inner,
                         long max_iters, long max_calls, double div_threshold):
    cdef long calls_x = 0, calls_y = 0, cost, k = 0, i
    cdef double residual = NAN
    cdef double g, gx, gy, ys, xb, yb, xn, yn
    if method == ALT or method == SIM:
        cost = 2
    elif method == EG:
        cost = 4
    else:
        cost = inner_steps + 1
    while k < max_iters:
        if metric == MAX_GRAD:
            ys = y
            if not _best_response(x, &ys, b, c, br_step, br_tol, br_max_inner):
                return INNER_FAILED, k, calls_x, calls_y, x, y, residual
            g = a * x + b * ys
            residual = sqrt(g * g)
        else:
            gx = a * x + b * y
            gy = b * x + c * y
            residual = sqrt(gx * gx + gy * gy)
        if residual <= tol:
            return CONVERGED, k, calls_x, calls_y, x, y, residual
        if calls_x + calls_y + cost > max_calls:
            return BUDGET, k, calls_x, calls_y, x, y, residual

        if method == ALT:
            gx = a * x + b * y
            if not isfinite(gx):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            gy = b * xn + c * y
            if not isfinite(gy):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            yn = y + eta_y * gy
            calls_x += 1
            calls_y += 1
        elif method == SIM:
            gx = a * x + b * y
            gy = b * x + c * y
            if not (isfinite(gx) and isfinite(gy)):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            yn = y + eta_y * gy
            calls_x += 1
            calls_y += 1
        elif method == EG:
            gx = a * x + b * y
            gy = b * x + c * y
            if not (isfinite(gx) and isfinite(gy)):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xb = x - eta_x * gx
            yb = y + eta_y * gy
            gx = a * xb + b * yb
            gy = b * xb + c * yb
            if not (isfinite(gx) and isfinite(gy)):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            yn = y + eta_y * gy
            calls_x += 2
            calls_y += 2
        else:
            yn = y
            for i in range(inner_steps):
                gy = b * x + c * yn
                if not isfinite(gy):
                    return NONFINITE, k, calls_x, calls_y, x, y, residual
                yn = yn + eta_y * gy
            gx = a * x + b * yn
            if not isfinite(gx):
                return NONFINITE, k, calls_x, calls_y, x, y, residual
            xn = x - eta_x * gx
            calls_x += 1
            calls_y += inner_steps
        x = xn
        y = yn
        k += 1
        if not (fabs(x) <= div_threshold and fabs(y) <= div_threshold):
            return DIVERGED, k, calls_x, calls_y, x, y, residual
    return MAX_ITERS, k, calls_x, calls_y, x, y, residual
