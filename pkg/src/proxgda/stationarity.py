"""Max-function machinery: best responses, Danskin gradients, Moreau-envelope
gradients and the gap diagnostics that convergence claims are phrased in."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

BR_TOL = 1e-8
MOREAU_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """An inner solver stopped before reaching its tolerance."""


@dataclass
class BestResponse:
    y_star: np.ndarray
    inner_iters: int
    inner_residual: float
    converged: bool


@dataclass
class StationarityReport:
    metric: str
    value: float
    witness: Optional[np.ndarray] = None
    witness_residual: float = math.nan
    lam: float = math.nan
    exact: bool = True


@dataclass
class MoreauResult:
    gradient: np.ndarray
    prox_point: np.ndarray
    lam: float
    iters: int
    residual: float
    exact: bool


def norm(v):
    return math.sqrt(float(np.dot(v, v)))


def _ascent_step(problem):
    L = problem.constants.L_gradPhi
    if not (0 < L < math.inf):
        raise ValueError("best response needs a finite positive L_gradPhi")
    return 1.0 / L


def best_response(problem, x, tol=BR_TOL, max_inner=100_000, y0=None):
    """Maximize ``Phi(x, .) - h`` by proximal gradient ascent with step 1/L_gradPhi.

    Stops when the fixed-point residual
    ``||y - prox_h(y + s grad_y)|| / s`` drops to ``tol``; otherwise the
    last iterate is returned with ``converged=False``.
    """
    c = problem.constants
    if not (c.mu > 0 or c.D_h < math.inf):
        raise ValueError("best response needs strong concavity (mu > 0) or a bounded dom h")
    step = _ascent_step(problem)
    y = problem.start()[1] if y0 is None else y0
    r = math.inf
    for i in range(max_inner):
        g = problem.grad_y(x, y)
        yn = problem.prox_h(y + step * g, step)
        r = norm(y - yn) / step
        y = yn
        if r <= tol:
            return BestResponse(y, i + 1, r, True)
    return BestResponse(y, max_inner, r, False)


def _solved(problem, x, tol, y0, max_inner=100_000, strict=True):
    br = best_response(problem, x, tol, max_inner, y0)
    if strict and not br.converged:
        raise ConvergenceError(
            f"best response stalled at residual {br.inner_residual:.3e} after {br.inner_iters} steps"
        )
    return br


def max_value(problem, x, tol=BR_TOL, y0=None):
    """phi(x) = max_y Phi(x, y) - h(y)."""
    br = _solved(problem, x, tol, y0)
    return problem.phi_value(x, br.y_star) - problem.h_value(br.y_star)


def psi_value(problem, x, tol=BR_TOL, y0=None):
    """psi(x) = phi(x) + f(x)."""
    return max_value(problem, x, tol, y0) + problem.f_value(x)


def _danskin(problem, x, tol, y0):
    if not problem.constants.mu > 0:
        raise ValueError("Danskin gradient needs mu > 0; use moreau_gradient for merely concave problems")
    br = _solved(problem, x, tol, y0)
    return problem.grad_x(x, br.y_star), br


def danskin_gradient(problem, x, tol=BR_TOL, y0=None):
    """grad phi(x) = grad_x Phi(x, y*(x)).

    The error is at most ``L_gradPhi * ||y - y*||``, i.e. of order
    ``L_gradPhi / mu * tol``.
    """
    return _danskin(problem, x, tol, y0)[0]


def smooth_constant(constants):
    """Lipschitz constant of grad phi, (1 + kappa) L_gradPhi."""
    return (1.0 + constants.kappa()) * constants.L_gradPhi


def default_lambda(constants):
    if constants.rho > 0:
        return 1.0 / (2.0 * constants.rho)
    if constants.L_gradPhi < math.inf:
        return 1.0 / constants.L_gradPhi
    return 1.0


def _check_lambda(problem, lam):
    rho = problem.constants.rho
    if not lam > 0 or (rho > 0 and not lam < 1.0 / rho):
        raise ValueError(f"Moreau parameter must lie in (0, 1/rho) = (0, {1.0 / rho if rho > 0 else math.inf}); got {lam}")


def moreau_gradient(problem, x, lam=None, tol=MOREAU_TOL, max_outer=100_000, br_tol=None,
                    subgradient_iters=5000, br_max_inner=1000):
    """Gradient of the Moreau envelope of psi at ``x``, ``(x - prox_{lam psi}(x)) / lam``.

    With ``mu > 0`` the prox subproblem is smooth plus ``f`` and is solved by
    proximal gradient to fixed-point residual ``tol``. With ``mu = 0`` a
    proximal subgradient method with ``subgradient_iters`` steps is used and
    the result is marked inexact. There the inner ascent is capped at
    ``br_max_inner`` steps and need not converge: near ties between maximizers
    it is slow, and the unconverged point still gives an approximate
    subgradient.
    """
    c = problem.constants
    lam = default_lambda(c) if lam is None else float(lam)
    _check_lambda(problem, lam)
    x = np.asarray(x, dtype=np.float64)
    if c.mu > 0:
        if br_tol is None:
            br_tol = tol * c.mu / (10.0 * c.L_gradPhi)
        t = 1.0 / (smooth_constant(c) + 1.0 / lam)
        z = x.copy()
        y_warm = None
        r = math.inf
        it = 0
        for it in range(1, max_outer + 1):
            g, br = _danskin(problem, z, br_tol, y_warm)
            y_warm = br.y_star
            zn = problem.prox_f(z - t * (g + (z - x) / lam), t)
            r = norm(z - zn) / t
            z = zn
            if r <= tol:
                break
        exact = r <= tol
    else:
        # strongly convex with modulus 1/lam - rho; step 2/(s(k+2)), (k+1)-weighted average
        s = 1.0 / lam - c.rho
        br_tol = BR_TOL if br_tol is None else br_tol
        z = x.copy()
        avg = np.zeros_like(x)
        wsum = 0.0
        y_warm = None
        for k in range(subgradient_iters):
            br = _solved(problem, z, br_tol, y_warm, br_max_inner, strict=False)
            y_warm = br.y_star
            g = problem.grad_x(z, br.y_star)
            t = 2.0 / (s * (k + 2))
            z = problem.prox_f(z - t * (g + (z - x) / lam), t)
            avg += (k + 1) * z
            wsum += k + 1
        z = avg / wsum
        it, r, exact = subgradient_iters, math.nan, False
    grad = (x - z) / lam
    return MoreauResult(grad, z, lam, it, r, exact)


def near_stationary_witness(problem, x, lam=None, tol=MOREAU_TOL):
    """Return ``(x_hat, residual)`` with ``x_hat = prox_{lam psi}(x)``.

    ``residual = ||x - x_hat|| / lam`` is the envelope gradient norm, and
    ``-grad psi_lam(x)`` lies in the subdifferential of psi at ``x_hat``.
    """
    res = moreau_gradient(problem, x, lam, tol)
    x = np.asarray(x, dtype=np.float64)
    return res.prox_point, norm(x - res.prox_point) / res.lam


def prox_residual(problem, x, eta=None, tol=BR_TOL, y0=None):
    """``||x - prox_{eta f}(x - eta grad phi(x))|| / eta``; zero iff -grad phi(x) in df(x).

    For ``f = 0`` this is exactly ``||grad phi(x)||``.
    """
    g, _ = _danskin(problem, x, tol, y0)
    return _prox_residual_from(problem, x, g, eta)


def _prox_residual_from(problem, x, g, eta):
    if problem.f.kind == "zero":
        return norm(g)
    if eta is None:
        eta = 1.0 / smooth_constant(problem.constants)
    p = problem.prox_f(x - eta * g, eta)
    return norm(x - p) / eta


def delta_diagnostics(problem, x, y, tol=BR_TOL, br=None):
    """``(Delta, delta)``: value gap psi(x) - Psi(x, y) and ||y - y*(x)||^2.

    With ``mu = 0`` the best response is not unique and ``delta`` is the
    distance to the inner solver's output only. That output need not have
    converged: the ascent is warm started at ``y`` and never decreases the
    objective, so the gap stays nonnegative.
    """
    if br is None:
        br = _solved(problem, x, tol, y, strict=problem.constants.mu > 0)
    ys = br.y_star
    phi = problem.phi_value(x, ys) - problem.h_value(ys)
    gap = phi - (problem.phi_value(x, y) - problem.h_value(y))
    d = y - ys
    return gap, float(np.dot(d, d))
