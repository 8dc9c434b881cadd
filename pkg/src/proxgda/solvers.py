"""Proximal GDA variants, theorem stepsize schedules and the run loop."""
import math
import time
from dataclasses import asdict, dataclass, replace
from typing import List, Optional

import numpy as np

from . import stationarity as st
from .oracle import ExactOracle, StochasticOracle
from .problems import IterateState, as_vector

METHODS = ("alt_gda", "sim_gda", "extragradient", "gdmax")
METRICS = ("max_grad_norm", "moreau_grad_norm", "prox_residual", "grad_norm")
REGIMES = ("nc_c_det", "nc_c_stoch", "nc_sc_det", "nc_sc_stoch")
DIVERGENCE_THRESHOLD = 1e12


class ScheduleError(ValueError):
    """A theorem schedule does not apply to the given constants."""


@dataclass
class SolverConfig:
    method: str = "alt_gda"
    eta_x: Optional[float] = None
    eta_y: Optional[float] = None
    batch_size: int = 1
    gdmax_inner_steps: int = 10
    max_iters: int = 1000
    max_calls: Optional[int] = None
    stop_tolerance: float = 1e-4
    stationarity_metric: Optional[str] = None  # None: default for the regime
    seed: int = 0
    run_id: int = 0
    sigma: float = 0.0
    stride: int = 1
    check_every: int = 1
    diagnostics: bool = True
    keep_iterates: bool = False
    br_tol: float = st.BR_TOL
    br_max_inner: int = 100_000
    moreau_lambda: Optional[float] = None
    moreau_tol: float = st.MOREAU_TOL
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.stationarity_metric is not None and self.stationarity_metric not in METRICS:
            raise ValueError(f"unknown metric {self.stationarity_metric!r}; choose from {METRICS}")
        for name in ("eta_x", "eta_y"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if self.gdmax_inner_steps < 1:
            raise ValueError("gdmax_inner_steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.stride < 1 or self.check_every < 1:
            raise ValueError("stride and check_every must be >= 1")


@dataclass
class StepsizePlan:
    eta_x: float
    eta_y: float
    lam: float
    M: int
    regime: str


@dataclass
class TraceRecord:
    k: int
    residual: float
    delta_gap: float
    delta_dist: float
    psi: float
    Psi: float
    calls_x: int
    calls_y: int
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None


@dataclass
class RunResult:
    trace: List[TraceRecord]
    state: IterateState
    reason: str
    residual: float
    metric: str
    eta_x: float
    eta_y: float
    batch: int
    wall_time: float = 0.0
    message: str = ""

    @property
    def converged(self):
        return self.reason == "converged"


# ---------------------------------------------------------------- steps

def _finite(g, what):
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(f"nonfinite {what}")
    return g


def _oracle(problem, oracle):
    return ExactOracle(problem) if oracle is None else oracle


def alt_gda_step(problem, state, eta_x, eta_y, oracle=None):
    """One proximal alternating GDA step; the ascent gradient sees the new x."""
    oracle = _oracle(problem, oracle)
    x, y = state.x, state.y
    gx = _finite(oracle.grad_x(x, y), "x-gradient")
    xn = problem.prox_f(x - eta_x * gx, eta_x)
    gy = _finite(oracle.grad_y(xn, y), "y-gradient")
    yn = problem.prox_h(y + eta_y * gy, eta_y)
    M = oracle.batch
    return IterateState(xn, yn, state.k + 1, state.calls_x + M, state.calls_y + M)


def sim_gda_step(problem, state, eta_x, eta_y, oracle=None):
    """Simultaneous proximal GDA: both gradients at (x_k, y_k)."""
    oracle = _oracle(problem, oracle)
    x, y = state.x, state.y
    gx = oracle.grad_x(x, y)
    gy = oracle.grad_y(x, y)
    _finite(gx, "x-gradient")
    _finite(gy, "y-gradient")
    xn = problem.prox_f(x - eta_x * gx, eta_x)
    yn = problem.prox_h(y + eta_y * gy, eta_y)
    M = oracle.batch
    return IterateState(xn, yn, state.k + 1, state.calls_x + M, state.calls_y + M)


def extragradient_step(problem, state, eta_x, eta_y, oracle=None):
    oracle = _oracle(problem, oracle)
    x, y = state.x, state.y
    gx = oracle.grad_x(x, y)
    gy = oracle.grad_y(x, y)
    _finite(gx, "x-gradient")
    _finite(gy, "y-gradient")
    xb = problem.prox_f(x - eta_x * gx, eta_x)
    yb = problem.prox_h(y + eta_y * gy, eta_y)
    gx = oracle.grad_x(xb, yb)
    gy = oracle.grad_y(xb, yb)
    _finite(gx, "x-gradient")
    _finite(gy, "y-gradient")
    xn = problem.prox_f(x - eta_x * gx, eta_x)
    yn = problem.prox_h(y + eta_y * gy, eta_y)
    M = oracle.batch
    return IterateState(xn, yn, state.k + 1, state.calls_x + 2 * M, state.calls_y + 2 * M)


def gdmax_step(problem, state, eta_x, eta_y, inner_steps=10, oracle=None):
    """``inner_steps`` proximal ascent steps at fixed x_k (warm started), then one descent step."""
    if inner_steps < 1:
        raise ValueError("inner_steps must be >= 1")
    oracle = _oracle(problem, oracle)
    x = state.x
    yn = state.y
    for _ in range(inner_steps):
        gy = _finite(oracle.grad_y(x, yn), "y-gradient")
        yn = problem.prox_h(yn + eta_y * gy, eta_y)
    gx = _finite(oracle.grad_x(x, yn), "x-gradient")
    xn = problem.prox_f(x - eta_x * gx, eta_x)
    M = oracle.batch
    return IterateState(xn, yn, state.k + 1, state.calls_x + M, state.calls_y + inner_steps * M)


def calls_per_iteration(method, batch=1, inner_steps=10):
    if method in ("alt_gda", "sim_gda"):
        return 2 * batch
    if method == "extragradient":
        return 4 * batch
    return (inner_steps + 1) * batch


# ------------------------------------------------------------- schedules

def _require_finite(constants, names, regime):
    missing = [n for n in names if not getattr(constants, n) < math.inf]
    if missing:
        raise ScheduleError(f"{regime} schedule needs finite {', '.join(missing)}")


def schedule_nc_concave(constants, epsilon):
    """Deterministic nonconvex-concave stepsizes (two-time-scale, lambda = 1/(2 rho))."""
    _require_finite(constants, ("L", "L_f", "D_h", "L_gradPhi"), "nc-c")
    c = constants
    if not c.rho > 0:
        raise ScheduleError("nc-c schedule needs rho > 0")
    if not epsilon > 0:
        raise ScheduleError("epsilon must be positive")
    eps = float(epsilon)
    eta_x = min(eps**4 / (c.L_gradPhi * c.rho**2 * c.D_h**2 * (c.L + c.L_f) ** 2),
                eps**2 / (c.rho * c.L**2))
    return StepsizePlan(eta_x, 1.0 / c.L_gradPhi, 1.0 / (2.0 * c.rho), 1, "nc_c_det")


def schedule_nc_concave_stoch(constants, epsilon):
    """Stochastic nonconvex-concave stepsizes, single sample per step."""
    _require_finite(constants, ("L", "L_f", "D_h", "L_gradPhi"), "nc-c-stoch")
    c = constants
    if not c.rho > 0:
        raise ScheduleError("nc-c-stoch schedule needs rho > 0")
    if not epsilon > 0:
        raise ScheduleError("epsilon must be positive")
    eps = float(epsilon)
    s2 = c.sigma**2
    terms = [
        eps**2 / (c.rho * (c.L**2 + s2)),
        eps**4 / (c.rho**2 * c.L * (c.L + c.L_f + c.sigma) * c.D_h**2 * c.L_gradPhi),
    ]
    if s2 > 0:
        terms.append(eps**6 / (c.rho**3 * c.L * (c.L + c.L_f + c.sigma) * s2 * c.D_h**2))
    eta_y = 1.0 / (2.0 * c.L_gradPhi)
    if s2 > 0:
        eta_y = min(eta_y, eps**2 / (c.rho * s2))
    return StepsizePlan(min(terms), eta_y, 1.0 / (2.0 * c.rho), 1, "nc_c_stoch")


def _sc_lambda(c):
    return 1.0 / (2.0 * c.rho) if c.rho > 0 else st.default_lambda(c)


def schedule_nc_strongly_concave(constants):
    c = constants
    if not c.mu > 0:
        raise ScheduleError("nc-sc schedule needs mu > 0")
    _require_finite(c, ("L_gradPhi",), "nc-sc")
    kappa = c.kappa()
    return StepsizePlan(1.0 / (3.0 * (kappa + 1.0) ** 2 * c.L_gradPhi), 1.0 / c.L_gradPhi,
                        _sc_lambda(c), 1, "nc_sc_det")


def schedule_nc_strongly_concave_stoch(constants, epsilon, batch_constant=1.0, proof_variant=False):
    """Minibatch stochastic stepsizes with ``M = ceil(c kappa sigma^2 / eps^2)``.

    The stated x-stepsize uses 4(1 + kappa)^2 in the denominator; the proof
    argues with 3(1 + kappa)^2, selectable with ``proof_variant=True``.
    """
    c = constants
    if not c.mu > 0:
        raise ScheduleError("nc-sc-stoch schedule needs mu > 0")
    _require_finite(c, ("L_gradPhi",), "nc-sc-stoch")
    if not epsilon > 0:
        raise ScheduleError("epsilon must be positive")
    kappa = c.kappa()
    factor = 3.0 if proof_variant else 4.0
    M = max(1, math.ceil(batch_constant * kappa * c.sigma**2 / epsilon**2))
    return StepsizePlan(1.0 / (factor * (1.0 + kappa) ** 2 * c.L_gradPhi), 1.0 / c.L_gradPhi,
                        _sc_lambda(c), M, "nc_sc_stoch")


SCHEDULES = {
    "nc-c": lambda c, eps, **kw: schedule_nc_concave(c, eps),
    "nc-c-stoch": lambda c, eps, **kw: schedule_nc_concave_stoch(c, eps),
    "nc-sc": lambda c, eps, **kw: schedule_nc_strongly_concave(c),
    "nc-sc-stoch": lambda c, eps, **kw: schedule_nc_strongly_concave_stoch(c, eps, **kw),
}


# ------------------------------------------------------------------ run

def default_metric(problem):
    c = problem.constants
    if c.mu > 0:
        return "prox_residual"
    if c.D_h < math.inf:
        return "moreau_grad_norm"
    return "grad_norm"


def _field_norm(problem, x, y):
    # norm of the (unit-step) proximal gradient field; equals ||grad Phi|| when f = h = 0
    gx = problem.grad_x(x, y)
    gy = problem.grad_y(x, y)
    if problem.f.kind != "zero":
        gx = x - problem.prox_f(x - gx, 1.0)
    if problem.h.kind != "zero":
        gy = problem.prox_h(y + gy, 1.0) - y
    return math.sqrt(float(np.dot(gx, gx)) + float(np.dot(gy, gy)))


def measure(problem, x, y, metric, cfg, eta=None):
    """Evaluate the stopping metric at (x, y) plus the gap diagnostics.

    Returns ``(residual, delta_gap, delta_dist, psi)``; diagnostics are NaN
    when no best response is available or they are disabled.
    """
    c = problem.constants
    br = None
    if metric == "max_grad_norm":
        g, br = st._danskin(problem, x, cfg.br_tol, y)
        residual = st.norm(g)
    elif metric == "prox_residual":
        g, br = st._danskin(problem, x, cfg.br_tol, y)
        residual = st._prox_residual_from(problem, x, g, eta)
    elif metric == "moreau_grad_norm":
        res = st.moreau_gradient(problem, x, cfg.moreau_lambda, cfg.moreau_tol)
        residual = st.norm(res.gradient)
    else:
        residual = _field_norm(problem, x, y)
    gap = dist = psi = math.nan
    if cfg.diagnostics and (c.mu > 0 or c.D_h < math.inf):
        if br is None:
            br = st._solved(problem, x, cfg.br_tol, y, cfg.br_max_inner, strict=c.mu > 0)
        gap, dist = st.delta_diagnostics(problem, x, y, br=br)
        psi = problem.phi_value(x, br.y_star) - problem.h_value(br.y_star) + problem.f_value(x)
    return residual, gap, dist, psi


def make_oracle(problem, cfg, batch):
    if cfg.sigma > 0:
        return StochasticOracle(problem, cfg.sigma, cfg.seed, cfg.run_id, batch)
    return ExactOracle(problem, batch)


def step(problem, state, method, eta_x, eta_y, oracle, inner_steps=10):
    if method == "alt_gda":
        return alt_gda_step(problem, state, eta_x, eta_y, oracle)
    if method == "sim_gda":
        return sim_gda_step(problem, state, eta_x, eta_y, oracle)
    if method == "extragradient":
        return extragradient_step(problem, state, eta_x, eta_y, oracle)
    return gdmax_step(problem, state, eta_x, eta_y, inner_steps, oracle)


def run(problem, config, plan=None, x0=None, y0=None):
    """Iterate ``config.method`` until the metric reaches ``stop_tolerance``,
    the iteration or call budget runs out, or the iterates blow up."""
    cfg = config
    if plan is not None:
        eta_x, eta_y, batch = plan.eta_x, plan.eta_y, plan.M
    else:
        if cfg.eta_x is None or cfg.eta_y is None:
            raise ValueError("give eta_x and eta_y or a stepsize plan")
        eta_x, eta_y, batch = cfg.eta_x, cfg.eta_y, cfg.batch_size
    metric = cfg.stationarity_metric or default_metric(problem)
    if metric in ("max_grad_norm", "prox_residual") and not problem.constants.mu > 0:
        raise ValueError(f"metric {metric} needs a strongly concave problem (mu > 0)")
    if metric == "moreau_grad_norm" and not (problem.constants.mu > 0 or problem.constants.D_h < math.inf):
        raise ValueError("moreau metric needs mu > 0 or bounded dom h")

    d, n = problem.dims
    sx, sy = problem.start()
    x = sx if x0 is None else as_vector(x0, d)
    y = sy if y0 is None else as_vector(y0, n)
    if not problem.f.contains(x) or not problem.h.contains(y):
        raise ValueError("starting point outside dom f x dom h")

    oracle = make_oracle(problem, cfg, batch)
    state = IterateState(x, y)
    cost = calls_per_iteration(cfg.method, batch, cfg.gdmax_inner_steps)
    max_calls = math.inf if cfg.max_calls is None else cfg.max_calls
    thr = cfg.divergence_threshold
    trace = []
    last = None
    residual = math.nan
    reason = "max_iters"
    message = ""
    t0 = time.perf_counter()
    for k in range(cfg.max_iters):
        if k % cfg.check_every == 0:
            try:
                residual, gap, dist, psi = measure(problem, state.x, state.y, metric, cfg, eta_x)
            except st.ConvergenceError as exc:
                reason, message = "inner_failed", str(exc)
                break
            last = TraceRecord(
                k, residual, gap, dist, psi,
                problem.Psi(state.x, state.y), state.calls_x, state.calls_y,
                state.x.copy() if cfg.keep_iterates else None,
                state.y.copy() if cfg.keep_iterates else None,
            )
            done = residual <= cfg.stop_tolerance
            if k % cfg.stride == 0 or done:
                trace.append(last)
            if done:
                reason = "converged"
                break
        if state.calls + cost > max_calls:
            reason = "budget"
            break
        try:
            state = step(problem, state, cfg.method, eta_x, eta_y, oracle, cfg.gdmax_inner_steps)
        except FloatingPointError as exc:
            reason, message = "nonfinite", f"{exc} at k={k}"
            break
        if not (st.norm(state.x) <= thr and st.norm(state.y) <= thr):
            reason = "diverged"
            message = f"iterate norm exceeded {thr:g} at k={state.k}"
            break
    if last is not None and (not trace or trace[-1] is not last):
        trace.append(last)
    return RunResult(trace, state, reason, residual, metric, eta_x, eta_y, batch,
                     time.perf_counter() - t0, message)


def config_dict(cfg):
    return asdict(cfg)


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
