"""Stepsize grid search: oracle calls needed to reach a target accuracy."""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _core
from .problems import make_problem
from .solvers import METHODS, SolverConfig, default_metric, run

_METHOD_CODES = {"alt_gda": _core.ALT, "sim_gda": _core.SIM,
                 "extragradient": _core.EG, "gdmax": _core.GDMAX}
_METRIC_CODES = {"max_grad_norm": _core.MAX_GRAD, "grad_norm": _core.GRAD_NORM}

HEADER = ("method", "eta_x", "eta_y", "calls", "converged", "reason", "iters")


def log_grid(lo=1e-3, hi=1.0, num=20):
    if not (0 < lo <= hi) or num < 1:
        raise ValueError("need 0 < lo <= hi and num >= 1")
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), num)]


@dataclass
class GridSpec:
    eta_x_values: List[float] = field(default_factory=log_grid)
    eta_y_values: List[float] = field(default_factory=log_grid)
    target_tol: float = 1e-4
    call_budget: int = 10_000
    methods: List[str] = field(default_factory=lambda: list(METHODS))

    def __post_init__(self):
        if not self.eta_x_values or not self.eta_y_values:
            raise ValueError("stepsize lists must be non-empty")
        if any(not v > 0 for v in list(self.eta_x_values) + list(self.eta_y_values)):
            raise ValueError("all grid stepsizes must be positive")
        if self.call_budget < 1:
            raise ValueError("call budget must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")


@dataclass(frozen=True)
class Cell:
    problem: str
    params: tuple  # sorted (key, value) pairs
    method: str
    eta_x: float
    eta_y: float
    tol: float
    budget: int
    metric: Optional[str] = None
    gdmax_steps: int = 10
    x0: Optional[tuple] = None
    y0: Optional[tuple] = None
    seed: int = 0
    sigma: float = 0.0
    batch: int = 1
    check_every: int = 1


def cell_config(cell, run_id=0):
    return SolverConfig(
        method=cell.method, eta_x=cell.eta_x, eta_y=cell.eta_y,
        batch_size=cell.batch, gdmax_inner_steps=cell.gdmax_steps,
        # every iteration costs at least two calls, so the call budget binds first
        max_iters=cell.budget, max_calls=cell.budget,
        stop_tolerance=cell.tol, stationarity_metric=cell.metric,
        seed=cell.seed, run_id=run_id, sigma=cell.sigma,
        check_every=cell.check_every, diagnostics=False, stride=cell.budget + 1,
    )


def _fast_path(problem, cfg, metric):
    return (problem.scalar_quadratic is not None and cfg.sigma == 0 and cfg.batch_size == 1
            and cfg.check_every == 1 and metric in _METRIC_CODES)


def run_cell(cell, run_id=0):
    """Returns ``(calls, converged, reason, iters)`` for one grid cell."""
    problem = make_problem(cell.problem, **dict(cell.params))
    cfg = cell_config(cell, run_id)
    x0 = problem.start()[0] if cell.x0 is None else np.array(cell.x0, dtype=np.float64)
    y0 = problem.start()[1] if cell.y0 is None else np.array(cell.y0, dtype=np.float64)
    metric = cell.metric or default_metric(problem)
    if _fast_path(problem, cfg, metric):
        a, b, c = problem.scalar_quadratic
        code, k, cx, cy, _, _, _ = _core.run_scalar_quadratic(
            a, b, c, _METHOD_CODES[cell.method], cfg.eta_x, cfg.eta_y,
            float(x0[0]), float(y0[0]), cfg.stop_tolerance, _METRIC_CODES[metric],
            cfg.gdmax_inner_steps, 1.0 / problem.constants.L_gradPhi, cfg.br_tol,
            cfg.br_max_inner, cfg.max_iters, cfg.max_calls, cfg.divergence_threshold,
        )
        reason = _core.REASONS[code]
        calls = cx + cy
    else:
        res = run(problem, cfg, x0=x0, y0=y0)
        reason, k, calls = res.reason, res.state.k, res.state.calls
    converged = reason == "converged"
    return (calls if converged else cell.budget), converged, reason, k


def _run_indexed(args):
    i, cell = args
    return i, run_cell(cell)


def run_grid(problem, spec, params=None, workers=1, order=None, **cell_kw):
    """Evaluate every (method, eta_x, eta_y) cell; returns canonically sorted rows.

    ``order`` optionally permutes execution order (rows are sorted afterwards,
    so the result does not depend on it).
    """
    params = tuple(sorted((params or {}).items()))
    cells = [
        Cell(problem, params, m, float(ex), float(ey), spec.target_tol, spec.call_budget, **cell_kw)
        for m in spec.methods for ex in spec.eta_x_values for ey in spec.eta_y_values
    ]
    idx = list(range(len(cells))) if order is None else list(order)
    if sorted(idx) != list(range(len(cells))):
        raise ValueError("order must be a permutation of the cell indices")
    results = [None] * len(cells)
    jobs = [(i, cells[i]) for i in idx]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, out in pool.map(_run_indexed, jobs, chunksize=max(1, len(jobs) // (4 * workers))):
                results[i] = out
    else:
        for job in jobs:
            i, out = _run_indexed(job)
            results[i] = out
    rows = [(c.method, c.eta_x, c.eta_y) + r for c, r in zip(cells, results)]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def format_rows(rows):
    lines = [",".join(HEADER)]
    for method, ex, ey, calls, conv, reason, iters in rows:
        lines.append(f"{method},{ex:.17g},{ey:.17g},{calls},{int(conv)},{reason},{iters}")
    return "\n".join(lines) + "\n"
