"""Acceptance criteria, one test each.

Every test carries a ``criterion`` marker; ``conftest.py`` prints a PASS or
FAIL line per criterion at the end of the run. Run just this file with
``pytest tests/test_acceptance.py``.
"""
import dataclasses
import math
import time

import numpy as np
import pytest

from proxgda import stationarity as st
from proxgda.checks import brute_force_simplex, central_diff, dro_problem, sample_prox_maps
from proxgda.cli import main
from proxgda.oracle import StochasticOracle, minibatch_grad
from proxgda.problems import make_bilinear_problem, make_problem, make_toy_problem
from proxgda.prox import SIMPLEX_TOL, ProxMap, project_simplex
from proxgda.solvers import (
    SolverConfig,
    run,
    schedule_nc_strongly_concave,
    schedule_nc_strongly_concave_stoch,
)

TOY = make_toy_problem()
KAPPA_TOY = (1.5 + math.sqrt(4.25)) / 2
START = dict(x0=[1.0], y0=[-0.4])


def calls(res):
    return res.state.calls_x + res.state.calls_y


def loglog_slope(Ks, values):
    return float(np.polyfit(np.log10(Ks), np.log10(values), 1)[0])


# ---------------------------------------------------------------- 1

@pytest.mark.criterion(1, "toy trajectories: alt-GDA cheapest, all converge")
def test_toy_reproduction(record_property):
    t0 = time.perf_counter()
    cfg = SolverConfig(eta_x=0.5, eta_y=0.5, stop_tolerance=1e-4, stationarity_metric="max_grad_norm",
                       diagnostics=False, max_iters=10_000)
    res = {m: run(TOY, dataclasses.replace(cfg, method=m), **START)
           for m in ("alt_gda", "sim_gda", "extragradient", "gdmax")}
    elapsed = time.perf_counter() - t0
    n = {m: calls(r) for m, r in res.items()}
    record_property("detail", f"calls {n}, alt iters {res['alt_gda'].state.k}, {elapsed:.2f}s")

    assert all(r.converged for r in res.values())
    assert res["alt_gda"].state.k < 500
    assert abs(res["alt_gda"].residual) <= 1e-4
    assert n["alt_gda"] < n["sim_gda"]
    assert n["alt_gda"] < n["extragradient"]
    assert n["alt_gda"] < n["gdmax"]
    assert elapsed < 1.0


# ---------------------------------------------------------------- 2

@pytest.mark.criterion(2, "bilinear: equal-stepsize GDA fails, extragradient converges")
def test_bilinear_nonconvergence(record_property):
    p = make_bilinear_problem()
    t0 = time.perf_counter()
    cfg = SolverConfig(eta_x=0.5, eta_y=0.5, stop_tolerance=1e-4, stationarity_metric="grad_norm",
                       max_iters=10**6, max_calls=10_000)
    res = {m: run(p, dataclasses.replace(cfg, method=m), x0=[1.0], y0=[1.0])
           for m in ("alt_gda", "sim_gda", "extragradient")}
    elapsed = time.perf_counter() - t0
    record_property("detail", ", ".join(f"{m} {r.reason}" for m, r in res.items()) + f", {elapsed:.2f}s")

    assert not res["alt_gda"].converged
    assert not res["sim_gda"].converged
    assert res["extragradient"].converged
    assert calls(res["extragradient"]) <= 10_000
    assert elapsed < 1.0


# ---------------------------------------------------------------- 3

@pytest.mark.criterion(3, "Moreau envelope gradient matches x/3 on the toy")
def test_moreau_closed_form(record_property):
    t0 = time.perf_counter()
    xs = np.linspace(-3.0, 3.0, 10)
    worst = max(abs(float(st.moreau_gradient(TOY, np.array([x]), lam=1.0).gradient[0]) - x / 3.0)
                for x in xs)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max error {worst:.1e}, {elapsed:.2f}s")
    assert worst <= 1e-6
    assert elapsed < 1.0


# ---------------------------------------------------------------- 4

@pytest.mark.criterion(4, "Danskin gradient vs finite differences (toy, DRO)")
def test_danskin_consistency(record_property):
    worst = {}
    for name, p in (("toy", TOY), ("dro", dro_problem(p=2, gamma=5.0))):
        rng = np.random.default_rng(40)
        err = 0.0
        for _ in range(20):
            x = rng.normal(size=p.dims[0])
            g = st.danskin_gradient(p, x, tol=1e-11)
            fd = central_diff(lambda z: st.max_value(p, z, tol=1e-11), x)
            err = max(err, float(np.max(np.abs(g - fd))))
        worst[name] = err
    record_property("detail", ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert max(worst.values()) <= 1e-5


# ---------------------------------------------------------------- 5

@pytest.mark.criterion(5, "near-stationary witness from the Moreau envelope")
def test_witness(record_property):
    box = dataclasses.replace(TOY, f=ProxMap("box", (np.array([0.25]), np.array([4.0]))))
    id_err, excess = 0.0, -math.inf
    for p, xs in ((TOY, np.linspace(-3.0, 3.0, 10)), (box, np.linspace(0.3, 3.5, 10))):
        for x in xs:
            x = np.array([x])
            lam = 1.0
            eps_x = st.norm(st.moreau_gradient(p, x, lam=lam).gradient)
            xh, _ = st.near_stationary_witness(p, x, lam=lam)
            id_err = max(id_err, abs(st.norm(x - xh) - lam * eps_x))
            excess = max(excess, st.prox_residual(p, xh, tol=1e-12) - eps_x)
    record_property("detail", f"identity error {id_err:.1e}, residual excess {excess:.1e}")
    assert id_err <= 1e-12
    assert excess <= 1e-6


# ---------------------------------------------------------------- 6

@pytest.mark.criterion(6, "solution map is kappa-Lipschitz on the toy")
def test_solution_map_lipschitz(record_property):
    kappa = TOY.constants.kappa()
    rng = np.random.default_rng(60)
    worst = 0.0
    for _ in range(100):
        a, b = rng.normal(scale=2.0, size=(2, 1))
        ya = st.best_response(TOY, a, tol=1e-12).y_star
        yb = st.best_response(TOY, b, tol=1e-12).y_star
        worst = max(worst, float(np.linalg.norm(ya - yb) / np.linalg.norm(a - b)))
    record_property("detail", f"max ratio {worst:.6f}, kappa {kappa:.4f}")
    assert kappa == pytest.approx(KAPPA_TOY, rel=1e-14)
    assert worst <= kappa + 1e-6


# ---------------------------------------------------------------- 7

@pytest.mark.criterion(7, "simplex projection vs brute force; prox maps nonexpansive")
def test_prox_correctness(record_property):
    rng = np.random.default_rng(70)
    qp_err = 0.0
    for _ in range(200):
        v = rng.normal(scale=2.0, size=int(rng.integers(1, 9)))
        qp_err = max(qp_err, float(np.max(np.abs(project_simplex(v) - brute_force_simplex(v)))))
    gap = -math.inf
    for pmap in sample_prox_maps(rng, 4):
        for _ in range(1000):
            u, v = rng.normal(scale=3.0, size=(2, 4))
            step = float(rng.uniform(0.01, 3.0))
            gap = max(gap, float(np.linalg.norm(pmap(u, step) - pmap(v, step)) - np.linalg.norm(u - v)))
    record_property("detail", f"QP deviation {qp_err:.1e}, expansion {gap:.1e}")
    assert qp_err <= 1e-8
    assert gap <= 1e-12


# ---------------------------------------------------------------- 8

@pytest.mark.criterion(8, "minibatch variance scales as sigma^2/M")
def test_variance_scaling(record_property):
    x, y = np.array([0.3]), np.array([-0.2])
    exact = TOY.grad_x(x, y)
    rel = {}
    for M in (1, 4, 16):
        orc = StochasticOracle(TOY, 1.0, seed=80, run_id=M)
        draws = np.array([minibatch_grad(orc, x, y, M, "x") for _ in range(10_000)])
        var = float(np.mean(np.sum((draws - exact) ** 2, axis=1)))
        rel[M] = var * M - 1.0
    record_property("detail", ", ".join(f"M={M} {r:+.3f}" for M, r in rel.items()))
    assert max(abs(r) for r in rel.values()) <= 0.25


# ---------------------------------------------------------------- 9

def _schedule_run(K):
    plan = schedule_nc_strongly_concave(TOY.constants)
    cfg = SolverConfig(max_iters=K, stop_tolerance=0.0, stationarity_metric="prox_residual",
                       diagnostics=False)
    res = run(TOY, cfg, plan, **START)
    return np.array([r.residual for r in res.trace]) ** 2


KS = (100, 1000, 10_000)


@pytest.mark.criterion(9, "log-log slope of min prox residual^2 vs K is -1 +/- 0.3")
def test_rate_slope(record_property):
    t0 = time.perf_counter()
    r2 = _schedule_run(max(KS))
    elapsed = time.perf_counter() - t0
    mins = [float(r2[:K].min()) for K in KS]
    slope = loglog_slope(KS, mins)
    record_property("detail", f"slope {slope:.1f}, mins {', '.join(f'{m:.1e}' for m in mins)}, {elapsed:.2f}s")
    # The toy contracts linearly under this schedule, so the minimum falls
    # geometrically in K and the slope is far steeper than -1.
    assert abs(slope + 1.0) <= 0.3
    assert elapsed < 10.0


def test_rate_slope_running_average():
    # The averaged squared residual is what the sublinear bound controls; its
    # slope is -1 once the early transient dominates the sum.
    r2 = _schedule_run(max(KS))
    means = [float(r2[:K].mean()) for K in KS]
    assert abs(loglog_slope(KS, means) + 1.0) <= 0.3


# ---------------------------------------------------------------- 10

@pytest.mark.criterion(10, "stochastic alt-GDA: expected residual reaches 0.2 within budget")
def test_stochastic_trend(record_property):
    sigma, eps, seeds = 0.1, 0.2, 10
    t0 = time.perf_counter()
    c = TOY.constants.with_sigma(sigma)
    plan = schedule_nc_strongly_concave_stoch(c, eps)
    x0, y0 = np.array([1.0]), np.array([-0.4])
    kappa, L = c.kappa(), c.L_gradPhi
    delta_star = st.psi_value(TOY, x0, tol=1e-12) - 0.0  # inf psi = 0 at x = 0
    ystar0 = st.best_response(TOY, x0, tol=1e-12).y_star
    budget = sigma**2 * kappa**2 * L / eps**4 * max(kappa * delta_star, L * float(np.sum((ystar0 - y0) ** 2)))
    K = math.floor(budget)

    cfg = SolverConfig(max_iters=K + 1, stop_tolerance=0.0, stationarity_metric="prox_residual",
                       diagnostics=False, sigma=sigma)
    traces = np.array([[r.residual for r in run(TOY, dataclasses.replace(cfg, seed=s), plan,
                                                 x0=x0, y0=y0).trace] for s in range(seeds)])
    expected = traces.mean(axis=0)  # index k holds the residual at x_k, k = 0..K
    running = np.minimum.accumulate(expected[1:])
    elapsed = time.perf_counter() - t0
    hit = int(np.argmax(running <= eps)) + 1 if np.any(running <= eps) else None
    record_property("detail", f"M={plan.M}, budget K={budget:.1f}, first k with mean <= {eps}: {hit}, "
                              f"min {running[-1]:.3f}, {elapsed:.2f}s")

    assert plan.M == 1
    assert running[-1] <= eps
    assert np.all(np.diff(running) <= 0.0)
    assert running[-1] < expected[0]
    assert elapsed < 60.0


# ---------------------------------------------------------------- 11

@pytest.mark.criterion(11, "fair learning: y stays on the simplex, gap nonnegative")
def test_fair_feasibility(record_property):
    p = make_problem("fair", classes=3)
    cfg = SolverConfig(eta_x=0.05, eta_y=0.05, max_iters=200, stop_tolerance=0.0,
                       stationarity_metric="grad_norm", keep_iterates=True)
    res = run(p, cfg)
    ys = np.array([r.y for r in res.trace])
    gaps = np.array([r.delta_gap for r in res.trace])
    sum_err = float(np.max(np.abs(ys.sum(axis=1) - 1.0)))
    record_property("detail", f"{len(res.trace)} iterates, min entry {ys.min():.1e}, "
                              f"sum error {sum_err:.1e}, min gap {gaps.min():.1e}")
    assert len(res.trace) == 200
    assert ys.shape[1] == 3
    assert np.all(ys >= 0.0)
    assert sum_err <= SIMPLEX_TOL
    # each iterate is a fixed point of the projection
    assert all(np.array_equal(project_simplex(y), y) for y in ys)
    assert np.all(np.isfinite(gaps)) and gaps.min() >= -1e-6


# ---------------------------------------------------------------- 12

@pytest.mark.criterion(12, "cmd_run is byte-for-byte deterministic")
def test_determinism(tmp_path, record_property):
    flags = ["run", "--problem", "toy", "--schedule", "nc-sc-stoch", "--sigma", "0.3", "--epsilon", "0.2",
             "--seed", "1234", "--x0", "1", "--y0", "-0.4", "--max-iters", "300", "--tol", "0"]
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(flags + ["--out", str(out)]) == 0
        blobs.append((out / "trace.csv").read_bytes())
    record_property("detail", f"{len(blobs[0])} bytes")
    assert blobs[0] == blobs[1]
    assert blobs[0].count(b"\n") == 301
