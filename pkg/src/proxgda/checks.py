"""Named invariant checks run by ``proxgda check``.

Each check returns ``(ok, detail)``. Checks use fixed seeds so a green run
stays green.
"""
import itertools
import math

import numpy as np

from . import _core, prox as P
from . import stationarity as st
from .oracle import StochasticOracle, minibatch_grad
from .problems import make_problem, make_toy_problem

FD_TOL = 1e-5


def brute_force_simplex(v):
    """Simplex projection by enumerating every support set.

    On a support S the KKT conditions give ``x_S = v_S - (sum v_S - 1)/|S|``;
    the feasible candidate nearest to ``v`` is the projection.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    best, best_d = None, math.inf
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            S = list(S)
            x = np.zeros(n)
            x[S] = v[S] - (v[S].sum() - 1.0) / r
            if np.any(x[S] < -1e-15):
                continue
            d = float(np.sum((x - v) ** 2))
            if d < best_d:
                best, best_d = x, d
    return best


def fd_step(x):
    return 1e-5 * (1.0 + float(np.linalg.norm(x)))


def central_diff(fun, x):
    x = np.asarray(x, dtype=np.float64)
    h = fd_step(x)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def sample_prox_maps(rng, dim):
    lo = -rng.uniform(0.1, 2.0, dim)
    hi = lo + rng.uniform(0.0, 3.0, dim)
    return [
        P.ProxMap("zero"),
        P.ProxMap("box", (lo, hi)),
        P.ProxMap("l2_ball", (float(rng.uniform(0.1, 3.0)),)),
        P.ProxMap("simplex"),
        P.ProxMap("l1", (float(rng.uniform(0.0, 2.0)),)),
        P.ProxMap("quadratic", (float(rng.uniform(0.0, 3.0)),)),
    ]


def dro_problem(m=20, p=2, gamma=5.0, seed=0):
    return make_problem("dro-logistic", m=m, p=p, gamma=gamma, seed=seed)


# ------------------------------------------------------------------ checks

def check_simplex_vs_qp(points=200, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        n = int(rng.integers(1, 9))
        v = rng.normal(scale=2.0, size=n)
        err = float(np.max(np.abs(P.project_simplex(v) - brute_force_simplex(v))))
        worst = max(worst, err)
    return worst <= 1e-8, f"max deviation {worst:.2e} over {points} points"


def check_prox_nonexpansive(pairs=1000, seed=1):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for pmap in sample_prox_maps(rng, 4):
        for _ in range(pairs):
            u, v = rng.normal(scale=3.0, size=(2, 4))
            step = float(rng.uniform(0.01, 3.0))
            gap = np.linalg.norm(pmap(u, step) - pmap(v, step)) - np.linalg.norm(u - v)
            worst = max(worst, float(gap))
    return worst <= 1e-12, f"max ||P(u)-P(v)|| - ||u-v|| = {worst:.2e}"


def check_projection_idempotent(points=200, seed=2):
    rng = np.random.default_rng(seed)
    bad = 0
    for pmap in sample_prox_maps(rng, 5):
        if not pmap.is_indicator:
            continue
        for _ in range(points):
            p1 = pmap(rng.normal(scale=3.0, size=5), 1.0)
            if not np.array_equal(pmap(p1, 1.0), p1):
                bad += 1
    return bad == 0, f"{bad} non-idempotent projections"


def check_quad_prox_contraction(pairs=200, seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        mu, eta = rng.uniform(0.01, 5.0, 2)
        pmap = P.ProxMap("quadratic", (float(mu),))
        u, v = rng.normal(size=(2, 3))
        ratio = np.linalg.norm(pmap(u, eta) - pmap(v, eta)) / np.linalg.norm(u - v)
        worst = max(worst, abs(float(ratio) - 1.0 / (1.0 + eta * mu)))
    return worst <= 1e-10, f"max |ratio - 1/(1+eta mu)| = {worst:.2e}"


def _danskin_fd(problem, points, scale, seed):
    rng = np.random.default_rng(seed)
    d = problem.dims[0]
    worst = 0.0
    for _ in range(points):
        x = rng.normal(scale=scale, size=d)
        g = st.danskin_gradient(problem, x, tol=1e-11)
        fd = central_diff(lambda z: st.max_value(problem, z, tol=1e-11), x)
        worst = max(worst, float(np.max(np.abs(g - fd))))
    return worst <= FD_TOL, f"max |grad - fd| = {worst:.2e}"


def check_danskin_fd_toy(points=20):
    return _danskin_fd(make_toy_problem(), points, 2.0, 4)


def check_danskin_fd_dro(points=20):
    return _danskin_fd(dro_problem(), points, 1.0, 5)


def check_moreau_closed_form(points=10, seed=6):
    prob = make_toy_problem()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in rng.uniform(-3.0, 3.0, points):
        res = st.moreau_gradient(prob, np.array([x]), lam=1.0)
        worst = max(worst, abs(float(res.gradient[0]) - x / 3.0))
    return worst <= 1e-6, f"max |grad - x/3| = {worst:.2e}"


def check_moreau_identity(points=10, seed=7):
    prob = make_toy_problem()
    rng = np.random.default_rng(seed)
    bad = 0
    for x in rng.uniform(-3.0, 3.0, points):
        x = np.array([x])
        res = st.moreau_gradient(prob, x, lam=1.0)
        if abs(float(x[0] - res.lam * res.gradient[0] - res.prox_point[0])) > 1e-15:
            bad += 1
    return bad == 0, f"{bad} points violate x - lam*grad = prox point"


def check_moreau_witness(points=10, seed=8):
    prob = make_toy_problem()
    rng = np.random.default_rng(seed)
    worst_id, worst_res = 0.0, -math.inf
    for x in rng.uniform(-3.0, 3.0, points):
        x = np.array([x])
        xh, eps = st.near_stationary_witness(prob, x, lam=1.0)
        worst_id = max(worst_id, abs(float(np.linalg.norm(x - xh)) - eps))
        worst_res = max(worst_res, st.prox_residual(prob, xh, tol=1e-12) - eps)
    ok = worst_id <= 1e-12 and worst_res <= 1e-6
    return ok, f"identity error {worst_id:.2e}, residual excess {worst_res:.2e}"


def _gradient_fd(problem, points, seed):
    rng = np.random.default_rng(seed)
    d, n = problem.dims
    x0, y0 = problem.start()
    worst = 0.0
    for _ in range(points):
        x = x0 + rng.normal(scale=0.5, size=d)
        if problem.h.kind == "simplex":
            y = rng.dirichlet(np.ones(n))
        else:
            y = y0 + rng.normal(scale=0.5, size=n)
        gx = problem.grad_x(x, y)
        gy = problem.grad_y(x, y)
        fx = central_diff(lambda z: problem.phi_value(z, y), x)
        fy = central_diff(lambda z: problem.phi_value(x, z), y)
        scale = 1.0 + max(float(np.max(np.abs(gx))), float(np.max(np.abs(gy))))
        worst = max(worst, float(np.max(np.abs(gx - fx))) / scale,
                    float(np.max(np.abs(gy - fy))) / scale)
    return worst <= FD_TOL, f"max relative |grad - fd| = {worst:.2e}"


def _smoothness_y(problem, pairs, seed):
    rng = np.random.default_rng(seed)
    d, n = problem.dims
    L = problem.constants.L_gradPhi
    worst = 0.0
    for _ in range(pairs):
        x = rng.normal(size=d)
        y1, y2 = rng.normal(size=(2, n))
        ratio = np.linalg.norm(problem.grad_y(x, y1) - problem.grad_y(x, y2)) / np.linalg.norm(y1 - y2)
        worst = max(worst, float(ratio))
    return worst <= L * (1 + 1e-12), f"max ratio {worst:.4g} vs L_gradPhi {L:.4g}"


def check_weak_convexity_toy(triples=200, seed=9):
    prob = make_toy_problem()
    rho = prob.constants.rho
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(triples):
        x, y, t = rng.normal(size=3)
        v = 1.0 if rng.random() < 0.5 else -1.0  # unit directions in 1-d
        h = float(rng.uniform(0.01, 1.0))
        g = lambda s: prob.phi_value(np.array([x + s * v]), np.array([y])) + 0.5 * rho * (x + s * v) ** 2
        worst = min(worst, g(t + h) - 2.0 * g(t) + g(t - h))
    return worst >= -1e-12, f"min second difference {worst:.2e}"


def check_solution_map_lipschitz(pairs=100, seed=10):
    prob = make_toy_problem()
    kappa = prob.constants.kappa()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        x1, x2 = rng.normal(scale=2.0, size=(2, 1))
        if abs(float(x1[0] - x2[0])) < 1e-3:
            continue
        y1 = st.best_response(prob, x1, tol=1e-12).y_star
        y2 = st.best_response(prob, x2, tol=1e-12).y_star
        worst = max(worst, float(np.linalg.norm(y1 - y2) / np.linalg.norm(x1 - x2)))
    return worst <= kappa + 1e-6, f"max ratio {worst:.6f} vs kappa {kappa:.6f}"


def check_variance_scaling(batches=10_000, seed=11):
    prob = make_toy_problem()
    x, y = np.array([0.3]), np.array([-0.2])
    exact = prob.grad_x(x, y)
    worst = 0.0
    for M in (1, 4, 16):
        orc = StochasticOracle(prob, 1.0, seed=seed, run_id=M)
        samples = np.array([minibatch_grad(orc, x, y, M, "x") for _ in range(batches)])
        var = float(np.mean(np.sum((samples - exact) ** 2, axis=1)))
        worst = max(worst, abs(var * M - 1.0))
    return worst <= 0.25, f"max relative variance error {worst:.3f}"


def check_unbiasedness(samples=100_000, seed=12):
    prob = dro_problem(m=5, p=2)
    x = np.array([0.4, -0.7])
    _, y = prob.start()
    sigma = 0.5
    orc = StochasticOracle(prob, sigma, seed=seed)
    n = y.shape[0]
    mean = minibatch_grad(orc, x, y, samples, "y")
    err = float(np.max(np.abs(mean - prob.grad_y(x, y))))
    # per coordinate std of one draw is sigma/sqrt(n)
    bound = 3.0 * sigma / math.sqrt(n) / math.sqrt(samples)
    return err <= bound, f"max coordinate error {err:.2e} vs 3-sigma bound {bound:.2e}"


def check_kernel_backend_agreement():
    mods = _core.backends()
    if "compiled" not in mods:
        return True, "compiled backend not built; python only"
    args_list = []
    for method in (_core.ALT, _core.SIM, _core.EG, _core.GDMAX):
        for metric in (_core.MAX_GRAD, _core.GRAD_NORM):
            args_list.append((-0.5, 1.0, -1.0, method, 0.5, 0.5, 1.0, -0.4, 1e-4, metric, 10,
                              1.0 / 1.7807764064044151, 1e-8, 100000, 5000, 10000, 1e12))
    args_list.append((0.0, 1.0, 0.0, _core.SIM, 0.5, 0.5, 1.0, 1.0, 1e-4, _core.GRAD_NORM, 10,
                      1.0, 1e-8, 100000, 5000, 10000, 1e12))
    bad = sum(mods["python"].run_scalar_quadratic(*a) != mods["compiled"].run_scalar_quadratic(*a)
              for a in args_list)
    rng = np.random.default_rng(13)
    for _ in range(200):
        v = rng.normal(size=int(rng.integers(1, 12)))
        if not np.array_equal(mods["python"].project_simplex(v), mods["compiled"].project_simplex(v)):
            bad += 1
    return bad == 0, f"{bad} disagreements between backends"


CHECKS = {
    "simplex-vs-qp": check_simplex_vs_qp,
    "prox-nonexpansive": check_prox_nonexpansive,
    "prox-idempotent": check_projection_idempotent,
    "quad-prox-contraction": check_quad_prox_contraction,
    "danskin-fd-toy": check_danskin_fd_toy,
    "danskin-fd-dro": check_danskin_fd_dro,
    "moreau-closed-form": check_moreau_closed_form,
    "moreau-identity": check_moreau_identity,
    "moreau-witness": check_moreau_witness,
    "gradient-fd-toy": lambda: _gradient_fd(make_toy_problem(), 20, 14),
    "gradient-fd-bilinear": lambda: _gradient_fd(make_problem("bilinear"), 20, 15),
    "gradient-fd-dro": lambda: _gradient_fd(dro_problem(), 20, 16),
    "gradient-fd-fair": lambda: _gradient_fd(make_problem("fair"), 20, 17),
    "smoothness-y-toy": lambda: _smoothness_y(make_toy_problem(), 100, 18),
    "smoothness-y-bilinear": lambda: _smoothness_y(make_problem("bilinear"), 100, 19),
    "smoothness-y-dro": lambda: _smoothness_y(dro_problem(), 100, 20),
    "smoothness-y-fair": lambda: _smoothness_y(make_problem("fair"), 100, 21),
    "weak-convexity-toy": check_weak_convexity_toy,
    "solution-map-lipschitz": check_solution_map_lipschitz,
    "variance-scaling": check_variance_scaling,
    "unbiasedness": check_unbiasedness,
    "kernel-backend-agreement": check_kernel_backend_agreement,
}


def run_checks(names=None, out=print):
    """Run the selected checks; returns the list of failed names."""
    failed = []
    for name in (names if names is not None else list(CHECKS)):
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed.append(name)
    return failed
