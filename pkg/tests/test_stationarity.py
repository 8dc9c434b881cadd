import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from proxgda import stationarity as st
from proxgda.checks import central_diff, dro_problem
from proxgda.problems import make_bilinear_problem, make_problem, make_toy_problem
from proxgda.prox import ProxMap

TOY = make_toy_problem()
KAPPA_TOY = (1.5 + math.sqrt(4.25)) / 2
x_ = lambda v: np.array([float(v)])


def toy_with_box(lo, hi):
    return dataclasses.replace(TOY, f=ProxMap("box", (np.array([lo]), np.array([hi]))))


# -- best response

@pytest.mark.parametrize("x", [1.0, 0.0, -2.5])
def test_toy_best_response(x):
    br = st.best_response(TOY, x_(x), tol=1e-12)
    assert br.converged and br.inner_residual <= 1e-12
    # grad_y = x - y vanishes at y = x
    assert br.y_star[0] == pytest.approx(x, abs=1e-11)


def test_fair_best_response_is_max_vertex():
    p = make_problem("fair", classes=3, seed=2)
    rng = np.random.default_rng(0)
    for _ in range(5):
        theta = rng.normal(size=p.dims[0])
        losses = p.grad_y(theta, np.full(3, 1 / 3))
        br = st.best_response(p, theta)
        assert br.converged
        vertex_values = [p.phi_value(theta, e) for e in np.eye(3)]
        assert np.array_equal(br.y_star, np.eye(3)[int(np.argmax(vertex_values))])
        assert st.max_value(p, theta) == pytest.approx(losses.max(), rel=1e-12)


def test_best_response_flags_nonconvergence():
    br = st.best_response(TOY, x_(1.0), tol=1e-14, max_inner=3)
    assert not br.converged and br.inner_iters == 3
    with pytest.raises(st.ConvergenceError):
        st._solved(TOY, x_(1.0), 1e-14, None, max_inner=3)


def test_best_response_needs_concavity_or_bounded_domain():
    with pytest.raises(ValueError):
        st.best_response(make_bilinear_problem(), x_(1.0))


# -- values

def test_toy_values():
    assert st.max_value(TOY, x_(1.0)) == pytest.approx(0.25, abs=1e-12)
    assert st.max_value(TOY, x_(0.0)) == pytest.approx(0.0, abs=1e-12)
    assert st.psi_value(TOY, x_(1.0)) == pytest.approx(0.25, abs=1e-12)


def test_toy_delta_diagnostics():
    gap, dist = st.delta_diagnostics(TOY, x_(1.0), x_(-0.4), tol=1e-12)
    assert gap == pytest.approx(0.25 + 0.73, abs=1e-12)
    assert dist == pytest.approx(1.4**2, abs=1e-11)
    gap, dist = st.delta_diagnostics(TOY, x_(0.8), x_(0.8), tol=1e-12)
    assert gap == pytest.approx(0.0, abs=1e-15) and dist == pytest.approx(0.0, abs=1e-20)


# -- Danskin

def test_toy_danskin():
    assert st.danskin_gradient(TOY, x_(1.0), tol=1e-12)[0] == pytest.approx(0.5, abs=1e-11)
    assert st.danskin_gradient(TOY, x_(0.0), tol=1e-12)[0] == pytest.approx(0.0, abs=1e-11)
    fd = central_diff(lambda z: st.max_value(TOY, z, tol=1e-12), x_(0.7))
    assert st.danskin_gradient(TOY, x_(0.7), tol=1e-12)[0] == pytest.approx(fd[0], abs=1e-5)


def test_danskin_refuses_merely_concave():
    with pytest.raises(ValueError):
        st.danskin_gradient(make_problem("fair"), np.zeros(9))


@pytest.mark.parametrize("name", ["toy", "dro"])
def test_danskin_matches_finite_differences(name):
    p = TOY if name == "toy" else dro_problem()
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=p.dims[0])
        g = st.danskin_gradient(p, x, tol=1e-11)
        fd = central_diff(lambda z: st.max_value(p, z, tol=1e-11), x)
        assert np.max(np.abs(g - fd)) <= 1e-5


# -- Moreau envelope

@settings(max_examples=30, deadline=None)
@given(hst.floats(-5.0, 5.0))
def test_toy_moreau_closed_form(x):
    # prox of z^2/4 with lambda = 1 is 2x/3, so the envelope gradient is x/3
    res = st.moreau_gradient(TOY, x_(x), lam=1.0)
    assert res.exact
    assert res.gradient[0] == pytest.approx(x / 3.0, abs=1e-6)
    assert res.prox_point[0] == x - res.lam * res.gradient[0]


def test_moreau_zero_at_minimizer():
    # exact up to the inner solver tolerance (default 1e-8)
    assert st.moreau_gradient(TOY, x_(0.0), lam=1.0).gradient[0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("lam", [0.0, -1.0, 2.0, 5.0])
def test_moreau_lambda_range(lam):
    # rho = 1/2, so lambda must lie in (0, 2)
    with pytest.raises(ValueError):
        st.moreau_gradient(TOY, x_(1.0), lam=lam)


def test_moreau_default_lambda():
    assert st.default_lambda(TOY.constants) == 1.0
    assert st.moreau_gradient(TOY, x_(1.0)).lam == 1.0


def test_moreau_merely_concave_is_marked_inexact():
    p = make_problem("fair", box=2.0)
    res = st.moreau_gradient(p, np.zeros(p.dims[0]), subgradient_iters=20)
    assert not res.exact
    assert np.all(np.isfinite(res.gradient))
    assert p.f.contains(res.prox_point)


def test_near_stationary_witness_toy():
    xh, eps = st.near_stationary_witness(TOY, x_(1.0), lam=1.0)
    assert xh[0] == pytest.approx(2 / 3, abs=1e-8)
    assert eps == pytest.approx(1 / 3, abs=1e-8)
    assert abs(1.0 - xh[0]) == pytest.approx(eps, abs=1e-15)
    xh0, eps0 = st.near_stationary_witness(TOY, x_(0.0), lam=1.0)
    assert xh0[0] == pytest.approx(0.0, abs=1e-9) and eps0 == pytest.approx(0.0, abs=1e-9)


def test_envelope_bounds_toy():
    rng = np.random.default_rng(4)
    for x in rng.uniform(-3, 3, 20):
        res = st.moreau_gradient(TOY, x_(x), lam=1.0)
        z = res.prox_point
        env = st.psi_value(TOY, z) + float(np.sum((x - z) ** 2)) / 2.0
        assert env <= st.psi_value(TOY, x_(x)) + 1e-12
        assert env >= 0.0  # inf psi = 0


# -- prox residual

def test_prox_residual_toy():
    assert st.prox_residual(TOY, x_(1.0), tol=1e-12) == pytest.approx(0.5, abs=1e-11)
    assert st.prox_residual(TOY, x_(0.0), tol=1e-12) == pytest.approx(0.0, abs=1e-11)


def test_prox_residual_box_gradient_points_inward():
    # grad phi(0.1) = 0.05 > 0: the descent direction leaves the upper bound,
    # so the residual is the full gradient, not zero
    p = toy_with_box(-0.1, 0.1)
    assert st.prox_residual(p, x_(0.1), eta=0.5, tol=1e-12) == pytest.approx(0.05, abs=1e-11)


def test_prox_residual_box_active_bound():
    # grad phi(0.2) = 0.1 > 0 pushes against the lower bound 0.2: -grad in the normal cone
    p = toy_with_box(0.2, 0.5)
    assert st.prox_residual(p, x_(0.2), eta=0.5, tol=1e-12) == 0.0


# -- Lipschitz properties

def test_solution_map_lipschitz_toy():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        a, b = rng.normal(scale=2.0, size=(2, 1))
        ya = st.best_response(TOY, a, tol=1e-12).y_star
        yb = st.best_response(TOY, b, tol=1e-12).y_star
        worst = max(worst, float(np.linalg.norm(ya - yb) / np.linalg.norm(a - b)))
    assert worst <= 1.0 + 1e-6 <= KAPPA_TOY


def test_solution_map_lipschitz_dro():
    p = dro_problem()
    kappa = p.constants.kappa()
    rng = np.random.default_rng(6)
    for _ in range(20):
        a, b = rng.normal(size=(2, 2))
        ya = st.best_response(p, a, tol=1e-11).y_star
        yb = st.best_response(p, b, tol=1e-11).y_star
        assert np.linalg.norm(ya - yb) <= (kappa + 1e-6) * np.linalg.norm(a - b)


def test_max_function_lipschitz_fair():
    p = make_problem("fair", box=1.0)
    L = p.constants.L
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, b = rng.uniform(-1, 1, size=(2, p.dims[0]))
        assert abs(st.max_value(p, a) - st.max_value(p, b)) <= L * np.linalg.norm(a - b) + 1e-9
