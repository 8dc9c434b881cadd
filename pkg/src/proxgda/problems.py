"""Minimax problem model and built-in test problems.

A problem is ``min_x max_y f(x) + Phi(x, y) - h(y)``: first-order oracles for
the coupling ``Phi``, closed-form regularizers ``f`` and ``h`` and the
analytic constants the stepsize rules need.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .prox import ZERO, ProxMap, prox

INF = math.inf


@dataclass(frozen=True)
class ProblemConstants:
    """Analytic constants of a problem. ``inf`` marks an unavailable bound."""

    L: float = INF  # Lipschitz constant of Phi in x
    L_f: float = 0.0
    L_gradPhi: float = INF
    rho: float = 0.0  # weak convexity of Phi(., y)
    mu: float = 0.0  # strong concavity in y, 0 if merely concave
    D_h: float = INF
    sigma: float = 0.0

    def __post_init__(self):
        for name in ("L", "L_f", "L_gradPhi", "rho", "mu", "D_h", "sigma"):
            val = getattr(self, name)
            if math.isnan(val) or val < 0:
                raise ValueError(f"constant {name} must be >= 0, got {val}")

    def kappa(self):
        if not self.mu > 0:
            raise ValueError("condition number needs mu > 0")
        return max(self.L_gradPhi / self.mu, 1.0)

    def with_sigma(self, sigma):
        return replace(self, sigma=float(sigma))


@dataclass(eq=False)
class MinimaxProblem:
    phi_value: Callable
    grad_x: Callable
    grad_y: Callable
    constants: ProblemConstants
    dims: Tuple[int, int]
    f: ProxMap = ZERO
    h: ProxMap = ZERO
    name: str = ""
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    # (a, b, c) when Phi = a/2 x^2 + b x y + c/2 y^2 in 1-d with f = h = 0;
    # enables the compiled run kernel
    scalar_quadratic: Optional[Tuple[float, float, float]] = None
    flags: dict = field(default_factory=dict)

    def prox_f(self, v, step):
        return prox(self.f, v, step)

    def prox_h(self, v, step):
        return prox(self.h, v, step)

    def f_value(self, x):
        return self.f.value(x)

    def h_value(self, y):
        return self.h.value(y)

    def Psi(self, x, y):
        """Full objective f(x) + Phi(x, y) - h(y)."""
        return self.f_value(x) + self.phi_value(x, y) - self.h_value(y)

    def start(self):
        d, n = self.dims
        x0 = np.zeros(d) if self.x0 is None else np.array(self.x0, dtype=np.float64)
        if self.y0 is None:
            y0 = self.prox_h(np.zeros(n), 1.0) if self.h.is_indicator else np.zeros(n)
        else:
            y0 = np.array(self.y0, dtype=np.float64)
        return x0, y0


@dataclass(frozen=True)
class IterateState:
    x: np.ndarray
    y: np.ndarray
    k: int = 0
    calls_x: int = 0
    calls_y: int = 0

    @property
    def calls(self):
        return self.calls_x + self.calls_y


def as_vector(v, dim=None):
    out = np.atleast_1d(np.asarray(v, dtype=np.float64)).ravel()
    if dim is not None and out.shape[0] != dim:
        raise ValueError(f"expected a vector of length {dim}, got {out.shape[0]}")
    return out


def make_scalar_quadratic_problem(a, b, c, name="quadratic", x0=None, y0=None, **const_overrides):
    """``Phi(x, y) = a/2 x^2 + b x y + c/2 y^2`` on R x R with f = h = 0."""
    a, b, c = float(a), float(b), float(c)

    def phi_value(x, y):
        return float(0.5 * a * x[0] ** 2 + b * x[0] * y[0] + 0.5 * c * y[0] ** 2)

    # the arithmetic here must match the compiled kernel exactly
    def grad_x(x, y):
        return a * x + b * y

    def grad_y(x, y):
        return b * x + c * y

    hess = np.array([[a, b], [b, c]])
    consts = dict(
        L=INF,
        L_f=0.0,
        L_gradPhi=float(np.max(np.abs(np.linalg.eigvalsh(hess)))),
        rho=max(-a, 0.0),
        mu=max(-c, 0.0),
        D_h=INF,
    )
    consts.update(const_overrides)
    return MinimaxProblem(
        phi_value, grad_x, grad_y, ProblemConstants(**consts), (1, 1),
        name=name,
        x0=None if x0 is None else as_vector(x0, 1),
        y0=None if y0 is None else as_vector(y0, 1),
        scalar_quadratic=(a, b, c),
    )


def make_toy_problem():
    """Phi(x, y) = -x^2/4 + x y - y^2/2, whose max function is x^2/4."""
    return make_scalar_quadratic_problem(-0.5, 1.0, -1.0, name="toy", x0=[1.0], y0=[-0.4])


def make_bilinear_problem(scale=1.0):
    """Phi(x, y) = scale * x * y."""
    if scale == 0:
        raise ValueError("bilinear scale must be nonzero")
    return make_scalar_quadratic_problem(0.0, scale, 0.0, name="bilinear", x0=[1.0], y0=[1.0])


def _sigmoid_neg(u):
    # 1 / (1 + exp(u)), overflow-safe
    return np.exp(-np.logaddexp(0.0, u))


def make_dro_logistic_problem(features, labels, gamma, anchor=None, theta_radius=5.0):
    """Penalized distributionally robust logistic regression.

    ``Phi(theta, z) = mean_i log(1 + exp(-b_i <theta, z_i>)) - gamma ||z - z0||^2``
    where ``z`` stacks one perturbed copy of every example. ``anchor`` is the
    flattened clean data ``z0`` (defaults to ``features``).

    The constants are certified on ``||theta|| <= theta_radius``. When
    ``2 gamma`` does not dominate the loss curvature there, ``mu`` is set to 0
    and ``flags["strongly_concave"]`` is False.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-d array (examples x features)")
    m, p = X.shape
    b = np.asarray(labels, dtype=np.float64).ravel()
    if b.shape[0] != m:
        raise ValueError("one label per example required")
    if not np.all(np.isin(b, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    z0 = X.ravel().copy() if anchor is None else as_vector(anchor, m * p)

    def phi_value(theta, z):
        Z = z.reshape(m, p)
        u = b * (Z @ theta)
        d = z - z0
        return float(np.mean(np.logaddexp(0.0, -u)) - gamma * np.dot(d, d))

    def grad_x(theta, z):
        Z = z.reshape(m, p)
        w = -_sigmoid_neg(b * (Z @ theta)) * b
        return Z.T @ w / m

    def grad_y(theta, z):
        Z = z.reshape(m, p)
        w = -_sigmoid_neg(b * (Z @ theta)) * b
        return np.outer(w, theta).ravel() / m - 2.0 * gamma * (z - z0)

    R = float(theta_radius)
    curvature = R * R / (4.0 * m)
    zmax = float(np.max(np.linalg.norm(z0.reshape(m, p), axis=1))) + R / (2.0 * gamma * m)
    mu = 2.0 * gamma - curvature
    certified = mu > 0
    consts = ProblemConstants(
        L=zmax,
        L_f=0.0,
        L_gradPhi=max(zmax * zmax / 4.0, 2.0 * gamma + curvature) + (zmax * R / 4.0 + 1.0) / math.sqrt(m),
        rho=zmax * zmax / 4.0,
        mu=mu if certified else 0.0,
        D_h=INF,
    )
    return MinimaxProblem(
        phi_value, grad_x, grad_y, consts, (p, m * p),
        name="dro-logistic", x0=np.zeros(p), y0=z0.copy(),
        flags={"strongly_concave": certified, "theta_radius": R},
    )


def make_fair_learning_problem(loss_oracles, dim, lipschitz=INF, smoothness=INF, rho=None,
                               theta_box=None, x0=None, joint=None):
    """``Phi(theta, t) = sum_i t_i l_i(theta)`` with ``t`` on the unit simplex.

    ``loss_oracles[i](theta)`` returns ``(value, gradient)``. ``lipschitz``
    bounds every ``||grad l_i||`` and ``smoothness`` their Hessians; both
    default to the unavailable sentinel. ``theta_box=(lo, hi)`` makes ``f``
    the indicator of that box. ``joint(theta, gradients=True)``, if given,
    returns all values and the stacked gradients (or None) in one pass and
    replaces the per-class loop.
    """
    losses = list(loss_oracles)
    n = len(losses)
    if n < 2:
        raise ValueError("fair learning needs at least two class losses")

    def values(theta):
        if joint is not None:
            return joint(theta, False)[0]
        return np.array([oracle(theta)[0] for oracle in losses], dtype=np.float64)

    def evaluate(theta):
        if joint is not None:
            return joint(theta)
        vals = np.empty(n)
        grads = []
        for i, oracle in enumerate(losses):
            v, g = oracle(theta)
            vals[i] = v
            grads.append(np.asarray(g, dtype=np.float64))
        return vals, np.stack(grads)

    def phi_value(theta, t):
        return float(np.dot(t, values(theta)))

    def grad_x(theta, t):
        _, G = evaluate(theta)
        return t @ G

    def grad_y(theta, t):
        return values(theta)

    L = float(lipschitz)
    S = float(smoothness)
    f = ZERO if theta_box is None else ProxMap("box", tuple(theta_box))
    consts = ProblemConstants(
        L=L,
        L_f=0.0,
        # y-block vanishes (linear in t); cross block <= sqrt(n) * L
        L_gradPhi=S + math.sqrt(n) * L,
        rho=S if rho is None else float(rho),
        mu=0.0,
        D_h=math.sqrt(2.0),
    )
    return MinimaxProblem(
        phi_value, grad_x, grad_y, consts, (dim, n),
        f=f, h=ProxMap("simplex"), name="fair",
        x0=None if x0 is None else as_vector(x0, dim),
        y0=np.full(n, 1.0 / n),
    )


def softmax_class_losses(features, labels, n_classes):
    """Per-class mean softmax cross-entropy oracles for a linear classifier.

    The parameter is the flattened ``(p + 1) x n_classes`` weight matrix (a
    bias column is appended to the features). Returns ``(oracles, dim,
    lipschitz, smoothness)``.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).astype(int).ravel()
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    q = A.shape[1]
    C = int(n_classes)

    def make(cls):
        Ai = A[y == cls]
        if Ai.shape[0] == 0:
            raise ValueError(f"class {cls} has no examples")

        def oracle(theta):
            W = theta.reshape(q, C)
            logits = Ai @ W
            lse = np.logaddexp.reduce(logits, axis=1)
            P = np.exp(logits - lse[:, None])
            P[:, cls] -= 1.0
            return float(np.mean(lse - logits[:, cls])), (Ai.T @ P).ravel() / Ai.shape[0]

        return oracle

    counts = np.bincount(y, minlength=C)
    if np.any(counts == 0):
        raise ValueError(f"class {int(np.argmin(counts))} has no examples")
    onehot = np.eye(C)[y]

    rows = np.arange(len(y))

    def joint(theta, gradients=True):
        W = theta.reshape(q, C)
        logits = A @ W
        lse = np.logaddexp.reduce(logits, axis=1)
        vals = np.bincount(y, weights=lse - logits[rows, y], minlength=C) / counts
        if not gradients:
            return vals, None
        P = np.exp(logits - lse[:, None]) - onehot
        grads = np.empty((C, q * C))
        for c in range(C):
            mask = y == c
            grads[c] = (A[mask].T @ P[mask]).ravel() / counts[c]
        return vals, grads

    amax = float(np.max(np.linalg.norm(A, axis=1)))
    return [make(c) for c in range(C)], q * C, math.sqrt(2.0) * amax, 0.5 * amax * amax, joint


def synthetic_classification(n_classes=3, per_class=20, dim=2, seed=0, spread=None):
    """Gaussian blobs with class-dependent spread (so the class losses differ)."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=2.0, size=(n_classes, dim))
    if spread is None:
        spread = np.linspace(0.5, 1.5, n_classes)
    X = np.concatenate([centers[c] + spread[c] * rng.standard_normal((per_class, dim))
                        for c in range(n_classes)])
    y = np.repeat(np.arange(n_classes), per_class)
    return X, y


def synthetic_binary(m=20, p=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, p))
    w = rng.standard_normal(p)
    b = np.where(X @ w + 0.3 * rng.standard_normal(m) >= 0, 1.0, -1.0)
    return X, b


def load_labeled_csv(path):
    """Read ``features..., label`` rows; a non-numeric first line is a header."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(tok) for tok in first.strip().split(",") if tok.strip()]
        skip = 0
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("CSV needs at least one feature column and a label column")
    return data[:, :-1], data[:, -1]


def make_fair_logistic_problem(features, labels, n_classes, theta_box=None):
    oracles, dim, lip, smooth, joint = softmax_class_losses(features, labels, n_classes)
    return make_fair_learning_problem(oracles, dim, lipschitz=lip, smoothness=smooth,
                                      theta_box=theta_box, joint=joint)


def _dro_from_params(data=None, m=20, p=2, gamma=5.0, seed=0, theta_radius=5.0):
    if data:
        X, b = load_labeled_csv(data)
    else:
        X, b = synthetic_binary(int(m), int(p), int(seed))
    return make_dro_logistic_problem(X, b, float(gamma), theta_radius=float(theta_radius))


def _fair_from_params(classes=3, per_class=20, dim=2, seed=0, box=None):
    X, y = synthetic_classification(int(classes), int(per_class), int(dim), int(seed))
    theta_box = None if box is None else (-float(box), float(box))
    return make_fair_logistic_problem(X, y, int(classes), theta_box=theta_box)


PROBLEMS = {
    "toy": lambda: make_toy_problem(),
    "bilinear": lambda scale=1.0: make_bilinear_problem(float(scale)),
    "dro-logistic": _dro_from_params,
    "fair": _fair_from_params,
}


def make_problem(key, **params):
    """Build a registered problem from its string key and keyword parameters."""
    try:
        builder = PROBLEMS[key]
    except KeyError:
        raise KeyError(f"unknown problem {key!r}; choose from {sorted(PROBLEMS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for problem {key!r}: {exc}") from None
