"""Closed-form proximal operators and projections."""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from . import _core

_EPS = float(np.finfo(np.float64).eps)
SIMPLEX_TOL = 1e-12
KINDS = ("zero", "box", "l2_ball", "simplex", "l1", "quadratic")


def project_simplex(v):
    """Project ``v`` onto the unit simplex {t >= 0, sum t = 1}."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("simplex projection needs a non-empty 1-d vector")
    # points on the simplex to within the output tolerance are fixed points;
    # this makes the projection exactly idempotent
    if v.min() >= 0.0 and abs(v.sum() - 1.0) <= SIMPLEX_TOL:
        return v.copy()
    return _core.project_simplex(v)


def project_box(v, lo, hi):
    """Componentwise clamp of ``v`` to ``[lo, hi]``."""
    v = np.asarray(v, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), v.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), v.shape)
    if np.any(lo > hi):
        raise ValueError("box bounds are inverted (lo > hi)")
    return np.minimum(np.maximum(v, lo), hi)


def project_l2_ball(v, radius):
    v = np.asarray(v, dtype=np.float64)
    nrm = np.sqrt(np.dot(v, v))
    if nrm <= radius:
        return v.copy()
    out = v * (radius / nrm)
    # rounding can leave the scaled point an ulp outside; pull it in so the
    # result is a fixed point of the projection
    while np.sqrt(np.dot(out, out)) > radius:
        out = out * (1.0 - _EPS)
    return out


def soft_threshold(v, thresh):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


@dataclass(frozen=True, eq=False)
class ProxMap:
    """A convex function with a closed-form proximal operator.

    ``params`` by kind: box ``(lo, hi)``; l2_ball ``(radius,)``;
    l1 and quadratic ``(weight,)``; zero and simplex take none.
    """

    kind: str = "zero"
    params: Tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prox kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "box":
            lo, hi = self.params
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError("box bounds are inverted (lo > hi)")
        elif self.kind == "l2_ball":
            if self.params[0] < 0:
                raise ValueError("ball radius must be nonnegative")
        elif self.kind in ("l1", "quadratic"):
            if self.params[0] < 0:
                raise ValueError(f"{self.kind} weight must be nonnegative")

    @property
    def is_indicator(self):
        return self.kind in ("box", "l2_ball", "simplex")

    def prox(self, v, step):
        return prox(self, v, step)

    def __call__(self, v, step):
        return prox(self, v, step)

    def value(self, v):
        """Function value; indicators return 0 inside and +inf outside."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "zero":
            return 0.0
        if self.kind == "l1":
            return float(self.params[0] * np.abs(v).sum())
        if self.kind == "quadratic":
            return float(0.5 * self.params[0] * np.dot(v, v))
        return 0.0 if self.contains(v) else np.inf

    def contains(self, v, tol=1e-12):
        """Domain membership (always true for finite-valued kinds)."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "box":
            lo, hi = self.params
            return bool(np.all(v >= np.asarray(lo) - tol) and np.all(v <= np.asarray(hi) + tol))
        if self.kind == "l2_ball":
            return bool(np.sqrt(np.dot(v, v)) <= self.params[0] + tol)
        if self.kind == "simplex":
            return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol)
        return bool(np.all(np.isfinite(v)))

    def diameter(self):
        if self.kind == "box":
            lo, hi = self.params
            return float(np.sqrt(np.sum((np.asarray(hi, float) - np.asarray(lo, float)) ** 2)))
        if self.kind == "l2_ball":
            return 2.0 * float(self.params[0])
        if self.kind == "simplex":
            return float(np.sqrt(2.0))
        return np.inf


ZERO = ProxMap("zero")


def prox(pmap, v, step):
    """Evaluate ``argmin_z map(z) + ||z - v||^2 / (2 step)`` exactly."""
    if not step > 0:
        raise ValueError(f"prox step must be positive, got {step}")
    kind = pmap.kind
    if kind == "zero":
        return v
    if kind == "box":
        return project_box(v, *pmap.params)
    if kind == "l2_ball":
        return project_l2_ball(v, pmap.params[0])
    if kind == "simplex":
        return project_simplex(v)
    if kind == "l1":
        return soft_threshold(v, pmap.params[0] * step)
    # quadratic (mu/2)||z||^2
    return np.asarray(v, dtype=np.float64) / (1.0 + step * pmap.params[0])
