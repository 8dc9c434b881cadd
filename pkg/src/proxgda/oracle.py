"""Gradient oracles: exact, and unbiased noisy with minibatch averaging.

Noise is isotropic Gaussian scaled so that ``E||G - grad||^2 = sigma^2`` per
sample. Draws are addressed by ``(seed, run_id, call index)`` through a
counter-based Philox generator, so a run's noise sequence does not depend on
host, thread count or what other runs are doing.
"""
import math

import numpy as np


class ExactOracle:
    """Deterministic gradients. ``batch`` only affects call accounting."""

    sigma = 0.0

    def __init__(self, problem, batch=1):
        if batch < 1:
            raise ValueError("batch size must be >= 1")
        self.problem = problem
        self.batch = int(batch)

    def grad_x(self, x, y):
        return self.problem.grad_x(x, y)

    def grad_y(self, x, y):
        return self.problem.grad_y(x, y)


class StochasticOracle:
    def __init__(self, problem, sigma, seed=0, run_id=0, batch=1):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if batch < 1:
            raise ValueError("batch size must be >= 1")
        if not (0 <= seed < 2**64 and 0 <= run_id < 2**64):
            raise ValueError("seed and run_id must fit in 64 bits")
        self.problem = problem
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.run_id = int(run_id)
        self.batch = int(batch)
        self.index = 0  # next unused stream position

    def _generator(self, index):
        return np.random.Generator(
            np.random.Philox(key=(self.seed << 64) | self.run_id, counter=index << 128)
        )

    def noise(self, dim, count):
        """Average of ``count`` fresh noise vectors; consumes ``count`` stream positions."""
        rng = self._generator(self.index)
        self.index += count
        draws = rng.standard_normal((count, dim))
        return (self.sigma / math.sqrt(dim)) * (draws.sum(axis=0) / count)

    def _sample(self, grad, x, y, count):
        g = grad(x, y)
        return g + self.noise(g.shape[0], count)

    def grad_x(self, x, y):
        return self._sample(self.problem.grad_x, x, y, self.batch)

    def grad_y(self, x, y):
        return self._sample(self.problem.grad_y, x, y, self.batch)


def sample_grad_x(oracle, x, y):
    return oracle._sample(oracle.problem.grad_x, x, y, 1)


def sample_grad_y(oracle, x, y):
    return oracle._sample(oracle.problem.grad_y, x, y, 1)


def minibatch_grad(oracle, x, y, M, which):
    """Mean of ``M`` independent samples of the ``which`` ('x' or 'y') gradient."""
    if M < 1:
        raise ValueError("minibatch size must be >= 1")
    if which not in ("x", "y"):
        raise ValueError("which must be 'x' or 'y'")
    grad = oracle.problem.grad_x if which == "x" else oracle.problem.grad_y
    return oracle._sample(grad, x, y, M)
