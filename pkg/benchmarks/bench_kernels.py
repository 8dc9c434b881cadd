"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Times the toy stepsize heatmap (20 x 20 cells, four methods) run straight
through each backend's scalar kernel, and simplex projection on random
vectors. Also confirms both backends return identical results.
"""
import argparse
import time

import numpy as np

from proxgda import _core
from proxgda.grid import log_grid
from proxgda.problems import make_toy_problem


def heatmap(mod, budget=10_000):
    prob = make_toy_problem()
    a, b, c = prob.scalar_quadratic
    br_step = 1.0 / prob.constants.L_gradPhi
    out = []
    for method in (_core.ALT, _core.SIM, _core.EG, _core.GDMAX):
        for ex in log_grid():
            for ey in log_grid():
                out.append(mod.run_scalar_quadratic(a, b, c, method, ex, ey, 1.0, -0.4, 1e-4,
                                                    _core.MAX_GRAD, 10, br_step, 1e-8, 100_000,
                                                    budget, budget, 1e12))
    return out


def simplex(mod, vectors):
    return [mod.project_simplex(v) for v in vectors]


def best_of(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = _core.backends()
    if "compiled" not in mods:
        print("compiled backend not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    vectors = [rng.normal(size=int(n)) for n in rng.integers(2, 50, 5000)]
    rows = []
    for label, fn in (("toy heatmap (1600 cells)", heatmap),
                      ("simplex projection (5000 vectors)", lambda m: simplex(m, vectors))):
        t_py, r_py = best_of(lambda: fn(mods["python"]), args.repeat)
        t_c, r_c = best_of(lambda: fn(mods["compiled"]), args.repeat)
        same = all(p == q if isinstance(p, tuple) else np.array_equal(p, q)
                   for p, q in zip(r_py, r_c))
        rows.append((label, t_py, t_c, same))
    print(f"{'kernel':36s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}  identical")
    for label, t_py, t_c, same in rows:
        print(f"{label:36s} {t_py:11.4f} {t_c:13.4f} {t_py / t_c:7.1f}x  {same}")


if __name__ == "__main__":
    main()
