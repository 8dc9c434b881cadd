"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
fallback. Set ``PROXGDA_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PROXGDA_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

project_simplex = _impl.project_simplex
run_scalar_quadratic = _impl.run_scalar_quadratic

ALT, SIM, EG, GDMAX = _kernels_py.ALT, _kernels_py.SIM, _kernels_py.EG, _kernels_py.GDMAX
MAX_GRAD, GRAD_NORM = _kernels_py.MAX_GRAD, _kernels_py.GRAD_NORM
REASONS = ("converged", "max_iters", "budget", "diverged", "nonfinite", "inner_failed")


def backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        return out
    out["compiled"] = _kernels
    return out
