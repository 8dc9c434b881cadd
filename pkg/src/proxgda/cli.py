"""Command line: ``proxgda run | grid | check``."""
import argparse
import json
import os
import sys
from dataclasses import asdict

from . import _core
from .checks import CHECKS, run_checks
from .grid import GridSpec, format_rows, log_grid, run_grid
from .problems import PROBLEMS, make_problem
from .solvers import SCHEDULES, ScheduleError, SolverConfig, run

METHOD_NAMES = {
    "alt-gda": "alt_gda",
    "sim-gda": "sim_gda",
    "extragradient": "extragradient",
    "eg": "extragradient",
    "gdmax": "gdmax",
}
METRIC_NAMES = {
    "max-grad": "max_grad_norm",
    "moreau": "moreau_grad_norm",
    "prox-residual": "prox_residual",
    "grad-norm": "grad_norm",
}
TRACE_HEADER = "k,residual,delta_gap,delta_dist,psi,Psi,calls_x,calls_y"


class UsageError(Exception):
    pass


def _num(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _vector(text):
    return [float(tok) for tok in str(text).split(",") if tok.strip()]


def parse_params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = _num(val.strip())
    return out


def _common(p):
    p.add_argument("--config", help="JSON file of flag values; flags on the command line win")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="problem parameter (repeatable)")
    p.add_argument("--data", help="CSV data file for data-driven problems")
    p.add_argument("--metric", choices=sorted(METRIC_NAMES))
    p.add_argument("--tol", type=float)
    p.add_argument("--x0")
    p.add_argument("--y0")
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--gdmax-steps", type=int)
    p.add_argument("--check-every", type=int)
    p.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(prog="proxgda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one solver and write trace.csv and run.json")
    _common(p)
    p.add_argument("--method", choices=sorted(METHOD_NAMES))
    p.add_argument("--eta-x", type=float)
    p.add_argument("--eta-y", type=float)
    p.add_argument("--schedule", choices=sorted(SCHEDULES))
    p.add_argument("--epsilon", type=float, help="target accuracy for schedules (default: --tol)")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--max-calls", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--no-diagnostics", action="store_true", default=None)

    g = sub.add_parser("grid", help="stepsize heatmap: oracle calls to reach --tol")
    _common(g)
    g.add_argument("--methods", help="comma separated (default: all four)")
    g.add_argument("--eta-x-values", help="comma separated list (default: 20 log-spaced in [1e-3, 1])")
    g.add_argument("--eta-y-values")
    g.add_argument("--budget", type=int, help="oracle-call budget per cell (default 10000)")
    g.add_argument("--workers", type=int)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--filter", help="only checks whose name contains this substring")
    c.add_argument("--list", action="store_true", help="list check names and exit")
    return parser


DEFAULTS = {
    "problem": "toy", "method": "alt-gda", "tol": 1e-4, "seed": 0, "sigma": 0.0,
    "gdmax_steps": 10, "check_every": 1, "out": "out", "max_iters": 10_000, "stride": 1,
    "budget": 10_000, "workers": 1,
}


def merge_config(args):
    """Fill unset flags from ``--config`` and then from DEFAULTS."""
    values = vars(args)
    if values.get("config"):
        try:
            with open(values["config"]) as fh:
                cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {values['config']}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in values or dest in ("command", "config"):
                raise UsageError(f"unknown config key {key!r}")
            if values[dest] is None:
                values[dest] = val
    for key, val in DEFAULTS.items():
        if key in values and values[key] is None:
            values[key] = val
    return args


def _lookup(table, key, what):
    try:
        return table[key]
    except KeyError:
        raise UsageError(f"unknown {what} {key!r}; choose from {sorted(table)}") from None


def _problem(args):
    if args.problem not in PROBLEMS:
        raise UsageError(f"unknown problem {args.problem!r}; choose from {sorted(PROBLEMS)}")
    params = args.param if isinstance(args.param, dict) else parse_params(args.param)
    if args.data:
        params["data"] = args.data
    try:
        return make_problem(args.problem, **params), params
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _fmt(v):
    return f"{v:.17g}"


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in trace:
            fh.write(",".join([str(r.k), _fmt(r.residual), _fmt(r.delta_gap), _fmt(r.delta_dist),
                               _fmt(r.psi), _fmt(r.Psi), str(r.calls_x), str(r.calls_y)]) + "\n")


def cmd_run(args, out=print):
    problem, params = _problem(args)
    method = _lookup(METHOD_NAMES, args.method, "method")
    metric = None if args.metric is None else _lookup(METRIC_NAMES, args.metric, "metric")
    plan = None
    if args.schedule:
        consts = problem.constants.with_sigma(args.sigma)
        eps = args.epsilon if args.epsilon is not None else args.tol
        try:
            plan = SCHEDULES[args.schedule](consts, eps)
        except ScheduleError as exc:
            raise UsageError(f"schedule {args.schedule}: {exc}") from None
        if args.eta_x is not None:
            plan.eta_x = args.eta_x
        if args.eta_y is not None:
            plan.eta_y = args.eta_y
        if args.batch is not None:
            plan.M = args.batch
    elif args.eta_x is None or args.eta_y is None:
        raise UsageError("give --eta-x and --eta-y, or --schedule")
    try:
        cfg = SolverConfig(
            method=method, eta_x=args.eta_x, eta_y=args.eta_y, batch_size=args.batch or 1,
            gdmax_inner_steps=args.gdmax_steps, max_iters=args.max_iters, max_calls=args.max_calls,
            stop_tolerance=args.tol, stationarity_metric=metric, seed=args.seed, sigma=args.sigma,
            stride=args.stride, check_every=args.check_every, diagnostics=not args.no_diagnostics,
        )
        x0 = None if args.x0 is None else _vector(args.x0)
        y0 = None if args.y0 is None else _vector(args.y0)
        res = run(problem, cfg, plan, x0=x0, y0=y0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    os.makedirs(args.out, exist_ok=True)
    write_trace(os.path.join(args.out, "trace.csv"), res.trace)
    meta = {
        "command": "run",
        "problem": args.problem,
        "params": params,
        "config": asdict(cfg),
        "plan": None if plan is None else asdict(plan),
        "x0": x0,
        "y0": y0,
        "reason": res.reason,
        "message": res.message,
        "metric": res.metric,
        "iterations": res.state.k,
        "calls_x": res.state.calls_x,
        "calls_y": res.state.calls_y,
        "final_residual": None if res.residual != res.residual else res.residual,
        "final_x": res.state.x.tolist(),
        "final_y": res.state.y.tolist(),
        "backend": _core.BACKEND,
        "wall_time": res.wall_time,
    }
    with open(os.path.join(args.out, "run.json"), "w") as fh:
        json.dump(meta, fh, indent=2, default=str)
    out(f"reason={res.reason} iters={res.state.k} residual={res.residual:.6g} "
        f"calls={res.state.calls} (x {res.state.calls_x}, y {res.state.calls_y})")
    return 0


def cmd_grid(args, out=print):
    problem, params = _problem(args)  # validates the key and parameters early
    methods = (["alt_gda", "sim_gda", "extragradient", "gdmax"] if not args.methods
               else [_lookup(METHOD_NAMES, m.strip(), "method") for m in args.methods.split(",")])
    ex = _vector(args.eta_x_values) if args.eta_x_values else log_grid()
    ey = _vector(args.eta_y_values) if args.eta_y_values else log_grid()
    metric = None if args.metric is None else _lookup(METRIC_NAMES, args.metric, "metric")
    try:
        spec = GridSpec(ex, ey, args.tol, args.budget, methods)
        rows = run_grid(
            args.problem, spec, params, workers=args.workers, metric=metric,
            gdmax_steps=args.gdmax_steps, seed=args.seed, sigma=args.sigma, batch=args.batch or 1,
            check_every=args.check_every,
            x0=None if args.x0 is None else tuple(_vector(args.x0)),
            y0=None if args.y0 is None else tuple(_vector(args.y0)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "grid.csv")
    with open(path, "w", newline="") as fh:
        fh.write(format_rows(rows))
    n_conv = sum(r[4] for r in rows)
    out(f"{len(rows)} cells, {n_conv} converged, written to {path}")
    return 0


def cmd_check(args, out=print):
    names = [n for n in CHECKS if not args.filter or args.filter in n]
    if args.list:
        for n in names:
            out(n)
        return 0
    if not names:
        raise UsageError(f"no check matches {args.filter!r}")
    failed = run_checks(names, out)
    if failed:
        out(f"{len(failed)} of {len(names)} checks failed: {', '.join(failed)}")
        return 1
    out(f"all {len(names)} checks passed")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args)
        merge_config(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_grid(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2


if __name__ == "__main__":
    sys.exit(main())
