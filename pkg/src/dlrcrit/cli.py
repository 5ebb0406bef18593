"""Command-line interface: ``dlrcrit solve|optimize|oracle|compare``.

Exit codes: 0 success, 1 input error, 2 non-convergence.
"""
import argparse
import json
import sys
import time
from pathlib import Path

from . import io
from .adaptive import AdaptConfig, FixedIncrement, SingularValueDriven, adaptive_solve
from .exceptions import CriticalityError, InvalidInputError, NonConvergenceError
from .lowrank import LowRankFlux, dlrp_solve
from .operators import assemble
from .optimize import (AdaptOptSchedule, OptConfig, four_layer_problem, optimize_adaptive,
                       optimize_fixed_rank)
from .power import DEFAULT_SEED, dense_oracle, power_solve
from .problems import DEFAULT_HOLLOW_LEN, DEFAULT_SS3_LEN, FOUR_LAYER_ALPHA0
from .reactor import build_mesh
from .trace import IterationTrace

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


def _add_problem_args(p, geometry=True, density_rule="center"):
    p.add_argument("--materials", required=True, help="material JSON file")
    if geometry:
        p.add_argument("--geometry", required=True, help="geometry JSON file")
    p.add_argument("--cells", type=int, required=True, help="number of radial cells")
    p.add_argument("--density-rule", choices=("center", "volume"),
                   default=density_rule)
    p.add_argument("--boundary", choices=("face", "ghost"), default="face")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--record-wall-time", action="store_true",
                   help="store wall time in result.json (breaks byte-identity)")


def _add_adaptive_args(p):
    p.add_argument("--rank0", type=int, default=5)
    p.add_argument("--theta0", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.1)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--kappa", type=int, default=None)
    g.add_argument("--beta", type=float, default=None)
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--max-outer", type=int, default=200)


def build_parser():
    parser = argparse.ArgumentParser(prog="dlrcrit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute k_eff with one method")
    _add_problem_args(p)
    p.add_argument("--method", choices=("full", "dlr", "adaptive"), required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--rank", type=int, default=None)
    _add_adaptive_args(p)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = sub.add_parser("optimize", help="fit layer thicknesses of the hollow sphere to k*")
    _add_problem_args(p, geometry=False, density_rule="volume")
    p.add_argument("--mode", choices=("fixed", "adaptive"), required=True)
    p.add_argument("--ktarget", type=float, default=1.0)
    p.add_argument("--alpha0", type=float, nargs=2, default=list(FOUR_LAYER_ALPHA0))
    p.add_argument("--hollow", type=float, default=DEFAULT_HOLLOW_LEN)
    p.add_argument("--ss3", type=float, default=DEFAULT_SS3_LEN)
    p.add_argument("--roles", type=int, nargs=3, default=[0, 1, 2],
                   help="material indices of U, SS2, SS3")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--tolf", type=float, default=1e-10)
    p.add_argument("--h0", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1e-4)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--hmin", type=float, default=1e-9)
    p.add_argument("--fd-delta", type=float, default=1e-5)
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--rank0", type=int, default=4)
    p.add_argument("--kappa", type=int, default=4)
    p.add_argument("--rho-opt", type=float, default=1e-3)
    p.add_argument("--tol0", type=float, default=1e-4)
    p.add_argument("--restart-alpha", action="store_true",
                   help="restart each phase from --alpha0")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = sub.add_parser("oracle", help="dense reference eigenvalue")
    _add_problem_args(p)

    p = sub.add_parser("compare", help="run full, dlr and adaptive side by side")
    _add_problem_args(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--rank", type=int, default=5)
    _add_adaptive_args(p)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def _load(args, geometry=True):
    library = io.parse_materials(args.materials)
    digests = {"materials": io.digest(io.library_to_dict(library))}
    geom = None
    if geometry:
        geom = io.parse_geometry(args.geometry, library)
        digests["geometry"] = io.digest(io.geometry_to_dict(geom, library))
    return library, geom, digests


def _ops(args, library, geom):
    mesh = build_mesh(geom.outer_radius, args.cells)
    return assemble(library, geom, mesh, density_rule=args.density_rule,
                    boundary=args.boundary)


def _config(args, keys):
    return {k: getattr(args, k) for k in keys}


def _write(out, record, trace_rows, args, extra=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    record.write(out / "result.json", include_wall_time=args.record_wall_time)
    io.write_trace_csv(trace_rows, out / "trace.csv")
    for name, text in (extra or {}).items():
        (out / name).write_text(text)


_PROBLEM_KEYS = ("cells", "density_rule", "boundary")
_ADAPT_KEYS = ("rank0", "theta0", "rho", "kappa", "beta", "max_rank", "max_outer")


def _adapt_config(args):
    mode = SingularValueDriven(args.beta) if args.beta is not None else FixedIncrement(
        1 if args.kappa is None else args.kappa)
    return AdaptConfig(args.rank0, args.theta0, args.tol, args.rho, mode, args.max_rank,
                       args.max_outer, args.max_iter)


def _run_method(method, ops, args):
    """Returns ``(k, rank, trace, cost, extra_result)``."""
    N, G = ops.n_cells, ops.n_groups
    if method == "full":
        res = power_solve(ops, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
        return res.k_eff, min(N, G), res.trace, res.trace.total_cost, {}
    if method == "dlr":
        rank = args.rank if args.rank is not None else min(N, G, 5)
        flux0 = LowRankFlux.random(N, G, rank, args.seed)
        k, flux, trace = dlrp_solve(ops, flux0, args.tol, max_iter=args.max_iter)
        return k, flux.rank, trace, trace.total_cost, {}
    cfg = _adapt_config(args)
    flux0 = LowRankFlux.random(N, G, cfg.r0, args.seed)
    res = adaptive_solve(ops, flux0, cfg)
    extra = {"rank_changes": [[c.old_rank, c.rank] for c in res.changes],
             "thetas": list(res.thetas), "average_rank": res.average_rank}
    return res.k, res.flux.rank, res.trace, res.cost, extra


def _solve_record(method, ops, args, digests, config):
    t0 = time.perf_counter()
    k, rank, trace, cost, extra = _run_method(method, ops, args)
    result = {"k": k, "rank": rank, "iterations": len(trace), "cost": cost,
              "status": "converged", **extra}
    record = io.RunRecord(method, digests, config, {"initial_flux": args.seed}, result,
                          io.trace_rows(trace), time.perf_counter() - t0)
    return record, trace


def cmd_solve(args):
    library, geom, digests = _load(args)
    ops = _ops(args, library, geom)
    keys = _PROBLEM_KEYS + ("method", "tol", "max_iter")
    keys += ("rank",) if args.method == "dlr" else _ADAPT_KEYS if args.method == "adaptive" else ()
    config = _config(args, keys)
    digests["config"] = io.digest(config)
    record, trace = _solve_record(args.method, ops, args, digests, config)
    _write(args.out, record, trace, args)
    print(f"{args.method}: k = {record.result['k']:.15f}  rank = {record.result['rank']}  "
          f"iterations = {record.result['iterations']}  cost = {record.result['cost']}")
    return EXIT_OK


def cmd_oracle(args):
    library, geom, digests = _load(args)
    ops = _ops(args, library, geom)
    config = _config(args, _PROBLEM_KEYS)
    digests["config"] = io.digest(config)
    t0 = time.perf_counter()
    k, _ = dense_oracle(ops)
    result = {"k": k, "rank": min(ops.n_cells, ops.n_groups), "iterations": 0, "cost": 0,
              "status": "converged"}
    record = io.RunRecord("oracle", digests, config, {}, result, [],
                          time.perf_counter() - t0)
    _write(args.out, record, IterationTrace(), args)
    print(f"oracle: k = {k:.15f}")
    return EXIT_OK


def cmd_compare(args):
    library, geom, digests = _load(args)
    ops = _ops(args, library, geom)
    config = _config(args, _PROBLEM_KEYS + ("tol", "rank", "max_iter") + _ADAPT_KEYS)
    digests["config"] = io.digest(config)
    rows, code = [], EXIT_OK
    for method in ("full", "dlr", "adaptive"):
        try:
            record, trace = _solve_record(method, ops, args, digests, config)
        except NonConvergenceError as exc:
            print(f"{method}: {exc}", file=sys.stderr)
            code = EXIT_NONCONVERGED
            continue
        _write(Path(args.out) / method, record, trace, args)
        rows.append({"method": method, **{k: record.result[k] for k in
                                          ("k", "rank", "iterations", "cost")}})
    print(f"{'method':<10}{'k':>20}{'rank':>6}{'iter':>7}{'cost':>9}")
    for r in rows:
        print(f"{r['method']:<10}{r['k']:>20.15f}{r['rank']:>6}{r['iterations']:>7}"
              f"{r['cost']:>9}")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "summary.json").write_text(json.dumps(rows, indent=1) + "\n")
    return code


def _opt_trace_csv(trace):
    lines = ["step,phase,alpha,f,k,h,backtracks,iterations,cumulative_cost,rank"]
    for i, s in enumerate(trace):
        alpha = " ".join(format(a, ".17g") for a in s.alpha)
        lines.append(f"{i},{s.phase},{alpha},{s.f:.17g},{s.k:.17g},{s.h:.17g},"
                     f"{s.backtracks},{s.iterations},{s.cumulative_cost},{s.rank}")
    return "\n".join(lines) + "\n"


def _opt_as_iteration_trace(trace, theta):
    # one row per accepted iterate; delta holds the objective f
    out = IterationTrace()
    prev = 0
    for s in trace:
        out.append(s.k, s.f, s.rank, theta, s.cumulative_cost - prev)
        prev = s.cumulative_cost
    return out


def cmd_optimize(args):
    library, _, digests = _load(args, geometry=False)
    problem = four_layer_problem(library, args.ktarget, args.cells, args.hollow, args.ss3,
                                 tuple(args.roles), density_rule=args.density_rule,
                                 boundary=args.boundary)
    cfg = OptConfig(args.tol, args.tolf, args.h0, args.c, args.p, args.hmin, args.fd_delta,
                    args.rank, args.max_steps)
    keys = _PROBLEM_KEYS + ("mode", "ktarget", "alpha0", "hollow", "ss3", "roles", "tol",
                            "tolf", "h0", "c", "p", "hmin", "fd_delta", "max_steps")
    keys += ("rank",) if args.mode == "fixed" else ("rank0", "kappa", "rho_opt", "tol0",
                                                   "restart_alpha")
    config = _config(args, keys)
    digests["config"] = io.digest(config)
    rank0 = args.rank if args.mode == "fixed" else args.rank0
    ops0 = problem.operators(problem.project(args.alpha0))
    flux0 = LowRankFlux.random(ops0.n_cells, ops0.n_groups, rank0, args.seed)
    t0 = time.perf_counter()
    status, code = "converged", EXIT_OK
    try:
        if args.mode == "fixed":
            res = optimize_fixed_rank(problem, args.alpha0, flux0, cfg)
        else:
            schedule = AdaptOptSchedule(args.rank0, args.kappa, args.rho_opt, args.tol0,
                                        args.restart_alpha)
            res = optimize_adaptive(problem, args.alpha0, flux0, schedule, cfg)
    except NonConvergenceError as exc:
        if exc.result is None:
            raise
        res, status, code = exc.result, type(exc).__name__, EXIT_NONCONVERGED
        print(f"optimize: {exc}", file=sys.stderr)
    trace = res.trace
    result = {"k": res.k, "f": res.f, "alpha": [float(a) for a in res.alpha],
              "rank": res.flux.rank if res.flux is not None else rank0,
              "iterations": len(trace), "cost": trace.total_cost, "status": status}
    record = io.RunRecord(f"optimize-{args.mode}", digests, config,
                          {"initial_flux": args.seed}, result,
                          [list(s.alpha) + [s.f, s.k, s.h, s.backtracks, s.iterations,
                                            s.cumulative_cost, s.rank, s.phase]
                           for s in trace],
                          time.perf_counter() - t0)
    _write(args.out, record, _opt_as_iteration_trace(trace, args.tolf), args,
           {"opt_trace.csv": _opt_trace_csv(trace)})
    print(f"optimize ({args.mode}): alpha = {result['alpha']}  f = {res.f:.3e}  "
          f"k = {res.k:.15f}  cost = {trace.total_cost}")
    return code


COMMANDS = {"solve": cmd_solve, "optimize": cmd_optimize, "oracle": cmd_oracle,
            "compare": cmd_compare}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.trace is not None and isinstance(exc.trace, IterationTrace):
            Path(args.out).mkdir(parents=True, exist_ok=True)
            io.write_trace_csv(exc.trace, Path(args.out) / "trace.csv")
        return EXIT_NONCONVERGED
    except (InvalidInputError, FileNotFoundError, CriticalityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
