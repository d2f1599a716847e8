"""Command-line front end.

Every command reads one problem file and prints a JSON report on stdout.
Diagnostics go to stderr. Exit codes: 0 success, 2 validation failure,
3 non-convergence or divergence, 4 unreadable or malformed input.
"""

import argparse
import datetime
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DimensionMismatch,
    GcareError,
    IntegrationDiverged,
    NoConvergence,
    ProblemFileError,
)
from .geometry import geometry_report, reachable_subspace
from .lqcontrol import (
    FiniteHorizonProblem,
    SimulationSettings,
    control_family,
    evaluate_cost,
    finiteness_probe,
    simulate_closed_loop,
    simulate_until_tail,
    solve_finite,
    solve_infinite,
)
from .matlin import RankTolerance
from .problem import derive, summary, validate
from .problem_file import dump_problem, load_problem, matrix_to_json
from .riccati import IntegrationSettings, LimitSettings, care_limit_solution

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_PARSE = 0, 2, 3, 4

DEFAULTS = {
    "rank_tol": RankTolerance().relative,
    "ode_tol": IntegrationSettings().rtol,
    "stat_tol": LimitSettings().stat_tol,
    "t_max": LimitSettings().t_max,
}


class _Failure(Exception):
    def __init__(self, code, message, extra=None):
        super().__init__(message)
        self.code = code
        self.extra = extra or {}


def _tolerances(pf, args):
    tols = dict(DEFAULTS)
    tols.update(pf.settings)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            tols[key] = val
    return tols


def _solver_settings(tols):
    rank_tol = RankTolerance(relative=tols["rank_tol"])
    integ = IntegrationSettings(rtol=tols["ode_tol"], atol=tols["ode_tol"] * 1e-2)
    limit = LimitSettings(t_max=tols["t_max"], stat_tol=tols["stat_tol"], integration=integ)
    return rank_tol, integ, limit


def _base(pf, tols, rank_tol):
    sigma = pf.sigma
    rep = validate(sigma, rank_tol=rank_tol)
    report = {"problem": dump_problem(pf), "tolerances": tols, "validation": rep.as_dict()}
    if not rep.ok:
        raise _Failure(EXIT_INVALID, "; ".join(rep.messages), report)
    d = derive(sigma, rank_tol)
    info = summary(sigma, d)
    info["dim_R_F_B2"] = reachable_subspace(d.F, d.B2, rank_tol).dim
    info["finiteness"] = finiteness_probe(sigma, rank_tol).value
    report["derived"] = info
    return report


def _solver_failure(exc, report):
    kind = "no-convergence" if isinstance(exc, NoConvergence) else "diverged"
    report["solver"] = {"status": kind, "message": str(exc)}
    if getattr(exc, "growth", None) is not None:
        report["solver"]["growth"] = exc.growth.as_dict()
    return _Failure(EXIT_SOLVER, str(exc), report)


def _cmd_validate(pf, args, tols, rank_tol, integ, limit):
    return _base(pf, tols, rank_tol)


def _cmd_solve_care(pf, args, tols, rank_tol, integ, limit):
    report = _base(pf, tols, rank_tol)
    try:
        res = care_limit_solution(pf.sigma, limit, rank_tol)
    except (NoConvergence, IntegrationDiverged) as exc:
        raise _solver_failure(exc, report) from None
    report["solver"] = {"status": "converged", **res.as_dict()}
    return report


def _x0(pf, args):
    if args.x0 is not None:
        x0 = np.array(args.x0, dtype=float)
    elif pf.x0 is not None:
        x0 = pf.x0
    else:
        x0 = np.zeros(pf.sigma.n)
        x0[0] = 1.0
    if x0.shape != (pf.sigma.n,):
        raise _Failure(EXIT_PARSE, f"--x0 needs {pf.sigma.n} entries, got {x0.size}")
    return x0


def _horizon(pf, args):
    T = args.horizon if args.horizon is not None else pf.T
    if T is None or T <= 0:
        raise _Failure(EXIT_PARSE, "a positive horizon is needed (--horizon or T in the file)")
    return float(T)


def _solve_lq(pf, args, tols, rank_tol, integ, limit, report):
    x0 = _x0(pf, args)
    sim = SimulationSettings(rtol=tols["ode_tol"], atol=tols["ode_tol"] * 1e-2)
    try:
        if args.infinite:
            sol = solve_infinite(pf.sigma, x0, limit, sim, horizon=args.horizon,
                                 rank_tol=rank_tol)
        else:
            H = pf.H if pf.H is not None else np.zeros((pf.sigma.n, pf.sigma.n))
            prob = FiniteHorizonProblem(pf.sigma, H, _horizon(pf, args), x0)
            sol = solve_finite(prob, integ, sim, rank_tol=rank_tol)
    except (NoConvergence, IntegrationDiverged) as exc:
        raise _solver_failure(exc, report) from None
    return sol, x0


def _cmd_solve_lq(pf, args, tols, rank_tol, integ, limit):
    report = _base(pf, tols, rank_tol)
    sol, x0 = _solve_lq(pf, args, tols, rank_tol, integ, limit, report)
    out = sol.as_dict()
    out["x0"] = x0.tolist()
    out["horizon"] = "infinite" if args.infinite else _horizon(pf, args)
    if args.infinite:
        out["care"] = sol.flow.as_dict()
    else:
        out["flow"] = sol.flow.summary()
    report["lq"] = out
    return report


def _cmd_geometry(pf, args, tols, rank_tol, integ, limit):
    report = _base(pf, tols, rank_tol)
    g = geometry_report(pf.sigma, rank_tol)
    geo = g.as_dict()
    for key in ("Vstar", "Sstar", "Rstar", "R_F_B2", "R_A0_BG"):
        geo[f"basis_{key}"] = matrix_to_json(getattr(g, key).basis)
    report["geometry"] = geo
    return report


def _cmd_simulate(pf, args, tols, rank_tol, integ, limit):
    report = _base(pf, tols, rank_tol)
    args.infinite = args.law == "infinite"
    sol, x0 = _solve_lq(pf, args, tols, rank_tol, integ, limit, report)
    traj, cost, H = sol.trajectory, sol.cost, sol.H_used
    if args.free_signal is not None:
        v = np.array(args.free_signal, dtype=float)
        if v.shape != (pf.sigma.m,):
            raise _Failure(EXIT_PARSE, f"--free-signal needs {pf.sigma.m} entries, got {v.size}")
        law = control_family(sol.law, v)
        sim = SimulationSettings(rtol=tols["ode_tol"], atol=tols["ode_tol"] * 1e-2)
        try:
            if args.infinite:
                traj = simulate_until_tail(pf.sigma, law, x0, args.horizon, sim)
            else:
                traj = simulate_closed_loop(pf.sigma, law, x0, traj.times[-1],
                                            grid=traj.times, settings=sim)
        except IntegrationDiverged as exc:
            raise _solver_failure(exc, report) from None
        cost = evaluate_cost(traj, pf.sigma, H=H)
    write_trajectory_csv(traj, args.out)
    report["simulation"] = {
        "law": args.law,
        "x0": x0.tolist(),
        "free_signal": None if args.free_signal is None else list(args.free_signal),
        "n_samples": int(traj.times.size),
        "horizon": float(traj.times[-1]),
        "cost": cost,
        "optimal_value": sol.optimal_value,
        "out": str(args.out),
    }
    return report


def write_trajectory_csv(traj, path):
    n, m = traj.x.shape[1], traj.u.shape[1]
    header = ",".join(["t"] + [f"x_{i}" for i in range(1, n + 1)]
                      + [f"u_{j}" for j in range(1, m + 1)] + ["integrand"])
    np.savetxt(path, traj.rows(), fmt="%.17g", delimiter=",", header=header, comments="")


COMMANDS = {
    "validate": _cmd_validate,
    "solve-care": _cmd_solve_care,
    "solve-lq": _cmd_solve_lq,
    "geometry": _cmd_geometry,
    "simulate": _cmd_simulate,
}


def run_file(command, path, args):
    """Run one command on one file. Returns ``(report, exit_code, message)``."""
    report = {"command": command, "file": str(path)}
    try:
        pf = load_problem(path)
        tols = _tolerances(pf, args)
        rank_tol, integ, limit = _solver_settings(tols)
        body = COMMANDS[command](pf, args, tols, rank_tol, integ, limit)
        report.update(body)
        code, message = EXIT_OK, ""
    except ProblemFileError as exc:
        code, message = EXIT_PARSE, f"parse error: {exc}"
    except _Failure as exc:
        report.update(exc.extra)
        code, message = exc.code, str(exc)
    except DimensionMismatch as exc:
        code, message = EXIT_PARSE, f"dimension error: {exc}"
    except (GcareError, ValueError) as exc:
        code, message = EXIT_INVALID, str(exc)
    report["exit_status"] = code
    if message:
        report["error"] = message
    return report, code, message


def _batch_one(item):
    command, path, args = item
    report, code, _ = run_file(command, path, args)
    return path.name, report, code


def _cmd_batch(args):
    files = sorted(Path(args.directory).glob("*.json"))
    if not files:
        print(f"error: no *.json problem files in {args.directory}", file=sys.stderr)
        return {"command": "batch", "results": {}}, EXIT_PARSE
    items = [(args.batch_command, f, args) for f in files]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_batch_one, items))
    else:
        outcomes = [_batch_one(it) for it in items]
    results = {name: rep for name, rep, _ in outcomes}
    codes = {name: code for name, _, code in outcomes}
    for name, code in codes.items():
        if code:
            print(f"{name}: exit {code}: {results[name].get('error', '')}", file=sys.stderr)
    worst = max(codes.values())
    return {"command": "batch", "subcommand": args.batch_command, "results": results,
            "exit_codes": codes, "exit_status": worst}, worst


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _to_json(report, args):
    if not args.no_timestamp:
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    report["version"] = __version__
    return json.dumps(report, sort_keys=True, indent=2, default=_json_default)


def build_parser():
    p = argparse.ArgumentParser(
        prog="gcare",
        description="Singular LQ optimal control via the constrained generalised "
                    "algebraic Riccati equation.",
        epilog="Exit codes: 0 success, 2 validation failure, 3 solver "
               "non-convergence or divergence, 4 parse error.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rank-tol", dest="rank_tol", type=float,
                        help=f"relative SVD rank cutoff (default {DEFAULTS['rank_tol']:g})")
    common.add_argument("--ode-tol", dest="ode_tol", type=float,
                        help=f"integrator relative tolerance; absolute is 1%% of it "
                             f"(default {DEFAULTS['ode_tol']:g})")
    common.add_argument("--stat-tol", dest="stat_tol", type=float,
                        help=f"relative stationarity tolerance of the forward flow "
                             f"(default {DEFAULTS['stat_tol']:g})")
    common.add_argument("--t-max", dest="t_max", type=float,
                        help=f"forward-flow time limit (default {DEFAULTS['t_max']:g})")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp so reports are byte-reproducible")
    lq = argparse.ArgumentParser(add_help=False)
    lq.add_argument("--x0", type=float, nargs="+",
                    help="initial state (default: x0 from the file, else e_1)")
    lq.add_argument("--horizon", type=float,
                    help="finite horizon T (default: T from the file); with an "
                         "infinite-horizon law, the simulation length")

    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("validate", "check Pi >= 0 and ker R in ker S"),
                       ("solve-care", "minimal PSD solution as the forward-flow limit"),
                       ("geometry", "V*, S*, R* and the reachable subspaces")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("file")
    sp = sub.add_parser("solve-lq", parents=[common, lq], help="optimal LQ value and law")
    sp.add_argument("file")
    sp.add_argument("--infinite", action="store_true", help="infinite-horizon problem")
    sp = sub.add_parser("simulate", parents=[common, lq],
                        help="simulate the optimal closed loop and write a CSV trajectory")
    sp.add_argument("file")
    sp.add_argument("--law", choices=("finite", "infinite"), default="infinite")
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.add_argument("--free-signal", dest="free_signal", type=float, nargs="+",
                    help="constant free signal v (m entries); the input adds G v")
    sp = sub.add_parser("batch", parents=[common],
                        help="run one command over every *.json file in a directory")
    sp.add_argument("directory")
    sp.add_argument("--command", dest="batch_command", default="solve-care",
                    choices=("validate", "solve-care", "geometry"))
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "batch":
        report, code = _cmd_batch(args)
    else:
        report, code, message = run_file(args.command, args.file, args)
        if message:
            print(f"error: {message}", file=sys.stderr)
    print(_to_json(report, args))
    return code


if __name__ == "__main__":
    sys.exit(main())
