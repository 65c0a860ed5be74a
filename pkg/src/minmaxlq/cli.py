"""``minmaxlq`` command line: solve, simulate, table, check, mpc."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .discretize import DiscretizationError, discretize_problem, dump_discretization
from .model import ProblemError, ensure_valid, load_problem, shipped_problem_path, shipped_problems
from .riccati import ExtendedSystem
from .simplex_opt import grid_search_mu, simplex_lp_max, slackness_residuals
from .simulate import (
    RecedingHorizonAborted,
    cross_cost_table,
    plant_costs,
    receding_horizon,
    simulate_plant,
    write_trajectory_csv,
)
from .solver import SolutionFormatError, dump_solution, extract_control, load_solution_controls, solve_minmax

log = logging.getLogger("minmaxlq")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def _fmt(values) -> str:
    return "[" + ", ".join(f"{float(v):.6g}" for v in np.atleast_1d(values)) + "]"


def _resolve_input(name: str) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    # bundled problems can be named by file name alone (e.g. examples/ex1.prob)
    if path.suffix == ".prob" and path.stem in shipped_problems():
        log.info("%s not found, using the bundled %s.prob", path, path.stem)
        return shipped_problem_path(path.stem)
    raise FileNotFoundError(f"problem file not found: {path}")


def _load(args):
    problem = load_problem(_resolve_input(args.file))
    changes = {}
    if getattr(args, "epsilon", None) is not None:
        changes["epsilon_stop"] = args.epsilon
    if getattr(args, "max_iter", None) is not None:
        changes["max_iter"] = args.max_iter
    if getattr(args, "mu0", None):
        changes["mu_init"] = np.array([float(s) for s in args.mu0.split(",")])
    if getattr(args, "convention", None):
        changes["cost_convention"] = f"{args.convention}_integral"
    if changes:
        problem = ensure_valid(problem.with_params(**changes))
    return problem


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    problem = _load(args)
    discretized = discretize_problem(problem)
    sol = solve_minmax(problem, discretized)
    out = _outdir(args)
    (out / "solution.yaml").write_text(dump_solution(sol))
    (out / "trace.jsonl").write_text(sol.trace.to_jsonl())
    if args.dump_discretization:
        (out / "discretization.yaml").write_text(dump_discretization(discretized))
    print(f"mu*         = {_fmt(sol.mu_star)}")
    print(f"costs       = {_fmt(sol.per_plant_costs)}")
    print(f"minmax cost = {sol.minmax_cost:.6g}")
    print(f"converged   = {sol.converged} ({sol.iterations} iterations)")
    for note in sol.trace.notes:
        print(f"note: {note}")
    return EXIT_OK if sol.converged else EXIT_FAILED


def cmd_simulate(args) -> int:
    problem = _load(args)
    discretized = discretize_problem(problem)
    out = _outdir(args)
    if args.solution:
        V = load_solution_controls(Path(args.solution).read_text(), problem.N, problem.m)
    else:
        sol = solve_minmax(problem, discretized)
        if not sol.converged:
            log.warning("solver did not converge; simulating the best iterate")
        V = sol.v
    for plant in discretized:
        traj = simulate_plant(plant, V, problem.x0, refine=args.refine)
        path = out / f"trajectory_{plant.label}.csv"
        write_trajectory_csv(traj, path)
        print(f"plant {plant.label}: {len(traj.t)} samples -> {path}")
    print(f"costs = {_fmt(plant_costs(discretized, V, problem.x0))}")
    return EXIT_OK


def cmd_table(args) -> int:
    problem = _load(args)
    table = cross_cost_table(problem)
    text = table.to_text()
    sys.stdout.write(text)
    if args.out:
        out = _outdir(args)
        (out / "table.txt").write_text(text)
        (out / "table.yaml").write_text(yaml.safe_dump(table.to_dict(), sort_keys=False, default_flow_style=None))
    return EXIT_OK


def run_checks(problem, grid_resolution: int | None = None, inject_mu=None) -> list[tuple[str, bool, str]]:
    """Oracle checks on a solved problem as ``(name, passed, detail)`` rows."""
    discretized = discretize_problem(problem)
    system = ExtendedSystem(discretized)
    results = []
    if not np.any(problem.x0):
        results.append(("degenerate x0 = 0", True, "objective identically zero; every weight vector optimal"))
    sol = solve_minmax(problem, discretized)
    results.append(("solver converged", sol.converged, f"{sol.iterations} iterations"))
    mu = sol.mu_star if inject_mu is None else np.asarray(inject_mu, dtype=float)
    ext_sol = system.solve(mu)
    v = extract_control(ext_sol, system.extend(mu), problem.x0)
    costs = plant_costs(discretized, v, problem.x0)
    top = float(costs.max())
    value = system.value(mu, problem.x0)
    scale = max(1.0, abs(value))

    eps = problem.params.epsilon_stop
    res = slackness_residuals(mu, costs, top)
    results.append(("slackness residuals", bool(res.max() < eps), f"max {res.max():.3g} vs {eps:.3g}"))

    identity = float(mu @ costs)
    gap = abs(identity - value)
    results.append(("cost identity", gap <= 1e-8 * scale, f"|sum mu J - objective| = {gap:.3g}"))

    lp_top, lp_mu = simplex_lp_max(costs)
    lp_ok = lp_top == top and abs(float(lp_mu @ costs) - top) <= 1e-12 * max(1.0, abs(top))
    results.append(("simplex LP maximum", lp_ok, f"max_mu mu.J = {lp_top:.6g}"))

    if grid_resolution:
        mu_grid = grid_search_mu(problem, discretized, grid_resolution)
        grid_value = system.value(mu_grid, problem.x0)
        diff = abs(value - grid_value)
        ok = diff <= 1e-3 * max(abs(grid_value), abs(value)) or diff <= 1e-12
        results.append(("grid oracle", ok, f"objective {value:.6g} vs grid {grid_value:.6g} at {_fmt(mu_grid)}"))
    return results


def cmd_check(args) -> int:
    problem = _load(args)
    inject = [float(s) for s in args.inject_mu.split(",")] if args.inject_mu else None
    results = run_checks(problem, args.grid_oracle, inject)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAILED


def cmd_mpc(args) -> int:
    problem = _load(args)
    out = _outdir(args)
    try:
        result = receding_horizon(problem, args.resolve_every or problem.N, args.true_plant, refine=args.refine)
    except RecedingHorizonAborted as exc:
        write_trajectory_csv(exc.partial.trajectory, out / f"mpc_{args.true_plant}_partial.csv")
        print(f"aborted: {exc}")
        return EXIT_FAILED
    write_trajectory_csv(result.trajectory, out / f"mpc_{args.true_plant}.csv")
    doc = {
        "true_plant": str(args.true_plant),
        "resolve_every": args.resolve_every or problem.N,
        "realized_cost": result.realized_cost,
        "solves": result.solves,
        "mu_history": [{"k": k, "mu": mu} for k, mu in result.mu_history],
    }
    (out / "mpc.yaml").write_text(yaml.safe_dump(doc, sort_keys=False, default_flow_style=None))
    print(f"realized cost = {result.realized_cost:.6g} ({result.solves} solves)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minmaxlq", description="Min-max LQ control of multi-model systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("file", help="problem file")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--epsilon", type=float, help="slackness stopping tolerance")
        p.add_argument("--max-iter", type=int, help="iteration limit")
        p.add_argument("--mu0", help="initial weights, comma separated")
        p.add_argument("--convention", choices=("half", "full"), help="cost convention")

    p = sub.add_parser("solve", help="solve the min-max problem")
    common(p)
    p.add_argument("--dump-discretization", action="store_true", help="also write every per-interval matrix")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="write per-plant trajectories under the min-max control")
    common(p)
    p.add_argument("--refine", type=int, default=20, help="samples per interval")
    p.add_argument("--solution", help="solution document to simulate instead of re-solving")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table", help="cross-cost table of the single-plant optimal controls")
    common(p, out_default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("check", help="run oracle checks on a problem")
    common(p)
    p.add_argument("--grid-oracle", type=int, metavar="RES", help="lattice resolution for brute-force search")
    p.add_argument("--inject-mu", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("mpc", help="receding-horizon run against one plant")
    common(p)
    p.add_argument("--true-plant", required=True, help="label of the plant driven")
    p.add_argument("--resolve-every", type=int, help="intervals applied between re-solves (default: N)")
    p.add_argument("--refine", type=int, default=1, help="samples per interval in the CSV")
    p.set_defaults(func=cmd_mpc)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("MINMAXLQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ProblemError, SolutionFormatError, DiscretizationError, KeyError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
