"""End-to-end min-max solve and the solution document."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import yaml

from . import kernels
from .discretize import DiscretizedPlant, discretize_problem
from .model import MultiModelProblem, ensure_valid
from .riccati import ExtendedMatrices, ExtendedSystem, RiccatiSolution
from .simplex_opt import IterationTrace, solve_mu
from .simulate import plant_costs

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ControlSolution:
    mu_star: np.ndarray
    v: np.ndarray
    gains: RiccatiSolution
    per_plant_costs: np.ndarray
    minmax_cost: float
    converged: bool
    trace: IterationTrace
    times: np.ndarray
    labels: list[str]

    @property
    def iterations(self) -> int:
        return self.trace.iterations

    def slackness(self) -> np.ndarray:
        return np.abs(self.mu_star * (self.per_plant_costs - self.minmax_cost))


def extract_control(gains: RiccatiSolution, ext: ExtendedMatrices, x0) -> np.ndarray:
    """Open-loop control levels ``v_k = -K_k x_k`` along the stacked closed loop.

    ``x0`` is the plant initial state; it is stacked once per plant.
    """
    x0 = np.asarray(x0, dtype=float)
    ne = ext.Phi.shape[1]
    stacked = np.tile(x0, ne // x0.size) if x0.size != ne else x0
    _, V = kernels.rollout(ext.Phi, ext.Gamma, gains.K, np.ascontiguousarray(stacked))
    return V


def solve_minmax(problem: MultiModelProblem, discretized: Sequence[DiscretizedPlant] | None = None) -> ControlSolution:
    """Discretize, find the optimal weights, and build the min-max control.

    On non-convergence the best weight vector seen (by objective) is used
    and ``converged`` is False.
    """
    ensure_valid(problem)
    if discretized is None:
        discretized = discretize_problem(problem)
    mu, trace = solve_mu(problem, discretized, problem.params)
    if not trace.converged:
        mu = trace.best().mu
    system = ExtendedSystem(discretized)
    ext = system.extend(mu)
    gains = system.solve(mu)
    v = extract_control(gains, ext, problem.x0)
    costs = plant_costs(discretized, v, problem.x0)
    return ControlSolution(
        mu_star=mu,
        v=v,
        gains=gains,
        per_plant_costs=costs,
        minmax_cost=float(costs.max()),
        converged=trace.converged,
        trace=trace,
        times=np.array(problem.delta.times),
        labels=problem.labels,
    )


def solution_to_dict(sol: ControlSolution) -> dict:
    return {
        "mu_star": sol.mu_star.tolist(),
        "v": [
            {"t": [float(sol.times[k]), float(sol.times[k + 1])], "value": sol.v[k].tolist()}
            for k in range(len(sol.v))
        ],
        "labels": list(sol.labels),
        "per_plant_costs": sol.per_plant_costs.tolist(),
        "minmax_cost": float(sol.minmax_cost),
        "converged": bool(sol.converged),
        "iterations": int(sol.iterations),
    }


def dump_solution(sol: ControlSolution) -> str:
    return yaml.safe_dump(solution_to_dict(sol), sort_keys=False, default_flow_style=None, width=120)


class SolutionFormatError(ValueError):
    pass


def load_solution_controls(text: str, N: int, m: int) -> np.ndarray:
    """Control levels from a solution document, checked against ``(N, m)``."""
    try:
        doc = yaml.safe_load(text)
        V = np.array([entry["value"] for entry in doc["v"]], dtype=float)
    except (yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise SolutionFormatError(f"corrupt solution document: {exc}") from None
    if V.shape != (N, m) or not np.all(np.isfinite(V)):
        raise SolutionFormatError(f"solution controls have shape {V.shape}, expected {(N, m)}")
    return V
