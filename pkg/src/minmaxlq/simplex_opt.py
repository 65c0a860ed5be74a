"""Maximization of the weighted Riccati value over the probability simplex.

``solve_mu`` runs projected gradient steps on ``f(mu) = -1/2 x0' P_0(mu) x0``
with symmetric finite-difference (Kiefer-Wolfowitz) gradient estimates, and
stops on the complementary-slackness residuals
``|mu_a (J_a - max_b J_b)|`` of the per-plant costs.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from ._errors import NotPositiveDefiniteError
from .discretize import DiscretizedPlant
from .model import MultiModelProblem, SolverParams
from .riccati import ExtendedSystem

log = logging.getLogger(__name__)

KW_MAX_HALVINGS = 8
# relative slack before a decrease of the objective counts as a failed step
MONOTONE_SLACK = 1e-9
GRID_TIE_RTOL = 1e-12


class PerturbationInfeasible(ArithmeticError):
    """Every finite-difference probe, down to ``beta / 2**8``, left the admissible region."""


def project_simplex(y) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x >= 0, sum(x) = 1}``.

    Sort-based threshold construction; the result is exactly non-negative
    and renormalized to sum to one.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.all(np.isfinite(y)):
        raise ValueError("projection needs a non-empty finite vector")
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    x = np.maximum(y - css[rho] / (rho + 1), 0.0)
    return x / x.sum()


def _kw(f: Callable[[np.ndarray], float], mu, beta: float) -> tuple[np.ndarray, float]:
    mu = np.asarray(mu, dtype=float)
    for _ in range(KW_MAX_HALVINGS + 1):
        try:
            grad = np.empty_like(mu)
            for i in range(mu.size):
                e = np.zeros_like(mu)
                e[i] = beta
                grad[i] = (f(mu + e) - f(mu - e)) / (2.0 * beta)
            return grad, beta
        except NotPositiveDefiniteError:
            log.debug("KW probe at beta=%g left the admissible region; halving", beta)
            beta *= 0.5
    raise PerturbationInfeasible("perturbation infeasible")


def kw_gradient(f: Callable[[np.ndarray], float], mu, beta: float) -> np.ndarray:
    """Symmetric-difference gradient ``sum_i (f(mu + b e_i) - f(mu - b e_i)) / 2b e_i``.

    Probes are not projected back onto the simplex.  If ``f`` raises
    :class:`NotPositiveDefiniteError` the step is halved, up to 8 times.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    return _kw(f, mu, beta)[0]


def slackness_residuals(mu, per_plant_costs, max_cost) -> np.ndarray:
    """``|mu_a (J_a - max_cost)|`` per plant."""
    return np.abs(np.asarray(mu, dtype=float) * (np.asarray(per_plant_costs, dtype=float) - max_cost))


def simplex_lp_max(z) -> tuple[float, np.ndarray]:
    """Maximize ``sum_a mu_a z_a`` over the simplex.

    Returns the maximum element and a maximizer spread evenly over the argmax set.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0 or not np.all(np.isfinite(z)):
        raise ValueError("z must be a non-empty finite vector")
    top = z.max()
    support = z == top
    return float(top), support / support.sum()


def simplex_lattice(size: int, resolution: int):
    """All points of the simplex with coordinates in ``{0, 1/res, ..., 1}``, lexicographic order."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    for head in itertools.product(range(resolution + 1), repeat=size - 1):
        rest = resolution - sum(head)
        if rest >= 0:
            yield np.array(head + (rest,), dtype=float) / resolution


def grid_search_mu(problem: MultiModelProblem, discretized: Sequence[DiscretizedPlant], resolution: int) -> np.ndarray:
    """Brute-force maximizer of the objective on the simplex lattice.

    Ties (up to round-off, ``1e-12`` relative) go to the lexicographically
    smallest lattice point.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    system = ExtendedSystem(discretized)
    best, best_mu = -math.inf, None
    for mu in simplex_lattice(system.size, resolution):
        value = system.value(mu, problem.x0)
        if best_mu is None or value > best + GRID_TIE_RTOL * abs(best):
            best, best_mu = value, mu
    return best_mu


@dataclass
class IterationRecord:
    j: int
    mu: np.ndarray
    objective: float
    residuals: np.ndarray
    costs: np.ndarray
    gamma: float
    beta: float
    accepted: bool = True

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "mu": self.mu.tolist(),
            "objective": self.objective,
            "residuals": self.residuals.tolist(),
            "costs": self.costs.tolist(),
            "gamma": self.gamma,
            "beta": self.beta,
            "accepted": self.accepted,
        }


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    notes: list[str] = field(default_factory=list)
    monotonicity_failures: list[int] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return max((r.j for r in self.records), default=0)

    def best(self) -> IterationRecord:
        accepted = [r for r in self.records if r.accepted]
        return max(accepted, key=lambda r: r.objective)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)


class MuProblem:
    """Objective, per-plant costs and residuals as functions of ``mu``."""

    def __init__(self, problem: MultiModelProblem, discretized: Sequence[DiscretizedPlant]):
        self.problem = problem
        self.discretized = list(discretized)
        self.system = ExtendedSystem(discretized)
        self.x0 = np.asarray(problem.x0, dtype=float)
        self.x0_stacked = self.system.stack_state(self.x0)

    def value(self, mu) -> float:
        return self.system.value(mu, self.x0)

    def f(self, mu) -> float:
        return -self.value(mu)

    def control(self, mu) -> tuple[np.ndarray, np.ndarray, object]:
        """``(v, stacked states, riccati solution)`` of the weighted LQ problem."""
        sol = self.system.solve(mu)
        X, V = kernels.rollout(self.system.Phi, self.system.Gamma, sol.K, self.x0_stacked)
        return V, X, sol

    def costs(self, mu) -> tuple[np.ndarray, float]:
        """Per-plant costs of the control optimal for ``mu`` and the objective value."""
        V, _, sol = self.control(mu)
        costs = np.array(
            [kernels.quadratic_cost(p.Phi, p.Gamma, p.Pi, p.Theta, p.Psi, p.G, self.x0, V) for p in self.discretized]
        )
        return costs, 0.5 * float(self.x0_stacked @ sol.P[0] @ self.x0_stacked)


def _reference_max(costs: np.ndarray, value: float, params: SolverParams) -> float:
    return value if params.cost_mode == "riccati" else float(costs.max())


def solve_mu(problem: MultiModelProblem, discretized: Sequence[DiscretizedPlant], params: SolverParams | None = None):
    """Projected Kiefer-Wolfowitz ascent for the optimal weights.

    Returns ``(mu, trace)``; ``trace.converged`` is False when ``max_iter``
    was reached before every slackness residual fell below ``epsilon_stop``.
    """
    params = problem.params if params is None else params
    mp = MuProblem(problem, discretized)
    size = mp.system.size
    trace = IterationTrace()

    if size == 1:
        mu = np.ones(1)
        costs, value = mp.costs(mu)
        trace.records.append(IterationRecord(0, mu, value, np.zeros(1), costs, 0.0, 0.0))
        trace.converged = True
        trace.notes.append("single plant: the simplex is a point")
        return mu, trace
    if not np.any(mp.x0):
        mu = np.full(size, 1.0 / size)
        trace.records.append(IterationRecord(0, mu, 0.0, np.zeros(size), np.zeros(size), 0.0, 0.0))
        trace.converged = True
        trace.notes.append("x0 = 0: objective identically zero, every weight vector is optimal")
        return mu, trace

    mu = np.full(size, 1.0 / size) if params.mu_init is None else np.array(params.mu_init, dtype=float)
    costs, value = mp.costs(mu)
    residuals = slackness_residuals(mu, costs, _reference_max(costs, value, params))
    trace.records.append(IterationRecord(0, mu, value, residuals, costs, 0.0, 0.0))
    if residuals.max() < params.epsilon_stop:
        trace.converged = True
        return mu, trace

    gamma0 = params.gamma0
    step_scale = 1.0
    for j in range(1, params.max_iter + 1):
        beta_j = params.beta0 / (1.0 + j) ** params.beta_decay
        Y, beta_used = _kw(mp.f, mu, beta_j)
        if gamma0 is None:
            # scale-free: the first step moves mu by at most 0.1 whatever the cost magnitude
            gamma0 = 0.1 / max(float(np.linalg.norm(Y)), np.finfo(float).tiny)
            log.debug("auto step scale gamma0=%g", gamma0)
        gamma_j = step_scale * gamma0 / (1.0 + j) ** params.gamma_decay
        candidate = project_simplex(mu - gamma_j * Y)
        new_costs, new_value = mp.costs(candidate)
        if params.slackness_reference == "previous":
            new_residuals = slackness_residuals(candidate, costs, _reference_max(costs, value, params))
        else:
            new_residuals = slackness_residuals(candidate, new_costs, _reference_max(new_costs, new_value, params))
        if new_value < value - MONOTONE_SLACK * max(1.0, abs(value)):
            trace.monotonicity_failures.append(j)
            step_scale *= 0.5
            trace.records.append(
                IterationRecord(j, candidate, new_value, new_residuals, new_costs, gamma_j, beta_used, accepted=False)
            )
            log.debug("iteration %d decreased the objective; step scale now %g", j, step_scale)
            continue
        residuals = new_residuals
        mu, costs, value = candidate, new_costs, new_value
        trace.records.append(IterationRecord(j, mu, value, residuals, costs, gamma_j, beta_used))
        if residuals.max() < params.epsilon_stop:
            trace.converged = True
            log.info("converged after %d iterations, mu=%s", j, mu)
            break
    else:
        log.warning("no convergence within %d iterations (max residual %g)", params.max_iter, residuals.max())
    return mu, trace
