"""Plant simulation under stepwise controls, cost evaluation and baselines."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .discretize import DiscretizedPlant, discretize_problem, input_matrix, transition_matrix
from .model import MultiModelProblem
from .riccati import ExtendedSystem

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States of one plant under a stepwise control.

    ``t``, ``x`` and ``u`` are the (optionally refined) samples; ``u[i]`` is
    the control level active at ``t[i]`` (the last level at the final time).
    ``x_switch`` holds the states at the switching instants only.
    """

    label: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    x_switch: np.ndarray

    def violations(self, plant: DiscretizedPlant, tol: float = 1e-10) -> list[str]:
        out = []
        for k in range(plant.N):
            predicted = plant.Phi[k] @ self.x_switch[k] + plant.Gamma[k] @ self.v[k]
            scale = max(1.0, np.abs(predicted).max())
            if np.abs(predicted - self.x_switch[k + 1]).max() > tol * scale:
                out.append(f"plant {self.label}: state at switch {k + 1} inconsistent")
        return out


def _as_controls(v, N: int, m: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1 and m == 1:
        v = v[:, None]
    if v.shape != (N, m):
        raise ValueError(f"control sequence must have shape {(N, m)}, got {v.shape}")
    return np.ascontiguousarray(v)


def simulate_plant(plant: DiscretizedPlant, v, x0, refine: int = 1) -> Trajectory:
    """Propagate ``x_{k+1} = Phi_k x_k + Gamma_k v_k``.

    With ``refine > 1`` every interval is also sampled at ``refine - 1``
    interior points using exact sub-step transition matrices.
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    V = _as_controls(v, plant.N, plant.m)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (plant.n,):
        raise ValueError(f"x0 must have length {plant.n}")
    X = np.empty((plant.N + 1, plant.n))
    X[0] = x0
    for k in range(plant.N):
        X[k + 1] = plant.Phi[k] @ X[k] + plant.Gamma[k] @ V[k]

    if refine == 1:
        t = plant.times.copy()
        xs = X.copy()
    else:
        if plant.A is None or plant.B is None:
            raise ValueError("refinement needs the continuous-time A and B on the plant")
        ts, states = [], []
        for k in range(plant.N):
            t0, t1 = plant.times[k], plant.times[k + 1]
            h = (t1 - t0) / refine
            Phi_h, Gamma_h = transition_matrix(plant.A, h), input_matrix(plant.A, plant.B, h)
            # restart from the switch state so sub-step round-off does not accumulate
            x = X[k]
            for j in range(refine):
                ts.append(t0 + j * h)
                states.append(x)
                x = Phi_h @ x + Gamma_h @ V[k]
        ts.append(plant.times[-1])
        states.append(X[-1])
        t, xs = np.array(ts), np.array(states)
    idx = np.clip(np.searchsorted(plant.times, t, side="right") - 1, 0, plant.N - 1)
    return Trajectory(plant.label, t, xs, V[idx], V, X)


def plant_cost(plant: DiscretizedPlant, v, x0) -> float:
    """Exact cost of one plant under a stepwise control (sampled-data identity)."""
    V = _as_controls(v, plant.N, plant.m)
    return kernels.quadratic_cost(
        plant.Phi, plant.Gamma, plant.Pi, plant.Theta, plant.Psi, plant.G, np.asarray(x0, dtype=float), V
    )


def plant_costs(discretized: Sequence[DiscretizedPlant], v, x0) -> np.ndarray:
    return np.array([plant_cost(p, v, x0) for p in discretized])


def evaluate_costs(problem: MultiModelProblem, v, discretized: Sequence[DiscretizedPlant] | None = None):
    """``(per_plant_costs, worst_case_cost)`` of the stepwise control ``v``."""
    if discretized is None:
        discretized = discretize_problem(problem)
    costs = plant_costs(discretized, v, problem.x0)
    return costs, float(costs.max())


def single_model_optimal(problem: MultiModelProblem, alpha, discretized: Sequence[DiscretizedPlant] | None = None):
    """Optimal stepwise control for plant ``alpha`` alone and its cost.

    ``alpha`` is a plant label (or an integer position when no label matches).
    """
    if discretized is None:
        discretized = discretize_problem(problem)
    try:
        idx = problem.plant_index(alpha)
    except KeyError:
        if isinstance(alpha, (int, np.integer)) and 0 <= alpha < len(problem.plants):
            idx = int(alpha)
        else:
            raise
    system = ExtendedSystem([discretized[idx]])
    sol = system.solve(np.ones(1))
    _, V = kernels.rollout(system.Phi, system.Gamma, sol.K, np.asarray(problem.x0, dtype=float))
    return V, plant_cost(discretized[idx], V, problem.x0)


@dataclass(frozen=True, eq=False)
class CrossCostTable:
    """``values[i, j]`` is the cost of plant ``j`` under plant ``i``'s own optimal control."""

    labels: list[str]
    values: np.ndarray

    def to_text(self) -> str:
        head = ["u \\ J"] + [f"J{lab}" for lab in self.labels]
        rows = [[f"u{lab}*"] + [f"{val:.6g}" for val in row] for lab, row in zip(self.labels, self.values)]
        widths = [max(len(r[c]) for r in [head] + rows) for c in range(len(head))]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in [head] + rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "values": self.values.tolist()}


def cross_cost_table(problem: MultiModelProblem, discretized: Sequence[DiscretizedPlant] | None = None) -> CrossCostTable:
    if discretized is None:
        discretized = discretize_problem(problem)
    rows = []
    for label in problem.labels:
        V, _ = single_model_optimal(problem, label, discretized)
        rows.append(plant_costs(discretized, V, problem.x0))
    return CrossCostTable(problem.labels, np.array(rows))


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    n, m = traj.x.shape[1], traj.u.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)])
        for t, x, u in zip(traj.t, traj.x, traj.u):
            writer.writerow([repr(float(t))] + [repr(float(a)) for a in x] + [repr(float(b)) for b in u])


# ---------------------------------------------------------------------------
# Receding horizon
# ---------------------------------------------------------------------------


class RecedingHorizonAborted(RuntimeError):
    """An inner min-max solve did not converge; ``partial`` holds the run so far."""

    def __init__(self, message: str, partial: "RecedingHorizonResult"):
        super().__init__(message)
        self.partial = partial


@dataclass
class RecedingHorizonResult:
    trajectory: Trajectory
    realized_cost: float
    solves: int
    mu_history: list = field(default_factory=list)


def receding_horizon(problem: MultiModelProblem, resolve_every: int, true_plant, refine: int = 1) -> RecedingHorizonResult:
    """Shrinking-horizon re-solve of the min-max problem, applied to one plant.

    At every re-solve instant ``t_k`` the min-max problem on ``[t_k, t_N]`` is
    solved from the measured state of ``true_plant``; its first
    ``resolve_every`` control levels are applied, then the horizon shrinks.
    """
    from .solver import solve_minmax

    if resolve_every < 1:
        raise ValueError("resolve_every must be >= 1")
    discretized = discretize_problem(problem)
    idx = problem.plant_index(true_plant)
    plant = discretized[idx]
    N = problem.N
    V = np.zeros((N, problem.m))
    x = np.array(problem.x0, dtype=float)
    k = 0
    solves = 0
    mus = []
    while k < N:
        sub = problem.subproblem(x0=x, start=k)
        sol = solve_minmax(sub)
        solves += 1
        mus.append((k, sol.mu_star.tolist()))
        stop = min(N, k + resolve_every)
        if not sol.converged:
            traj = simulate_plant(plant, V, problem.x0, refine)
            partial = RecedingHorizonResult(traj, float("nan"), solves, mus)
            raise RecedingHorizonAborted(f"inner solve at t={problem.delta.times[k]:g} did not converge", partial)
        V[k:stop] = sol.v[: stop - k]
        for j in range(k, stop):
            x = plant.Phi[j] @ x + plant.Gamma[j] @ V[j]
        log.info("receding horizon: applied intervals %d..%d, mu=%s", k, stop - 1, sol.mu_star)
        k = stop
    traj = simulate_plant(plant, V, problem.x0, refine)
    return RecedingHorizonResult(traj, plant_cost(plant, V, problem.x0), solves, mus)
