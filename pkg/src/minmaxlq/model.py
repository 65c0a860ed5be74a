"""Problem definition, validation and (de)serialization.

A problem file is a YAML document::

    n: 2
    m: 1
    plants:
      - {label: "1", A: [[0, 1], [-1, -1]], B: [[0], [1]]}
    cost: {G: [[5, 0], [0, 5]], Q: [[50, 0], [0, 10]], R: [[10]]}
    x0: [3, -2]
    times: [0, 0.82, ..., 10]
    solver: {epsilon_stop: 2.0e-5, max_iter: 5000, cost_convention: half_integral}

The last entry of ``times`` is the final time of the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

COST_CONVENTIONS = ("half_integral", "full_integral")
SLACKNESS_REFERENCES = ("current", "previous")
COST_MODES = ("simulate", "riccati")

# relative symmetry tolerance for G, Q, R
SYM_RTOL = 1e-10
# intervals shorter than this fraction of the horizon are rejected
MIN_INTERVAL_FRACTION = 1e-12


class ProblemError(ValueError):
    """Base class for problem-file errors."""


class ProblemFormatError(ProblemError):
    """The document could not be parsed or has the wrong shape."""


class ProblemValidationError(ProblemError):
    """The problem violates one or more invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _frozen_array(value, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ProblemFormatError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PlantModel:
    """One candidate plant ``dx/dt = A x + B u``."""

    label: str
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "label", str(self.label))
        object.__setattr__(self, "A", _frozen_array(self.A, 2, f"plant {self.label} A"))
        object.__setattr__(self, "B", _frozen_array(self.B, 2, f"plant {self.label} B"))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class CostSpec:
    G: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("G", "Q", "R"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), 2, name))


@dataclass(frozen=True, eq=False)
class SwitchingSequence:
    """Switching instants ``t_0 < ... < t_{N-1}`` followed by the final time ``t_N``."""

    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen_array(self.times, 1, "times"))

    @property
    def N(self) -> int:
        return len(self.times) - 1

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.times)

    def tail(self, k: int) -> "SwitchingSequence":
        """Sequence starting at ``t_k`` (used for shrinking horizons)."""
        return SwitchingSequence(self.times[k:])


@dataclass(frozen=True, eq=False)
class SolverParams:
    """Parameters of the projected Kiefer-Wolfowitz iteration and discretization.

    ``gamma0=None`` means the step scale is picked from the first gradient
    estimate as ``0.1 / |Y_1|``.  Step sizes follow
    ``gamma0 / (1 + j) ** gamma_decay`` and perturbations
    ``beta0 / (1 + j) ** beta_decay``.
    """

    epsilon_stop: float = 1e-4
    gamma0: float | None = None
    beta0: float = 1e-4
    max_iter: int = 5000
    mu_init: np.ndarray | None = None
    quad_tol: float = 1e-10
    cost_convention: str = "half_integral"
    gamma_decay: float = 0.0
    beta_decay: float = 1.0 / 3.0
    slackness_reference: str = "current"
    cost_mode: str = "simulate"

    def __post_init__(self):
        if self.mu_init is not None:
            object.__setattr__(self, "mu_init", _frozen_array(self.mu_init, 1, "mu_init"))

    def violations(self) -> list[str]:
        out = []
        for name in ("epsilon_stop", "beta0", "quad_tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                out.append(f"solver.{name} must be a positive finite number")
        if self.gamma0 is not None and not (math.isfinite(self.gamma0) and self.gamma0 > 0):
            out.append("solver.gamma0 must be a positive finite number")
        for name in ("gamma_decay", "beta_decay"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                out.append(f"solver.{name} must be non-negative")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            out.append("solver.max_iter must be an integer >= 1")
        if self.cost_convention not in COST_CONVENTIONS:
            out.append(f"solver.cost_convention must be one of {COST_CONVENTIONS}")
        if self.slackness_reference not in SLACKNESS_REFERENCES:
            out.append(f"solver.slackness_reference must be one of {SLACKNESS_REFERENCES}")
        if self.cost_mode not in COST_MODES:
            out.append(f"solver.cost_mode must be one of {COST_MODES}")
        return out


@dataclass(frozen=True, eq=False)
class MultiModelProblem:
    plants: tuple[PlantModel, ...]
    cost: CostSpec
    x0: np.ndarray
    delta: SwitchingSequence
    params: SolverParams = field(default_factory=SolverParams)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "plants", tuple(self.plants))
        object.__setattr__(self, "x0", _frozen_array(self.x0, 1, "x0"))

    @property
    def n(self) -> int:
        return self.plants[0].n

    @property
    def m(self) -> int:
        return self.plants[0].m

    @property
    def N(self) -> int:
        return self.delta.N

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.plants]

    def plant_index(self, label) -> int:
        label = str(label)
        for i, plant in enumerate(self.plants):
            if plant.label == label:
                return i
        raise KeyError(f"no plant labelled {label!r}; known labels: {self.labels}")

    def weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(G, Q, R)`` expressed for a cost ``1/2 x'Gx + 1/2 int(x'Qx + u'Ru)``.

        The ``full_integral`` convention drops the 1/2 in front of the
        integral, which is the same as doubling Q and R.
        """
        G, Q, R = self.cost.G, self.cost.Q, self.cost.R
        if self.params.cost_convention == "full_integral":
            return G, 2.0 * Q, 2.0 * R
        return G, Q, R

    def with_params(self, **changes) -> "MultiModelProblem":
        return replace(self, params=replace(self.params, **changes))

    def subproblem(self, plants: Sequence[int] | None = None, x0=None, start: int = 0) -> "MultiModelProblem":
        """Problem restricted to some plants, a new initial state and/or a horizon tail."""
        chosen = self.plants if plants is None else tuple(self.plants[i] for i in plants)
        return replace(
            self,
            plants=chosen,
            x0=self.x0 if x0 is None else x0,
            delta=self.delta.tail(start) if start else self.delta,
            params=replace(self.params, mu_init=None),
        )


def _asymmetry(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - M.T))) if M.size else 0.0


def _sym_tol(M: np.ndarray) -> float:
    return SYM_RTOL * max(float(np.linalg.norm(M, 2)), 1e-300)


def validate(problem: MultiModelProblem) -> list[str]:
    """Return every violated invariant of ``problem`` (empty when valid)."""
    out: list[str] = []
    if len(problem.plants) < 1:
        return ["problem needs at least one plant"]
    n, m = problem.n, problem.m
    if n < 1 or m < 1:
        out.append("state and input dimensions must be >= 1")
    labels = problem.labels
    if len(set(labels)) != len(labels):
        out.append("plant labels are not unique")
    for plant in problem.plants:
        if plant.A.shape != (n, n):
            out.append(f"plant {plant.label}: A has shape {plant.A.shape}, expected {(n, n)}")
        if plant.B.shape != (n, m):
            out.append(f"plant {plant.label}: B has shape {plant.B.shape}, expected {(n, m)}")
        if not (np.all(np.isfinite(plant.A)) and np.all(np.isfinite(plant.B))):
            out.append(f"plant {plant.label}: A and B must be finite")

    expected = {"G": (n, n), "Q": (n, n), "R": (m, m)}
    for name, shape in expected.items():
        M = getattr(problem.cost, name)
        if M.shape != shape:
            out.append(f"{name} has shape {M.shape}, expected {shape}")
            continue
        if not np.all(np.isfinite(M)):
            out.append(f"{name} must be finite")
            continue
        tol = _sym_tol(M)
        if _asymmetry(M) > tol:
            out.append(f"{name} not symmetric")
            continue
        lam_min = float(np.linalg.eigvalsh((M + M.T) / 2).min())
        if name == "R":
            if lam_min <= 0:
                out.append("R not positive definite")
        elif lam_min < -tol:
            out.append(f"{name} not positive semidefinite (min eigenvalue {lam_min:.6g})")

    if problem.x0.shape != (n,):
        out.append(f"x0 has length {problem.x0.shape[0]}, expected {n}")
    elif not np.all(np.isfinite(problem.x0)):
        out.append("x0 must be finite")

    times = problem.delta.times
    if len(times) < 2:
        out.append("times needs at least two entries (t0 and tN)")
    elif not np.all(np.isfinite(times)):
        out.append("times must be finite")
    else:
        dt = np.diff(times)
        if np.any(dt <= 0):
            out.append("delta not strictly increasing")
        elif np.any(dt < MIN_INTERVAL_FRACTION * (times[-1] - times[0])):
            out.append("delta has a degenerate (numerically empty) interval")

    out.extend(problem.params.violations())
    mu = problem.params.mu_init
    if mu is not None:
        if mu.shape != (len(problem.plants),):
            out.append("solver.mu_init length must equal the number of plants")
        elif np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
            out.append("solver.mu_init must lie in the simplex")
    return out


def ensure_valid(problem: MultiModelProblem) -> MultiModelProblem:
    violations = validate(problem)
    if violations:
        raise ProblemValidationError(violations)
    return problem


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_SOLVER_KEYS = {f.name for f in fields(SolverParams)}


def _matrix(doc: dict, key: str, where: str) -> np.ndarray:
    try:
        value = doc[key]
    except (KeyError, TypeError):
        raise ProblemFormatError(f"{where}: missing field {key!r}") from None
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{where}.{key}: not a numeric matrix ({exc})") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ProblemFormatError(f"{where}.{key}: expected a row-major list of rows")
    return arr


def _symmetrized(M: np.ndarray) -> np.ndarray:
    if M.ndim == 2 and M.shape[0] == M.shape[1] and 0 < _asymmetry(M) <= _sym_tol(M):
        return (M + M.T) / 2
    return M


def problem_from_dict(doc: Any) -> MultiModelProblem:
    """Build a problem from a parsed document; shapes are checked, invariants are not."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be a mapping")
    for key in ("plants", "cost", "x0", "times"):
        if key not in doc:
            raise ProblemFormatError(f"missing field {key!r}")
    if not isinstance(doc["plants"], list) or not doc["plants"]:
        raise ProblemFormatError("plants must be a non-empty list")
    plants = []
    for i, entry in enumerate(doc["plants"]):
        if not isinstance(entry, dict):
            raise ProblemFormatError(f"plants[{i}] must be a mapping")
        label = entry.get("label", str(i + 1))
        plants.append(PlantModel(label, _matrix(entry, "A", f"plants[{i}]"), _matrix(entry, "B", f"plants[{i}]")))
    cost_doc = doc["cost"]
    if not isinstance(cost_doc, dict):
        raise ProblemFormatError("cost must be a mapping with G, Q, R")
    cost = CostSpec(*(_symmetrized(_matrix(cost_doc, k, "cost")) for k in ("G", "Q", "R")))

    solver_doc = doc.get("solver") or {}
    if not isinstance(solver_doc, dict):
        raise ProblemFormatError("solver must be a mapping")
    unknown = set(solver_doc) - _SOLVER_KEYS
    if unknown:
        raise ProblemFormatError(f"solver: unknown fields {sorted(unknown)}")
    try:
        kwargs = {}
        for key, value in solver_doc.items():
            if key in ("cost_convention", "slackness_reference", "cost_mode"):
                kwargs[key] = str(value)
            elif key == "max_iter":
                kwargs[key] = int(value)
            elif key == "mu_init":
                kwargs[key] = None if value is None else np.array(value, dtype=float)
            elif key == "gamma0" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = float(value)
        params = SolverParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"solver: {exc}") from None

    try:
        x0 = np.array(doc["x0"], dtype=float)
        times = np.array(doc["times"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"x0/times: {exc}") from None
    problem = MultiModelProblem(plants, cost, x0, SwitchingSequence(times), params, dict(doc.get("meta") or {}))

    for key in ("n", "m"):
        if key in doc and int(doc[key]) != getattr(problem, key):
            raise ProblemFormatError(f"declared {key}={doc[key]} does not match the matrices ({getattr(problem, key)})")
    return problem


def loads_problem(text: str) -> MultiModelProblem:
    """Parse and validate a problem document given as text."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ProblemFormatError(f"malformed document: {exc}") from None
    return ensure_valid(problem_from_dict(doc))


def load_problem(path: str | Path) -> MultiModelProblem:
    """Read, parse and validate a problem file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"problem file not found: {path}")
    return loads_problem(path.read_text())


def _tolist(arr: np.ndarray) -> list:
    return np.asarray(arr, dtype=float).tolist()


def problem_to_dict(problem: MultiModelProblem) -> dict:
    p = problem.params
    solver = {
        "epsilon_stop": p.epsilon_stop,
        "gamma0": p.gamma0,
        "beta0": p.beta0,
        "max_iter": int(p.max_iter),
        "quad_tol": p.quad_tol,
        "cost_convention": p.cost_convention,
        "gamma_decay": p.gamma_decay,
        "beta_decay": p.beta_decay,
        "slackness_reference": p.slackness_reference,
        "cost_mode": p.cost_mode,
    }
    if p.mu_init is not None:
        solver["mu_init"] = _tolist(p.mu_init)
    doc = {
        "n": problem.n,
        "m": problem.m,
        "plants": [{"label": pl.label, "A": _tolist(pl.A), "B": _tolist(pl.B)} for pl in problem.plants],
        "cost": {k: _tolist(getattr(problem.cost, k)) for k in ("G", "Q", "R")},
        "x0": _tolist(problem.x0),
        "times": _tolist(problem.delta.times),
        "solver": solver,
    }
    if problem.meta:
        doc["meta"] = dict(problem.meta)
    return doc


def dump_problem(problem: MultiModelProblem) -> str:
    """Serialize to YAML; floats are written with full round-trip precision."""
    return yaml.safe_dump(problem_to_dict(problem), sort_keys=False, default_flow_style=None, width=120)


def problems_equal(a: MultiModelProblem, b: MultiModelProblem) -> bool:
    return problem_to_dict(a) == problem_to_dict(b)


def shipped_problem_path(name: str) -> Path:
    """Path of a bundled problem file (``ex1``, ``ex2``)."""
    path = Path(__file__).parent / "problems" / f"{name}.prob"
    if not path.exists():
        raise FileNotFoundError(path)
    return path


def shipped_problems() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "problems").glob("*.prob"))
