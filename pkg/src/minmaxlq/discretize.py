"""Exact sampled-data matrices for piecewise-constant inputs.

For a plant ``dx/dt = A x + B u`` held at ``u = v`` over an interval of
length ``dt`` we need

* ``Phi = exp(A dt)`` and ``Gamma = int_0^dt exp(A s) B ds``,
* the cost weights ``Pi``, ``Theta``, ``Psi`` such that
  ``int_0^dt x'Qx + v'Rv = x_k'Pi x_k + 2 x_k'Theta'v + v'Psi v``.

All of them are blocks of one augmented quantity: with
``F = [[A, B], [0, 0]]`` and ``W = diag(Q, R)``, ``expm(F t)`` holds
``[[Phi(t), Gamma(t)], [0, I]]`` and ``int_0^dt expm(F t)' W expm(F t) dt``
holds ``[[Pi, Theta'], [Theta, Psi]]``.  The default route evaluates that
integral with a Van Loan block exponential over a short step and doubles
it up to ``dt``; the doubling avoids the catastrophic cancellation a
single Van Loan exponential suffers on long intervals of fast plants.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import yaml

from .model import MultiModelProblem

log = logging.getLogger(__name__)

# largest |F|_1 * h used for the base Van Loan step
_VANLOAN_STEP_NORM = 0.5
_GL_ORDER = 8
_MAX_PANELS = 4096


class DiscretizationError(ArithmeticError):
    """Raised when a transition matrix overflows or quadrature fails."""


def _expm(M: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        try:
            E = scipy.linalg.expm(M)
        except (RuntimeWarning, OverflowError, ValueError) as exc:
            raise DiscretizationError(f"matrix exponential failed: {exc}") from None
    if not np.all(np.isfinite(E)):
        raise DiscretizationError("matrix exponential overflowed (|A| dt too large)")
    return E


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"interval length must be positive and finite, got {dt}")
    return dt


def _augmented(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    F = np.zeros((n + m, n + m))
    F[:n, :n] = A
    F[:n, n:] = B
    return F


def transition_matrix(A, dt: float) -> np.ndarray:
    """``exp(A dt)``."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("A must be finite")
    return _expm(A * _check_dt(dt))


def input_matrix(A, B, dt: float) -> np.ndarray:
    """``int_0^dt exp(A s) B ds``, read off the augmented exponential."""
    dt = _check_dt(dt)
    n = np.asarray(A).shape[0]
    return _expm(_augmented(A, B) * dt)[:n, n:]


def _vanloan_interval(F: np.ndarray, W: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(expm(F dt), int_0^dt expm(F t)' W expm(F t) dt)``."""
    size = F.shape[0]
    norm = np.linalg.norm(F, 1) * dt
    squarings = max(0, int(np.ceil(np.log2(norm / _VANLOAN_STEP_NORM)))) if norm > 0 else 0
    h = dt / 2.0**squarings
    M = np.zeros((2 * size, 2 * size))
    M[:size, :size] = -F.T
    M[:size, size:] = W
    M[size:, size:] = F
    E = _expm(M * h)
    Fd = E[size:, size:]
    S = Fd.T @ E[:size, size:]
    S = 0.5 * (S + S.T)
    # int_0^{2h} = int_0^h + expm(F h)' (int_0^h) expm(F h)
    for _ in range(squarings):
        S = S + Fd.T @ S @ Fd
        Fd = Fd @ Fd
    if not (np.all(np.isfinite(Fd)) and np.all(np.isfinite(S))):
        raise DiscretizationError("sampled-data matrices overflowed")
    return Fd, 0.5 * (S + S.T)


def _quadrature_interval(F: np.ndarray, W: np.ndarray, dt: float, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Same integral by adaptive composite Gauss-Legendre on the matrix integrand."""
    nodes, wts = np.polynomial.legendre.leggauss(_GL_ORDER)

    def panel(Ea: np.ndarray, length: float) -> np.ndarray:
        total = np.zeros_like(W)
        for s, w in zip(nodes, wts):
            E = _expm(F * (0.5 * length * (s + 1.0))) @ Ea
            total += w * (E.T @ W @ E)
        return 0.5 * length * total

    whole = panel(np.eye(F.shape[0]), dt)
    scale = max(np.linalg.norm(whole), np.finfo(float).tiny)
    stack = [(0.0, dt, whole)]
    result = np.zeros_like(W)
    panels = 0
    while stack:
        a, b, coarse = stack.pop()
        mid = 0.5 * (a + b)
        Ea = _expm(F * a)
        Em = _expm(F * mid)
        left, right = panel(Ea, mid - a), panel(Em, b - mid)
        fine = left + right
        panels += 2
        if np.linalg.norm(fine - coarse) <= tol * scale * (b - a) / dt:
            result += fine
        elif panels > _MAX_PANELS:
            raise DiscretizationError(f"quadrature did not reach relative tolerance {tol:g} within {_MAX_PANELS} panels")
        else:
            stack.append((a, mid, left))
            stack.append((mid, b, right))
    return _expm(F * dt), 0.5 * (result + result.T)


def _weight(Q, R):
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    n, m = Q.shape[0], R.shape[0]
    W = np.zeros((n + m, n + m))
    W[:n, :n] = Q
    W[n:, n:] = R
    return W


def interval_matrices(A, B, Q, R, dt: float, method: str = "vanloan", quad_tol: float = 1e-10):
    """``(Phi, Gamma, Pi, Theta, Psi)`` for one plant over one interval."""
    dt = _check_dt(dt)
    n = np.asarray(A).shape[0]
    F, W = _augmented(A, B), _weight(Q, R)
    if method == "vanloan":
        Fd, S = _vanloan_interval(F, W, dt)
    elif method == "quadrature":
        Fd, S = _quadrature_interval(F, W, dt, quad_tol)
    else:
        raise ValueError(f"unknown discretization method {method!r}")
    return Fd[:n, :n], Fd[:n, n:], S[:n, :n], S[n:, :n], S[n:, n:]


def cost_weights(A, B, Q, R, dt: float, method: str = "vanloan", quad_tol: float = 1e-10):
    """``(Pi, Theta, Psi)``: the interval cost as a quadratic form in ``(x_k, v_k)``."""
    return interval_matrices(A, B, Q, R, dt, method, quad_tol)[2:]


@dataclass(frozen=True, eq=False)
class DiscretizedPlant:
    """Per-interval matrices of one plant; arrays are indexed ``[k, :, :]``."""

    label: str
    times: np.ndarray
    G: np.ndarray
    Phi: np.ndarray
    Gamma: np.ndarray
    Pi: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray
    A: np.ndarray | None = None
    B: np.ndarray | None = None

    def __post_init__(self):
        for name in ("times", "G", "Phi", "Gamma", "Pi", "Theta", "Psi", "A", "B"):
            if getattr(self, name) is None:
                continue
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.Phi.shape[0]

    @property
    def n(self) -> int:
        return self.Phi.shape[1]

    @property
    def m(self) -> int:
        return self.Gamma.shape[2]

    def invariant_violations(self, R: np.ndarray) -> list[str]:
        out = []
        eps_R = float(np.linalg.eigvalsh(R).min())
        for k, dt in enumerate(np.diff(self.times)):
            Pi, Psi = self.Pi[k], self.Psi[k]
            if np.linalg.eigvalsh(Pi).min() < -1e-9 * max(np.linalg.norm(Pi, 2), 1e-300):
                out.append(f"plant {self.label}, interval {k}: Pi not positive semidefinite")
            if np.linalg.eigvalsh(Psi).min() < eps_R * dt * (1 - 1e-6):
                out.append(f"plant {self.label}, interval {k}: Psi below dt * eps_R")
        return out


def discretize_plant(label, A, B, G, Q, R, times, method: str = "vanloan", quad_tol: float = 1e-10) -> DiscretizedPlant:
    mats = [interval_matrices(A, B, Q, R, dt, method, quad_tol) for dt in np.diff(times)]
    Phi, Gamma, Pi, Theta, Psi = (np.array(x) for x in zip(*mats))
    return DiscretizedPlant(str(label), times, G, Phi, Gamma, Pi, Theta, Psi, A, B)


def discretize_problem(problem: MultiModelProblem, method: str = "vanloan") -> list[DiscretizedPlant]:
    """One :class:`DiscretizedPlant` per plant, on the problem's switching sequence."""
    G, Q, R = problem.weights()
    times = problem.delta.times
    plants = [
        discretize_plant(p.label, p.A, p.B, G, Q, R, times, method, problem.params.quad_tol)
        for p in problem.plants
    ]
    log.debug("discretized %d plants over %d intervals", len(plants), problem.N)
    return plants


def dump_discretization(plants: list[DiscretizedPlant]) -> str:
    """YAML dump of every per-interval matrix, full precision."""
    doc = []
    for p in plants:
        intervals = []
        for k in range(p.N):
            intervals.append(
                {
                    "k": k,
                    "t": [float(p.times[k]), float(p.times[k + 1])],
                    "Phi": p.Phi[k].tolist(),
                    "Gamma": p.Gamma[k].tolist(),
                    "Pi": p.Pi[k].tolist(),
                    "Theta": p.Theta[k].tolist(),
                    "Psi": p.Psi[k].tolist(),
                }
            )
        doc.append({"label": p.label, "intervals": intervals})
    return yaml.safe_dump({"plants": doc}, sort_keys=False, default_flow_style=None, width=120)
