"""Weighted extended system and its backward Riccati recursion.

All plants are stacked into one block-diagonal system sharing the input.
Only the cost blocks depend on the weight vector ``mu``: plant ``a``'s state
and terminal weights are scaled by ``mu[a]`` and the input weight is the
``mu``-weighted sum of the per-plant input weights.  The value
``1/2 x0' P_0(mu) x0`` of the stacked LQ problem is the quantity maximized
over the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from ._errors import NotPositiveDefiniteError
from .discretize import DiscretizedPlant, discretize_problem
from .model import MultiModelProblem

__all__ = [
    "NotPositiveDefiniteError",
    "ExtendedMatrices",
    "ExtendedSystem",
    "RiccatiSolution",
    "check_simplex",
    "extend",
    "backward_riccati",
    "objective",
]

SIMPLEX_TOL = 1e-12


def check_simplex(mu, size: int | None = None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``mu`` as a float array, raising ``ValueError`` off the simplex."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or (size is not None and mu.shape[0] != size):
        raise ValueError(f"weight vector must have length {size}, got shape {mu.shape}")
    if not np.all(np.isfinite(mu)) or np.any(mu < 0) or abs(mu.sum() - 1.0) > tol:
        raise ValueError(f"weight vector {mu} is not in the simplex")
    return mu


@dataclass(frozen=True, eq=False)
class ExtendedMatrices:
    """Stacked matrices for one ``mu``; arrays are indexed ``[k, :, :]``."""

    mu: np.ndarray
    G: np.ndarray
    Pi: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray
    Gamma: np.ndarray

    @property
    def N(self) -> int:
        return self.Phi.shape[0]

    @property
    def m(self) -> int:
        return self.Gamma.shape[2]


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """``P[k]`` for ``k = 0..N`` and gains ``K[k]`` with ``v_k = -K[k] @ x_k``."""

    mu: np.ndarray
    P: np.ndarray
    K: np.ndarray

    def violations(self, tol: float = 1e-9) -> list[str]:
        out = []
        for k, P in enumerate(self.P):
            scale = max(np.linalg.norm(P, 2), 1e-300)
            if np.max(np.abs(P - P.T)) > 1e-10 * scale:
                out.append(f"P[{k}] not symmetric")
            if np.linalg.eigvalsh(P).min() < -tol * scale:
                out.append(f"P[{k}] not positive semidefinite")
        return out


class ExtendedSystem:
    """The stacked plants with the ``mu``-independent pieces precomputed.

    Weight vectors passed to :meth:`extend` and :meth:`value` are not
    required to lie on the simplex; finite-difference gradients evaluate
    slightly outside it.
    """

    def __init__(self, discretized: Sequence[DiscretizedPlant]):
        if not discretized:
            raise ValueError("need at least one plant")
        first = discretized[0]
        N, n, m = first.N, first.n, first.m
        for p in discretized:
            if (p.N, p.n, p.m) != (N, n, m):
                raise ValueError(f"plant {p.label} has dimensions {(p.N, p.n, p.m)}, expected {(N, n, m)}")
        self.plants = tuple(discretized)
        self.size = len(discretized)
        self.N, self.n, self.m = N, n, m
        ne = n * self.size
        self.Phi = np.zeros((N, ne, ne))
        self.Gamma = np.zeros((N, ne, m))
        self._Pi = np.zeros((N, ne, ne))
        self._Theta = np.zeros((N, m, ne))
        self._G = np.zeros((ne, ne))
        for a, p in enumerate(discretized):
            sl = slice(a * n, (a + 1) * n)
            self.Phi[:, sl, sl] = p.Phi
            self.Gamma[:, sl, :] = p.Gamma
            self._Pi[:, sl, sl] = p.Pi
            self._Theta[:, :, sl] = p.Theta
            self._G[sl, sl] = p.G
        self._Psi = np.stack([p.Psi for p in discretized])
        for arr in (self.Phi, self.Gamma):
            arr.setflags(write=False)

    def stack_state(self, x0) -> np.ndarray:
        """The initial state repeated once per plant."""
        return np.tile(np.asarray(x0, dtype=float), self.size)

    def extend(self, mu) -> ExtendedMatrices:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.size,):
            raise ValueError(f"weight vector must have length {self.size}, got shape {mu.shape}")
        scale = np.repeat(mu, self.n)
        return ExtendedMatrices(
            mu=mu,
            G=scale[:, None] * self._G,
            Pi=scale[None, :, None] * self._Pi,
            Theta=self._Theta * scale[None, None, :],
            Psi=np.einsum("a,akij->kij", mu, self._Psi),
            Phi=self.Phi,
            Gamma=self.Gamma,
        )

    def value(self, mu, x0) -> float:
        """``1/2 x0' P_0(mu) x0`` without storing the recursion."""
        ext = self.extend(mu)
        return kernels.riccati_value(ext.Phi, ext.Gamma, ext.Pi, ext.Theta, ext.Psi, ext.G, self.stack_state(x0))

    def solve(self, mu) -> RiccatiSolution:
        return backward_riccati(self.extend(mu))


def extend(discretized: Sequence[DiscretizedPlant], mu) -> ExtendedMatrices:
    """Extended matrices for the weight vector ``mu``."""
    return ExtendedSystem(discretized).extend(mu)


def backward_riccati(ext: ExtendedMatrices, N: int | None = None) -> RiccatiSolution:
    """Run the recursion from ``P_N = G(mu)`` down to ``P_0``.

    Raises :class:`NotPositiveDefiniteError` when ``Psi + Gamma' P Gamma``
    cannot be Cholesky-factored.
    """
    if N is not None and N != ext.N:
        raise ValueError(f"N={N} does not match the extended matrices ({ext.N} intervals)")
    P, K = kernels.riccati_sweep(ext.Phi, ext.Gamma, ext.Pi, ext.Theta, ext.Psi, ext.G)
    return RiccatiSolution(ext.mu, P, K)


def objective(problem: MultiModelProblem, mu, discretized: Sequence[DiscretizedPlant] | None = None) -> float:
    """``1/2 x0' P_0(mu) x0`` with ``x0`` stacked once per plant."""
    if discretized is None:
        discretized = discretize_problem(problem)
    return ExtendedSystem(discretized).value(mu, problem.x0)

