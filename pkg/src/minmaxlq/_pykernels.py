"""Reference numpy implementation of the hot loops (fallback for ``_ckernels``)."""

import numpy as np
import scipy.linalg

from ._errors import NotPositiveDefiniteError


def _step(Phi, Gamma, Pi, Theta, Psi, P, k):
    GP = Gamma.T @ P
    S = Psi + GP @ Gamma
    L = Theta + GP @ Phi
    try:
        c = scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(k) from None
    K = scipy.linalg.cho_solve(c, L, check_finite=False)
    P = Pi + Phi.T @ P @ Phi - L.T @ K
    return 0.5 * (P + P.T), K


def riccati_sweep(Phi, Gamma, Pi, Theta, Psi, PN):
    N, ne, m = Gamma.shape
    P = np.empty((N + 1, ne, ne))
    K = np.empty((N, m, ne))
    P[N] = PN
    for k in range(N - 1, -1, -1):
        P[k], K[k] = _step(Phi[k], Gamma[k], Pi[k], Theta[k], Psi[k], P[k + 1], k)
    return P, K


def riccati_value(Phi, Gamma, Pi, Theta, Psi, PN, x0):
    P = np.asarray(PN)
    for k in range(Gamma.shape[0] - 1, -1, -1):
        P, _ = _step(Phi[k], Gamma[k], Pi[k], Theta[k], Psi[k], P, k)
    return 0.5 * float(x0 @ P @ x0)


def rollout(Phi, Gamma, K, x0):
    N, ne, m = Gamma.shape
    X = np.empty((N + 1, ne))
    V = np.empty((N, m))
    X[0] = x0
    for k in range(N):
        V[k] = -K[k] @ X[k]
        X[k + 1] = Phi[k] @ X[k] + Gamma[k] @ V[k]
    return X, V


def quadratic_cost(Phi, Gamma, Pi, Theta, Psi, G, x0, V):
    x = np.array(x0, dtype=float)
    total = 0.0
    for k in range(Phi.shape[0]):
        v = V[k]
        total += x @ Pi[k] @ x + 2.0 * (x @ Theta[k].T @ v) + v @ Psi[k] @ v
        x = Phi[k] @ x + Gamma[k] @ v
    total += x @ G @ x
    return 0.5 * float(total)
