# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Riccati sweep, closed-loop rollout and discrete cost.

Same signatures and semantics as ``_pykernels``; dense loops over small
matrices (n * plants <= ~10, m <= ~3) where numpy call overhead dominates.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

from ._errors import NotPositiveDefiniteError

cnp.import_array()


cdef int _cholesky(double[:, ::1] S, int m) noexcept nogil:
    """In-place lower Cholesky factor; returns 0 on failure."""
    cdef int i, j, p
    cdef double s
    for j in range(m):
        s = S[j, j]
        for p in range(j):
            s -= S[j, p] * S[j, p]
        if not (s > 0.0):
            return 0
        S[j, j] = sqrt(s)
        for i in range(j + 1, m):
            s = S[i, j]
            for p in range(j):
                s -= S[i, p] * S[j, p]
            S[i, j] = s / S[j, j]
    return 1


cdef void _cho_solve(double[:, ::1] Lc, double[:, ::1] B, int m, int ncol) noexcept nogil:
    """Overwrite B (m x ncol) with (Lc Lc')^{-1} B."""
    cdef int i, p, c
    cdef double s
    for c in range(ncol):
        for i in range(m):
            s = B[i, c]
            for p in range(i):
                s -= Lc[i, p] * B[p, c]
            B[i, c] = s / Lc[i, i]
        for i in range(m - 1, -1, -1):
            s = B[i, c]
            for p in range(i + 1, m):
                s -= Lc[p, i] * B[p, c]
            B[i, c] = s / Lc[i, i]


cdef int _step(const double[:, ::1] Phi, const double[:, ::1] Gamma,
               const double[:, ::1] Pi, const double[:, ::1] Theta,
               const double[:, ::1] Psi, const double[:, ::1] P,
               double[:, ::1] Pout, double[:, ::1] K,
               double[:, ::1] GP, double[:, ::1] S, double[:, ::1] PPhi,
               int ne, int m) noexcept nogil:
    cdef int i, j, p
    cdef double s
    # GP = Gamma' P   (m x ne)
    for i in range(m):
        for j in range(ne):
            s = 0.0
            for p in range(ne):
                s += Gamma[p, i] * P[p, j]
            GP[i, j] = s
    # S = Psi + GP Gamma   (m x m)
    for i in range(m):
        for j in range(m):
            s = Psi[i, j]
            for p in range(ne):
                s += GP[i, p] * Gamma[p, j]
            S[i, j] = s
    # K <- L = Theta + GP Phi   (m x ne)
    for i in range(m):
        for j in range(ne):
            s = Theta[i, j]
            for p in range(ne):
                s += GP[i, p] * Phi[p, j]
            K[i, j] = s
    # PPhi = P Phi
    for i in range(ne):
        for j in range(ne):
            s = 0.0
            for p in range(ne):
                s += P[i, p] * Phi[p, j]
            PPhi[i, j] = s
    # Pout = Pi + Phi' P Phi; the L' S^{-1} L term is subtracted below
    for i in range(ne):
        for j in range(ne):
            s = Pi[i, j]
            for p in range(ne):
                s += Phi[p, i] * PPhi[p, j]
            Pout[i, j] = s
    # GP is free again: keep L there while K becomes S^{-1} L
    for i in range(m):
        for j in range(ne):
            GP[i, j] = K[i, j]
    if not _cholesky(S, m):
        return 0
    _cho_solve(S, K, m, ne)
    for i in range(ne):
        for j in range(ne):
            s = 0.0
            for p in range(m):
                s += GP[p, i] * K[p, j]
            Pout[i, j] -= s
    for i in range(ne):
        for j in range(i + 1, ne):
            s = 0.5 * (Pout[i, j] + Pout[j, i])
            Pout[i, j] = s
            Pout[j, i] = s
    return 1


def riccati_sweep(const double[:, :, ::1] Phi, const double[:, :, ::1] Gamma,
                  const double[:, :, ::1] Pi, const double[:, :, ::1] Theta,
                  const double[:, :, ::1] Psi, const double[:, ::1] PN):
    cdef int N = Gamma.shape[0], ne = Gamma.shape[1], m = Gamma.shape[2]
    cdef int k, ok
    P_arr = np.empty((N + 1, ne, ne))
    K_arr = np.empty((N, m, ne))
    cdef double[:, :, ::1] P = P_arr
    cdef double[:, :, ::1] K = K_arr
    cdef double[:, ::1] GP = np.empty((m, ne))
    cdef double[:, ::1] S = np.empty((m, m))
    cdef double[:, ::1] PPhi = np.empty((ne, ne))
    P[N, :, :] = PN
    for k in range(N - 1, -1, -1):
        with nogil:
            ok = _step(Phi[k], Gamma[k], Pi[k], Theta[k], Psi[k], P[k + 1], P[k], K[k],
                       GP, S, PPhi, ne, m)
        if not ok:
            raise NotPositiveDefiniteError(k)
    return P_arr, K_arr


def riccati_value(const double[:, :, ::1] Phi, const double[:, :, ::1] Gamma,
                  const double[:, :, ::1] Pi, const double[:, :, ::1] Theta,
                  const double[:, :, ::1] Psi, const double[:, ::1] PN,
                  const double[::1] x0):
    cdef int N = Gamma.shape[0], ne = Gamma.shape[1], m = Gamma.shape[2]
    cdef int k, i, j, ok
    cdef double[:, ::1] Pa = np.array(PN, dtype=np.float64)
    cdef double[:, ::1] Pb = np.empty((ne, ne))
    cdef double[:, ::1] K = np.empty((m, ne))
    cdef double[:, ::1] GP = np.empty((m, ne))
    cdef double[:, ::1] S = np.empty((m, m))
    cdef double[:, ::1] PPhi = np.empty((ne, ne))
    cdef double[:, ::1] tmp
    cdef double total = 0.0
    for k in range(N - 1, -1, -1):
        with nogil:
            ok = _step(Phi[k], Gamma[k], Pi[k], Theta[k], Psi[k], Pa, Pb, K, GP, S, PPhi, ne, m)
        if not ok:
            raise NotPositiveDefiniteError(k)
        tmp = Pa
        Pa = Pb
        Pb = tmp
    for i in range(ne):
        for j in range(ne):
            total += x0[i] * Pa[i, j] * x0[j]
    return 0.5 * total


def rollout(const double[:, :, ::1] Phi, const double[:, :, ::1] Gamma,
            const double[:, :, ::1] K, const double[::1] x0):
    cdef int N = Gamma.shape[0], ne = Gamma.shape[1], m = Gamma.shape[2]
    cdef int k, i, p
    cdef double s
    X_arr = np.empty((N + 1, ne))
    V_arr = np.empty((N, m))
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] V = V_arr
    X[0, :] = x0
    with nogil:
        for k in range(N):
            for i in range(m):
                s = 0.0
                for p in range(ne):
                    s -= K[k, i, p] * X[k, p]
                V[k, i] = s
            for i in range(ne):
                s = 0.0
                for p in range(ne):
                    s += Phi[k, i, p] * X[k, p]
                for p in range(m):
                    s += Gamma[k, i, p] * V[k, p]
                X[k + 1, i] = s
    return X_arr, V_arr


def quadratic_cost(const double[:, :, ::1] Phi, const double[:, :, ::1] Gamma,
                   const double[:, :, ::1] Pi, const double[:, :, ::1] Theta,
                   const double[:, :, ::1] Psi, const double[:, ::1] G,
                   const double[::1] x0, const double[:, ::1] V):
    cdef int N = Gamma.shape[0], n = Gamma.shape[1], m = Gamma.shape[2]
    cdef int k, i, j
    cdef int cur = 0
    cdef double total = 0.0, s
    cdef double[:, ::1] xs = np.empty((2, n))
    xs[0, :] = x0
    with nogil:
        for k in range(N):
            for i in range(n):
                for j in range(n):
                    total += xs[cur, i] * Pi[k, i, j] * xs[cur, j]
            for i in range(m):
                for j in range(n):
                    total += 2.0 * V[k, i] * Theta[k, i, j] * xs[cur, j]
                for j in range(m):
                    total += V[k, i] * Psi[k, i, j] * V[k, j]
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s += Phi[k, i, j] * xs[cur, j]
                for j in range(m):
                    s += Gamma[k, i, j] * V[k, j]
                xs[1 - cur, i] = s
            cur = 1 - cur
        for i in range(n):
            for j in range(n):
                total += xs[cur, i] * G[i, j] * xs[cur, j]
    return 0.5 * total
