# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for weighted logistic fits on compressed binary data.

Rows are distinct feature vectors; ``pos[r]``/``neg[r]`` are how many times
row ``r`` was seen with label +1/-1.  The objective is

    (1/N) sum_r [pos_r log(1 + e^-z_r) + neg_r log(1 + e^z_r)] + lam/2 |w|^2

with ``z_r = phi_r . w + b`` and ``N = sum(pos + neg)``; the bias is not
penalized.  Mirrors ``_kernels_py`` operation for operation.
"""

import numpy as np

from libc.math cimport exp, log1p, sqrt, fabs


cdef inline double _log1pexp(double z) noexcept nogil:
    if z > 0.0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef double _objective(const double[:, ::1] phi, const double[::1] pos, const double[::1] neg,
                       double[::1] theta, double lam, double inv_n) noexcept nogil:
    cdef Py_ssize_t R = phi.shape[0], D = phi.shape[1], r, j
    cdef double z, total = 0.0, reg = 0.0
    for r in range(R):
        z = theta[D]
        for j in range(D):
            z += phi[r, j] * theta[j]
        total += pos[r] * _log1pexp(-z) + neg[r] * _log1pexp(z)
    for j in range(D):
        reg += theta[j] * theta[j]
    return total * inv_n + 0.5 * lam * reg


cdef int _cholesky_solve(double[:, ::1] A, double[::1] rhs, double[::1] out) noexcept nogil:
    """Solve A x = rhs in place (A overwritten by its factor).  Returns 0 on success."""
    cdef Py_ssize_t n = A.shape[0], i, j, k
    cdef double s
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            return 1
        A[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= A[i, k] * out[k]
        out[i] = s / A[i, i]
    for i in range(n - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, n):
            s -= A[k, i] * out[k]
        out[i] = s / A[i, i]
    return 0


def fit_l2(const double[:, ::1] phi, const double[::1] pos, const double[::1] neg,
           double lam, double tol, int max_iter, bint record=False):
    """Damped Newton with Armijo backtracking.

    Returns ``(weights, bias, objective, grad_norm, n_iter, converged, history)``.
    """
    cdef Py_ssize_t R = phi.shape[0], D = phi.shape[1], P = D + 1
    cdef Py_ssize_t r, i, j, it, ls
    cdef double N = 0.0, inv_n, f, f_trial, gnorm, z, s, g_r, h_r, dec, step_len
    cdef bint converged = False, accepted

    theta_arr = np.zeros(P)
    trial_arr = np.zeros(P)
    grad_arr = np.zeros(P)
    step_arr = np.zeros(P)
    hess_arr = np.zeros((P, P))
    cdef double[::1] theta = theta_arr, trial = trial_arr, grad = grad_arr, step = step_arr
    cdef double[:, ::1] hess = hess_arr

    for r in range(R):
        N += pos[r] + neg[r]
    if N <= 0.0:
        raise ValueError("empty data")
    inv_n = 1.0 / N

    history = []
    f = _objective(phi, pos, neg, theta, lam, inv_n)
    if record:
        history.append(f)
    it = 0
    gnorm = 0.0
    while True:
        with nogil:
            for i in range(P):
                grad[i] = 0.0
                for j in range(P):
                    hess[i, j] = 0.0
            for r in range(R):
                z = theta[D]
                for j in range(D):
                    z += phi[r, j] * theta[j]
                s = _sigmoid(z)
                g_r = ((pos[r] + neg[r]) * s - pos[r]) * inv_n
                h_r = (pos[r] + neg[r]) * s * (1.0 - s) * inv_n
                for i in range(D):
                    grad[i] += g_r * phi[r, i]
                    for j in range(i + 1):
                        hess[i, j] += h_r * phi[r, i] * phi[r, j]
                    hess[D, i] += h_r * phi[r, i]
                grad[D] += g_r
                hess[D, D] += h_r
            gnorm = 0.0
            for i in range(D):
                grad[i] += lam * theta[i]
                hess[i, i] += lam
            for i in range(P):
                gnorm += grad[i] * grad[i]
            gnorm = sqrt(gnorm)
        if gnorm <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        with nogil:
            for i in range(P):
                for j in range(i):
                    hess[j, i] = hess[i, j]
                grad[i] = -grad[i]
            if _cholesky_solve(hess, grad, step) != 0:
                for i in range(P):
                    step[i] = grad[i]
            dec = 0.0
            for i in range(P):
                dec -= grad[i] * step[i]
            if dec >= 0.0:
                dec = 0.0
                for i in range(P):
                    step[i] = grad[i]
                    dec -= grad[i] * grad[i]
            step_len = 1.0
            accepted = False
            for ls in range(60):
                for i in range(P):
                    trial[i] = theta[i] + step_len * step[i]
                f_trial = _objective(phi, pos, neg, trial, lam, inv_n)
                if f_trial <= f + 1e-4 * step_len * dec:
                    accepted = True
                    break
                step_len *= 0.5
        if not accepted:
            break
        for i in range(P):
            theta[i] = trial[i]
        f = f_trial
        it += 1
        if record:
            history.append(f)
    return theta_arr[:D].copy(), float(theta_arr[D]), f, gnorm, int(it), bool(converged), history


def pattern_counts(const unsigned char[:, ::1] x_first, const unsigned char[:, ::1] x_second,
                   const signed char[::1] y, const Py_ssize_t[::1] subset):
    """Label counts per ``(code(x_first_U), code(x_second_U))`` cell.

    Returns ``(pos, neg)`` float arrays of length ``4**k`` indexed by
    ``code_first * 2**k + code_second`` (first subset feature most significant).
    """
    cdef Py_ssize_t m = x_first.shape[0], k = subset.shape[0], i, a
    cdef Py_ssize_t cf, cs, idx, width = 1 << k
    pos_arr = np.zeros(width * width)
    neg_arr = np.zeros(width * width)
    cdef double[::1] pos = pos_arr, neg = neg_arr
    with nogil:
        for i in range(m):
            cf = 0
            cs = 0
            for a in range(k):
                cf = (cf << 1) | x_first[i, subset[a]]
                cs = (cs << 1) | x_second[i, subset[a]]
            idx = cf * width + cs
            if y[i] > 0:
                pos[idx] += 1.0
            else:
                neg[idx] += 1.0
    return pos_arr, neg_arr


def zero_one_risk(const double[:, ::1] phi, const double[::1] pos, const double[::1] neg,
                  const double[::1] w, double b):
    """Weighted 0-1 risk of ``sign(phi . w + b)`` with ties sent to -1."""
    cdef Py_ssize_t R = phi.shape[0], D = phi.shape[1], r, j
    cdef double z, wrong = 0.0, N = 0.0
    with nogil:
        for r in range(R):
            z = b
            for j in range(D):
                z += phi[r, j] * w[j]
            wrong += neg[r] if z > 0.0 else pos[r]
            N += pos[r] + neg[r]
    return wrong / N
