"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same algorithms and return conventions; results agree with the compiled
version up to floating-point rounding.
"""

from __future__ import annotations

import numpy as np


def _objective(phi, pos, neg, theta, lam, inv_n):
    z = phi @ theta[:-1] + theta[-1]
    loss = pos @ np.logaddexp(0.0, -z) + neg @ np.logaddexp(0.0, z)
    return loss * inv_n + 0.5 * lam * (theta[:-1] @ theta[:-1])


def _sigmoid(z):
    out = np.empty_like(z)
    nonneg = z >= 0
    out[nonneg] = 1.0 / (1.0 + np.exp(-z[nonneg]))
    e = np.exp(z[~nonneg])
    out[~nonneg] = e / (1.0 + e)
    return out


def fit_l2(phi, pos, neg, lam, tol, max_iter, record=False):
    phi = np.ascontiguousarray(phi, dtype=float)
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    R, D = phi.shape
    N = pos.sum() + neg.sum()
    if N <= 0:
        raise ValueError("empty data")
    inv_n = 1.0 / N
    aug = np.hstack([phi, np.ones((R, 1))])
    reg = np.full(D + 1, lam)
    reg[-1] = 0.0
    tot = pos + neg

    theta = np.zeros(D + 1)
    f = _objective(phi, pos, neg, theta, lam, inv_n)
    history = [f] if record else []
    it = 0
    converged = False
    while True:
        s = _sigmoid(aug @ theta)
        g_r = (tot * s - pos) * inv_n
        h_r = tot * s * (1.0 - s) * inv_n
        grad = aug.T @ g_r + reg * theta
        gnorm = float(np.sqrt(grad @ grad))
        if gnorm <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        hess = (aug * h_r[:, None]).T @ aug + np.diag(reg)
        try:
            L = np.linalg.cholesky(hess)
            step = np.linalg.solve(L.T, np.linalg.solve(L, -grad))
        except np.linalg.LinAlgError:
            step = -grad
        dec = grad @ step
        if dec >= 0:
            step = -grad
            dec = -(grad @ grad)
        step_len = 1.0
        accepted = False
        for _ in range(60):
            trial = theta + step_len * step
            f_trial = _objective(phi, pos, neg, trial, lam, inv_n)
            if f_trial <= f + 1e-4 * step_len * dec:
                accepted = True
                break
            step_len *= 0.5
        if not accepted:
            break
        theta, f = trial, f_trial
        it += 1
        if record:
            history.append(f)
    return theta[:D].copy(), float(theta[D]), float(f), gnorm, it, converged, history


def pattern_counts(x_first, x_second, y, subset):
    subset = np.asarray(subset, dtype=np.intp)
    k = len(subset)
    weights = (1 << (k - 1 - np.arange(k))).astype(np.int64)
    cf = x_first[:, subset].astype(np.int64) @ weights
    cs = x_second[:, subset].astype(np.int64) @ weights
    idx = cf * (1 << k) + cs
    size = 1 << (2 * k)
    positive = np.asarray(y) > 0
    pos = np.bincount(idx[positive], minlength=size).astype(float)
    neg = np.bincount(idx[~positive], minlength=size).astype(float)
    return pos, neg


def zero_one_risk(phi, pos, neg, w, b):
    z = np.asarray(phi) @ np.asarray(w) + b
    wrong = np.where(z > 0.0, neg, pos).sum()
    return float(wrong / (np.sum(pos) + np.sum(neg)))
