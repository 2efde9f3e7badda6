"""Logistic regression on pair featurizations and subset ERM.

The hot path (one weighted logistic fit per candidate subset) runs on
*compressed* data: with binary features a pair restricted to ``k`` features
takes at most ``4**k`` distinct values, so each fit sees at most 256 weighted
rows for ``k = 4`` regardless of the sample size.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .distribution import BudgetExceeded, SpecError, code_bits
from .sampling import PairBatch

DEFAULT_LAMBDA = 1e-3
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
DEFAULT_SUBSET_BUDGET = 5000


@dataclass(frozen=True)
class Regularization:
    kind: str = "l2"
    strength: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.kind not in ("l1", "l2"):
            raise SpecError(f"regularization kind must be 'l1' or 'l2', got {self.kind!r}")
        lam = self.strength
        if not isinstance(lam, (int, float)) or math.isnan(lam) or lam < 0:
            raise SpecError(f"regularization strength must be a number >= 0, got {lam!r}")


@dataclass
class LinearModel:
    """Linear classifier ``sign(w . phi + b)``; a zero score maps to the negative class."""

    weights: np.ndarray
    bias: float
    reg: Regularization
    diagnostics: dict = field(default_factory=dict)

    def score(self, phi: np.ndarray) -> np.ndarray:
        return np.asarray(phi, dtype=float) @ self.weights + self.bias

    def decide(self, phi: np.ndarray) -> np.ndarray:
        """Labels in ``{-1, +1}``."""
        return np.where(self.score(phi) > 0.0, 1, -1)

    def to_dict(self) -> dict:
        diag = {k: v for k, v in self.diagnostics.items() if k != "history"}
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "reg": {"kind": self.reg.kind, "strength": self.reg.strength},
            "diagnostics": diag,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearModel":
        return cls(
            weights=np.asarray(doc["weights"], dtype=float),
            bias=float(doc["bias"]),
            reg=Regularization(**doc["reg"]),
            diagnostics=dict(doc.get("diagnostics", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        return cls.from_dict(json.loads(text))


# ----------------------------------------------------------------- features
def featurize_pair(x_first, x_second, subset: Sequence[int] | None = None) -> np.ndarray:
    """``[x; x'; x - x'; |x - x'|]`` restricted to ``subset`` (all features if ``None``).

    Works on single vectors or on ``(m, d)`` batches.
    """
    xf = np.asarray(x_first, dtype=float)
    xs = np.asarray(x_second, dtype=float)
    if subset is not None:
        idx = list(subset)
        xf, xs = xf[..., idx], xs[..., idx]
    diff = xf - xs
    return np.concatenate([xf, xs, diff, np.abs(diff)], axis=-1)


@lru_cache(maxsize=None)
def _pattern_features(k: int) -> np.ndarray:
    """Pair features for every ``(code_first, code_second)`` cell, row ``cf * 2**k + cs``."""
    bits = code_bits(k).astype(float)
    first = np.repeat(bits, 1 << k, axis=0)
    second = np.tile(bits, (1 << k, 1))
    out = featurize_pair(first, second)
    out.setflags(write=False)
    return out


# ----------------------------------------------------------------- training
def _split_counts(y, sample_weight):
    y = np.asarray(y)
    if not np.all(np.isin(y, (-1, 1))):
        raise SpecError("labels must be -1 or +1")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    return np.where(y > 0, w, 0.0), np.where(y > 0, 0.0, w)


def _compress(X, pos, neg):
    X = np.ascontiguousarray(X, dtype=float)
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    P = np.bincount(inverse, weights=pos, minlength=len(uniq))
    Q = np.bincount(inverse, weights=neg, minlength=len(uniq))
    return np.ascontiguousarray(uniq), P, Q


def _constant_model(pos, neg, D, reg) -> LinearModel:
    bias = 1.0 if pos.sum() > neg.sum() else -1.0
    return LinearModel(np.zeros(D), bias, reg, {"constant": True, "converged": True, "n_iter": 0, "loss": float("nan"), "grad_norm": 0.0})


def fit_counts(
    phi: np.ndarray,
    pos: np.ndarray,
    neg: np.ndarray,
    reg: Regularization = Regularization(),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "newton",
    record: bool = False,
) -> LinearModel:
    """Fit on distinct rows ``phi`` with per-row label counts."""
    phi = np.ascontiguousarray(phi, dtype=float)
    pos = np.ascontiguousarray(pos, dtype=float)
    neg = np.ascontiguousarray(neg, dtype=float)
    D = phi.shape[1]
    if pos.sum() == 0 or neg.sum() == 0:
        return _constant_model(pos, neg, D, reg)
    if reg.kind == "l1":
        w, b, f, res, it, conv, hist = _fit_l1(phi, pos, neg, reg.strength, tol, max_iter, record)
    elif method == "newton":
        w, b, f, res, it, conv, hist = kernels.fit_l2(phi, pos, neg, float(reg.strength), float(tol), int(max_iter), record)
    elif method == "gd":
        w, b, f, res, it, conv, hist = _fit_l2_gd(phi, pos, neg, reg.strength, tol, max_iter, record)
    else:
        raise SpecError(f"unknown method {method!r}")
    diag = {"loss": float(f), "grad_norm": float(res), "n_iter": int(it), "converged": bool(conv), "constant": False}
    if record:
        diag["history"] = list(hist)
    return LinearModel(np.asarray(w, dtype=float), float(b), reg, diag)


def train_logistic(
    X,
    y,
    reg: Regularization = Regularization(),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    sample_weight=None,
    method: str = "newton",
    record: bool = False,
) -> LinearModel:
    """Minimize mean logistic loss plus an L1 or L2 penalty on the weights.

    ``y`` is in ``{-1, +1}``.  L2 uses damped Newton (``method="newton"``) or
    plain gradient descent (``method="gd"``), both with Armijo backtracking;
    L1 uses monotone accelerated proximal gradient.  Iteration stops when the
    gradient norm (L2) or minimum-norm subgradient (L1) drops to ``tol``.
    Non-convergence is reported in ``diagnostics``, never raised.  If only
    one label is present the constant classifier is returned.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise SpecError("X must be (n, D) with one label per row")
    if len(X) == 0:
        raise SpecError("no training data")
    pos, neg = _split_counts(y, sample_weight)
    phi, P, Q = _compress(X, pos, neg)
    return fit_counts(phi, P, Q, reg, tol, max_iter, method, record)


def logistic_objective(phi, pos, neg, weights, bias, reg: Regularization) -> float:
    """Penalized mean logistic loss (for checks and finite differences)."""
    phi = np.asarray(phi, dtype=float)
    z = phi @ weights + bias
    N = np.sum(pos) + np.sum(neg)
    loss = (np.asarray(pos) @ np.logaddexp(0.0, -z) + np.asarray(neg) @ np.logaddexp(0.0, z)) / N
    if reg.kind == "l2":
        return float(loss + 0.5 * reg.strength * weights @ weights)
    return float(loss + reg.strength * np.abs(weights).sum())


def logistic_gradient(phi, pos, neg, weights, bias) -> tuple[np.ndarray, float]:
    """Gradient of the unpenalized mean logistic loss with respect to ``(w, b)``."""
    phi = np.asarray(phi, dtype=float)
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    z = phi @ weights + bias
    s = 0.5 * (1.0 + np.tanh(0.5 * z))
    g = ((pos + neg) * s - pos) / (pos.sum() + neg.sum())
    return phi.T @ g, float(g.sum())


def _fit_l2_gd(phi, pos, neg, lam, tol, max_iter, record):
    D = phi.shape[1]
    reg = Regularization("l2", lam)
    w, b = np.zeros(D), 0.0
    f = logistic_objective(phi, pos, neg, w, b, reg)
    hist = [f] if record else []
    step = 1.0
    conv = False
    it = 0
    while True:
        gw, gb = logistic_gradient(phi, pos, neg, w, b)
        gw = gw + lam * w
        gnorm = math.sqrt(gw @ gw + gb * gb)
        if gnorm <= tol:
            conv = True
            break
        if it >= max_iter:
            break
        step = min(step * 2.0, 1e6)
        for _ in range(60):
            w_new, b_new = w - step * gw, b - step * gb
            f_new = logistic_objective(phi, pos, neg, w_new, b_new, reg)
            if f_new <= f - 1e-4 * step * gnorm * gnorm:
                break
            step *= 0.5
        else:
            break
        w, b, f = w_new, b_new, f_new
        it += 1
        if record:
            hist.append(f)
    return w, b, f, gnorm, it, conv, hist


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _l1_residual(gw, gb, w, lam):
    sub = np.where(w != 0.0, gw + lam * np.sign(w), np.maximum(np.abs(gw) - lam, 0.0))
    return math.sqrt(sub @ sub + gb * gb)


def _fit_l1(phi, pos, neg, lam, tol, max_iter, record, init=None):
    """Monotone FISTA with backtracking on the smooth part's Lipschitz estimate."""
    D = phi.shape[1]
    smooth = Regularization("l2", 0.0)

    def F(w, b):
        return logistic_objective(phi, pos, neg, w, b, smooth) + lam * np.abs(w).sum()

    w, b = (np.zeros(D), 0.0) if init is None else (init[0].copy(), float(init[1]))
    yw, yb = w.copy(), b
    f = F(w, b)
    hist = [f] if record else []
    t = 1.0
    L = 1.0
    conv = False
    it = 0
    while True:
        gw, gb = logistic_gradient(phi, pos, neg, w, b)
        res = _l1_residual(gw, gb, w, lam)
        if res <= tol:
            conv = True
            break
        if it >= max_iter:
            break
        gyw, gyb = logistic_gradient(phi, pos, neg, yw, yb)
        fy = logistic_objective(phi, pos, neg, yw, yb, smooth)
        L = max(L * 0.5, 1e-12)
        for _ in range(80):
            zw = _soft_threshold(yw - gyw / L, lam / L)
            zb = yb - gyb / L
            dw, db = zw - yw, zb - yb
            fz = logistic_objective(phi, pos, neg, zw, zb, smooth)
            if fz <= fy + gyw @ dw + gyb * db + 0.5 * L * (dw @ dw + db * db) + 1e-15:
                break
            L *= 2.0
        Fz = fz + lam * np.abs(zw).sum()
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if Fz <= f:
            nw, nb, f_new = zw, zb, Fz
        else:
            nw, nb, f_new = w, b, f
        yw = nw + (t / t_new) * (zw - nw) + ((t - 1.0) / t_new) * (nw - w)
        yb = nb + (t / t_new) * (zb - nb) + ((t - 1.0) / t_new) * (nb - b)
        if Fz > f:
            # restart momentum when the accelerated point fails to descend
            t_new = 1.0
            yw, yb = nw.copy(), nb
        w, b, f, t = nw, nb, f_new, t_new
        it += 1
        if record:
            hist.append(f)
    return w, b, f, res, it, conv, hist


# --------------------------------------------------------------- subset ERM
@dataclass(frozen=True)
class SubsetFit:
    subset: tuple[int, ...]
    risk: float
    loss: float
    converged: bool


@dataclass
class SubsetSearch:
    """Winner of an exhaustive subset search plus every candidate's fit."""

    subset: tuple[int, ...]
    risk: float
    candidates: list[SubsetFit]

    def __iter__(self):
        # unpacks as (subset, risk)
        return iter((self.subset, self.risk))


def _rank_key(fit: SubsetFit, tie_break: str):
    if tie_break == "lex":
        return (fit.risk, fit.subset)
    return (fit.risk, fit.loss, fit.subset)


def check_subset_budget(d: int, d0: int, budget: int) -> int:
    if not 0 < d0 <= d:
        raise SpecError(f"need 0 < d0 <= d, got d0={d0}, d={d}")
    n = math.comb(d, d0)
    if n > budget:
        raise BudgetExceeded(f"C({d}, {d0}) = {n} subsets exceeds the budget of {budget}")
    return n


def erm_subset_search(
    pairs: PairBatch,
    d0: int,
    reg: Regularization = Regularization(),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    features: Sequence[int] | None = None,
    budget: int = DEFAULT_SUBSET_BUDGET,
    tie_break: str = "lex",
) -> SubsetSearch:
    """Fit one logistic model per size-``d0`` subset and keep the lowest 0-1 risk.

    Ties on empirical 0-1 risk go to the lexicographically smallest subset
    (``tie_break="lex"``), or first to the lower penalized training loss
    (``tie_break="loss"``).
    """
    if tie_break not in ("lex", "loss"):
        raise SpecError(f"tie_break must be 'lex' or 'loss', got {tie_break!r}")
    universe = tuple(range(pairs.d)) if features is None else tuple(sorted(features))
    check_subset_budget(len(universe), d0, budget)
    if len(pairs) == 0:
        raise SpecError("no pairs")
    phi_all = _pattern_features(d0)
    xf = np.ascontiguousarray(pairs.x_first, dtype=np.uint8)
    xs = np.ascontiguousarray(pairs.x_second, dtype=np.uint8)
    y = np.ascontiguousarray(pairs.y, dtype=np.int8)
    fits = []
    for subset in itertools.combinations(universe, d0):
        pos, neg = kernels.pattern_counts(xf, xs, y, np.asarray(subset, dtype=np.intp))
        nz = (pos + neg) > 0
        phi = np.ascontiguousarray(phi_all[nz])
        P, Q = pos[nz], neg[nz]
        model = fit_counts(phi, P, Q, reg, tol, max_iter)
        risk = kernels.zero_one_risk(phi, P, Q, model.weights, model.bias)
        loss = model.diagnostics["loss"]
        if model.diagnostics.get("constant"):
            loss = float("inf")
        fits.append(SubsetFit(subset, float(risk), float(loss), model.diagnostics["converged"]))
    best = min(fits, key=lambda f: _rank_key(f, tie_break))
    return SubsetSearch(best.subset, best.risk, fits)


def recovery_score(found: Iterable[int], truth: Iterable[int]) -> int:
    """Number of true features among the found ones."""
    return len(set(found) & set(truth))


# ---------------------------------------------------------------- L1 select
@dataclass
class Selection:
    features: tuple[int, ...]
    weights: dict[int, float]
    lam: float
    count: int
    target: int
    slack: int
    hit: bool
    rounds: int
    warning: str | None = None

    def to_csv(self, path: str | Path, d: int) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "aggregate_weight", "selected"])
            for j in range(d):
                writer.writerow([j, repr(self.weights.get(j, 0.0)), int(j in self.features)])


def _compressed_pairs(pairs: PairBatch):
    d = pairs.d
    if 2 * d > 62:
        raise BudgetExceeded("too many features to compress pair codes")
    weights = (1 << (d - 1 - np.arange(d))).astype(np.int64)
    code = (pairs.x_first.astype(np.int64) @ weights) << d | (pairs.x_second.astype(np.int64) @ weights)
    uniq, inverse = np.unique(code, return_inverse=True)
    inverse = inverse.reshape(-1)
    positive = pairs.y > 0
    P = np.bincount(inverse[positive], minlength=len(uniq)).astype(float)
    Q = np.bincount(inverse[~positive], minlength=len(uniq)).astype(float)
    shifts = d - 1 - np.arange(d)
    xf = ((uniq[:, None] >> (d + shifts)[None, :]) & 1).astype(float)
    xs = ((uniq[:, None] >> shifts[None, :]) & 1).astype(float)
    return np.ascontiguousarray(featurize_pair(xf, xs)), P, Q


def _block_norms(weights: np.ndarray, d: int) -> np.ndarray:
    return np.abs(weights.reshape(4, d)).sum(axis=0)


def l1_select(
    pairs: PairBatch,
    target_count: int,
    count_slack: int = 0,
    tol: float = 1e-6,
    max_iter: int = DEFAULT_MAX_ITER,
    max_rounds: int = 60,
) -> Selection:
    """Bisect the L1 strength until ``target_count +- count_slack`` features survive.

    A feature counts as selected when any of its four blocks has a nonzero
    weight; its aggregate weight is the sum of absolute block weights.
    The λ grid is searched in log space between ``1e-6 * lam_max`` and
    ``lam_max`` (the smallest strength that zeroes every weight).
    """
    if target_count < 1:
        raise SpecError("target_count must be >= 1")
    d = pairs.d
    phi, P, Q = _compressed_pairs(pairs)
    if P.sum() == 0 or Q.sum() == 0:
        raise SpecError("L1 selection needs both labels")
    b0 = math.log(P.sum() / Q.sum())
    gw, _ = logistic_gradient(phi, P, Q, np.zeros(phi.shape[1]), b0)
    lam_max = float(np.abs(gw).max())
    lo_target, hi_target = target_count - count_slack, target_count + count_slack

    cache: dict[float, tuple[int, LinearModel]] = {}
    warm = [None]

    def probe(lam):
        w, b, f, res, it, conv, _ = _fit_l1(phi, P, Q, lam, tol, max_iter, False, warm[0])
        warm[0] = (w, b)
        model = LinearModel(w, b, Regularization("l1", lam), {"loss": f, "grad_norm": res, "n_iter": it, "converged": conv})
        count = int(np.count_nonzero(_block_norms(w, d)))
        cache[lam] = (count, model)
        return count

    def result(lam, rounds, warning=None):
        count, model = cache[lam]
        norms = _block_norms(model.weights, d)
        feats = tuple(int(j) for j in np.nonzero(norms)[0])
        hit = lo_target <= count <= hi_target
        return Selection(feats, {int(j): float(norms[j]) for j in range(d)}, lam, count, target_count, count_slack, hit, rounds, warning)

    lo = lam_max * 1e-6
    hi = lam_max
    rounds = 1
    if lo_target <= probe(lo) <= hi_target:
        return result(lo, rounds)
    rounds += 1
    if lo_target <= probe(hi) <= hi_target:
        return result(hi, rounds)
    log_lo, log_hi = math.log(lo), math.log(hi)
    while rounds < max_rounds:
        rounds += 1
        mid = math.exp(0.5 * (log_lo + log_hi))
        c = probe(mid)
        if lo_target <= c <= hi_target:
            return result(mid, rounds)
        if c > hi_target:
            log_lo = math.log(mid)
        else:
            log_hi = math.log(mid)
    nearest = min(cache, key=lambda lam: (abs(cache[lam][0] - target_count), lam))
    msg = f"no strength gave {target_count}+-{count_slack} features; nearest count {cache[nearest][0]}"
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return result(nearest, rounds, msg)
