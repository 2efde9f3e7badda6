"""Synthetic downstream task and the pretrain-then-finetune vs direct ERM comparison.

Labels are ``1`` iff at least ``threshold`` drivers are active at a uniformly
chosen time, flipped with probability ``label_noise``.  The Bayes rule is a
threshold on ``X_S`` (itself a linear classifier), so the best achievable
risk over linear models on any size-``|S|`` subset is exactly the noise rate.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ._backend import kernels
from .distribution import (
    DEFAULT_ENTRY_BUDGET,
    DistributionSpec,
    SpecError,
    as_subset,
    code_bits,
    exact_marginal,
    sample_trajectories,
)
from .learner import (
    DEFAULT_LAMBDA,
    DEFAULT_SUBSET_BUDGET,
    LinearModel,
    Regularization,
    check_subset_budget,
    erm_subset_search,
    fit_counts,
)
from .rng import as_generator, substream
from .sampling import Scheme, sample_pairs

LEARNERS = ("A_pt", "A_ds")


@dataclass(frozen=True)
class DownstreamTask:
    target_subset: tuple[int, ...]
    threshold: int = 2
    label_noise: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "target_subset", tuple(sorted(self.target_subset)))
        if not self.target_subset:
            raise SpecError("target_subset is empty")
        if not 0.0 <= self.label_noise < 0.5:
            raise SpecError(f"label_noise must lie in [0, 1/2), got {self.label_noise}")
        if not 0 <= self.threshold <= len(self.target_subset) + 1:
            raise SpecError(f"threshold {self.threshold} out of range")

    @classmethod
    def for_spec(cls, spec: DistributionSpec, threshold: int = 2, label_noise: float = 0.1) -> "DownstreamTask":
        return cls(spec.S, threshold, label_noise)

    def rule(self, x: np.ndarray) -> np.ndarray:
        """Noise-free label of full feature vectors ``x`` (shape ``(..., d)``)."""
        x = np.asarray(x)
        return (x[..., list(self.target_subset)].sum(axis=-1) >= self.threshold).astype(np.uint8)


@dataclass(frozen=True)
class LabeledDataset:
    """One ``(X^T, Y^T)`` per trajectory; ``times`` are 1-based."""

    x: np.ndarray
    y: np.ndarray
    times: np.ndarray

    def __len__(self) -> int:
        return len(self.y)


def make_labeled_dataset(spec: DistributionSpec, task: DownstreamTask, n: int, rng) -> LabeledDataset:
    if n < 1:
        raise SpecError("n must be >= 1")
    if max(task.target_subset) >= spec.d:
        raise SpecError("task target_subset outside the feature range")
    rng = as_generator(rng)
    traj = sample_trajectories(spec, n, rng)
    times = rng.integers(1, spec.tau + 1, size=n)
    x = np.ascontiguousarray(traj[np.arange(n), times - 1])
    flip = rng.random(n) < task.label_noise
    y = task.rule(x) ^ flip.astype(np.uint8)
    return LabeledDataset(x, y, times)


# ------------------------------------------------------------------ learners
@dataclass
class DownstreamModel:
    """Linear classifier on the raw features in ``subset``; predicts 1 iff the score is positive."""

    subset: tuple[int, ...]
    model: LinearModel

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., list(self.subset)]
        return (self.model.score(x) > 0.0).astype(np.uint8)


def _code_counts(data: LabeledDataset, subset: Sequence[int]):
    k = len(subset)
    weights = (1 << (k - 1 - np.arange(k))).astype(np.int64)
    codes = data.x[:, list(subset)].astype(np.int64) @ weights
    size = 1 << k
    pos = np.bincount(codes[data.y == 1], minlength=size).astype(float)
    neg = np.bincount(codes[data.y == 0], minlength=size).astype(float)
    return pos, neg


def _fit_subset(data: LabeledDataset, subset: tuple[int, ...], reg: Regularization, tol: float, max_iter: int):
    pos, neg = _code_counts(data, subset)
    nz = (pos + neg) > 0
    phi = np.ascontiguousarray(code_bits(len(subset))[nz], dtype=float)
    model = fit_counts(phi, pos[nz], neg[nz], reg, tol, max_iter)
    risk = kernels.zero_one_risk(phi, pos[nz], neg[nz], model.weights, model.bias)
    return model, float(risk)


def finetune(
    subset: Iterable[int],
    data: LabeledDataset,
    reg: Regularization = Regularization("l2", DEFAULT_LAMBDA),
    tol: float = 1e-8,
    max_iter: int = 5000,
) -> DownstreamModel:
    """Logistic fit on the raw features of a fixed representation."""
    if len(data) == 0:
        raise SpecError("no labeled data")
    U = as_subset(subset, data.x.shape[1])
    model, _ = _fit_subset(data, U, reg, tol, max_iter)
    return DownstreamModel(U, model)


def direct_erm(
    data: LabeledDataset,
    d0: int,
    reg: Regularization = Regularization("l2", DEFAULT_LAMBDA),
    tol: float = 1e-8,
    max_iter: int = 5000,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> DownstreamModel:
    """Search every size-``d0`` subset; keep the lowest training 0-1 risk (lexicographic ties)."""
    if len(data) == 0:
        raise SpecError("no labeled data")
    d = data.x.shape[1]
    check_subset_budget(d, d0, budget)
    best = None
    for U in itertools.combinations(range(d), d0):
        model, risk = _fit_subset(data, U, reg, tol, max_iter)
        if best is None or risk < best[0]:
            best = (risk, U, model)
    return DownstreamModel(best[1], best[2])


# ---------------------------------------------------------------- exact risk
def exact_downstream_risk(
    predictor: DownstreamModel | Callable[[np.ndarray], np.ndarray],
    spec: DistributionSpec,
    task: DownstreamTask,
    budget: int = DEFAULT_ENTRY_BUDGET,
) -> float:
    """``P[f(g(X^T)) != Y^T]`` with ``T`` uniform, by enumeration.

    ``predictor`` is a :class:`DownstreamModel` or a callable mapping full
    feature vectors ``(N, d)`` to ``{0, 1}``; for a callable every feature is
    enumerated, so keep ``d`` small.
    """
    if isinstance(predictor, DownstreamModel):
        U = predictor.subset
        predict = predictor.predict
    else:
        U = tuple(range(spec.d))
        predict = predictor
    V = tuple(sorted(set(U) | set(task.target_subset)))
    law = exact_marginal(spec, V, budget=budget).mean(axis=0)
    full = np.zeros((1 << len(V), spec.d), dtype=np.uint8)
    full[:, list(V)] = code_bits(len(V))
    agree = np.asarray(predict(full)).astype(np.uint8) == task.rule(full)
    eta = task.label_noise
    return float(law @ np.where(agree, eta, 1.0 - eta))


def bayes_rule(task: DownstreamTask) -> Callable[[np.ndarray], np.ndarray]:
    return task.rule


# -------------------------------------------------------------------- curves
@dataclass(frozen=True)
class CurveRow:
    n: int
    replicate: int
    learner: str
    subset: tuple[int, ...]
    exact_risk: float
    excess: float


@dataclass
class ExcessRiskCurves:
    rows: list[CurveRow]
    pretrained: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def mean_excess(self, n: int, learner: str) -> float:
        vals = [r.excess for r in self.rows if r.n == n and r.learner == learner]
        if not vals:
            raise KeyError((n, learner))
        return float(np.mean(vals))

    def paired(self, n: int) -> list[tuple[float, float]]:
        """``(A_pt, A_ds)`` excess per replicate at ``n``."""
        by = {(r.replicate, r.learner): r.excess for r in self.rows if r.n == n}
        reps = sorted({rep for rep, _ in by})
        return [(by[(rep, "A_pt")], by[(rep, "A_ds")]) for rep in reps]

    def win_rate(self, n: int) -> float:
        """Share of replicates where A_pt's excess is strictly below A_ds's."""
        pairs = self.paired(n)
        return sum(pt < ds for pt, ds in pairs) / len(pairs)

    def summary(self) -> list[dict]:
        out = []
        for n in sorted({r.n for r in self.rows}):
            out.append({
                "n": n,
                "A_pt_mean_excess": self.mean_excess(n, "A_pt"),
                "A_ds_mean_excess": self.mean_excess(n, "A_ds"),
                "A_pt_win_rate": self.win_rate(n),
            })
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "replicate", "learner", "subset", "exact_risk", "excess"])
            for r in self.rows:
                writer.writerow([r.n, r.replicate, r.learner, " ".join(map(str, r.subset)), repr(r.exact_risk), repr(r.excess)])

    def summary_to_csv(self, path: str | Path) -> None:
        rows = self.summary()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def pretrain_subset(spec: DistributionSpec, scheme, m_unlabeled: int, d0: int, rng, reg: Regularization = Regularization()) -> tuple[int, ...]:
    """Representation chosen by subset ERM on ``m_unlabeled`` contrastive pairs."""
    rng = as_generator(rng)
    traj = sample_trajectories(spec, m_unlabeled, rng)
    pairs = sample_pairs(scheme, traj, rng)
    return erm_subset_search(pairs, d0, reg).subset


def excess_risk_curves(
    spec: DistributionSpec,
    task: DownstreamTask,
    scheme=Scheme.OCP,
    m_unlabeled: int = 16000,
    n_grid: Sequence[int] = (16, 64, 256, 1000, 4000, 16000),
    replicates: int = 100,
    seed: int = 0,
    reg: Regularization = Regularization("l2", DEFAULT_LAMBDA),
    d0: int | None = None,
) -> ExcessRiskCurves:
    """Exact excess risk of A_pt and A_ds per ``(n, replicate)``.

    Each replicate pretrains once on its own unlabeled sample; each
    ``(n, replicate)`` cell draws its own labeled sample, shared by both
    learners.  The excess is measured against the noise rate, which is the
    minimum risk over linear models on size-``d0`` subsets.
    """
    if replicates < 1 or not n_grid:
        raise SpecError("need replicates >= 1 and a non-empty n_grid")
    d0 = len(task.target_subset) if d0 is None else d0
    scheme = Scheme.parse(scheme)
    eta = task.label_noise
    curves = ExcessRiskCurves([])
    for rep in range(replicates):
        curves.pretrained[rep] = pretrain_subset(spec, scheme, m_unlabeled, d0, substream(seed, "pretrain", scheme.value, m_unlabeled, rep))
    for n in n_grid:
        for rep in range(replicates):
            data = make_labeled_dataset(spec, task, n, substream(seed, "labeled", n, rep))
            for name, model in (("A_pt", finetune(curves.pretrained[rep], data, reg)), ("A_ds", direct_erm(data, d0, reg))):
                risk = exact_downstream_risk(model, spec, task)
                curves.rows.append(CurveRow(n, rep, name, model.subset, risk, risk - eta))
    return curves
