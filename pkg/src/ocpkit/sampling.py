"""Contrastive pair sampling: OCP, PCL, OCP-biased and patient-contrastive.

All schemes share the same positives (a uniformly random consecutive pair
in the correct order) and differ only in how negatives are drawn.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .distribution import (
    DEFAULT_ENTRY_BUDGET,
    DistributionSpec,
    SpecError,
    as_subset,
    exact_pair_distribution,
)
from .rng import as_generator


class Scheme(str, enum.Enum):
    OCP = "ocp"
    PCL = "pcl"
    OCP_BIASED = "ocp_biased"
    PATIENT_CONTRASTIVE = "patient_contrastive"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"ocpbiased": "ocp_biased", "patientcontrastive": "patient_contrastive", "patient": "patient_contrastive"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise SpecError(f"unknown scheme {value!r}") from None

    def __str__(self) -> str:
        return self.value


SINGLE_TRAJECTORY_SCHEMES = (Scheme.OCP, Scheme.PCL, Scheme.OCP_BIASED)


@dataclass(frozen=True)
class LabeledPair:
    x_first: np.ndarray
    x_second: np.ndarray
    w_first: int
    w_second: int
    y: int
    scheme: Scheme
    source_ids: tuple[int, int]


@dataclass(frozen=True)
class PairBatch:
    """A batch of labeled pairs stored column-wise.

    ``x_first``/``x_second`` are ``uint8`` arrays of shape ``(m, d)``; window
    indices are 1-based; ``y`` is in ``{-1, +1}``.
    """

    scheme: Scheme
    x_first: np.ndarray
    x_second: np.ndarray
    w_first: np.ndarray
    w_second: np.ndarray
    y: np.ndarray
    source_first: np.ndarray
    source_second: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.x_first.shape[1]

    def __getitem__(self, i: int) -> LabeledPair:
        return LabeledPair(
            x_first=self.x_first[i],
            x_second=self.x_second[i],
            w_first=int(self.w_first[i]),
            w_second=int(self.w_second[i]),
            y=int(self.y[i]),
            scheme=self.scheme,
            source_ids=(int(self.source_first[i]), int(self.source_second[i])),
        )

    def to_csv(self, path: str | Path) -> None:
        d = self.d
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["scheme", "y", "w_first", "w_second"]
                + [f"x_first_{j}" for j in range(d)]
                + [f"x_second_{j}" for j in range(d)]
            )
            for i in range(len(self)):
                writer.writerow(
                    [self.scheme.value, int(self.y[i]), int(self.w_first[i]), int(self.w_second[i])]
                    + self.x_first[i].tolist()
                    + self.x_second[i].tolist()
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "PairBatch":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = sum(1 for h in header if h.startswith("x_first_"))
        arr = np.array([r[1:] for r in body], dtype=np.int64).reshape(len(body), 3 + 2 * d)
        scheme = Scheme.parse(body[0][0]) if body else Scheme.OCP
        n = len(body)
        return cls(
            scheme=scheme,
            y=arr[:, 0].astype(np.int8),
            w_first=arr[:, 1],
            w_second=arr[:, 2],
            x_first=arr[:, 3 : 3 + d].astype(np.uint8),
            x_second=arr[:, 3 + d :].astype(np.uint8),
            source_first=np.full(n, -1),
            source_second=np.full(n, -1),
        )


def sample_pairs(
    scheme: Scheme | str,
    trajectories: np.ndarray,
    rng,
    pairs_per_trajectory: int = 1,
) -> PairBatch:
    """Sample ``pairs_per_trajectory`` labeled pairs from each trajectory.

    ``trajectories`` has shape ``(m, tau, d)``.  For the patient-contrastive
    scheme the other trajectories in the batch form the pool of negatives.
    Every variate is drawn for every pair regardless of label, so the random
    stream consumption does not depend on the outcomes.
    """
    scheme = Scheme.parse(scheme)
    rng = as_generator(rng)
    trajectories = np.asarray(trajectories)
    if trajectories.ndim != 3:
        raise SpecError("trajectories must have shape (m, tau, d)")
    m, tau, _ = trajectories.shape
    if tau < 2:
        raise SpecError("trajectories need tau >= 2")
    if scheme is Scheme.PATIENT_CONTRASTIVE and m < 2:
        raise SpecError("patient-contrastive sampling needs a pool of at least 2 trajectories")

    src = np.repeat(np.arange(m), pairs_per_trajectory)
    M = len(src)
    y = np.where(rng.random(M) < 0.5, 1, -1).astype(np.int8)
    t = rng.integers(1, tau, size=M)  # uniform on 1..tau-1
    pos_first, pos_second = t, t + 1

    other = src
    if scheme is Scheme.OCP:
        neg_first, neg_second = t + 1, t
    elif scheme is Scheme.PCL:
        a = rng.integers(1, tau + 1, size=M)
        b = rng.integers(1, tau, size=M)
        b = b + (b >= a)
        neg_first, neg_second = a, b
    elif scheme is Scheme.OCP_BIASED:
        forward = rng.random(M) < 0.5
        neg_first = np.where(forward, t, t + 1)
        neg_second = np.where(forward, t + 1, t)
    else:
        a = rng.integers(1, tau + 1, size=M)
        b = rng.integers(1, tau + 1, size=M)
        j = rng.integers(0, m - 1, size=M)
        j = j + (j >= src)
        neg_first, neg_second = a, b
        other = np.where(y == 1, src, j)

    positive = y == 1
    w_first = np.where(positive, pos_first, neg_first)
    w_second = np.where(positive, pos_second, neg_second)
    x_first = trajectories[src, w_first - 1]
    x_second = trajectories[other, w_second - 1]
    return PairBatch(
        scheme=scheme,
        x_first=np.ascontiguousarray(x_first, dtype=np.uint8),
        x_second=np.ascontiguousarray(x_second, dtype=np.uint8),
        w_first=w_first,
        w_second=w_second,
        y=y,
        source_first=src,
        source_second=other,
    )


def sample_pair(scheme: Scheme | str, trajectory: np.ndarray, rng, pool: np.ndarray | None = None, source_id: int = 0) -> LabeledPair:
    """Draw one labeled pair from ``trajectory``.

    For the patient-contrastive scheme ``pool`` is the full cohort
    (shape ``(m, tau, d)``) and ``source_id`` is ``trajectory``'s row in it.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.PATIENT_CONTRASTIVE:
        if pool is None or len(pool) < 2:
            raise SpecError("patient-contrastive sampling needs a pool of at least 2 trajectories")
        pool = np.asarray(pool)
        if not np.array_equal(pool[source_id], trajectory):
            raise SpecError("trajectory is not pool[source_id]")
        batch = sample_pairs(scheme, pool, rng)
        return batch[source_id]
    return sample_pairs(scheme, np.asarray(trajectory)[None], rng)[0]


# ------------------------------------------------------------------ exact law
def window_law(scheme: Scheme | str, tau: int, label: int) -> list[tuple[tuple[int, int], float]]:
    """Distribution over ordered window pairs conditional on the label."""
    scheme = Scheme.parse(scheme)
    if scheme not in SINGLE_TRAJECTORY_SCHEMES:
        raise SpecError(f"{scheme} has no single-trajectory window law")
    n = tau - 1
    if label == 1:
        return [((t, t + 1), 1.0 / n) for t in range(1, tau)]
    if scheme is Scheme.OCP:
        return [((t + 1, t), 1.0 / n) for t in range(1, tau)]
    if scheme is Scheme.OCP_BIASED:
        out = []
        for t in range(1, tau):
            out += [((t, t + 1), 0.5 / n), ((t + 1, t), 0.5 / n)]
        return out
    pairs = [(a, b) for a in range(1, tau + 1) for b in range(1, tau + 1) if a != b]
    return [(p, 1.0 / len(pairs)) for p in pairs]


def unlabeled_window_law(scheme: Scheme | str, tau: int) -> dict[tuple[int, int], float]:
    """Window-pair law with the label marginalized out (each label has prior 1/2)."""
    law: dict[tuple[int, int], float] = {}
    for label in (1, -1):
        for pair, p in window_law(scheme, tau, label):
            law[pair] = law.get(pair, 0.0) + 0.5 * p
    return law


@dataclass(frozen=True)
class LabeledPairLaw:
    """``pos[p, q] = P[X^W_U = p, X^W'_U = q, Y = +1]``, ``neg`` likewise for ``Y = -1``."""

    scheme: Scheme
    subset: tuple[int, ...]
    pos: np.ndarray
    neg: np.ndarray

    @property
    def total(self) -> float:
        return float(self.pos.sum() + self.neg.sum())


def scheme_pair_law(
    scheme: Scheme | str,
    spec: DistributionSpec,
    subset: Iterable[int] | None = None,
    budget: int = DEFAULT_ENTRY_BUDGET,
) -> LabeledPairLaw:
    """Exact joint law of ``(X^W_U, X^W'_U, Y)`` under a sampling scheme."""
    scheme = Scheme.parse(scheme)
    if scheme not in SINGLE_TRAJECTORY_SCHEMES:
        raise SpecError(f"{scheme} has no single-trajectory pair law")
    U = as_subset(subset, spec.d)
    out = {}
    for label in (1, -1):
        law = window_law(scheme, spec.tau, label)
        table = exact_pair_distribution(spec, [w for w, _ in law], U, budget)
        out[label] = 0.5 * table.mixture([p for _, p in law])
    return LabeledPairLaw(scheme, U, out[1], out[-1])
