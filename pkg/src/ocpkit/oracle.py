"""Exact population quantities by enumeration over exact pair tables.

Bayes risks are computed generically as ``sum_z min_y P[Z_U = z, Y = y]``
for every scheme.  For OCP and OCP-biased the same numbers are also
rebuilt from the order relation of the driver block ``S`` (the ``m_U`` and
``m'_U`` terms), which gives an independent second path used as a check.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .distribution import (
    DEFAULT_ENTRY_BUDGET,
    DistributionSpec,
    SpecError,
    as_subset,
    code_bits,
    exact_pair_distribution,
)
from .learner import DEFAULT_SUBSET_BUDGET, check_subset_budget
from .sampling import Scheme, scheme_pair_law, unlabeled_window_law

UNIQUENESS_TOL = 1e-10
DECOMPOSITION_TOL = 1e-12
ORACLE_SCHEMES = (Scheme.OCP, Scheme.PCL, Scheme.OCP_BIASED)


@dataclass(frozen=True)
class RiskReport:
    scheme: str
    subset: tuple[int, ...]
    err_U: float
    err_S: float
    excess: float
    m_expectation: float | None = None
    decomposition_residual: float | None = None

    @property
    def decomposition_holds(self) -> bool | None:
        if self.decomposition_residual is None:
            return None
        return abs(self.decomposition_residual) <= DECOMPOSITION_TOL

    def to_dict(self) -> dict:
        out = asdict(self)
        out["subset"] = list(self.subset)
        return out


@dataclass(frozen=True)
class BoundReport:
    scheme: str
    epsilon0: float
    m_bound: float
    d: int
    d0: int
    delta: float
    vc_f: float | None = None
    log_base: str = "e"

    def labeled_rate(self, n: int) -> float:
        """``sqrt((VC(F) + ln(2/delta)) / n)``, the labeled excess-risk rate up to constants."""
        if self.vc_f is None:
            raise SpecError("no VC(F) value supplied")
        return math.sqrt((self.vc_f + math.log(2.0 / self.delta)) / n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["m_bound"] = self.m_bound if math.isfinite(self.m_bound) else None
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class OptimalSubset:
    subset: tuple[int, ...]
    err: float
    is_unique: bool
    gap_to_second: float
    reports: tuple[RiskReport, ...]

    def __iter__(self):
        return iter((self.subset, self.err, self.is_unique, self.gap_to_second))


def _oracle_scheme(scheme) -> Scheme:
    scheme = Scheme.parse(scheme)
    if scheme not in ORACLE_SCHEMES:
        raise SpecError(f"the oracle does not support {scheme}")
    return scheme


def bayes_risk(scheme, spec: DistributionSpec, subset: Iterable[int] | None, budget: int = DEFAULT_ENTRY_BUDGET) -> float:
    """Bayes 0-1 risk of predicting ``Y`` from ``(X^W_U, X^W'_U)``."""
    law = scheme_pair_law(_oracle_scheme(scheme), spec, subset, budget)
    return float(np.minimum(law.pos, law.neg).sum())


def _unlabeled_table(scheme: Scheme, spec: DistributionSpec, subset: tuple[int, ...], budget: int) -> np.ndarray:
    law = unlabeled_window_law(scheme, spec.tau)
    windows = list(law)
    table = exact_pair_distribution(spec, windows, subset, budget)
    return table.mixture([law[w] for w in windows])


def _order_masks(bits: np.ndarray, positions: list[int]):
    """``(equal, up, down)`` boolean matrices over code pairs for the given positions."""
    sub = bits[:, positions].astype(np.int8)
    first, second = sub[:, None, :], sub[None, :, :]
    equal = np.all(first == second, axis=-1)
    up = np.all(first <= second, axis=-1) & ~equal
    down = np.all(first >= second, axis=-1) & ~equal
    return equal, up, down


def baseline_risk(scheme, spec: DistributionSpec, budget: int = DEFAULT_ENTRY_BUDGET) -> float:
    """``err(S)`` from the order relation of ``S`` alone.

    OCP: ``P[X^W_S = X^W'_S] / 2``.  OCP-biased adds ``P[X^W_S < X^W'_S] / 3``.
    """
    scheme = _oracle_scheme(scheme)
    if scheme is Scheme.PCL:
        raise SpecError("no closed-form baseline for PCL")
    S = spec.S
    table = _unlabeled_table(scheme, spec, S, budget)
    equal, up, _ = _order_masks(code_bits(len(S)), list(range(len(S))))
    out = 0.5 * table[equal].sum()
    if scheme is Scheme.OCP_BIASED:
        out += table[up].sum() / 3.0
    return float(out)


def m_expectation(spec: DistributionSpec, subset: Iterable[int], variant="ocp", budget: int = DEFAULT_ENTRY_BUDGET) -> float:
    """``E[m_U]`` (OCP) or ``E[m'_U]`` (OCP-biased) from the exact law over ``U ∪ S``."""
    scheme = _oracle_scheme(variant)
    if scheme is Scheme.PCL:
        raise SpecError("m_expectation is defined for OCP and OCP-biased only")
    U = as_subset(subset, spec.d)
    S = spec.S
    V = tuple(sorted(set(U) | set(S)))
    table = _unlabeled_table(scheme, spec, V, budget)
    bits = code_bits(len(V))
    _, up, down = _order_masks(bits, [V.index(s) for s in S])
    k = len(U)
    u_weights = 1 << (k - 1 - np.arange(k))
    u_code = bits[:, [V.index(u) for u in U]].astype(np.int64) @ u_weights if k else np.zeros(len(bits), np.int64)
    cell = (u_code[:, None] << k) | u_code[None, :]
    size = 1 << (2 * k)
    a = np.bincount(cell.ravel(), weights=(table * up).ravel(), minlength=size)
    b = np.bincount(cell.ravel(), weights=(table * down).ravel(), minlength=size)
    both = [U.index(i) for i in U if i in set(S)]
    same = _order_masks(code_bits(k), both)[0].ravel() if both else np.ones(size, dtype=bool)
    if scheme is Scheme.OCP_BIASED:
        a = a / 3.0
    return float(np.minimum(a, b)[same].sum())


def population_risk(
    scheme,
    spec: DistributionSpec,
    subset: Iterable[int],
    budget: int = DEFAULT_ENTRY_BUDGET,
    err_S: float | None = None,
) -> RiskReport:
    """Exact Bayes risk of ``subset`` plus, for OCP variants, the decomposition check.

    ``decomposition_residual`` is ``err(U) - (baseline + E[m_U])``; it vanishes
    when the trajectory assumptions hold.
    """
    scheme = _oracle_scheme(scheme)
    U = as_subset(subset, spec.d)
    err_U = bayes_risk(scheme, spec, U, budget)
    if err_S is None:
        err_S = err_U if U == spec.S else bayes_risk(scheme, spec, spec.S, budget)
    m = residual = None
    if scheme is not Scheme.PCL:
        m = m_expectation(spec, U, scheme, budget)
        residual = err_U - (baseline_risk(scheme, spec, budget) + m)
    return RiskReport(scheme.value, U, err_U, float(err_S), err_U - err_S, m, residual)


def subset_risks(
    scheme,
    spec: DistributionSpec,
    d0: int,
    budget: int = DEFAULT_ENTRY_BUDGET,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
    decompose: bool = True,
) -> list[RiskReport]:
    """Risk reports for every size-``d0`` subset, in lexicographic order."""
    scheme = _oracle_scheme(scheme)
    check_subset_budget(spec.d, d0, subset_budget)
    err_S = bayes_risk(scheme, spec, spec.S, budget)
    out = []
    for U in itertools.combinations(range(spec.d), d0):
        if decompose:
            out.append(population_risk(scheme, spec, U, budget, err_S))
        else:
            err_U = bayes_risk(scheme, spec, U, budget)
            out.append(RiskReport(scheme.value, U, err_U, err_S, err_U - err_S))
    return out


def optimal_subset(
    scheme,
    spec: DistributionSpec,
    d0: int,
    budget: int = DEFAULT_ENTRY_BUDGET,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
    tol: float = UNIQUENESS_TOL,
) -> OptimalSubset:
    """Exhaustive argmin of the Bayes risk over size-``d0`` subsets.

    The winner is unique when the runner-up is worse by more than ``tol``;
    exact ties keep the lexicographically first subset.
    """
    reports = subset_risks(scheme, spec, d0, budget, subset_budget, decompose=False)
    ranked = sorted(reports, key=lambda r: (r.err_U, r.subset))
    best = ranked[0]
    gap = ranked[1].err_U - best.err_U if len(ranked) > 1 else math.inf
    return OptimalSubset(best.subset, best.err_U, gap > tol, gap, tuple(reports))


def epsilon_zero(
    scheme,
    spec: DistributionSpec,
    d0: int,
    budget: int = DEFAULT_ENTRY_BUDGET,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
) -> float:
    """``min over |U| = d0 with S not in U of err(U) - err(S)``."""
    S = set(spec.S)
    reports = subset_risks(scheme, spec, d0, budget, subset_budget, decompose=False)
    excess = [r.excess for r in reports if not S <= set(r.subset)]
    if not excess:
        raise SpecError(f"every subset of size {d0} contains S")
    return float(min(excess))


def unlabeled_sample_bound(epsilon0: float, d: int, d0: int, delta: float) -> float:
    """``2 (ln C(d, d0) + ln(4/delta)) / epsilon0**2`` (natural logarithm)."""
    if not 0.0 < delta < 1.0:
        raise SpecError(f"delta must lie in (0, 1), got {delta}")
    if not 0 < d0 <= d:
        raise SpecError(f"need 0 < d0 <= d, got d0={d0}, d={d}")
    if not epsilon0 > 0.0:
        raise SpecError(f"epsilon0 = {epsilon0} <= 0: S is not identifiable, no finite bound")
    return 2.0 * (math.log(math.comb(d, d0)) + math.log(4.0 / delta)) / epsilon0**2


def bound_report(
    scheme,
    spec: DistributionSpec,
    d0: int | None = None,
    delta: float = 0.05,
    vc_f: float | None = None,
    budget: int = DEFAULT_ENTRY_BUDGET,
) -> BoundReport:
    """Epsilon-zero and the unlabeled sample bound; the bound is infinite when epsilon-zero is 0."""
    scheme = _oracle_scheme(scheme)
    d0 = len(spec.S) if d0 is None else d0
    eps = epsilon_zero(scheme, spec, d0, budget)
    m = unlabeled_sample_bound(eps, spec.d, d0, delta) if eps > 0 else math.inf
    return BoundReport(scheme.value, eps, m, spec.d, d0, delta, vc_f)


def write_risk_csv(reports: Iterable[RiskReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "subset", "err", "excess", "m_expectation"])
        for r in reports:
            m = "" if r.m_expectation is None else repr(r.m_expectation)
            writer.writerow([r.scheme, " ".join(map(str, r.subset)), repr(r.err_U), repr(r.excess), m])
