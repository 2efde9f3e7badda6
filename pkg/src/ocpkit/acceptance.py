"""Acceptance checks shared by ``run-all --check`` and the test suite.

Each ``criterion_*`` function computes the quantities behind one check and
returns a :class:`CriterionResult` holding the raw values, so callers can
apply or display the thresholds themselves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .distribution import DistributionSpec, encode, inject_violation, load_spec, sample_trajectories, verify_assumptions
from .learner import recovery_score
from .oracle import (
    DECOMPOSITION_TOL,
    baseline_risk,
    bayes_risk,
    epsilon_zero,
    optimal_subset,
    population_risk,
    unlabeled_sample_bound,
)
from .rng import substream
from .sampling import SINGLE_TRAJECTORY_SCHEMES, Scheme, sample_pairs, scheme_pair_law


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str = ""
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.title}: {self.detail}"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "detail": self.detail}


def _specs(names: Sequence[str]) -> list[DistributionSpec]:
    return [load_spec(n) for n in names]


def criterion_1(names=("dist1", "dist2"), min_gap: float = 1e-6) -> CriterionResult:
    values, ok = {}, True
    for spec in _specs(names):
        for scheme in (Scheme.OCP, Scheme.OCP_BIASED):
            best = optimal_subset(scheme, spec, len(spec.S))
            values[(spec.name, scheme.value)] = (best.subset, best.gap_to_second)
            ok &= best.subset == spec.S and best.is_unique and best.gap_to_second > min_gap
    gaps = ", ".join(f"{n}/{s} gap={g:.3g}" for (n, s), (_, g) in values.items())
    return CriterionResult(1, "S is the strict oracle argmin for OCP and OCP-biased", ok, gaps, values)


def criterion_2(name: str = "dist1") -> CriterionResult:
    spec = load_spec(name)
    best = optimal_subset(Scheme.PCL, spec, len(spec.S))
    periodic = [i for i, bg in zip(spec.background_indices, spec.background) if bg.kind == "periodic"]
    score = recovery_score(best.subset, spec.S)
    ok = bool(periodic) and set(periodic) <= set(best.subset) and score <= 3
    values = {"subset": best.subset, "recovery": score, "periodic": periodic}
    return CriterionResult(2, "PCL optimum on dist1 takes the periodic feature", ok, f"optimum {best.subset}, recovery {score}", values)


def criterion_3(names=("dist1", "dist2")) -> CriterionResult:
    worst_resid = 0.0
    worst_lemma1 = 0.0
    min_m = math.inf
    for spec in _specs(names):
        S = set(spec.S)
        err_S = bayes_risk(Scheme.OCP, spec, spec.S)
        worst_lemma1 = max(worst_lemma1, abs(err_S - baseline_risk(Scheme.OCP, spec)))
        for scheme in (Scheme.OCP, Scheme.OCP_BIASED):
            for U in itertools.combinations(range(spec.d), len(spec.S)):
                r = population_risk(scheme, spec, U)
                worst_resid = max(worst_resid, abs(r.decomposition_residual))
                if not S <= set(U):
                    min_m = min(min_m, r.m_expectation)
    ok = worst_resid <= DECOMPOSITION_TOL and worst_lemma1 <= DECOMPOSITION_TOL and min_m > 0
    values = {"max_residual": worst_resid, "lemma1_residual": worst_lemma1, "min_m_expectation": min_m}
    detail = f"max residual {worst_resid:.2e}, err(S) identity {worst_lemma1:.2e}, min E[m_U] {min_m:.3g}"
    return CriterionResult(3, "err(U) decomposition identities", ok, detail, values)


def criterion_4(names=("dist1", "dist2")) -> CriterionResult:
    values = {}
    ok = True
    for spec in _specs(names):
        e_ocp = epsilon_zero(Scheme.OCP, spec, len(spec.S))
        e_bias = epsilon_zero(Scheme.OCP_BIASED, spec, len(spec.S))
        values[spec.name] = (e_ocp, e_bias)
        ok &= e_ocp > e_bias
    bound = unlabeled_sample_bound(0.1, 8, 4, 0.05)
    values["bound"] = bound
    ok &= abs(bound - 1726.1) <= 0.1
    detail = ", ".join(f"{n}: {a:.4g} > {b:.4g}" for n, (a, b) in ((k, v) for k, v in values.items() if k != "bound"))
    return CriterionResult(4, "epsilon-zero ordering and bound value", ok, f"{detail}; bound {bound:.2f}", values)


def criterion_5(tables: Mapping[str, Mapping[str, Mapping[int, float]]]) -> CriterionResult:
    """``tables[preset][scheme][m]`` is the mean recovery."""
    failures = []
    d1, d2 = tables.get("dist1"), tables.get("dist2")
    if d1 is None or d2 is None:
        return CriterionResult(5, "recovery sweep shape", False, "needs dist1 and dist2 sweeps")
    top = 16000
    if any(top not in d[s] for d in (d1, d2) for s in ("ocp", "pcl", "ocp_biased")):
        return CriterionResult(5, "recovery sweep shape", False, "grid does not reach m=16000")
    if d1["ocp"][top] < 3.95:
        failures.append(f"dist1 OCP {d1['ocp'][top]:.2f} < 3.95")
    if d1["pcl"][top] > 3.1:
        failures.append(f"dist1 PCL {d1['pcl'][top]:.2f} > 3.1")
    for s in ("ocp", "ocp_biased", "pcl"):
        if d2[s][top] < 3.9:
            failures.append(f"dist2 {s} {d2[s][top]:.2f} < 3.9")
    grid = sorted(d2["ocp"])
    for m in grid:
        if d2["ocp"][m] < d2["ocp_biased"][m]:
            failures.append(f"dist2 m={m}: OCP {d2['ocp'][m]:.2f} < OCP-biased {d2['ocp_biased'][m]:.2f}")
        if d2["ocp_biased"][m] < d2["pcl"][m] - 0.05:
            failures.append(f"dist2 m={m}: OCP-biased {d2['ocp_biased'][m]:.2f} < PCL {d2['pcl'][m]:.2f} - 0.05")
    lead = max(d2["ocp"][m] - d2["pcl"][m] for m in grid if m < top)
    if lead < 0.2:
        failures.append(f"dist2 max OCP-PCL lead {lead:.2f} < 0.2")
    values = {"failures": failures, "max_ocp_pcl_lead": lead}
    detail = "all sub-checks hold" if not failures else "; ".join(failures)
    return CriterionResult(5, "recovery sweep shape", not failures, detail, values)


def plug_in_risk(scheme, spec: DistributionSpec, subset, pairs) -> tuple[float, float, float]:
    """``(exact, empirical, standard_error)`` for the exact-posterior classifier on sampled pairs."""
    law = scheme_pair_law(scheme, spec, subset)
    predict_pos = law.pos > law.neg
    cf = encode(pairs.x_first, subset)
    cs = encode(pairs.x_second, subset)
    guess = np.where(predict_pos[cf, cs], 1, -1)
    emp = float(np.mean(guess != pairs.y))
    exact = float(np.minimum(law.pos, law.neg).sum())
    se = math.sqrt(exact * (1.0 - exact) / len(pairs))
    return exact, emp, se


def criterion_6(names=("dist1", "dist2"), n_pairs: int = 100_000, n_subsets: int = 10, seed: int = 0) -> CriterionResult:
    """Each subset gets its own fresh sample, so the checks are independent."""
    worst = 0.0
    checks = 0
    for spec in _specs(names):
        for scheme in SINGLE_TRAJECTORY_SCHEMES:
            pick = substream(seed, "mc-subsets", spec.name, scheme.value)
            for j in range(n_subsets):
                k = int(pick.integers(1, spec.d + 1))
                U = tuple(sorted(pick.choice(spec.d, size=k, replace=False).tolist()))
                traj = sample_trajectories(spec, n_pairs, substream(seed, "mc-traj", spec.name, scheme.value, j))
                pairs = sample_pairs(scheme, traj, substream(seed, "mc-pairs", spec.name, scheme.value, j))
                exact, emp, se = plug_in_risk(scheme, spec, U, pairs)
                worst = max(worst, abs(emp - exact) / se)
                checks += 1
    return CriterionResult(6, "Monte Carlo agrees with exact risk", worst <= 3.0, f"{checks} checks, worst |z| = {worst:.2f}", {"worst_z": worst, "checks": checks})


def criterion_7(names=("dist1", "dist2")) -> CriterionResult:
    problems = []
    for spec in _specs(names):
        if not verify_assumptions(spec).all_hold:
            problems.append(f"{spec.name} fails verification")
        for a in ("A1", "A2", "A3"):
            report = verify_assumptions(inject_violation(spec, a))
            flag = {"A1": report.a1_irreversible, "A2": report.a2_reversible_background, "A3": report.a3_lone_activation}[a]
            if flag or a not in report.witnesses:
                problems.append(f"{spec.name} {a} injection not caught")
    detail = "presets pass, every injection caught with a witness" if not problems else "; ".join(problems)
    return CriterionResult(7, "assumption verifier", not problems, detail, {"problems": problems})


def criterion_8(curves, small_n: int = 16, large_n: int = 16000) -> CriterionResult:
    """``curves`` is an :class:`~ocpkit.downstream.ExcessRiskCurves`."""
    ns = {r.n for r in curves.rows}
    if small_n not in ns or large_n not in ns:
        return CriterionResult(8, "downstream A_pt vs A_ds", False, f"needs n={small_n} and n={large_n}")
    pairs = curves.paired(small_n)
    pt = float(np.mean([a for a, _ in pairs]))
    ds = float(np.mean([b for _, b in pairs]))
    not_worse = sum(a <= b for a, b in pairs)
    strict = sum(a < b for a, b in pairs)
    big_pt = curves.mean_excess(large_n, "A_pt")
    big_ds = curves.mean_excess(large_n, "A_ds")
    need = math.ceil(0.8 * len(pairs))
    ok = pt <= ds and not_worse >= need and big_pt <= 0.01 and big_ds <= 0.01
    detail = (
        f"n={small_n}: mean excess A_pt {pt:.4f} vs A_ds {ds:.4f}, A_pt not worse in {not_worse}/{len(pairs)}"
        f" (strictly better in {strict}); n={large_n}: {big_pt:.2e} / {big_ds:.2e}"
    )
    values = {"pt": pt, "ds": ds, "not_worse": not_worse, "strict": strict, "replicates": len(pairs), "large_pt": big_pt, "large_ds": big_ds}
    return CriterionResult(8, "downstream A_pt vs A_ds", ok, detail, values)


def evaluate_bundle(bundle: dict) -> list[CriterionResult]:
    """Checks that can be decided from a ``run_all`` bundle plus the oracle.

    Solver properties (9) and determinism (10) are covered by the test suite.
    """
    from .harness import summarize, summary_table

    names = tuple(bundle["sweeps"])
    tables = {n: summary_table(summarize(res)) for n, res in bundle["sweeps"].items()}
    return [
        criterion_1(names),
        criterion_2(),
        criterion_3(names),
        criterion_4(names),
        criterion_5(tables),
        criterion_6(names),
        criterion_7(names),
        criterion_8(bundle["downstream"]),
    ]
