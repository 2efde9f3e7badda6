"""Recovery sweeps over unlabeled sample sizes, and the full run bundle.

Every ``(m, replicate)`` cell draws its trajectories from the substream
``(seed, "traj", m, replicate)`` and each scheme's pairs from
``(seed, "pairs", scheme, m, replicate)``.  Schemes therefore see the same
trajectories within a cell, and no cell's randomness depends on which other
cells or schemes are part of the run.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._backend import BACKEND
from .distribution import DistributionSpec, SpecError, load_spec, sample_trajectories, verify_assumptions
from .learner import Regularization, erm_subset_search, recovery_score
from .rng import substream
from .sampling import SINGLE_TRAJECTORY_SCHEMES, Scheme, sample_pairs

PAPER_M_GRID = (50, 100, 200, 400, 600, 800, 1000, 2000, 4000, 8000, 16000)
PAPER_REPLICATES = 100
RESUME_MARKER_SUFFIX = ".resume.json"


@dataclass(frozen=True)
class SweepConfig:
    spec: str | DistributionSpec = "dist1"
    schemes: tuple[Scheme, ...] = SINGLE_TRAJECTORY_SCHEMES
    m_grid: tuple[int, ...] = PAPER_M_GRID
    replicates: int = PAPER_REPLICATES
    d0: int | None = None
    master_seed: int = 0
    lam: float = 1e-3
    tie_break: str = "lex"

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s) for s in self.schemes))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if not self.schemes:
            raise SpecError("no schemes")
        if len(set(self.schemes)) != len(self.schemes):
            raise SpecError("duplicate schemes")
        if not self.m_grid or any(m < 2 for m in self.m_grid):
            raise SpecError("m_grid must be non-empty with every m >= 2")
        if any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])):
            raise SpecError("m_grid must be strictly ascending")
        if self.replicates < 1:
            raise SpecError("replicates must be >= 1")
        if self.master_seed < 0:
            raise SpecError("seed must be >= 0")
        if self.tie_break not in ("lex", "loss"):
            raise SpecError("tie_break must be 'lex' or 'loss'")
        Regularization("l2", self.lam)
        if not isinstance(self.spec, DistributionSpec):
            object.__setattr__(self, "spec", load_spec(self.spec))
        if Scheme.PATIENT_CONTRASTIVE in self.schemes and min(self.m_grid) < 2:
            raise SpecError("patient-contrastive sampling needs m >= 2")

    @property
    def subset_size(self) -> int:
        return len(self.spec.S) if self.d0 is None else self.d0

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "schemes": [s.value for s in self.schemes],
            "m_grid": list(self.m_grid),
            "replicates": self.replicates,
            "d0": self.subset_size,
            "master_seed": self.master_seed,
            "lam": self.lam,
            "tie_break": self.tie_break,
        }

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    m: int
    replicate: int
    recovered_count: int
    selected_subset: tuple[int, ...]
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[SweepRow]

    def to_csv(self, path: str | Path) -> None:
        """Write rows; wall time is left out so reruns produce identical bytes."""
        write_sweep_rows(self.rows, path)

    @classmethod
    def from_csv(cls, config: SweepConfig, path: str | Path) -> "SweepResult":
        return cls(config, read_sweep_rows(path))


SWEEP_COLUMNS = ["scheme", "m", "replicate", "recovered_count", "selected_subset"]


def write_sweep_rows(rows: Sequence[SweepRow], path: str | Path, append: bool = False) -> None:
    new = not append or not Path(path).exists()
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([r.scheme, r.m, r.replicate, r.recovered_count, " ".join(map(str, r.selected_subset))])


def read_sweep_rows(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        return [
            SweepRow(r["scheme"], int(r["m"]), int(r["replicate"]), int(r["recovered_count"]), tuple(int(v) for v in r["selected_subset"].split()))
            for r in csv.DictReader(fh)
        ]


def _run_cell(args) -> list[SweepRow]:
    spec_doc, schemes, m, rep, d0, seed, lam, tie_break = args
    spec = DistributionSpec.from_dict(spec_doc)
    traj = sample_trajectories(spec, m, substream(seed, "traj", m, rep))
    reg = Regularization("l2", lam)
    out = []
    for scheme in schemes:
        start = time.perf_counter()
        pairs = sample_pairs(scheme, traj, substream(seed, "pairs", scheme, m, rep))
        found = erm_subset_search(pairs, d0, reg, tie_break=tie_break).subset
        out.append(SweepRow(scheme, m, rep, recovery_score(found, spec.S), found, time.perf_counter() - start))
    return out


def _row_key(config: SweepConfig):
    order = {s.value: i for i, s in enumerate(config.schemes)}
    return lambda r: (order[r.scheme], r.m, r.replicate)


def run_sweep(config: SweepConfig, threads: int = 1, out_dir: str | Path | None = None) -> SweepResult:
    """Run every ``(scheme, m, replicate)`` cell and return rows in a fixed order.

    With ``out_dir`` finished cells are appended to a partial CSV next to a
    resume marker, and a rerun with the same config skips them.  The marker
    is removed once the sweep completes.
    """
    if threads < 1:
        raise SpecError("threads must be >= 1")
    schemes = [s.value for s in config.schemes]
    cells = [(m, rep) for m in config.m_grid for rep in range(config.replicates)]
    done: dict[tuple[int, int], list[SweepRow]] = {}
    partial = marker = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"sweep_{config.spec.name or 'custom'}"
        partial = out_dir / f"{stem}.partial.csv"
        marker = out_dir / f"{stem}{RESUME_MARKER_SUFFIX}"
        resumable = marker.exists() and partial.exists() and json.loads(marker.read_text()).get("fingerprint") == config.fingerprint()
        if resumable:
            for row in read_sweep_rows(partial):
                done.setdefault((row.m, row.replicate), []).append(row)
            # a cell interrupted mid-write is redone from scratch
            done = {k: v for k, v in done.items() if len(v) == len(schemes)}
        if partial.exists():
            partial.unlink()
        write_sweep_rows([r for c in cells if c in done for r in done[c]], partial)
        marker.write_text(json.dumps({"fingerprint": config.fingerprint(), "partial": partial.name}))

    todo = [c for c in cells if c not in done]
    spec_doc = config.spec.to_dict()
    jobs = [(spec_doc, schemes, m, rep, config.subset_size, config.master_seed, config.lam, config.tie_break) for m, rep in todo]

    def record(cell, rows):
        done[cell] = rows
        if partial is not None:
            write_sweep_rows(rows, partial, append=True)

    if threads == 1 or len(jobs) <= 1:
        for cell, job in zip(todo, jobs):
            record(cell, _run_cell(job))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for cell, rows in zip(todo, pool.map(_run_cell, jobs, chunksize=max(1, len(jobs) // (8 * threads)))):
                record(cell, rows)

    rows = sorted((r for c in cells for r in done[c]), key=_row_key(config))
    if marker is not None:
        marker.unlink(missing_ok=True)
        partial.unlink(missing_ok=True)
    return SweepResult(config, rows)


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    m: int
    n: int
    mean: float
    sd: float


def summarize(result: SweepResult | Sequence[SweepRow]) -> list[SummaryRow]:
    """Mean and population standard deviation of recovery per ``(scheme, m)``."""
    rows = result.rows if isinstance(result, SweepResult) else list(result)
    if not rows:
        raise SpecError("empty sweep result")
    groups: dict[tuple[str, int], list[int]] = {}
    for r in rows:
        groups.setdefault((r.scheme, r.m), []).append(r.recovered_count)
    out = []
    for (scheme, m), vals in groups.items():
        arr = np.asarray(vals, dtype=float)
        out.append(SummaryRow(scheme, m, len(arr), float(arr.mean()), float(arr.std(ddof=0))))
    return out


def write_summary(summary: Sequence[SummaryRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "m", "n", "mean_recovery", "sd_recovery"])
        for s in summary:
            writer.writerow([s.scheme, s.m, s.n, repr(s.mean), repr(s.sd)])


def summary_table(summary: Sequence[SummaryRow]) -> dict[str, dict[int, float]]:
    """``{scheme: {m: mean}}``."""
    out: dict[str, dict[int, float]] = {}
    for s in summary:
        out.setdefault(s.scheme, {})[s.m] = s.mean
    return out


# ------------------------------------------------------------------ run-all
@dataclass(frozen=True)
class Profile:
    name: str
    m_grid: tuple[int, ...]
    replicates: int
    downstream_m: int
    downstream_n_grid: tuple[int, ...]
    downstream_replicates: int


PROFILES = {
    "paper": Profile("paper", PAPER_M_GRID, PAPER_REPLICATES, 16000, (16, 64, 256, 1000, 4000, 16000), 100),
    "quick": Profile("quick", (50, 200, 1000), 3, 1000, (16, 256), 4),
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    return {
        "ocpkit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "backend": BACKEND,
        "platform": platform.platform(),
    }


def run_all(
    out_dir: str | Path,
    profile: str = "paper",
    seed: int = 0,
    threads: int = 1,
    presets: Sequence[str] = ("dist1", "dist2"),
    check: bool = False,
) -> dict:
    """Sweeps, oracle tables, bounds, assumption checks and downstream curves.

    Writes CSV/JSON files into ``out_dir`` plus ``manifest.json`` (seed,
    versions, timings, file hashes) and returns the manifest.
    """
    from .downstream import DownstreamTask, excess_risk_curves
    from .oracle import ORACLE_SCHEMES, bound_report, subset_risks, write_risk_csv

    if profile not in PROFILES:
        raise SpecError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    prof = PROFILES[profile]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    timings: dict[str, float] = {}
    files: list[str] = []
    bundle: dict = {"sweeps": {}, "oracle": {}, "bounds": {}, "verify": {}}

    for name in presets:
        spec = load_spec(name)
        tick = time.perf_counter()
        cfg = SweepConfig(spec=spec, m_grid=prof.m_grid, replicates=prof.replicates, master_seed=seed)
        result = run_sweep(cfg, threads=threads, out_dir=out)
        result.to_csv(out / f"sweep_{name}.csv")
        summary = summarize(result)
        write_summary(summary, out / f"sweep_{name}_summary.csv")
        files += [f"sweep_{name}.csv", f"sweep_{name}_summary.csv"]
        bundle["sweeps"][name] = result
        timings[f"sweep_{name}"] = time.perf_counter() - tick

        tick = time.perf_counter()
        reports = []
        for scheme in ORACLE_SCHEMES:
            reports += subset_risks(scheme, spec, len(spec.S))
        write_risk_csv(reports, out / f"oracle_{name}.csv")
        bounds = {s.value: bound_report(s, spec).to_dict() for s in ORACLE_SCHEMES}
        (out / f"bounds_{name}.json").write_text(json.dumps(bounds, indent=2, sort_keys=True) + "\n")
        report = verify_assumptions(spec)
        (out / f"verify_{name}.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        files += [f"oracle_{name}.csv", f"bounds_{name}.json", f"verify_{name}.json"]
        bundle["oracle"][name] = reports
        bundle["bounds"][name] = bounds
        bundle["verify"][name] = report
        timings[f"oracle_{name}"] = time.perf_counter() - tick

    tick = time.perf_counter()
    spec = load_spec(presets[0])
    task = DownstreamTask.for_spec(spec)
    curves = excess_risk_curves(spec, task, Scheme.OCP, prof.downstream_m, prof.downstream_n_grid, prof.downstream_replicates, seed)
    curves.to_csv(out / f"downstream_{spec.name}.csv")
    curves.summary_to_csv(out / f"downstream_{spec.name}_summary.csv")
    files += [f"downstream_{spec.name}.csv", f"downstream_{spec.name}_summary.csv"]
    bundle["downstream"] = curves
    timings["downstream"] = time.perf_counter() - tick

    manifest = {
        "profile": profile,
        "seed": seed,
        "threads": threads,
        "presets": list(presets),
        "downstream": {"threshold": task.threshold, "label_noise": task.label_noise, "m_unlabeled": prof.downstream_m},
        "versions": versions(),
        "command": " ".join(sys.argv),
        "wall_clock_seconds": time.time() - started,
        "timings": timings,
        "files": {f: _sha256(out / f) for f in files},
    }
    if check:
        from .acceptance import evaluate_bundle

        results = evaluate_bundle(bundle)
        manifest["acceptance"] = [r.to_dict() for r in results]
        manifest["acceptance_passed"] = all(r.passed for r in results)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))
