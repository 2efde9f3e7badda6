"""Command-line entry point: ``ocpkit <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 budget exceeded,
3 acceptance check failed (``run-all --check``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from .distribution import BudgetExceeded, SpecError, load_spec, sample_trajectories, verify_assumptions

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("ocpkit")


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (argparse would use 2, which means budget here)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _scheme_list(text: str):
    from .sampling import Scheme

    try:
        return tuple(Scheme.parse(v) for v in text.split(",") if v.strip())
    except SpecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p, seed=True, out=True):
    p.add_argument("--spec", default="dist1", help="dist1, dist2 or a JSON spec file")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if out:
        p.add_argument("--out", type=Path, default=Path("out"))


def build_parser() -> argparse.ArgumentParser:
    from .sampling import SINGLE_TRAJECTORY_SCHEMES

    default_schemes = ",".join(s.value for s in SINGLE_TRAJECTORY_SCHEMES)
    parser = _Parser(prog="ocpkit", description=__doc__.splitlines()[0])
    verbose = _Parser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[verbose], help="dump trajectories and labeled pairs")
    _common(p)
    p.add_argument("--n", type=int, default=100, help="number of trajectories")
    p.add_argument("--schemes", type=_scheme_list, default=_scheme_list(default_schemes))

    p = sub.add_parser("sweep", parents=[verbose], help="recovery vs unlabeled sample size")
    _common(p)
    p.add_argument("--schemes", type=_scheme_list, default=_scheme_list(default_schemes))
    p.add_argument("--m-grid", type=_int_list, default=None)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--d0", type=int, default=None)
    p.add_argument("--lam", type=float, default=1e-3)
    p.add_argument("--tie-break", choices=("lex", "loss"), default="lex")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("oracle", parents=[verbose], help="exact risks for every subset, epsilon-zero and the bound")
    _common(p, seed=False)
    p.add_argument("--schemes", type=_scheme_list, default=_scheme_list(default_schemes))
    p.add_argument("--d0", type=int, default=None)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--vc-f", type=float, default=None)

    p = sub.add_parser("verify", parents=[verbose], help="check the trajectory assumptions")
    _common(p, seed=False)

    p = sub.add_parser("downstream", parents=[verbose], help="A_pt vs A_ds excess-risk curves")
    _common(p)
    p.add_argument("--schemes", type=_scheme_list, default=_scheme_list("ocp"), help="pretraining scheme (first one is used)")
    p.add_argument("--m-unlabeled", type=int, default=16000)
    p.add_argument("--n-grid", type=_int_list, default=(16, 64, 256, 1000, 4000, 16000))
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1)

    p = sub.add_parser("select", parents=[verbose], help="L1 selection path on contrastive pairs")
    _common(p)
    p.add_argument("--schemes", type=_scheme_list, default=_scheme_list("ocp"), help="pair scheme (first one is used)")
    p.add_argument("--m", type=int, default=16000, help="number of pairs")
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--slack", type=int, default=0)

    p = sub.add_parser("run-all", parents=[verbose], help="every sweep, oracle table and curve in one bundle")
    p.add_argument("--profile", choices=("paper", "quick"), default="paper")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--check", action="store_true", help="evaluate acceptance checks; exit 3 on failure")
    return parser


def _write_manifest(out: Path, args, files, started, extra=None) -> None:
    from .harness import versions

    doc = {
        "command": args.command,
        "args": {k: (str(v) if isinstance(v, Path) else [str(x) for x in v] if isinstance(v, tuple) else v) for k, v in vars(args).items()},
        "versions": versions(),
        "wall_clock_seconds": time.time() - started,
        "files": {f: hashlib.sha256((out / f).read_bytes()).hexdigest() for f in files},
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _cmd_simulate(args, started):
    from .rng import substream
    from .sampling import sample_pairs

    if args.n < 1:
        raise SpecError("--n must be >= 1")
    spec = load_spec(args.spec)
    args.out.mkdir(parents=True, exist_ok=True)
    traj = sample_trajectories(spec, args.n, substream(args.seed, "simulate", "traj"))
    with open(args.out / "trajectories.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trajectory", "t"] + [f"x_{j}" for j in range(spec.d)])
        for i in range(args.n):
            for t in range(spec.tau):
                writer.writerow([i, t + 1] + traj[i, t].tolist())
    files = ["trajectories.csv"]
    for scheme in args.schemes:
        pairs = sample_pairs(scheme, traj, substream(args.seed, "simulate", "pairs", scheme.value))
        name = f"pairs_{scheme.value}.csv"
        pairs.to_csv(args.out / name)
        files.append(name)
    _write_manifest(args.out, args, files, started, {"spec": spec.to_dict()})
    return EXIT_OK


def _cmd_sweep(args, started):
    from .harness import PAPER_M_GRID, SweepConfig, run_sweep, summarize, write_summary

    spec = load_spec(args.spec)
    cfg = SweepConfig(
        spec=spec,
        schemes=args.schemes,
        m_grid=args.m_grid or PAPER_M_GRID,
        replicates=args.replicates,
        d0=args.d0,
        master_seed=args.seed,
        lam=args.lam,
        tie_break=args.tie_break,
    )
    result = run_sweep(cfg, threads=args.threads, out_dir=args.out)
    name = spec.name or "custom"
    result.to_csv(args.out / f"sweep_{name}.csv")
    summary = summarize(result)
    write_summary(summary, args.out / f"sweep_{name}_summary.csv")
    for s in summary:
        log.info("%-10s m=%-6d mean %.2f sd %.2f", s.scheme, s.m, s.mean, s.sd)
    _write_manifest(args.out, args, [f"sweep_{name}.csv", f"sweep_{name}_summary.csv"], started, {"config": cfg.to_dict()})
    return EXIT_OK


def _cmd_oracle(args, started):
    from .oracle import bound_report, subset_risks, write_risk_csv

    spec = load_spec(args.spec)
    d0 = len(spec.S) if args.d0 is None else args.d0
    args.out.mkdir(parents=True, exist_ok=True)
    reports, bounds = [], {}
    for scheme in args.schemes:
        reports += subset_risks(scheme, spec, d0)
        bounds[scheme.value] = bound_report(scheme, spec, d0, args.delta, args.vc_f).to_dict()
    name = spec.name or "custom"
    write_risk_csv(reports, args.out / f"oracle_{name}.csv")
    (args.out / f"bounds_{name}.json").write_text(json.dumps(bounds, indent=2, sort_keys=True) + "\n")
    print(json.dumps(bounds, indent=2, sort_keys=True))
    _write_manifest(args.out, args, [f"oracle_{name}.csv", f"bounds_{name}.json"], started)
    return EXIT_OK


def _cmd_verify(args, started):
    spec = load_spec(args.spec)
    report = verify_assumptions(spec).to_dict()
    args.out.mkdir(parents=True, exist_ok=True)
    name = spec.name or "custom"
    (args.out / f"verify_{name}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    _write_manifest(args.out, args, [f"verify_{name}.json"], started)
    return EXIT_OK


def _cmd_downstream(args, started):
    from .downstream import DownstreamTask, excess_risk_curves

    spec = load_spec(args.spec)
    task = DownstreamTask(spec.S, args.threshold, args.noise)
    curves = excess_risk_curves(spec, task, args.schemes[0], args.m_unlabeled, args.n_grid, args.replicates, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    name = spec.name or "custom"
    curves.to_csv(args.out / f"downstream_{name}.csv")
    curves.summary_to_csv(args.out / f"downstream_{name}_summary.csv")
    for row in curves.summary():
        log.info("n=%-6d A_pt %.4f A_ds %.4f win %.2f", row["n"], row["A_pt_mean_excess"], row["A_ds_mean_excess"], row["A_pt_win_rate"])
    _write_manifest(args.out, args, [f"downstream_{name}.csv", f"downstream_{name}_summary.csv"], started)
    return EXIT_OK


def _cmd_select(args, started):
    from .learner import l1_select
    from .rng import substream
    from .sampling import sample_pairs

    spec = load_spec(args.spec)
    if args.m < 2:
        raise SpecError("--m must be >= 2")
    target = len(spec.S) if args.target is None else args.target
    traj = sample_trajectories(spec, args.m, substream(args.seed, "select", "traj"))
    pairs = sample_pairs(args.schemes[0], traj, substream(args.seed, "select", "pairs", args.schemes[0].value))
    sel = l1_select(pairs, target, args.slack)
    args.out.mkdir(parents=True, exist_ok=True)
    name = spec.name or "custom"
    sel.to_csv(args.out / f"select_{name}.csv", spec.d)
    print(json.dumps({"features": list(sel.features), "lam": sel.lam, "count": sel.count, "hit": sel.hit, "warning": sel.warning}))
    _write_manifest(args.out, args, [f"select_{name}.csv"], started, {"lam": sel.lam, "warning": sel.warning})
    return EXIT_OK


def _cmd_run_all(args, started):
    from .harness import run_all

    if args.threads < 1:
        raise SpecError("--threads must be >= 1")
    manifest = run_all(args.out, args.profile, args.seed, args.threads, check=args.check)
    if args.check:
        for r in manifest["acceptance"]:
            print(f"criterion {r['number']:2d} [{'PASS' if r['passed'] else 'FAIL'}] {r['title']}: {r['detail']}")
        if not manifest["acceptance_passed"]:
            return EXIT_ACCEPTANCE
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
    "verify": _cmd_verify,
    "downstream": _cmd_downstream,
    "select": _cmd_select,
    "run-all": _cmd_run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = time.time()
    try:
        return COMMANDS[args.command](args, started)
    except BudgetExceeded as exc:
        print(f"ocpkit: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SpecError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"ocpkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
