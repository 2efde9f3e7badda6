"""Compiled kernels vs the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Prints one
line per kernel with the best-of-N time for each backend and the speedup.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ocpkit import _kernels_py, learner
from ocpkit.distribution import dist1, sample_trajectories
from ocpkit.learner import _pattern_features, erm_subset_search
from ocpkit.rng import substream
from ocpkit.sampling import sample_pairs


def _workload(m: int):
    spec = dist1()
    traj = sample_trajectories(spec, m, substream(0, "bench"))
    pairs = sample_pairs("ocp", traj, substream(0, "bench-pairs"))
    xf = np.ascontiguousarray(pairs.x_first)
    xs = np.ascontiguousarray(pairs.x_second)
    y = np.ascontiguousarray(pairs.y)
    sub = np.array([0, 1, 2, 7], dtype=np.intp)
    pos, neg = _kernels_py.pattern_counts(xf, xs, y, sub)
    nz = (pos + neg) > 0
    phi = np.ascontiguousarray(_pattern_features(4)[nz])
    return pairs, (xf, xs, y, sub), (phi, pos[nz], neg[nz])


def _best(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=16000, help="pairs in the workload")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    try:
        from ocpkit import _kernels
    except ImportError:
        print("compiled kernels not built; run `pip install --no-build-isolation -e .` first")
        return 1

    pairs, count_args, fit_args = _workload(args.m)
    phi, P, Q = fit_args
    cases = {
        "pattern_counts": lambda k: k.pattern_counts(*count_args),
        "fit_l2": lambda k: k.fit_l2(phi, P, Q, 1e-3, 1e-8, 5000, False),
        "zero_one_risk": lambda k: k.zero_one_risk(phi, P, Q, np.ones(phi.shape[1]), 0.0),
    }
    print(f"workload: dist1, m={args.m}, {phi.shape[0]} distinct pair patterns, best of {args.repeat}")
    print(f"{'kernel':<22}{'compiled':>12}{'numpy':>12}{'speedup':>10}")
    for name, call in cases.items():
        fast = _best(lambda: call(_kernels), args.repeat, 20)
        slow = _best(lambda: call(_kernels_py), args.repeat, 20)
        print(f"{name:<22}{fast * 1e6:>10.1f}us{slow * 1e6:>10.1f}us{slow / fast:>9.1f}x")

    saved = learner.kernels
    timings = {}
    try:
        for label, backend in (("compiled", _kernels), ("numpy", _kernels_py)):
            learner.kernels = backend
            timings[label] = _best(lambda: erm_subset_search(pairs, 4), args.repeat, 1)
    finally:
        learner.kernels = saved
    c, n = timings["compiled"], timings["numpy"]
    print(f"{'subset search (70)':<22}{c * 1e3:>10.1f}ms{n * 1e3:>10.1f}ms{n / c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
