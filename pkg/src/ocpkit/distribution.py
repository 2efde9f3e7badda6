"""Generative model for binary trajectories with irreversible features.

Features come in three families, laid out in a fixed global order:

* drivers -- switch on at most once and (normally) stay on,
* noisy copies -- per-step corrupted copies of a driver,
* background -- two-state chains that carry no order information.

Every feature belongs to exactly one independent *group*: a driver together
with any drivers locked to it and all noisy copies of those drivers, or a
single background feature.  Each group is driven by one latent two-state
Markov chain (possibly time-inhomogeneous) and each member is a memoryless
emission of that chain.  Exact joint laws are products over groups, which
keeps enumeration cost at ``O(4**|U|)`` per window pair instead of
exponential in ``tau * d``.

Indices are 0-based throughout.  A value vector restricted to a sorted
subset ``U = (u_0 < ... < u_{k-1})`` is encoded as the integer
``sum(x[u_i] << (k - 1 - i))``, so the first subset feature is the most
significant bit (C order of a ``(2,) * k`` array).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import as_generator

DEFAULT_ENTRY_BUDGET = 1 << 24

BACKGROUND_KINDS = ("periodic", "markov_stay", "iid", "markov")


class SpecError(ValueError):
    """Invalid distribution or configuration."""


class BudgetExceeded(RuntimeError):
    """An exact table would exceed the configured entry budget."""


@dataclass(frozen=True)
class DriverFeature:
    """Irreversible feature.

    With probability ``activation_prob`` the feature switches on at a time
    drawn uniformly from ``1..tau`` (so it may already be on at ``t = 1``)
    and stays on.  ``deactivation_prob`` and ``locked_to`` only exist to
    build deliberately broken specs: the former lets an active feature
    switch off again with that per-step probability, the latter makes the
    column an exact copy of another driver.
    """

    activation_prob: float
    deactivation_prob: float = 0.0
    locked_to: int | None = None


@dataclass(frozen=True)
class NoisyFeature:
    """Copy of driver ``parent`` that disagrees with it w.p. ``epsilon`` per step."""

    parent: int
    epsilon: float


@dataclass(frozen=True)
class BackgroundFeature:
    """Reversible background feature.

    ``kind`` is one of

    * ``periodic``: uniform initial state, then ``X[t+1] = 1 - X[t]``;
    * ``markov_stay``: uniform initial state, value repeats w.p. ``param``;
    * ``iid``: independent Bernoulli(``param``) per step;
    * ``markov``: general chain, ``param = (p_init, p01, p10)``.  Only the
      stationary choices are reversible.
    """

    kind: str
    param: float | tuple[float, ...] | None = None

    def chain(self) -> tuple[np.ndarray, np.ndarray]:
        """Initial distribution and one-step transition matrix."""
        if self.kind == "periodic":
            return np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]])
        if self.kind == "markov_stay":
            p = float(self.param)
            return np.array([0.5, 0.5]), np.array([[p, 1.0 - p], [1.0 - p, p]])
        if self.kind == "iid":
            p = float(self.param)
            row = [1.0 - p, p]
            return np.array(row), np.array([row, row])
        if self.kind == "markov":
            p_init, p01, p10 = (float(v) for v in self.param)
            return (
                np.array([1.0 - p_init, p_init]),
                np.array([[1.0 - p01, p01], [p10, 1.0 - p10]]),
            )
        raise SpecError(f"unknown background kind {self.kind!r}")

    def params(self) -> tuple[float, ...]:
        if self.param is None:
            return ()
        if isinstance(self.param, (int, float)):
            return (float(self.param),)
        return tuple(float(v) for v in self.param)


@dataclass(frozen=True)
class _Group:
    members: tuple[int, ...]
    # emission flip probability per member (0 for the chain itself)
    flips: tuple[float, ...]
    init: np.ndarray = field(compare=False)
    # transitions[t] maps the state at time t+1 to t+2 (0-based t)
    transitions: np.ndarray = field(compare=False)
    marginals: np.ndarray = field(compare=False)


def _check_prob(value: float, what: str, open_interval: bool = False) -> None:
    if not isinstance(value, (int, float)) or math.isnan(value):
        raise SpecError(f"{what} must be a number, got {value!r}")
    if open_interval:
        if not 0.0 < value < 1.0:
            raise SpecError(f"{what} must lie in (0, 1), got {value}")
    elif not 0.0 <= value <= 1.0:
        raise SpecError(f"{what} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class DistributionSpec:
    """Full description of a trajectory distribution."""

    tau: int
    drivers: tuple[DriverFeature, ...]
    noisy: tuple[NoisyFeature, ...] = ()
    background: tuple[BackgroundFeature, ...] = ()
    name: str = ""
    # allow eps = 0 / eps = 1 copies; only used to build test fixtures
    allow_degenerate_noise: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "drivers", tuple(self.drivers))
        object.__setattr__(self, "noisy", tuple(self.noisy))
        object.__setattr__(self, "background", tuple(self.background))
        if not isinstance(self.tau, int) or self.tau < 2:
            raise SpecError(f"tau must be an integer >= 2, got {self.tau!r}")
        if not self.drivers:
            raise SpecError("at least one driver feature is required")
        n_drv = len(self.drivers)
        for i, drv in enumerate(self.drivers):
            _check_prob(drv.activation_prob, f"drivers[{i}].activation_prob")
            _check_prob(drv.deactivation_prob, f"drivers[{i}].deactivation_prob")
            if drv.locked_to is not None:
                if not 0 <= drv.locked_to < n_drv or drv.locked_to == i:
                    raise SpecError(f"drivers[{i}].locked_to is not another driver")
                if self.drivers[drv.locked_to].locked_to is not None:
                    raise SpecError(f"drivers[{i}] is locked to a locked driver")
        for j, nf in enumerate(self.noisy):
            if not isinstance(nf.parent, int) or not 0 <= nf.parent < n_drv:
                raise SpecError(f"noisy[{j}].parent must be a driver index, got {nf.parent!r}")
            _check_prob(nf.epsilon, f"noisy[{j}].epsilon", open_interval=not self.allow_degenerate_noise)
        for b, bg in enumerate(self.background):
            if bg.kind not in BACKGROUND_KINDS:
                raise SpecError(f"background[{b}].kind must be one of {BACKGROUND_KINDS}")
            n_params = {"periodic": 0, "markov_stay": 1, "iid": 1, "markov": 3}[bg.kind]
            params = bg.params()
            if len(params) != n_params:
                raise SpecError(f"background[{b}] ({bg.kind}) takes {n_params} parameter(s)")
            for p in params:
                _check_prob(p, f"background[{b}].param")

    # ------------------------------------------------------------------ layout
    @property
    def d(self) -> int:
        return len(self.drivers) + len(self.noisy) + len(self.background)

    @property
    def driver_indices(self) -> tuple[int, ...]:
        return tuple(range(len(self.drivers)))

    @property
    def noisy_indices(self) -> tuple[int, ...]:
        start = len(self.drivers)
        return tuple(range(start, start + len(self.noisy)))

    @property
    def background_indices(self) -> tuple[int, ...]:
        start = len(self.drivers) + len(self.noisy)
        return tuple(range(start, start + len(self.background)))

    @property
    def S(self) -> tuple[int, ...]:
        return self.driver_indices

    def leader(self, driver: int) -> int:
        locked = self.drivers[driver].locked_to
        return driver if locked is None else locked

    # ------------------------------------------------------------------ chains
    def _driver_chain(self, drv: DriverFeature) -> tuple[np.ndarray, np.ndarray]:
        tau, p, r = self.tau, drv.activation_prob, drv.deactivation_prob
        init = np.array([1.0 - p / tau, p / tau])
        trans = np.empty((tau - 1, 2, 2))
        for t in range(1, tau):
            # hazard of activating at t+1 given still off at t
            h = (p / tau) / (1.0 - p * t / tau)
            trans[t - 1] = [[1.0 - h, h], [r, 1.0 - r]]
        return init, trans

    @cached_property
    def groups(self) -> tuple[_Group, ...]:
        out = []
        n_drv = len(self.drivers)
        for i, drv in enumerate(self.drivers):
            if drv.locked_to is not None:
                continue
            members = [k for k in range(n_drv) if self.leader(k) == i]
            flips = [0.0] * len(members)
            for j, nf in enumerate(self.noisy):
                if self.leader(nf.parent) == i:
                    members.append(n_drv + j)
                    flips.append(nf.epsilon)
            init, trans = self._driver_chain(drv)
            out.append(_make_group(tuple(members), tuple(flips), init, trans))
        for b, bg in enumerate(self.background):
            init, step = bg.chain()
            trans = np.broadcast_to(step, (self.tau - 1, 2, 2)).copy()
            out.append(_make_group((self.background_indices[b],), (0.0,), init, trans))
        return tuple(out)

    # ------------------------------------------------------------------ serde
    def to_dict(self) -> dict:
        def bg_param(bg):
            params = bg.params()
            if not params:
                return None
            return params[0] if len(params) == 1 else list(params)

        drivers = []
        for drv in self.drivers:
            entry = {"activation_prob": drv.activation_prob}
            if drv.deactivation_prob:
                entry["deactivation_prob"] = drv.deactivation_prob
            if drv.locked_to is not None:
                entry["locked_to"] = drv.locked_to
            drivers.append(entry)
        return {
            "name": self.name,
            "tau": self.tau,
            "drivers": drivers,
            "noisy": [{"parent": n.parent, "epsilon": n.epsilon} for n in self.noisy],
            "background": [{"kind": b.kind, "param": bg_param(b)} for b in self.background],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DistributionSpec":
        try:
            bgs = []
            for b in doc.get("background", []):
                param = b.get("param")
                if isinstance(param, list):
                    param = tuple(param)
                bgs.append(BackgroundFeature(kind=b["kind"], param=param))
            return cls(
                tau=doc["tau"],
                drivers=tuple(
                    DriverFeature(
                        activation_prob=drv["activation_prob"],
                        deactivation_prob=drv.get("deactivation_prob", 0.0),
                        locked_to=drv.get("locked_to"),
                    )
                    for drv in doc["drivers"]
                ),
                noisy=tuple(NoisyFeature(parent=n["parent"], epsilon=n["epsilon"]) for n in doc.get("noisy", [])),
                background=tuple(bgs),
                name=doc.get("name", ""),
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed spec document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DistributionSpec":
        return cls.from_dict(json.loads(text))


def _make_group(members, flips, init, trans) -> _Group:
    tau = trans.shape[0] + 1
    marg = np.empty((tau, 2))
    marg[0] = init
    for t in range(tau - 1):
        marg[t + 1] = marg[t] @ trans[t]
    order = np.argsort(members)
    return _Group(
        members=tuple(members[k] for k in order),
        flips=tuple(flips[k] for k in order),
        init=init,
        transitions=trans,
        marginals=marg,
    )


# ---------------------------------------------------------------------- presets
def dist1() -> DistributionSpec:
    """Eight features: four drivers, noisy copies of the first three, a periodic feature."""
    return DistributionSpec(
        tau=10,
        drivers=tuple(DriverFeature(p) for p in (0.4, 0.4, 0.6, 0.6)),
        noisy=tuple(NoisyFeature(parent=i, epsilon=0.7) for i in range(3)),
        background=(BackgroundFeature("periodic"),),
        name="dist1",
    )


def dist2() -> DistributionSpec:
    """Seven features: four drivers, noisy copies of the first two, a sticky Markov feature."""
    return DistributionSpec(
        tau=10,
        drivers=tuple(DriverFeature(p) for p in (0.4, 0.4, 0.6, 0.6)),
        noisy=tuple(NoisyFeature(parent=i, epsilon=0.55) for i in range(2)),
        background=(BackgroundFeature("markov_stay", 0.3),),
        name="dist2",
    )


PRESETS = {"dist1": dist1, "dist2": dist2}


def inject_violation(spec: DistributionSpec, assumption: str) -> DistributionSpec:
    """Copy of ``spec`` that breaks one assumption on purpose.

    ``"A1"``: driver 0 can switch off again.  ``"A2"``: the first background
    feature becomes a chain started far from its stationary law, so its
    forward and backward transitions differ.  ``"A3"``: driver 1 is locked
    to driver 0, so it can never switch on alone.
    """
    drivers = list(spec.drivers)
    background = list(spec.background)
    if assumption == "A1":
        drivers[0] = replace(drivers[0], deactivation_prob=0.3)
    elif assumption == "A2":
        fresh = BackgroundFeature("markov", (0.05, 0.3, 0.1))
        background = [fresh] + background[1:] if background else [fresh]
    elif assumption == "A3":
        if len(drivers) < 2:
            raise SpecError("A3 injection needs two drivers")
        drivers[1] = replace(drivers[1], locked_to=0)
    else:
        raise SpecError(f"unknown assumption {assumption!r}; expected A1, A2 or A3")
    return replace(spec, drivers=tuple(drivers), background=tuple(background), name=f"{spec.name}_no{assumption}")


def load_spec(name_or_path: str | Path) -> DistributionSpec:
    """Resolve a preset name or a JSON file path."""
    key = str(name_or_path)
    if key in PRESETS:
        return PRESETS[key]()
    path = Path(key)
    if not path.exists():
        raise SpecError(f"unknown spec {key!r}: not a preset ({', '.join(PRESETS)}) or a file")
    return DistributionSpec.from_json(path.read_text())


# --------------------------------------------------------------------- sampling
def sample_trajectories(spec: DistributionSpec, n: int, rng) -> np.ndarray:
    """Draw ``n`` trajectories as a ``uint8`` array of shape ``(n, tau, d)``.

    Draw order is fixed (drivers, noisy copies, background) so a seed fully
    determines the output.
    """
    rng = as_generator(rng)
    tau, d = spec.tau, spec.d
    X = np.zeros((n, tau, d), dtype=np.uint8)
    times = np.arange(1, tau + 1)
    for i, drv in enumerate(spec.drivers):
        if drv.locked_to is not None:
            continue
        if drv.deactivation_prob == 0.0:
            active = rng.random(n) < drv.activation_prob
            onset = rng.integers(1, tau + 1, size=n)
            X[:, :, i] = active[:, None] & (times[None, :] >= onset[:, None])
        else:
            init, trans = spec._driver_chain(drv)
            X[:, :, i] = _sample_chain(init, trans, n, rng)
    for i, drv in enumerate(spec.drivers):
        if drv.locked_to is not None:
            X[:, :, i] = X[:, :, drv.locked_to]
    for j, nf in enumerate(spec.noisy):
        flips = rng.random((n, tau)) < nf.epsilon
        X[:, :, spec.noisy_indices[j]] = X[:, :, nf.parent] ^ flips
    for b, bg in enumerate(spec.background):
        init, step = bg.chain()
        trans = np.broadcast_to(step, (tau - 1, 2, 2))
        X[:, :, spec.background_indices[b]] = _sample_chain(init, trans, n, rng)
    return X


def _sample_chain(init, trans, n, rng) -> np.ndarray:
    tau = trans.shape[0] + 1
    out = np.empty((n, tau), dtype=np.uint8)
    out[:, 0] = rng.random(n) < init[1]
    u = rng.random((n, tau - 1))
    for t in range(tau - 1):
        p_on = np.where(out[:, t] == 1, trans[t, 1, 1], trans[t, 0, 1])
        out[:, t + 1] = u[:, t] < p_on
    return out


def sample_trajectory(spec: DistributionSpec, rng) -> np.ndarray:
    """One trajectory, shape ``(tau, d)``."""
    return sample_trajectories(spec, 1, rng)[0]


# ------------------------------------------------------------------ exact laws
def as_subset(subset: Iterable[int] | None, d: int) -> tuple[int, ...]:
    """Validate and sort a feature subset; ``None`` means all features."""
    if subset is None:
        return tuple(range(d))
    out = tuple(sorted(int(i) for i in subset))
    if len(set(out)) != len(out):
        raise SpecError(f"subset has repeated indices: {subset}")
    if out and (out[0] < 0 or out[-1] >= d):
        raise SpecError(f"subset indices must lie in 0..{d - 1}: {subset}")
    return out


def _emission(flip: float) -> np.ndarray:
    # rows: latent state, cols: observed value
    return np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])


def _chain_joint(group: _Group, w: np.ndarray, wp: np.ndarray) -> np.ndarray:
    """Latent joint ``P[L^w = a, L^w' = b]`` for 1-based time arrays; shape ``(P, 2, 2)``."""
    out = np.empty((len(w), 2, 2))
    for k, (a, b) in enumerate(zip(w, wp)):
        lo, hi = (a, b) if a < b else (b, a)
        J = np.diag(group.marginals[lo - 1])
        for t in range(lo - 1, hi - 1):
            J = J @ group.transitions[t]
        out[k] = J if a < b else J.T
    return out


@dataclass(frozen=True)
class PairDistribution:
    """Exact law of ``(X^w_U, X^w'_U)`` for each window pair.

    ``probs[k, p, q] = P[X^{w_k}_U = p, X^{w'_k}_U = q]``; every slice sums to 1.
    ``weights`` (if set) gives a mixing law over window pairs, in which case
    :meth:`mixture` is the pair law under that window distribution.
    """

    subset: tuple[int, ...]
    windows: tuple[tuple[int, int], ...]
    probs: np.ndarray

    def table(self, w: int, wp: int) -> np.ndarray:
        return self.probs[self.windows.index((w, wp))]

    def mixture(self, weights: Sequence[float]) -> np.ndarray:
        return np.tensordot(np.asarray(weights, dtype=float), self.probs, axes=1)

    def marginalize(self, keep: Iterable[int]) -> "PairDistribution":
        """Sum out every feature not in ``keep``."""
        keep = tuple(sorted(keep))
        if not set(keep) <= set(self.subset):
            raise SpecError("can only marginalize onto a subset of the table's features")
        k = len(self.subset)
        pos = [self.subset.index(i) for i in keep]
        arr = self.probs.reshape((len(self.windows),) + (2,) * (2 * k))
        drop = [1 + a for a in range(k) if a not in pos] + [1 + k + a for a in range(k) if a not in pos]
        arr = arr.sum(axis=tuple(drop))
        kk = len(keep)
        return PairDistribution(keep, self.windows, arr.reshape(len(self.windows), 1 << kk, 1 << kk))


def _check_budget(entries: int, budget: int) -> None:
    if entries > budget:
        raise BudgetExceeded(f"exact table needs {entries} entries, budget is {budget}")


def exact_pair_distribution(
    spec: DistributionSpec,
    windows: Iterable[tuple[int, int]],
    subset: Iterable[int] | None = None,
    budget: int = DEFAULT_ENTRY_BUDGET,
) -> PairDistribution:
    """Exact joint law of ``(X^w_U, X^w'_U)`` for every ``(w, w')`` in ``windows``.

    Windows are 1-based and must be distinct within a pair.  The law is the
    product over independent groups of each group's latent-chain joint
    pushed through the member emissions.
    """
    U = as_subset(subset, spec.d)
    windows = tuple((int(a), int(b)) for a, b in windows)
    if not windows:
        raise SpecError("window support is empty")
    for a, b in windows:
        if not (1 <= a <= spec.tau and 1 <= b <= spec.tau) or a == b:
            raise SpecError(f"invalid window pair {(a, b)} for tau={spec.tau}")
    k = len(U)
    P = len(windows)
    _check_budget(P << (2 * k), budget)
    w = np.array([a for a, _ in windows])
    wp = np.array([b for _, b in windows])

    result = np.ones((P, 1))
    axes: list[tuple[int, int]] = []
    in_U = set(U)
    for group in spec.groups:
        members = [(m, f) for m, f in zip(group.members, group.flips) if m in in_U]
        if not members:
            continue
        J = _chain_joint(group, w, wp)
        fw = np.ones((2, 1))
        for _, flip in members:
            fw = (fw[:, :, None] * _emission(flip)[:, None, :]).reshape(2, -1)
        # sum_a,b J[p,a,b] fw[a, x] fw[b, x']
        fac = np.einsum("pab,ax,by->pxy", J, fw, fw).reshape(P, -1)
        result = (result[:, :, None] * fac[:, None, :]).reshape(P, -1)
        axes += [(m, 0) for m, _ in members] + [(m, 1) for m, _ in members]

    if k == 0:
        return PairDistribution(U, windows, result.reshape(P, 1, 1))
    arr = result.reshape((P,) + (2,) * (2 * k))
    order = [axes.index((m, 0)) for m in U] + [axes.index((m, 1)) for m in U]
    arr = np.transpose(arr, [0] + [1 + o for o in order])
    return PairDistribution(U, windows, np.ascontiguousarray(arr).reshape(P, 1 << k, 1 << k))


def exact_marginal(
    spec: DistributionSpec,
    subset: Iterable[int] | None = None,
    times: Iterable[int] | None = None,
    budget: int = DEFAULT_ENTRY_BUDGET,
) -> np.ndarray:
    """``out[i, v] = P[X^{t_i}_U = v]`` for 1-based ``times`` (default all)."""
    U = as_subset(subset, spec.d)
    times = np.arange(1, spec.tau + 1) if times is None else np.asarray(list(times))
    k = len(U)
    _check_budget(len(times) << k, budget)
    result = np.ones((len(times), 1))
    axes: list[int] = []
    in_U = set(U)
    for group in spec.groups:
        members = [(m, f) for m, f in zip(group.members, group.flips) if m in in_U]
        if not members:
            continue
        fw = np.ones((2, 1))
        for _, flip in members:
            fw = (fw[:, :, None] * _emission(flip)[:, None, :]).reshape(2, -1)
        fac = group.marginals[times - 1] @ fw
        result = (result[:, :, None] * fac[:, None, :]).reshape(len(times), -1)
        axes += [m for m, _ in members]
    if k == 0:
        return result
    arr = result.reshape((len(times),) + (2,) * k)
    arr = np.transpose(arr, [0] + [1 + axes.index(m) for m in U])
    return np.ascontiguousarray(arr).reshape(len(times), 1 << k)


def code_bits(k: int) -> np.ndarray:
    """``bits[c, i]`` = value of subset feature ``i`` in code ``c``."""
    codes = np.arange(1 << k)
    return ((codes[:, None] >> (k - 1 - np.arange(k))[None, :]) & 1).astype(np.uint8)


def encode(x: np.ndarray, subset: Sequence[int]) -> np.ndarray:
    """Codes of the rows of ``x`` (shape ``(..., d)``) restricted to ``subset``."""
    k = len(subset)
    weights = (1 << (k - 1 - np.arange(k))).astype(np.int64)
    return np.asarray(x)[..., list(subset)].astype(np.int64) @ weights


# ---------------------------------------------------------------- assumptions
@dataclass
class AssumptionReport:
    """Outcome of checking the three structural assumptions."""

    a1_irreversible: bool
    a2_reversible_background: bool
    a3_lone_activation: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return self.a1_irreversible and self.a2_reversible_background and self.a3_lone_activation

    def to_dict(self) -> dict:
        return {
            "A1": self.a1_irreversible,
            "A2": self.a2_reversible_background,
            "A3": self.a3_lone_activation,
            "all_hold": self.all_hold,
            "witnesses": self.witnesses,
        }


def verify_assumptions(
    spec: DistributionSpec,
    tol: float = 1e-12,
    budget: int = DEFAULT_ENTRY_BUDGET,
) -> AssumptionReport:
    """Check irreversibility of drivers, exchange symmetry when drivers are
    unchanged, and that every driver can switch on alone.

    Failing checks record a witness ``(t, v, v')`` (1-based ``t``, bit tuples
    over the relevant features).
    """
    tau, S = spec.tau, spec.S
    consecutive = [(t, t + 1) for t in range(1, tau)]
    witnesses: dict = {}

    # A1: per driver, P[X^t_i = 1, X^{t+1}_i = 0] == 0
    a1 = True
    for i in S:
        tab = exact_pair_distribution(spec, consecutive, [i], budget).probs
        bad = np.nonzero(tab[:, 1, 0] > 0.0)[0]
        if bad.size:
            a1 = False
            t = int(bad[0]) + 1
            witnesses["A1"] = {"feature": i, "t": t, "v": [1], "v_next": [0], "prob": float(tab[bad[0], 1, 0])}
            break

    # A2: P[X^t = v, X^{t+1} = v'] symmetric whenever v_S == v'_S
    full = exact_pair_distribution(spec, consecutive, None, budget).probs
    d = spec.d
    s_codes = encode(code_bits(d), S)
    same_s = s_codes[:, None] == s_codes[None, :]
    asym = np.abs(full - np.transpose(full, (0, 2, 1))) * same_s[None]
    worst = np.unravel_index(np.argmax(asym), asym.shape)
    a2 = bool(asym[worst] <= tol)
    if not a2:
        bits = code_bits(d)
        witnesses["A2"] = {
            "t": int(worst[0]) + 1,
            "v": bits[worst[1]].tolist(),
            "v_next": bits[worst[2]].tolist(),
            "asymmetry": float(asym[worst]),
        }

    # A3 (sufficient form): each driver can activate while the rest of S stays put
    a3 = True
    s_tab = exact_pair_distribution(spec, consecutive, S, budget).probs
    k = len(S)
    bits = code_bits(k)
    for pos, i in enumerate(S):
        others = [a for a in range(k) if a != pos]
        mask = (
            (bits[:, pos][:, None] == 0)
            & (bits[:, pos][None, :] == 1)
            & np.all(bits[:, None, others] == bits[None, :, others], axis=2)
        )
        lone = (s_tab * mask[None]).sum(axis=(1, 2))
        if not np.any(lone > 0.0):
            a3 = False
            witnesses["A3"] = {"feature": i, "max_lone_activation_prob": float(lone.max())}
            break

    return AssumptionReport(a1, a2, a3, witnesses)
