import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import spearmanr

from ocpkit.distribution import BackgroundFeature, DistributionSpec, DriverFeature, SpecError
from ocpkit.downstream import (
    CurveRow,
    DownstreamModel,
    DownstreamTask,
    ExcessRiskCurves,
    bayes_rule,
    direct_erm,
    excess_risk_curves,
    exact_downstream_risk,
    finetune,
    make_labeled_dataset,
)
from ocpkit.learner import LinearModel, Regularization
from ocpkit.rng import substream


def positive_rate(probs, tau, threshold):
    """P[at least ``threshold`` independent drivers are on at a uniform time]."""
    total = 0.0
    for t in range(1, tau + 1):
        dist = np.array([1.0])
        for p in probs:
            on = p * t / tau
            dist = np.convolve(dist, [1 - on, on])
        total += dist[threshold:].sum()
    return total / tau


@pytest.fixture(scope="module")
def task1(d1):
    return DownstreamTask.for_spec(d1)


class TestTask:
    def test_rule_examples(self, task1):
        x = np.array([[1, 1, 0, 0, 0, 0, 0, 1], [1, 0, 0, 0, 1, 1, 1, 1], [0, 0, 0, 0, 0, 0, 0, 0], [1, 1, 1, 1, 0, 0, 0, 0]])
        assert task1.rule(x).tolist() == [1, 0, 0, 1]

    @pytest.mark.parametrize(
        "kwargs",
        [dict(target_subset=()), dict(target_subset=(0,), label_noise=0.5), dict(target_subset=(0,), label_noise=-0.1), dict(target_subset=(0, 1), threshold=4)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(SpecError):
            DownstreamTask(**kwargs)

    def test_sorted_target(self):
        assert DownstreamTask((3, 1)).target_subset == (1, 3)


class TestLabeledData:
    def test_noise_rate(self, d1, task1):
        data = make_labeled_dataset(d1, task1, 10_000, substream(0, "noise"))
        assert abs(np.mean(data.y != task1.rule(data.x)) - 0.1) <= 0.012

    def test_times_uniform(self, d1, task1):
        data = make_labeled_dataset(d1, task1, 20_000, substream(1))
        freq = np.bincount(data.times, minlength=11)[1:] / 20_000
        assert np.all(np.abs(freq - 0.1) < 5 * math.sqrt(0.09 / 20_000))

    def test_features_match_time(self, d1, task1):
        data = make_labeled_dataset(d1, task1, 5000, substream(2))
        # a driver cannot be on at T = t more often than p t / tau
        late = data.x[data.times == 1, 3].mean()
        assert late < 0.06 + 5 * math.sqrt(0.06 / 500)

    def test_invalid(self, d1, task1):
        with pytest.raises(SpecError):
            make_labeled_dataset(d1, task1, 0, substream(0))
        with pytest.raises(SpecError):
            make_labeled_dataset(d1, DownstreamTask((0, 9)), 5, substream(0))


class TestExactRisk:
    def test_bayes_rule_risk_is_noise(self, d1, d2):
        for spec in (d1, d2):
            for eta in (0.0, 0.1, 0.3):
                task = DownstreamTask.for_spec(spec, label_noise=eta)
                assert exact_downstream_risk(bayes_rule(task), spec, task) == pytest.approx(eta, abs=1e-12)

    @pytest.mark.parametrize("threshold", [1, 2, 3])
    def test_constant_classifier_closed_form(self, d1, threshold):
        eta = 0.1
        task = DownstreamTask.for_spec(d1, threshold=threshold, label_noise=eta)
        q = positive_rate([0.4, 0.4, 0.6, 0.6], 10, threshold)
        zero = DownstreamModel((0,), LinearModel(np.zeros(1), -1.0, Regularization()))
        one = DownstreamModel((0,), LinearModel(np.zeros(1), 1.0, Regularization()))
        assert exact_downstream_risk(zero, d1, task) == pytest.approx(eta * (1 - q) + (1 - eta) * q, abs=1e-13)
        assert exact_downstream_risk(one, d1, task) == pytest.approx(eta * q + (1 - eta) * (1 - q), abs=1e-13)

    def test_matches_monte_carlo(self, d1, task1):
        data = make_labeled_dataset(d1, task1, 4000, substream(3))
        model = finetune((0, 1, 4, 7), data)
        test = make_labeled_dataset(d1, task1, 100_000, substream(4))
        emp = np.mean(model.predict(test.x) != test.y)
        exact = exact_downstream_risk(model, d1, task1)
        assert abs(emp - exact) < 5 * math.sqrt(exact * (1 - exact) / 100_000)


class TestLearners:
    def test_finetune_on_S_small_n(self, d1):
        task = DownstreamTask.for_spec(d1, label_noise=0.0)
        data = make_labeled_dataset(d1, task, 64, substream(5))
        model = finetune(d1.S, data)
        assert exact_downstream_risk(model, d1, task) <= 0.05

    def test_disjoint_representation_cannot_beat_constant(self):
        spec = DistributionSpec(tau=4, drivers=[DriverFeature(0.5), DriverFeature(0.5)], background=[BackgroundFeature("iid", 0.5), BackgroundFeature("markov_stay", 0.7)])
        eta = 0.1
        task = DownstreamTask(spec.S, threshold=1, label_noise=eta)
        q = positive_rate([0.5, 0.5], 4, 1)
        floor = eta + (1 - 2 * eta) * min(q, 1 - q)
        for seed in range(5):
            data = make_labeled_dataset(spec, task, 500, substream(6, seed))
            risk = exact_downstream_risk(finetune((2, 3), data), spec, task)
            assert risk >= floor - 1e-12

    @pytest.mark.parametrize("threshold", [1, 2])
    def test_disjoint_representation_on_dist1(self, d1, threshold):
        import itertools

        from ocpkit.distribution import code_bits, exact_marginal

        task = DownstreamTask(d1.S, threshold=threshold, label_noise=0.0)
        q = positive_rate([0.4, 0.4, 0.6, 0.6], 10, threshold)
        best_constant = min(q, 1 - q)
        # no predictor on the non-driver features beats the Bayes risk over all of them
        law = exact_marginal(d1).mean(axis=0)
        bits = code_bits(8)
        y = bits[:, :4].sum(axis=1) >= threshold
        u = bits[:, 4:] @ np.array([8, 4, 2, 1])
        p1 = np.bincount(u, weights=law * y, minlength=16)
        p0 = np.bincount(u, weights=law * ~y, minlength=16)
        floor = np.minimum(p0, p1).sum()
        assert floor >= best_constant - 0.02
        data = make_labeled_dataset(d1, task, 2000, substream(10, threshold))
        for k in (1, 2, 3, 4):
            for U in itertools.combinations(range(4, 8), k):
                assert exact_downstream_risk(finetune(U, data), d1, task) >= floor - 1e-12

    def test_no_active_driver_gives_negative_label(self, d1):
        task = DownstreamTask(d1.S, threshold=1, label_noise=0.0)
        data = make_labeled_dataset(d1, task, 2000, substream(11))
        idle = data.x[:, :4].sum(axis=1) == 0
        assert idle.any() and np.all(data.y[idle] == 0)

    def test_large_n_consistency(self, d1, task1):
        data = make_labeled_dataset(d1, task1, 16_000, substream(7))
        assert exact_downstream_risk(finetune(d1.S, data), d1, task1) - 0.1 <= 0.005
        model = direct_erm(data, 4)
        assert model.subset == d1.S
        assert exact_downstream_risk(model, d1, task1) - 0.1 <= 0.005

    def test_only_S_reaches_noise_floor(self, d2):
        import itertools

        task = DownstreamTask.for_spec(d2, label_noise=0.1)
        data = make_labeled_dataset(d2, task, 16_000, substream(8))
        risks = {U: exact_downstream_risk(finetune(U, data), d2, task) for U in itertools.combinations(range(d2.d), 4)}
        best = min(risks, key=risks.get)
        assert best == d2.S
        assert all(r > 0.1 + 1e-3 for U, r in risks.items() if U != d2.S)

    def test_direct_erm_ties_go_lexicographic(self):
        spec = DistributionSpec(tau=2, drivers=[DriverFeature(0.5)], background=[BackgroundFeature("iid", 0.5)] * 3)
        task = DownstreamTask((0,), threshold=1, label_noise=0.0)
        data = make_labeled_dataset(spec, task, 1, substream(9))
        # one labeled point: every single feature is a perfect fit or a constant fit
        assert direct_erm(data, 1).subset == (0,)

    def test_empty_data(self, d1, task1):
        data = make_labeled_dataset(d1, task1, 3, substream(0))
        empty = type(data)(data.x[:0], data.y[:0], data.times[:0])
        with pytest.raises(SpecError):
            finetune(d1.S, empty)
        with pytest.raises(SpecError):
            direct_erm(empty, 2)


@pytest.fixture(scope="module")
def curves(d1, task1):
    return excess_risk_curves(d1, task1, m_unlabeled=2000, n_grid=(16, 64, 256, 1000), replicates=8, seed=3)


class TestCurves:
    def test_shape(self, curves):
        assert len(curves.rows) == 4 * 8 * 2
        assert set(curves.pretrained) == set(range(8))
        assert all(r.excess >= -1e-12 for r in curves.rows)

    def test_excess_shrinks_with_n(self, curves):
        ns = [16, 64, 256, 1000]
        ds = [curves.mean_excess(n, "A_ds") for n in ns]
        assert spearmanr(ns, ds).statistic <= -0.8

    def test_csv(self, curves, tmp_path):
        curves.to_csv(tmp_path / "c.csv")
        curves.summary_to_csv(tmp_path / "s.csv")
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == "n,replicate,learner,subset,exact_risk,excess"
        head = (tmp_path / "s.csv").read_text().splitlines()
        assert head[0] == "n,A_pt_mean_excess,A_ds_mean_excess,A_pt_win_rate" and len(head) == 5

    def test_deterministic(self, d2):
        task = DownstreamTask.for_spec(d2)
        a = excess_risk_curves(d2, task, m_unlabeled=300, n_grid=(16,), replicates=2, seed=1)
        b = excess_risk_curves(d2, task, m_unlabeled=300, n_grid=(16,), replicates=2, seed=1)
        assert a.rows == b.rows

    def test_invalid(self, d1, task1):
        with pytest.raises(SpecError):
            excess_risk_curves(d1, task1, n_grid=(), replicates=1)


@given(st.lists(st.tuples(st.floats(0, 0.5), st.floats(0, 0.5)), min_size=1, max_size=20))
def test_win_rate_counts_strict_wins(pairs):
    rows = []
    for rep, (pt, ds) in enumerate(pairs):
        rows.append(CurveRow(16, rep, "A_pt", (0,), pt, pt))
        rows.append(CurveRow(16, rep, "A_ds", (0,), ds, ds))
    curves = ExcessRiskCurves(rows)
    assert curves.win_rate(16) == pytest.approx(sum(a < b for a, b in pairs) / len(pairs))
    assert curves.paired(16) == pairs
