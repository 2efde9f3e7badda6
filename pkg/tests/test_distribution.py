import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import empirical_table, specs
from ocpkit.distribution import (
    BackgroundFeature,
    BudgetExceeded,
    DistributionSpec,
    DriverFeature,
    NoisyFeature,
    SpecError,
    code_bits,
    encode,
    exact_marginal,
    exact_pair_distribution,
    inject_violation,
    load_spec,
    sample_trajectories,
    verify_assumptions,
)
from ocpkit.rng import substream


class TestSpecValidation:
    def test_presets_layout(self, d1, d2):
        assert (d1.d, d1.tau, d1.S) == (8, 10, (0, 1, 2, 3))
        assert d1.noisy_indices == (4, 5, 6) and d1.background_indices == (7,)
        assert (d2.d, d2.tau) == (7, 10)
        assert d2.noisy_indices == (4, 5) and d2.background_indices == (6,)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(tau=1, drivers=[DriverFeature(0.5)]),
            dict(tau=4, drivers=[]),
            dict(tau=4, drivers=[DriverFeature(1.5)]),
            dict(tau=4, drivers=[DriverFeature(float("nan"))]),
            dict(tau=4, drivers=[DriverFeature(0.5)], noisy=[NoisyFeature(1, 0.3)]),
            dict(tau=4, drivers=[DriverFeature(0.5)], noisy=[NoisyFeature(0, 0.0)]),
            dict(tau=4, drivers=[DriverFeature(0.5)], noisy=[NoisyFeature(0, 1.0)]),
            dict(tau=4, drivers=[DriverFeature(0.5)], background=[BackgroundFeature("sine")]),
            dict(tau=4, drivers=[DriverFeature(0.5)], background=[BackgroundFeature("iid")]),
            dict(tau=4, drivers=[DriverFeature(0.5)], background=[BackgroundFeature("markov", (0.5, 0.2))]),
            dict(tau=4, drivers=[DriverFeature(0.5, locked_to=0)]),
        ],
    )
    def test_invalid_specs_rejected(self, kwargs):
        with pytest.raises(SpecError):
            DistributionSpec(**kwargs)

    def test_degenerate_noise_needs_opt_in(self):
        spec = DistributionSpec(tau=3, drivers=[DriverFeature(0.5)], noisy=[NoisyFeature(0, 0.0)], allow_degenerate_noise=True)
        assert spec.d == 2

    @given(specs())
    def test_json_round_trip(self, spec):
        again = DistributionSpec.from_json(spec.to_json())
        assert again == spec
        assert json.loads(again.to_json()) == json.loads(spec.to_json())

    def test_load_spec(self, tmp_path, d2):
        assert load_spec("dist2") == d2
        path = tmp_path / "s.json"
        path.write_text(d2.to_json())
        assert load_spec(path) == d2
        with pytest.raises(SpecError):
            load_spec(tmp_path / "missing.json")


class TestSampling:
    def test_shape_and_dtype(self, d1):
        x = sample_trajectories(d1, 50, substream(0))
        assert x.shape == (50, 10, 8) and x.dtype == np.uint8
        assert set(np.unique(x)) <= {0, 1}

    def test_drivers_never_switch_off(self, d1):
        x = sample_trajectories(d1, 2000, substream(1))
        drv = x[:, :, list(d1.S)].astype(int)
        assert np.all(np.diff(drv, axis=1) >= 0)

    def test_periodic_alternates(self, d1):
        x = sample_trajectories(d1, 500, substream(2))
        assert np.all(x[:, 1:, 7] != x[:, :-1, 7])

    def test_noisy_disagreement_rate(self, d1):
        x = sample_trajectories(d1, 20000, substream(3))
        rate = np.mean(x[:, :, 4] != x[:, :, 0])
        # 200000 Bernoulli(0.7) draws, 5 standard errors
        assert abs(rate - 0.7) < 5 * np.sqrt(0.21 / 200000)

    def test_activation_probability(self):
        spec = DistributionSpec(tau=5, drivers=[DriverFeature(0.4)])
        x = sample_trajectories(spec, 40000, substream(4))
        ever = x[:, -1, 0].mean()
        assert abs(ever - 0.4) < 5 * np.sqrt(0.24 / 40000)

    def test_locked_driver_copies_leader(self, d1):
        spec = inject_violation(d1, "A3")
        x = sample_trajectories(spec, 300, substream(5))
        np.testing.assert_array_equal(x[:, :, 1], x[:, :, 0])

    def test_deterministic_given_seed(self, d2):
        a = sample_trajectories(d2, 30, substream(9, "x"))
        b = sample_trajectories(d2, 30, substream(9, "x"))
        np.testing.assert_array_equal(a, b)


class TestExactTables:
    def test_single_certain_driver(self):
        spec = DistributionSpec(tau=2, drivers=[DriverFeature(1.0)])
        tab = exact_pair_distribution(spec, [(1, 2)]).table(1, 2)
        np.testing.assert_allclose(tab, [[0.0, 0.5], [0.0, 0.5]], atol=1e-15)

    def test_periodic_table(self):
        spec = DistributionSpec(tau=3, drivers=[DriverFeature(0.5)], background=[BackgroundFeature("periodic")])
        tab = exact_pair_distribution(spec, [(1, 2), (1, 3)], [1])
        np.testing.assert_allclose(tab.table(1, 2), [[0, 0.5], [0.5, 0]], atol=1e-15)
        np.testing.assert_allclose(tab.table(1, 3), [[0.5, 0], [0, 0.5]], atol=1e-15)

    @pytest.mark.parametrize("p,tau", [(0.4, 10), (0.6, 10), (1.0, 3), (0.25, 7)])
    def test_driver_marginal_closed_form(self, p, tau):
        spec = DistributionSpec(tau=tau, drivers=[DriverFeature(p)])
        marg = exact_marginal(spec, [0])[:, 1]
        np.testing.assert_allclose(marg, p * np.arange(1, tau + 1) / tau, atol=1e-14)

    @pytest.mark.parametrize("a,b", [(1, 2), (2, 7), (3, 10), (9, 10)])
    def test_driver_onset_between_windows(self, a, b):
        p, tau = 0.6, 10
        spec = DistributionSpec(tau=tau, drivers=[DriverFeature(p)])
        tab = exact_pair_distribution(spec, [(a, b)]).table(a, b)
        assert tab[0, 1] == pytest.approx(p * (b - a) / tau, abs=1e-14)
        assert tab[1, 0] == 0.0
        assert tab[1, 1] == pytest.approx(p * a / tau, abs=1e-14)

    def test_noisy_marginal_closed_form(self, d1):
        marg = exact_marginal(d1, [0, 4])
        on = exact_marginal(d1, [0])[:, 1]
        noisy_on = marg[:, 0b01] + marg[:, 0b11]
        np.testing.assert_allclose(noisy_on, 0.3 * on + 0.7 * (1 - on), atol=1e-14)

    def test_matches_monte_carlo(self, d1):
        subset = (0, 2, 4, 7)
        n = 200_000
        x = sample_trajectories(d1, n, substream(11, "mc"))
        emp = empirical_table(encode(x[:, 2], subset), encode(x[:, 5], subset), 4)
        exact = exact_pair_distribution(d1, [(3, 6)], subset).table(3, 6)
        se = np.sqrt(exact * (1 - exact) / n) + 1e-12
        assert np.max(np.abs(emp - exact) / se) < 5.0

    @given(specs(), st.data())
    def test_tables_are_distributions(self, spec, data):
        w = data.draw(st.integers(1, spec.tau))
        wp = data.draw(st.integers(1, spec.tau).filter(lambda v: v != w))
        tab = exact_pair_distribution(spec, [(w, wp)]).probs
        assert np.all(tab >= -1e-15)
        assert tab.sum() == pytest.approx(1.0, abs=1e-12)

    @given(specs(), st.data())
    def test_marginalization_consistent(self, spec, data):
        full = exact_pair_distribution(spec, [(1, 2)])
        keep = data.draw(st.lists(st.integers(0, spec.d - 1), min_size=1, unique=True))
        direct = exact_pair_distribution(spec, [(1, 2)], keep).probs
        np.testing.assert_allclose(full.marginalize(keep).probs, direct, atol=1e-14)

    @given(specs())
    def test_pair_and_single_time_laws_agree(self, spec):
        windows = [(t, t + 1) for t in range(1, spec.tau)]
        tab = exact_pair_distribution(spec, windows).probs
        marg = exact_marginal(spec)
        np.testing.assert_allclose(tab.sum(axis=2), marg[:-1], atol=1e-13)
        np.testing.assert_allclose(tab.sum(axis=1), marg[1:], atol=1e-13)

    @given(specs())
    def test_swapping_windows_transposes(self, spec):
        tab = exact_pair_distribution(spec, [(1, spec.tau), (spec.tau, 1)]).probs
        np.testing.assert_allclose(tab[1], tab[0].T, atol=1e-15)

    def test_subset_order_irrelevant(self, d1):
        a = exact_pair_distribution(d1, [(2, 3)], [7, 0, 4])
        b = exact_pair_distribution(d1, [(2, 3)], [0, 4, 7])
        np.testing.assert_array_equal(a.probs, b.probs)

    def test_invalid_windows(self, d1):
        for bad in [(0, 1), (3, 3), (10, 11)]:
            with pytest.raises(SpecError):
                exact_pair_distribution(d1, [bad])
        with pytest.raises(SpecError):
            exact_pair_distribution(d1, [])

    def test_budget(self, d1):
        with pytest.raises(BudgetExceeded):
            exact_pair_distribution(d1, [(1, 2)], budget=100)
        with pytest.raises(BudgetExceeded):
            exact_marginal(d1, budget=10)

    def test_code_bits_and_encode(self):
        bits = code_bits(3)
        assert bits[5].tolist() == [1, 0, 1]
        x = np.array([[0, 1, 1, 0, 1]])
        assert encode(x, [1, 2, 4])[0] == 7
        assert encode(x, [0, 3])[0] == 0


class TestAssumptions:
    def test_presets_pass(self, d1, d2):
        for spec in (d1, d2):
            report = verify_assumptions(spec)
            assert report.all_hold, report.witnesses
            assert report.witnesses == {}

    @pytest.mark.parametrize("which,attr", [("A1", "a1_irreversible"), ("A2", "a2_reversible_background"), ("A3", "a3_lone_activation")])
    def test_injected_violations_flagged(self, d1, d2, which, attr):
        for spec in (d1, d2):
            report = verify_assumptions(inject_violation(spec, which))
            assert not getattr(report, attr)
            assert which in report.witnesses
            assert not report.all_hold

    def test_a1_witness_is_real(self, d1):
        spec = inject_violation(d1, "A1")
        w = verify_assumptions(spec).witnesses["A1"]
        t, i = w["t"], w["feature"]
        tab = exact_pair_distribution(spec, [(t, t + 1)], [i]).table(t, t + 1)
        assert tab[1, 0] == pytest.approx(w["prob"]) and w["prob"] > 0

    def test_a2_witness_is_real(self, d2):
        spec = inject_violation(d2, "A2")
        w = verify_assumptions(spec).witnesses["A2"]
        t = w["t"]
        v, vn = w["v"], w["v_next"]
        code = lambda bits: int("".join(map(str, bits)), 2)
        tab = exact_pair_distribution(spec, [(t, t + 1)]).table(t, t + 1)
        assert abs(tab[code(v), code(vn)] - tab[code(vn), code(v)]) == pytest.approx(w["asymmetry"])
        assert [v[i] for i in spec.S] == [vn[i] for i in spec.S]

    def test_never_firing_driver_fails_lone_activation(self):
        spec = DistributionSpec(tau=4, drivers=[DriverFeature(0.5), DriverFeature(0.0)])
        report = verify_assumptions(spec)
        assert report.a1_irreversible and report.a2_reversible_background
        assert not report.a3_lone_activation

    @given(specs())
    def test_random_reversible_specs_pass(self, spec):
        assert verify_assumptions(spec).all_hold

    def test_unknown_injection(self, d1):
        with pytest.raises(SpecError):
            inject_violation(d1, "A4")

    def test_every_subset_pair_of_injections_differs(self, d1):
        names = [inject_violation(d1, a).name for a in ("A1", "A2", "A3")]
        assert len(set(names)) == 3
        for a, b in itertools.combinations(("A1", "A2", "A3"), 2):
            assert inject_violation(d1, a) != inject_violation(d1, b)
