import math

import numpy as np
import pytest

from relaygeom import montecarlo as mc
from relaygeom.geometry import Realization
from relaygeom.model import CellGeometry, RadioParams, Thresholds, compute_thresholds
from relaygeom.quadrature import integrate_1d


class TestTrialRng:
    def test_same_trial_same_stream(self):
        a = mc.trial_rng(42, 7).random(5)
        b = mc.trial_rng(42, 7).random(5)
        assert np.array_equal(a, b)

    def test_trials_and_seeds_are_distinct(self):
        base = mc.trial_rng(42, 7).random(5)
        assert not np.array_equal(base, mc.trial_rng(42, 8).random(5))
        assert not np.array_equal(base, mc.trial_rng(43, 7).random(5))

    def test_rejects_negative_index(self):
        with pytest.raises(ValueError):
            mc.trial_rng(1, -1)


class TestFadingGain:
    def test_unit_mean(self, rng):
        n = 200_000
        draws = np.array([mc.sample_fading_gain(rng) for _ in range(n)])
        assert abs(draws.mean() - 1.0) < 3.0 / math.sqrt(n)

    def test_exponential_tail(self, rng):
        n = 100_000
        draws = np.array([mc.sample_fading_gain(rng) for _ in range(n)])
        p = float(np.mean(draws >= 0.3))
        target = math.exp(-0.3)  # 0.7408
        assert abs(p - target) < 3 * math.sqrt(target * (1 - target) / n)
        assert np.all(draws >= 0.0)


def _fixed_radius_realization(radius: float, n: int) -> Realization:
    cell = CellGeometry(cell_radius=radius + 1.0, dest_distance=0.0, relay_intensity=0.5)
    return Realization(
        radii=np.full(n, radius), angles=np.linspace(0, 2 * math.pi, n, endpoint=False), cell=cell
    )


class TestQualifyRelays:
    def test_zero_threshold_keeps_all(self, rng):
        real = _fixed_radius_realization(2.0, 500)
        assert len(mc.qualify_relays(real, 0.0, 2.0, rng)) == 500

    @pytest.mark.parametrize("radius, theta", [(0.5, 0.5), (1.5, 0.3), (3.0, 0.1)])
    def test_keep_probability_at_fixed_radius(self, radius, theta, rng):
        n = 20_000
        real = _fixed_radius_realization(radius, n)
        kept = len(mc.qualify_relays(real, theta, 2.0, rng))
        p = math.exp(-theta * (1 + radius**2))
        assert abs(kept / n - p) < 3 * math.sqrt(p * (1 - p) / n)

    def test_survivor_mean_count_matches_quadrature(self, rng):
        # thinned mean over the cell: 2 pi lam int r exp(-theta(1+r^2)) dr
        from relaygeom.geometry import sample_ppp

        cell = CellGeometry(cell_radius=10.0, dest_distance=0.0, relay_intensity=0.5)
        theta = 0.2
        oracle = (
            2.0
            * math.pi
            * cell.relay_intensity
            * integrate_1d(lambda r: r * np.exp(-theta * (1 + r * r)), 0.0, cell.cell_radius)
        )
        trials = 3000
        counts = []
        for _ in range(trials):
            real = sample_ppp(cell, rng)
            counts.append(len(mc.qualify_relays(real, theta, 2.0, rng)))
        counts = np.array(counts)
        sem = counts.std(ddof=1) / math.sqrt(trials)
        assert abs(counts.mean() - oracle) < 3 * sem


class TestTrials:
    def test_zero_thresholds_outage_iff_empty(self):
        # lam pi R^2 = 5 -> outage rate ~ exp(-5)
        cell = CellGeometry(
            cell_radius=10.0, dest_distance=3.0, relay_intensity=5.0 / (math.pi * 100.0)
        )
        th = Thresholds(0.0, 0.0)
        n = 20_000
        outages = 0
        for t in range(n):
            out = mc.trial_exact_csi(cell, th, mc.trial_rng(3, t))
            outages += out.outage
            assert out.outage == (out.qualified_count == 0)
        p = math.exp(-5.0)
        assert abs(outages / n - p) < 3 * math.sqrt(p * (1 - p) / n)

    def test_outcome_invariants(self, default_cell):
        th = compute_thresholds(RadioParams(snr_db=12.0, target_rate=1.0, num_relays=2))
        for t in range(300):
            out = mc.trial_stat_csi(default_cell, th, 2, mc.trial_rng(11, t))
            assert out.selected_count == min(2, out.qualified_count)
            if out.qualified_count == 0:
                assert out.outage
            ex = mc.trial_exact_csi(default_cell, th, mc.trial_rng(11, t))
            assert ex.selected_count in (0, 1)

    def test_statistical_selection_never_beats_full_knowledge(self, default_cell):
        # same trial stream -> same field and same channel draws; selecting
        # only the nearest relay can then never rescue a lost frame
        th = compute_thresholds(RadioParams(snr_db=14.0, target_rate=1.0, num_relays=1))
        for t in range(2000):
            exact = mc.trial_exact_csi(default_cell, th, mc.trial_rng(5, t))
            ranked = mc.trial_stat_csi(default_cell, th, 1, mc.trial_rng(5, t))
            assert exact.qualified_count == ranked.qualified_count
            if exact.outage:
                assert ranked.outage

    def test_vanishing_intensity_forces_outage(self):
        cell = CellGeometry(cell_radius=5.0, dest_distance=1.0, relay_intensity=1e-6)
        th = Thresholds(0.1, 0.1)
        outcomes = [mc.trial_exact_csi(cell, th, mc.trial_rng(1, t)) for t in range(500)]
        assert np.mean([o.outage for o in outcomes]) > 0.99

    def test_stat_rejects_bad_k(self, default_cell):
        with pytest.raises(ValueError):
            mc.trial_stat_csi(default_cell, Thresholds(0.1, 0.1), 0, mc.trial_rng(0, 0))


class TestEstimateOutage:
    def test_fixed_seed_reproducible(self, default_cell, radio_15db):
        a = mc.estimate_outage("exact", default_cell, radio_15db, 2000, 42)
        b = mc.estimate_outage("exact", default_cell, radio_15db, 2000, 42)
        assert a == b

    def test_worker_count_invariance(self, default_cell, radio_15db):
        serial = mc.estimate_outage("stat", default_cell, radio_15db, 2000, 9, workers=1)
        parallel = mc.estimate_outage("stat", default_cell, radio_15db, 2000, 9, workers=3)
        assert serial == parallel

    def test_env_variable_sets_workers(self, default_cell, radio_15db, monkeypatch):
        monkeypatch.setenv(mc.THREADS_ENV, "2")
        via_env = mc.estimate_outage("exact", default_cell, radio_15db, 1000, 4)
        monkeypatch.delenv(mc.THREADS_ENV)
        serial = mc.estimate_outage("exact", default_cell, radio_15db, 1000, 4)
        assert via_env == serial

    def test_stderr_formula(self):
        est = mc.OutageEstimate.from_counts(10_000, 100_000)
        assert est.p_hat == 0.1
        assert est.stderr == pytest.approx(math.sqrt(0.1 * 0.9 / 100_000), rel=1e-12)
        assert est.stderr == pytest.approx(9.5e-4, abs=1e-5)

    def test_below_resolution_flag(self):
        assert mc.OutageEstimate.from_counts(0, 50).below_resolution
        assert not mc.OutageEstimate.from_counts(1, 50).below_resolution

    def test_open_network_outage_is_void_probability(self):
        # thresholds ~ 0 via huge SNR: outage iff the field is empty
        cell = CellGeometry(
            cell_radius=10.0, dest_distance=3.0, relay_intensity=5.0 / (math.pi * 100.0)
        )
        radio = RadioParams(snr_db=500.0, target_rate=1.0, num_relays=1)
        est = mc.estimate_outage("exact", cell, radio, 20_000, 42)
        p = math.exp(-5.0)
        assert abs(est.p_hat - p) < 3 * math.sqrt(p * (1 - p) / est.trials)

    def test_validation(self, default_cell, radio_15db):
        with pytest.raises(ValueError):
            mc.estimate_outage("bogus", default_cell, radio_15db, 10, 0)
        with pytest.raises(ValueError):
            mc.estimate_outage("exact", default_cell, radio_15db, 0, 0)
        with pytest.raises(ValueError):
            mc.estimate_outage(
                "exact",
                default_cell,
                RadioParams(snr_db=10.0, target_rate=1.0, num_relays=2),
                10,
                0,
            )
        with pytest.raises(ValueError):
            mc.estimate_outage("exact", default_cell, radio_15db, 10, 0, workers=0)


class TestEmpiricalMeanCount:
    THETA = 0.09486832980505139

    def test_zero_radius_counts_nothing(self, default_cell):
        out = mc.empirical_mean_count("bs", [0.0, 5.0], default_cell, self.THETA, 200, 1)
        assert out[0].mean == 0.0
        assert out[0].stderr == 0.0

    def test_source_view_matches_closed_form(self, default_cell):
        from relaygeom.analytic import mean_count_from_bs

        out = mc.empirical_mean_count(
            "bs", [2.0, 5.0, 10.0, 20.0], default_cell, self.THETA, 2000, 3
        )
        for point in out:
            ref = mean_count_from_bs(point.radius, default_cell.relay_intensity, self.THETA)
            assert abs(point.mean - ref) < 3 * point.stderr

    def test_worker_count_invariance(self, default_cell):
        grid = [1.0, 3.0, 9.0]
        a = mc.empirical_mean_count("dest", grid, default_cell, self.THETA, 600, 5, workers=1)
        b = mc.empirical_mean_count("dest", grid, default_cell, self.THETA, 600, 5, workers=2)
        assert a == b

    def test_validation(self, default_cell):
        with pytest.raises(ValueError):
            mc.empirical_mean_count("side", [1.0], default_cell, self.THETA, 10, 0)
        with pytest.raises(ValueError):
            mc.empirical_mean_count("bs", [2.0, 1.0], default_cell, self.THETA, 10, 0)
        with pytest.raises(ValueError):
            mc.empirical_mean_count("bs", [1.0, 30.0], default_cell, self.THETA, 10, 0)
        with pytest.raises(ValueError):
            mc.empirical_mean_count("bs", [], default_cell, self.THETA, 10, 0)


class TestMonotoneProperties:
    def test_denser_field_never_hurts(self, default_cell):
        # more candidate relays -> more qualified relays -> fewer outages
        from dataclasses import replace

        denser = replace(default_cell, relay_intensity=0.8)
        for strategy, k in (("exact", 1), ("stat", 1), ("stat", 2)):
            radio = RadioParams(snr_db=15.0, target_rate=1.0, num_relays=k)
            sparse = mc.estimate_outage(strategy, default_cell, radio, 8000, 21)
            dense = mc.estimate_outage(strategy, denser, radio, 8000, 21)
            slack = 3.0 * math.hypot(sparse.stderr, dense.stderr)
            assert dense.p_hat <= sparse.p_hat + slack

    def test_outage_non_increasing_in_snr(self, default_cell):
        for strategy, k in (("exact", 1), ("stat", 2)):
            estimates = [
                mc.estimate_outage(
                    strategy,
                    default_cell,
                    RadioParams(snr_db=s, target_rate=1.0, num_relays=k),
                    6000,
                    13,
                )
                for s in (10.0, 15.0, 20.0, 25.0)
            ]
            for lo, hi in zip(estimates, estimates[1:]):
                slack = 3.0 * math.hypot(lo.stderr, hi.stderr)
                assert hi.p_hat <= lo.p_hat + slack

    def test_mean_count_curves_monotone_in_radius(self, default_cell):
        grid = [0.0, 2.0, 5.0, 10.0, 18.0, 25.0]
        for observer in ("bs", "dest"):
            curve = mc.empirical_mean_count(observer, grid, default_cell, 0.2, 400, 2)
            means = [p.mean for p in curve]
            assert all(b >= a for a, b in zip(means, means[1:]))


class TestExactRankedOracle:
    """The independence-free ranked-outage formula used as a diagnostic
    yardstick must agree with the first-rank closed path and with the
    simulation (the product form does neither at these settings)."""

    def test_reduces_to_first_rank_failure(self, default_cell):
        from relaygeom.analytic import p_fail_jth
        from relaygeom.validation import exact_ranked_outage

        radio = RadioParams(snr_db=18.0, target_rate=1.0, num_relays=1)
        th = compute_thresholds(radio)
        a = exact_ranked_outage(1, default_cell, radio)
        assert a == pytest.approx(p_fail_jth(1, default_cell, th), abs=1e-5)

    def test_matches_simulation_where_product_form_does_not(self, default_cell):
        from relaygeom.validation import exact_ranked_outage

        radio = RadioParams(snr_db=20.0, target_rate=1.0, num_relays=2)
        exact = exact_ranked_outage(2, default_cell, radio)
        est = mc.estimate_outage("stat", default_cell, radio, 20_000, 11)
        sigma = math.sqrt(exact * (1 - exact) / est.trials)
        assert abs(est.p_hat - exact) < 3 * sigma


class TestKthNearestDistances:
    def test_shape_and_padding(self, default_cell):
        out = mc.kth_nearest_qualified_distances(default_cell, 5.0, 4, 200, 8)
        assert out.shape == (200, 4)
        # strong thinning: some trials must lack a 4th qualified relay
        assert np.isinf(out[:, 3]).any()

    def test_rows_sorted_across_k(self, default_cell):
        out = mc.kth_nearest_qualified_distances(default_cell, 0.2, 3, 300, 8)
        finite = np.isfinite(out)
        for row, mask in zip(out, finite):
            vals = row[mask]
            assert np.all(np.diff(vals) >= 0)

    def test_deterministic(self, default_cell):
        a = mc.kth_nearest_qualified_distances(default_cell, 0.2, 2, 50, 8)
        b = mc.kth_nearest_qualified_distances(default_cell, 0.2, 2, 50, 8)
        assert np.array_equal(a, b)
