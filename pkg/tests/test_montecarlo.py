import math

import numpy as np
import pytest
from scipy.special import gammainc

from distexp.channel import ChannelSpec
from distexp.errors import DomainError, InfeasibleError
from distexp.montecarlo import (
    CHUNK,
    ChannelRealization,
    SimulationConfig,
    bs_cumulative_powers,
    bs_expected_distortion,
    estimate_exponent,
    fit_window,
    gram_eigenvalues,
    hls_expected_distortion,
    instantaneous_capacity,
    ls_expected_distortion,
    outage_slopes,
    sample_batch,
    sample_channel,
    simulate,
)
from distexp.siso import bs_thresholds, siso_bs_ed, siso_hls_ed, siso_ls_ed, siso_outage, siso_single_layer_ed
from distexp.staircase import LayerAllocation, Scheme, explicit_bs_allocation

SISO = ChannelSpec(1, 1)


def single(r):
    return LayerAllocation(Scheme.SINGLE, (r,), time_shares=(1.0,))


def within(point, oracle, k=4.0):
    return abs(point.expected_distortion - oracle) <= k * point.ed_stderr + 1e-12


class TestSisoOracle:
    def test_outage(self):
        assert siso_outage(1.0, 1.0) == pytest.approx(1 - math.exp(-1))
        assert siso_outage(0.0, 5.0) == 0.0

    def test_ls_single_layer_forms_agree(self):
        assert siso_ls_ed([2.0], [1.0], 2.0, 100.0) == pytest.approx(siso_single_layer_ed(2.0, 2.0, 100.0), rel=1e-14)

    def test_zero_rate(self):
        assert siso_ls_ed([0.0], [1.0], 2.0, 10.0) == pytest.approx(1.0)

    def test_analog_only(self):
        rng = np.random.default_rng(0)
        x = rng.exponential(size=400_000)
        snr = 50.0
        assert siso_hls_ed([], [], 1.0, snr) == pytest.approx(np.mean(1 / (1 + snr * x)), rel=0.01)

    def test_analog_tail_high_snr(self):
        # e^{1/s} E1(1/s) / s ~ ln(s) / s at large s
        s = 1e8
        assert siso_hls_ed([], [], 1.0, s) == pytest.approx((math.log(s) - 0.5772156649) / s, rel=1e-6)

    def test_bs_single_layer_is_ls(self):
        assert siso_bs_ed([3.0], [100.0], 2.0) == pytest.approx(siso_ls_ed([3.0], [1.0], 2.0, 100.0), rel=1e-14)

    def test_bs_thresholds_unreachable(self):
        # S_1 / S_2 ratio caps the first layer's rate
        th = bs_thresholds([3.0, 1.0], [10.0, 5.0])
        assert math.isinf(th[0])


class TestSampling:
    def test_siso_mean_gain(self):
        batch = sample_batch(SISO, SimulationConfig((0.0,), 10**6, seed=1))
        assert batch.eig.mean() == pytest.approx(1.0, rel=0.01)

    def test_shapes(self):
        real = sample_channel(ChannelSpec(2, 3, 2), np.random.default_rng(0))
        assert real.blocks.shape == (2, 3, 2)
        assert real.eigenvalues.shape == (2, 2)
        assert np.all(real.eigenvalues >= 0)
        assert np.all(np.diff(real.eigenvalues, axis=-1) >= 0)

    def test_deterministic(self):
        cfg = SimulationConfig((0.0,), 1000, seed=7)
        a = sample_batch(ChannelSpec(2, 2), cfg)
        b = sample_batch(ChannelSpec(2, 2), cfg)
        assert np.array_equal(a.eig, b.eig)

    def test_gram_eigenvalues(self):
        assert np.all(gram_eigenvalues(np.zeros((1, 2, 2), dtype=complex)) == 0)
        h = np.array([[[1.0, 0.0], [0.0, 2.0]]], dtype=complex)
        assert gram_eigenvalues(h) == pytest.approx(np.array([[1.0, 4.0]]))

    def test_capacity(self):
        real = ChannelRealization(np.ones((1, 1, 1), dtype=complex), np.ones((1, 1)))
        assert instantaneous_capacity(real, 3.0) == pytest.approx(2.0)
        assert instantaneous_capacity(real, 1e-12) == pytest.approx(0, abs=1e-11)

    def test_miso_simo_equivalence(self):
        # 1x2 and 2x1 have the same Gram eigenvalue law; MISO splits power over m_t
        cfg = SimulationConfig((0.0,), 100_000, seed=3)
        simo = sample_batch(ChannelSpec(1, 2), cfg)
        miso = sample_batch(ChannelSpec(2, 1), SimulationConfig((0.0,), 100_000, seed=4))
        snr, rate = 10.0, 3.0
        p_simo = np.mean(instantaneous_capacity(simo, snr) < rate)
        p_miso = np.mean(instantaneous_capacity(miso, 2 * snr) < rate)
        assert abs(p_simo - p_miso) < 4 * math.sqrt(p_simo * (1 - p_simo) / 100_000) * math.sqrt(2)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"snr_grid_db": (10.0, 5.0)},
            {"snr_grid_db": ()},
            {"trials": 0},
            {"seed": -1},
            {"epsilon0": 0.0},
            {"shards": 0},
            {"is_scales": (0.0,)},
            {"fit_points": 2},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(DomainError):
            SimulationConfig(**kwargs)


class TestPointEstimates:
    cfg = SimulationConfig((20.0,), 200_000, seed=5)

    def test_ls_single_layer_oracle(self):
        snr, r, b = 100.0, 0.4, 2.0
        p = ls_expected_distortion(SISO, single(r), b, snr, self.cfg)
        assert within(p, siso_single_layer_ed(r * math.log2(snr), b, snr))

    def test_ls_two_layers_oracle(self):
        snr, b = 100.0, 2.0
        alloc = LayerAllocation(Scheme.LS, (0.3, 0.5), time_shares=(0.4, 0.6))
        p = ls_expected_distortion(SISO, alloc, b, snr, self.cfg)
        rates = [r * math.log2(snr) for r in alloc.gains]
        assert within(p, siso_ls_ed(rates, alloc.time_shares, b, snr))
        assert p.layer_outage_rates[0] <= p.layer_outage_rates[1]

    def test_hls_oracle(self):
        snr, b = 100.0, 2.0
        alloc = LayerAllocation(Scheme.HLS, (0.3,), time_shares=(1.0,), analog_share=0.5)
        p = hls_expected_distortion(SISO, alloc, b, snr, self.cfg)
        assert within(p, siso_hls_ed([0.3 * math.log2(snr)], [1.0], b, snr))

    def test_hls_domain(self):
        alloc = LayerAllocation(Scheme.HLS, (), time_shares=())
        with pytest.raises(DomainError):
            hls_expected_distortion(ChannelSpec(2, 2), alloc, 0.3, 100.0, self.cfg)

    def test_bs_oracle(self):
        snr, b = 1000.0, 2.0
        alloc = explicit_bs_allocation(SISO, [0.2, 0.3])
        powers = bs_cumulative_powers(alloc, snr, self.cfg.epsilon0)
        p = bs_expected_distortion(SISO, alloc, b, snr, self.cfg)
        rates = [r * math.log2(snr) for r in alloc.gains]
        assert within(p, siso_bs_ed(rates, powers, b))
        assert p.layer_outage_rates[0] <= p.layer_outage_rates[1]

    def test_bs_one_layer_equals_ls(self):
        cfg = SimulationConfig((10.0, 20.0, 30.0), 50_000, seed=9)
        bs = simulate(SISO, explicit_bs_allocation(SISO, [0.4]), 2.0, cfg)
        ls = simulate(SISO, single(0.4), 2.0, cfg)
        assert bs.per_snr == ls.per_snr

    def test_zero_rate(self):
        p = ls_expected_distortion(SISO, single(0.0), 2.0, 100.0, self.cfg)
        assert p.expected_distortion == 1.0

    def test_high_snr_limit(self):
        # fixed rate of 1 bit: outage vanishes and ED -> 2^{-b}
        snr = 1e9
        alloc = single(1.0 / math.log2(snr))
        p = ls_expected_distortion(SISO, alloc, 2.0, snr, self.cfg)
        assert p.expected_distortion == pytest.approx(0.25, rel=1e-6)

    def test_scheme_mismatch(self):
        with pytest.raises(DomainError):
            bs_expected_distortion(SISO, single(0.3), 2.0, 100.0, self.cfg)


class TestBsPowers:
    def test_schedule(self):
        alloc = explicit_bs_allocation(ChannelSpec(4, 1), [0.2, 0.3])
        s = bs_cumulative_powers(alloc, 1e4, 0.01)
        assert s[0] == 1e4
        assert s[1] == pytest.approx(1e4 ** (0.8 - 0.01))

    def test_infeasible_at_unit_snr(self):
        alloc = explicit_bs_allocation(ChannelSpec(4, 1), [0.2, 0.3])
        with pytest.raises(InfeasibleError):
            bs_cumulative_powers(alloc, 1.0, 0.01)

    def test_infeasible_points_reported(self):
        alloc = explicit_bs_allocation(ChannelSpec(4, 1), [0.2, 0.3])
        est = simulate(ChannelSpec(4, 1), alloc, 2.0, SimulationConfig((0.0, 10.0, 20.0, 30.0), 2000, seed=1))
        assert [p.status for p in est.per_snr] == ["infeasible", "ok", "ok", "ok"]
        assert math.isfinite(est.fitted_exponent)


class TestImportanceSampling:
    def test_unbiased_against_gamma_law(self):
        # 4x1 outage of one layer is Pr{||h||^2 < a}, a regularized gamma function
        spec = ChannelSpec(4, 1)
        snr, r = 10**3, 0.5
        cfg = SimulationConfig((30.0,), 100_000, seed=2, is_scales=(0.1, 0.01))
        p = ls_expected_distortion(spec, single(r), 1.0, snr, cfg)
        a = 4 * (2 ** (r * math.log2(snr)) - 1) / snr
        assert p.layer_outage_rates[0] == pytest.approx(gammainc(4, a), rel=0.05)

    def test_plain_and_weighted_agree(self):
        spec = ChannelSpec(2, 1)
        plain = ls_expected_distortion(spec, single(0.3), 2.0, 100.0, SimulationConfig((20.0,), 200_000, seed=1))
        weighted = ls_expected_distortion(spec, single(0.3), 2.0, 100.0, SimulationConfig((20.0,), 200_000, seed=1, is_scales=(0.3,)))
        diff = abs(plain.expected_distortion - weighted.expected_distortion)
        assert diff <= 4 * math.hypot(plain.ed_stderr, weighted.ed_stderr)


class TestDeterminism:
    def test_shard_invariance(self):
        spec = ChannelSpec(2, 2)
        alloc = LayerAllocation(Scheme.LS, (0.2, 0.6), time_shares=(0.5, 0.5))
        base = SimulationConfig((10.0, 20.0), CHUNK * 3 + 17, seed=11)
        runs = [simulate(spec, alloc, 2.0, SimulationConfig(base.snr_grid_db, base.trials, 11, shards=s)) for s in (1, 2, 4)]
        assert runs[0] == runs[1] == runs[2]

    def test_seed_changes_result(self):
        cfg_a = SimulationConfig((20.0,), 5000, seed=1)
        cfg_b = SimulationConfig((20.0,), 5000, seed=2)
        a = simulate(SISO, single(0.4), 2.0, cfg_a)
        b = simulate(SISO, single(0.4), 2.0, cfg_b)
        assert a.per_snr != b.per_snr


class TestEstimateExponent:
    def test_power_law(self):
        pts = [(db, 10 ** (-2 * db / 10)) for db in (10, 20, 30, 40)]
        slope, err = estimate_exponent(pts)
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_constant(self):
        assert estimate_exponent([(0, 0.5), (10, 0.5), (20, 0.5)]) == (0.0, 0.0)

    def test_errors(self):
        with pytest.raises(DomainError):
            estimate_exponent([(0, 0.5), (10, 0.4)])
        with pytest.raises(DomainError):
            estimate_exponent([(0, 0.5), (10, 0.0), (20, 0.1)])

    def test_window(self):
        pts = [(float(i), 1.0) for i in range(9)]
        assert fit_window(pts) == pts[-5:]
        assert fit_window(pts[:4]) == pts[1:4]
        assert fit_window(pts, 4) == pts[-4:]

    def test_outage_slopes_nan_on_zero(self):
        est = simulate(SISO, single(0.2), 2.0, SimulationConfig((60.0, 70.0, 80.0), 100, seed=0))
        assert all(math.isnan(s) for s, _ in outage_slopes(est))


class TestStatisticalProperties:
    def test_ed_in_range_and_decreasing(self):
        cfg = SimulationConfig((5.0, 15.0, 25.0, 35.0), 50_000, seed=3)
        est = simulate(ChannelSpec(2, 2), LayerAllocation(Scheme.LS, (0.3, 0.7), time_shares=(0.5, 0.5)), 2.0, cfg)
        eds = [p.expected_distortion for p in est.per_snr]
        assert all(0 < e <= 1 for e in eds)
        for a, b in zip(est.per_snr, est.per_snr[1:]):
            assert b.expected_distortion <= a.expected_distortion + 3 * math.hypot(a.ed_stderr, b.ed_stderr)

    @pytest.mark.parametrize("spec,expected", [(SISO, {0.25: 0.75, 0.5: 0.5}), (ChannelSpec(4, 1), {0.25: 3.0, 0.5: 2.0})])
    def test_empirical_diversity(self, spec, expected):
        scales = tuple(10 ** (-0.5 * k) for k in range(1, 9)) if spec.m_t > 1 else ()
        cfg = SimulationConfig((20.0, 25.0, 30.0, 35.0, 40.0), 200_000, seed=4, is_scales=scales)
        for r, d in expected.items():
            est = simulate(spec, single(r), 1.0, cfg)
            (slope, _), = outage_slopes(est)
            assert slope == pytest.approx(d, abs=0.2)


def _bs_thresholds_4x1(snr, gains=(0.2, 0.3), eps=0.01):
    # ||h||^2 thresholds for decoding layer 1 and layer 2 on a 4x1 channel
    s2 = snr ** (1 - gains[0] - eps)
    c = snr ** gains[0]
    a1 = 4 * (c - 1) / (snr - c * s2)
    a2 = 4 * (snr ** gains[1] - 1) / s2
    return a1, a2


class TestBroadcastOutageLaw:
    spec = ChannelSpec(4, 1)
    alloc = explicit_bs_allocation(ChannelSpec(4, 1), [0.2, 0.3])

    def test_simulation_matches_gamma_law(self):
        cfg = SimulationConfig((30.0,), 200_000, seed=6, is_scales=(0.1, 0.01, 0.001))
        p = bs_expected_distortion(self.spec, self.alloc, 2.0, 1e3, cfg)
        a1, a2 = _bs_thresholds_4x1(1e3)
        assert p.layer_outage_rates[0] == pytest.approx(gammainc(4, a1), rel=0.05)
        assert p.layer_outage_rates[1] == pytest.approx(gammainc(4, max(a1, a2)), rel=0.05)
        assert p.layer_mi_outage_rates[1] == pytest.approx(gammainc(4, a2), rel=0.05)

    def test_loss_event_slope_tends_to_two(self):
        # the loss of layer 2 includes layer-1 outage, which fades out only slowly
        def slope(lo, hi):
            pts = [(db, gammainc(4, max(_bs_thresholds_4x1(10 ** (db / 10))))) for db in (lo, (lo + hi) / 2, hi)]
            return estimate_exponent(pts)[0]

        assert abs(slope(20, 40) - 2.0) > 0.2
        assert slope(60, 80) == pytest.approx(2.0, abs=0.06)
        assert abs(slope(100, 120) - 2.0) < abs(slope(60, 80) - 2.0)
