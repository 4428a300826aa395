import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from distexp.channel import ChannelSpec
from distexp.errors import DomainError
from distexp.exponents import (
    INFINITE,
    climb,
    compute_exponent,
    exponent_bs_equal_gains,
    exponent_bs_finite,
    exponent_bs_infinite,
    exponent_hls_infinite,
    exponent_ls_infinite,
    exponent_single_layer,
    exponent_upper_bound,
    segment_climb,
)
from distexp.staircase import Scheme, bs_objective

SISO = ChannelSpec(1, 1)
TWO = ChannelSpec(2, 2)
specs = st.builds(ChannelSpec, st.integers(1, 4), st.integers(1, 4), st.integers(1, 3))
ratios = st.floats(0.05, 30)


class TestUpperBound:
    def test_examples(self):
        assert exponent_upper_bound(TWO, 2) == 3
        assert exponent_upper_bound(ChannelSpec(3, 1, 2), 1.5) == 1.5
        assert exponent_upper_bound(ChannelSpec(3, 1, 2), 100) == 6

    @given(specs)
    def test_saturates(self, spec):
        assert exponent_upper_bound(spec, 1e6) == spec.max_diversity

    @pytest.mark.parametrize("b", [0, -1, math.inf, math.nan])
    def test_rejects_bad_b(self, b):
        with pytest.raises(DomainError):
            exponent_upper_bound(SISO, b)


class TestSingleLayer:
    def test_siso(self):
        res = exponent_single_layer(SISO, 1.0)
        assert res.exponent == pytest.approx(0.5)
        assert res.allocation.gains == pytest.approx((0.5,))

    def test_two_by_two(self):
        res = exponent_single_layer(TWO, 2.0)
        assert res.exponent == pytest.approx(1.6)
        assert res.allocation.gains[0] == pytest.approx(0.8)

    def test_large_b_miso(self):
        assert exponent_single_layer(ChannelSpec(3, 1), 1e6).exponent == pytest.approx(3, rel=1e-5)


class TestSegmentClimb:
    def test_examples(self):
        assert segment_climb(1, 1, 0, 2.0) == pytest.approx(1 - math.exp(-2))
        assert segment_climb(3, 2, 0.7, 0) == 0.7
        m, b = 4, 2.5
        assert segment_climb(m, 1, 1, b - 1) == pytest.approx(m - (m - 1) * math.exp(-(b - 1) / m))

    def test_negative_budget(self):
        with pytest.raises(DomainError):
            segment_climb(1, 1, 0, -0.1)

    def test_climb_crosses_breakpoint(self):
        # 2x2: from 0, the first segment costs ln 2 and ends at diversity 1
        assert climb(TWO, 0.0, math.log(2)) == pytest.approx(1.0)
        assert climb(TWO, 0.0, math.log(2) + 1e-9) == pytest.approx(1.0, abs=1e-8)


class TestInfiniteLayer:
    @pytest.mark.parametrize("m", [1, 2, 4])
    @pytest.mark.parametrize("b", [0.3, 1, 5])
    def test_ls_miso(self, m, b):
        assert exponent_ls_infinite(ChannelSpec(m, 1), b).exponent == pytest.approx(m * (1 - math.exp(-b / m)), abs=1e-12)

    def test_ls_two_by_two_breakpoint(self):
        left = exponent_ls_infinite(TWO, math.log(2) * (1 - 1e-12)).exponent
        right = exponent_ls_infinite(TWO, math.log(2)).exponent
        assert left == pytest.approx(1.0, abs=1e-9) and right == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("b", [0.5, 1, 3])
    def test_hls_two_by_two(self, b):
        assert exponent_hls_infinite(TWO, b).exponent == pytest.approx(1 + 3 * (1 - math.exp(-(b - 0.5) / 3)), abs=1e-12)

    @pytest.mark.parametrize("m", [1, 3])
    def test_hls_miso(self, m):
        b = 2.5
        assert exponent_hls_infinite(ChannelSpec(1, m), b).exponent == pytest.approx(m - (m - 1) * math.exp(-(b - 1) / m), abs=1e-12)

    def test_hls_domain(self):
        with pytest.raises(DomainError):
            exponent_hls_infinite(TWO, 0.49)

    @given(specs, ratios)
    def test_ordering(self, spec, b):
        ls = exponent_ls_infinite(spec, b).exponent
        assert 0 <= ls <= exponent_upper_bound(spec, b) + 1e-12
        if b >= 1.0 / spec.m_min:
            assert exponent_hls_infinite(spec, b).exponent >= ls - 1e-12

    @given(specs, ratios, st.floats(1e-6, 3))
    def test_monotone_in_b(self, spec, b, db):
        assert exponent_ls_infinite(spec, b + db).exponent >= exponent_ls_infinite(spec, b).exponent - 1e-12


class TestBroadcast:
    def test_siso_examples(self):
        assert exponent_bs_finite(SISO, 0.5, 2).exponent == pytest.approx(3 / 7, abs=1e-12)
        assert exponent_bs_finite(SISO, 0.5, 2).allocation.gains == pytest.approx((4 / 7, 2 / 7))

    @given(ratios)
    def test_n1_matches_single_layer_siso(self, b):
        assert exponent_bs_finite(SISO, b, 1).exponent == pytest.approx(b / (1 + b), abs=1e-12)

    @given(st.integers(1, 4), st.floats(0.05, 10), st.integers(1, 12))
    def test_miso_closed_form(self, m, b, n):
        eta = b / m
        if abs(eta - 1) < 1e-6:
            return
        expected = m * (1 - (1 - eta) / (1 - eta ** (n + 1)))
        assert exponent_bs_finite(ChannelSpec(m, 1), b, n).exponent == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_eta_one_limit(self):
        # 4x1 at b = 4: eta = 1 and the exponent is n M / (n + 1)
        for n in (1, 3, 10):
            assert exponent_bs_finite(ChannelSpec(4, 1), 4.0, n).exponent == pytest.approx(4 * n / (n + 1), abs=1e-12)

    def test_equal_gain_value(self):
        assert exponent_bs_equal_gains(TWO, 3) == pytest.approx(3.2)
        res = exponent_bs_finite(TWO, 4.0, 3)
        assert res.exponent == pytest.approx(3.2, abs=1e-12)
        assert res.allocation.gains == pytest.approx((4 / 15,) * 3, abs=1e-12)
        assert exponent_bs_finite(TWO, 6.0, 3).exponent >= exponent_bs_equal_gains(TWO, 3)

    @given(specs, ratios, st.integers(1, 16))
    def test_matches_objective(self, spec, b, n):
        res = exponent_bs_finite(spec, b, n)
        active = spec if res.allocation.active_antennas is None else ChannelSpec(*res.allocation.active_antennas, spec.blocks)
        assert bs_objective(active, b, res.allocation.gains) == pytest.approx(res.exponent, abs=1e-9)

    @given(specs, ratios, st.integers(1, 15))
    def test_monotone_in_n(self, spec, b, n):
        assert exponent_bs_finite(spec, b, n + 1).exponent >= exponent_bs_finite(spec, b, n).exponent - 1e-12

    def test_infinite(self):
        assert exponent_bs_infinite(ChannelSpec(4, 1), 2).exponent == 2
        assert exponent_bs_infinite(ChannelSpec(2, 2, 2), 16).exponent == 8
        assert exponent_bs_infinite(ChannelSpec(2, 2, 2), 12).exponent == 6
        assert exponent_bs_infinite(TWO, 1e-9).exponent == pytest.approx(0, abs=1e-8)

    def test_rejects_zero_layers(self):
        with pytest.raises(DomainError):
            exponent_bs_finite(SISO, 1.0, 0)


class TestDispatch:
    def test_routes(self):
        assert compute_exponent(TWO, "ub", 2).exponent == 3
        assert compute_exponent(TWO, Scheme.SINGLE, 2).exponent == pytest.approx(1.6)
        assert compute_exponent(TWO, "bs", 0.5, INFINITE).exponent == 0.5
        assert compute_exponent(TWO, "hls", 1.0, 0).exponent == 1.0
        assert compute_exponent(SISO, "ls", 1.0, 1).exponent == pytest.approx(0.5)

    def test_bad_layers(self):
        with pytest.raises(DomainError):
            compute_exponent(TWO, "ls", 1.0, 1.5)
        with pytest.raises(DomainError):
            compute_exponent(TWO, "hls", 0.2, 2)
