import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imdd_capacity import (
    CapacityOptions,
    ConvergenceError,
    DiscreteDistribution,
    RegimeError,
    SisoChannel,
    blahut_arimoto,
    build_grid,
    capacity,
    mutual_information,
    optimality_check,
    optimize_fixed_k,
)
from imdd_capacity.capacity import suggest_k

CH = SisoChannel(1, 5, 1.25)


class TestBlahutArimoto:
    def test_example_support(self):
        res = blahut_arimoto(CH, [0, 2, 5])
        np.testing.assert_allclose(res.masses, [0.638, 0.1866, 0.1753], atol=2e-3)
        assert res.rate == pytest.approx(0.61, abs=0.005)
        assert res.trace.converged
        assert res.distribution.mean() == pytest.approx(1.25, abs=1e-9)

    def test_trace_first_and_seventh_iterations(self):
        tr = blahut_arimoto(CH, [0, 2, 5]).trace
        np.testing.assert_allclose(tr.masses[0], [0.5912, 0.2647, 0.1441], atol=2e-3)
        np.testing.assert_allclose(tr.masses[6], [0.6380, 0.1866, 0.1753], atol=2e-3)
        assert tr.rates[0] == pytest.approx(0.5679, abs=5e-4)
        assert tr.rates[6] == pytest.approx(0.6100, abs=5e-4)

    def test_slack_average_leaves_multiplier_zero(self):
        res = blahut_arimoto(SisoChannel(1, 2), [0, 2])
        assert res.nu == 0.0
        np.testing.assert_allclose(res.masses, [0.5, 0.5], atol=1e-6)

    @settings(max_examples=20, deadline=None)
    @given(
        peak=st.floats(1.0, 6.0),
        alpha=st.floats(0.1, 0.6),
        k=st.integers(2, 5),
    )
    def test_monotone_trace_and_mean(self, peak, alpha, k):
        ch = SisoChannel(1.0, peak, alpha * peak)
        pts = np.linspace(0, peak, k)
        res = blahut_arimoto(ch, pts, CapacityOptions(delta=1e-2))
        rates = np.asarray(res.trace.rates)
        assert np.all(np.diff(rates) >= -1e-10)
        mean = float(res.masses @ pts)
        avg = min(ch.avg, peak / 2)
        assert mean <= avg + 1e-8
        if res.nu > 0:
            assert mean == pytest.approx(avg, abs=1e-8)


class TestCertificate:
    def test_example8_is_optimal(self):
        d = DiscreteDistribution.from_arrays([0, 2.7058, 5], [0.6643, 0.1869, 0.1489])
        rep = optimality_check(d, CH)
        assert rep.psi == pytest.approx(0.2501, abs=2e-3)
        assert rep.is_optimal and rep.binding

    def test_example6_is_not_optimal(self):
        d = DiscreteDistribution.from_arrays([0, 2, 5], [0.638, 0.1866, 0.1754])
        rep = optimality_check(d, CH)
        assert rep.psi == pytest.approx(0.2528, abs=2e-3)
        assert not rep.is_optimal
        assert rep.min_J < -1e-4

    def test_weak_duality(self):
        # I(P) <= C <= I(P) + max(-J): the certified optimum sits inside the interval
        d = DiscreteDistribution.from_arrays([0, 2, 5], [0.638, 0.1866, 0.1754])
        rep = optimality_check(d, CH)
        assert rep.rate <= 0.62598 <= rep.rate - rep.min_J


class TestCapacitySearch:
    def test_example8(self):
        res = capacity(CH)
        assert res.k == 3 and res.certified
        np.testing.assert_allclose(res.dist.points, [0, 2.7058, 5], atol=0.02)
        np.testing.assert_allclose(res.dist.masses, [0.6643, 0.1869, 0.1489], atol=3e-3)
        assert res.rate == pytest.approx(0.626, abs=0.005)
        assert res.gap == 0.0 and res.upper == res.rate

    def test_low_snr_binary(self):
        res = capacity(SisoChannel(1, 1, 0.25))
        assert res.k == 2
        assert res.rate == pytest.approx(0.0854, abs=0.01)

    def test_fig8_point(self):
        assert capacity(SisoChannel(1, 2, 0.5)).rate == pytest.approx(0.2657, abs=0.005)

    def test_average_above_half_peak_is_clamped(self):
        a = capacity(SisoChannel(1, 2, 1.5))
        b = capacity(SisoChannel(1, 2, 1.0))
        assert a.rate == pytest.approx(b.rate, abs=1e-9)

    def test_zero_gain(self):
        res = capacity(SisoChannel(0, 3, 1))
        assert res.rate == 0.0 and res.k == 1

    def test_needs_peak(self):
        with pytest.raises(RegimeError):
            capacity(SisoChannel(1, avg=1))

    def test_gives_up_with_best_attached(self):
        with pytest.raises(ConvergenceError) as info:
            capacity(SisoChannel(1, 10, 2.5), CapacityOptions(k_max=3, delta=1e-2), k_start=2)
        best = info.value.best
        assert best is not None and not best.certified and best.k <= 3

    def test_fixed_k_rate_matches_grid_mi(self):
        grid = build_grid(CH)
        res = optimize_fixed_k(CH, 3, grid=grid)
        assert res.rate == pytest.approx(mutual_information(res.dist, CH, grid), abs=1e-9)
        assert res.dist.points[0] == 0.0

    def test_suggest_k(self):
        assert suggest_k(CH) == 2
        assert suggest_k(SisoChannel(1, 100, 25)) == 30
        assert suggest_k(SisoChannel(2, 50, 100)) == 30
