import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from imdd_capacity import (
    DiscreteDistribution,
    InvalidChannelError,
    NumericError,
    SisoChannel,
    canonicalize,
    q_function,
    to_bits,
    trunc_exp_param,
    trunc_gauss_params,
)
from imdd_capacity.channel import tg_moments, tg_moments_quad


class TestSisoChannel:
    def test_regimes(self):
        assert SisoChannel(1, 5, 1.25).regime == "peak+avg"
        assert SisoChannel(1, 5, 3).regime == "peak"
        assert SisoChannel(1, 5).regime == "peak"
        assert SisoChannel(1, avg=2).regime == "avg"

    @pytest.mark.parametrize(
        "args",
        [(-1, 5, 1), (math.inf, 5, 1), (1, 0, 1), (1, 5, -2), (1, math.inf, math.inf), (math.nan, 1, 1), ("x", 1, 1)],
    )
    def test_rejects_invalid(self, args):
        with pytest.raises(InvalidChannelError):
            SisoChannel(*args)

    def test_invalid_is_value_error(self):
        with pytest.raises(ValueError):
            SisoChannel(1, -1, 1)

    def test_canonical_clamps_average(self):
        assert canonicalize(SisoChannel(1, 5, 4)).avg == 2.5
        assert canonicalize(SisoChannel(1, 5)).avg == 2.5
        ch = SisoChannel(1, 5, 1.0)
        assert canonicalize(ch) is ch

    def test_alpha_and_scaling(self):
        ch = SisoChannel(2, 4, 1)
        assert ch.alpha == 0.25
        s = ch.scaled(0.5)
        assert (s.g, s.peak, s.avg) == (1.0, 8.0, 2.0)


def test_q_function_matches_scipy():
    x = np.linspace(-8, 30, 200)
    np.testing.assert_allclose(q_function(x), stats.norm.sf(x), rtol=1e-12, atol=0)


def test_to_bits():
    assert to_bits(math.log(2)) == pytest.approx(1.0)


class TestTruncExp:
    @pytest.mark.parametrize("alpha", [1e-4, 0.01, 0.1, 0.25, 0.4, 0.4999])
    def test_root_reproduces_mean(self, alpha):
        mu = trunc_exp_param(alpha)
        mean = 1 / mu - math.exp(-mu) / -math.expm1(-mu)
        assert mean == pytest.approx(alpha, rel=1e-9)

    def test_half_gives_uniform(self):
        assert trunc_exp_param(0.5) == 0.0
        assert trunc_exp_param(0.7) == 0.0

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidChannelError):
            trunc_exp_param(0.0)


class TestDistribution:
    def test_validation(self):
        with pytest.raises(ValueError):
            DiscreteDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            DiscreteDistribution(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            DiscreteDistribution(np.array([0.0]), np.array([0.0]))

    def test_merge_and_moments(self):
        d = DiscreteDistribution.from_arrays([2.0, 0.0, 2.0 + 1e-12], [1, 2, 1])
        assert d.k == 2
        np.testing.assert_allclose(d.masses, [0.5, 0.5])
        assert d.mean() == pytest.approx(1.0)
        assert d.variance() == pytest.approx(1.0)
        assert d.entropy() == pytest.approx(math.log(2))

    def test_immutable_arrays(self):
        d = DiscreteDistribution.from_arrays([0, 1], [0.5, 0.5])
        with pytest.raises(ValueError):
            d.masses[0] = 1.0

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0, 100, allow_nan=False), st.floats(1e-6, 10, allow_nan=False)),
            min_size=1,
            max_size=12,
        )
    )
    def test_normalization_property(self, pairs):
        pts, ms = zip(*pairs)
        d = DiscreteDistribution.from_arrays(pts, ms)
        assert abs(d.masses.sum() - 1.0) <= 1e-12
        assert np.all(d.masses > 0)
        assert np.all(np.diff(d.points) > 0)


class TestTruncGauss:
    @staticmethod
    def _oracle(mu, nu, A):
        """Moments and entropy by adaptive quadrature of the density."""
        z = stats.norm.cdf((A - mu) / nu) - stats.norm.cdf(-mu / nu)
        f = lambda x: stats.norm.pdf(x, mu, nu) / z
        m = integrate.quad(lambda x: x * f(x), 0, A, limit=200)[0]
        v = integrate.quad(lambda x: (x - m) ** 2 * f(x), 0, A, limit=200)[0]
        h = integrate.quad(lambda x: -f(x) * math.log(f(x)) if f(x) > 0 else 0.0, 0, A, limit=200)[0]
        return m, v, h

    @pytest.mark.parametrize("mu,nu,A", [(1.0, 0.5, 5.0), (2.5, 3.0, 5.0), (-1.0, 2.0, 3.0), (0.3, 0.1, 1.0)])
    def test_closed_form_against_quadrature_oracle(self, mu, nu, A):
        tg = trunc_gauss_params(mu, nu, A)
        m, v, h = self._oracle(mu, nu, A)
        assert tg.mu_tilde == pytest.approx(m, rel=1e-8)
        assert tg.nu_tilde2 == pytest.approx(v, rel=1e-7)
        assert tg.entropy == pytest.approx(h, abs=1e-8)

    def test_fallback_agrees_with_closed_form(self):
        mu, nu, A = np.array([0.7, 3.0, -0.5]), np.array([0.4, 2.0, 1.5]), 4.0
        log_eta, mt, var, off, ill = tg_moments(mu, nu, A)
        assert not ill.any()
        for i in range(3):
            q = tg_moments_quad(float(mu[i]), float(nu[i]), A)
            np.testing.assert_allclose(q, (log_eta[i], mt[i], var[i], off[i]), rtol=1e-7, atol=1e-12)

    def test_narrow_far_tail_stays_finite(self):
        # mass concentrated at the lower edge, far from the Gaussian centre
        tg = trunc_gauss_params(-120.0, 13.17, 0.0012)
        assert 0 < tg.nu_tilde2 < 0.0012**2 / 4
        assert tg.entropy == pytest.approx(math.log(0.0012), abs=1e-3)

    def test_bad_parameters(self):
        with pytest.raises((InvalidChannelError, NumericError, ValueError)):
            trunc_gauss_params(1.0, -1.0, 2.0)
