import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from multilsm.distributions import (
    normal_logpdf,
    sample_inverse_gamma,
    sample_truncated_normal,
    truncated_normal_logpdf,
)


def ks_distance(draws, cdf):
    x = np.sort(draws)
    n = len(x)
    F = np.array([cdf(v) for v in x])
    return max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))


class TestInverseGamma:
    def test_mean(self):
        rng = np.random.default_rng(0)
        x = sample_inverse_gamma(3.0, 2.0, rng, size=100_000)
        # mean rate/(shape-1) = 1, variance rate^2/((shape-1)^2 (shape-2)) = 1
        assert abs(x.mean() - 1.0) < 3 * math.sqrt(1.0 / len(x))
        assert np.all(x > 0)

    def test_ks_against_numeric_cdf(self):
        shape, rate = 2.5, 0.5

        def density(t):
            return rate ** shape / math.gamma(shape) * t ** (-shape - 1) * math.exp(-rate / t)

        def cdf(x):
            return integrate.quad(density, 0.0, x, limit=200)[0]

        rng = np.random.default_rng(1)
        draws = sample_inverse_gamma(shape, rate, rng, size=10_000)
        # evaluate the numeric CDF on a grid and interpolate
        grid = np.concatenate([np.linspace(1e-4, 2, 800), np.linspace(2.01, draws.max() + 1, 400)])
        Fg = np.cumsum(np.r_[0.0, [integrate.quad(density, a, b)[0] for a, b in zip(grid[:-1], grid[1:])]])
        Fg += cdf(grid[0])
        assert ks_distance(draws, lambda v: np.interp(v, grid, Fg)) < 0.02

    @pytest.mark.parametrize("shape,rate", [(0, 1), (1, 0), (-1, 2)])
    def test_rejects(self, shape, rate):
        with pytest.raises(ValueError):
            sample_inverse_gamma(shape, rate, np.random.default_rng(0))


class TestTruncatedNormal:
    def test_half_normal_mean(self):
        rng = np.random.default_rng(2)
        x = np.array([sample_truncated_normal(0.0, 1.0, 0.0, math.inf, rng) for _ in range(100_000)])
        sd = math.sqrt(1 - 2 / math.pi)
        assert abs(x.mean() - math.sqrt(2 / math.pi)) < 3 * sd / math.sqrt(len(x))
        assert np.all(x >= 0)

    def test_far_tail_clamps_to_support(self):
        rng = np.random.default_rng(3)
        x = np.array([sample_truncated_normal(5.0, 0.01, -1.0, 1.0, rng) for _ in range(2000)])
        assert np.all((x > -1.0) & (x <= 1.0))
        assert np.median(x) > 0.99

    def test_wide_bounds_is_normal(self):
        rng = np.random.default_rng(4)
        x = np.array([sample_truncated_normal(0.0, 1.0, -1e8, math.inf, rng) for _ in range(10_000)])
        assert ks_distance(x, stats.norm.cdf) < 0.02

    @pytest.mark.parametrize("mean,var,low,high", [(0.3, 0.5, -1, 1), (-2.0, 1.0, 0, math.inf), (8.0, 4.0, -1, 1)])
    def test_ks_against_scipy(self, mean, var, low, high):
        rng = np.random.default_rng(5)
        sd = math.sqrt(var)
        ref = stats.truncnorm((low - mean) / sd, (high - mean) / sd, loc=mean, scale=sd)
        x = np.array([sample_truncated_normal(mean, var, low, high, rng) for _ in range(10_000)])
        assert ks_distance(x, ref.cdf) < 0.02

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-20, 20), st.floats(1e-4, 25), st.floats(-3, 3), st.floats(0.01, 5), st.integers(0, 2**31))
    def test_support(self, mean, var, low, width, seed):
        high = low + width
        x = sample_truncated_normal(mean, var, low, high, np.random.default_rng(seed))
        assert low <= x <= high

    @pytest.mark.parametrize("bad", [(0, 0, 0, 1), (0, 1, 1, 1), (0, 1, 2, 1)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            sample_truncated_normal(*bad, np.random.default_rng(0))

    @pytest.mark.parametrize("x,mean,var,low,high", [(0.2, 0.5, 0.3, -1, 1), (3.0, -1.0, 2.0, 0, math.inf),
                                                       (0.99, 40.0, 0.5, -1, 1)])
    def test_logpdf(self, x, mean, var, low, high):
        sd = math.sqrt(var)
        ref = stats.truncnorm.logpdf(x, (low - mean) / sd, (high - mean) / sd, loc=mean, scale=sd)
        assert truncated_normal_logpdf(x, mean, var, low, high) == pytest.approx(ref, rel=1e-9)
        assert truncated_normal_logpdf(high + 1, mean, var, low, high) == -math.inf


def test_normal_logpdf():
    assert normal_logpdf(0.7, -0.2, 2.5) == pytest.approx(stats.norm.logpdf(0.7, -0.2, math.sqrt(2.5)), rel=1e-14)
