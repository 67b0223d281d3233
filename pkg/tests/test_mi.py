import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from imdd_capacity import (
    DiscreteDistribution,
    InvalidChannelError,
    ResourceError,
    SisoChannel,
    build_grid,
    mc_mutual_information,
    mutual_information,
    transition_matrix,
)
from imdd_capacity.mi import transition_derivative

CH = SisoChannel(1, 5, 1.25)
EX6 = DiscreteDistribution.from_arrays([0, 2, 5], [0.638, 0.1866, 0.1754])


def test_grid_layout():
    grid = build_grid(CH)
    assert (grid.y_lo, grid.y_hi, grid.count) == (-10.0, 15.0, 25000)
    assert grid.edges[0] == -10.0 and grid.edges[-1] == pytest.approx(15.0)
    assert grid.centers.size == grid.count


def test_grid_rejects_bad_input():
    with pytest.raises(InvalidChannelError):
        build_grid(CH, delta=0)
    with pytest.raises(ResourceError):
        build_grid(CH, delta=1e-9)


def test_transition_rows_are_distributions():
    grid = build_grid(CH)
    p = transition_matrix([0.0, 2.0, 5.0, 30.0], CH, grid)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p >= 0)
    # a point far beyond the grid folds into the last bin
    assert p[3, -1] == 1.0


def test_transition_column_means():
    grid = build_grid(CH)
    p = transition_matrix(EX6, CH, grid)
    means = p @ grid.centers
    np.testing.assert_allclose(means, EX6.points, atol=grid.delta)


def test_banding_matches_dense_oracle():
    ch = SisoChannel(0.8, 6.0, 2.0)
    grid = build_grid(ch, delta=0.05)
    x = np.array([0.0, 1.3, 6.0])
    e = grid.edges.copy()
    e[0], e[-1] = -np.inf, np.inf
    dense = stats.norm.cdf(e[None, 1:] - ch.g * x[:, None]) - stats.norm.cdf(e[None, :-1] - ch.g * x[:, None])
    np.testing.assert_allclose(transition_matrix(x, ch, grid), dense, atol=1e-15)


def test_derivative_matches_finite_difference():
    ch = SisoChannel(1.3, 4.0, 1.0)
    grid = build_grid(ch, delta=0.01)
    x, h = np.array([0.7, 2.2]), 1e-6
    fd = (transition_matrix(x + h, ch, grid) - transition_matrix(x - h, ch, grid)) / (2 * h)
    np.testing.assert_allclose(transition_derivative(x, ch, grid), fd, atol=1e-7)


def test_example_rate():
    assert mutual_information(EX6, CH, build_grid(CH)) == pytest.approx(0.61, abs=0.005)


def test_single_point_has_zero_information():
    d = DiscreteDistribution.from_arrays([1.0], [1.0])
    assert mutual_information(d, CH, build_grid(CH)) == 0.0


def test_monte_carlo_oracle():
    est = mc_mutual_information(EX6, CH, n_samples=200_000, seed=3)
    grid_mi = mutual_information(EX6, CH, build_grid(CH))
    assert abs(est.value - grid_mi) < 3 * est.stderr + 1e-4
    again = mc_mutual_information(EX6, CH, n_samples=200_000, seed=3)
    assert again.value == est.value


@pytest.mark.parametrize("x, g", [(1.74269443, 0.531), (0.0585, 1.619), (0.0179, 0.362)])
def test_mc_point_mass_is_exactly_zero(x, g):
    # roundoff in y - g*x used to leave ~1e-18 with an even smaller stderr
    d = DiscreteDistribution.from_arrays([x], [1.0])
    est = mc_mutual_information(d, SisoChannel(g, 10.0, 2.0), n_samples=20_000, seed=7)
    assert est.value == 0.0 and est.stderr == 0.0


def test_mc_rejects_tiny_sample():
    with pytest.raises(ValueError):
        mc_mutual_information(EX6, CH, n_samples=10)


def test_binary_limit_of_high_snr():
    # two far-apart points carry log 2 nats
    ch = SisoChannel(1, 60.0)
    d = DiscreteDistribution.from_arrays([0, 60], [0.5, 0.5])
    assert mutual_information(d, ch, build_grid(ch, delta=0.01)) == pytest.approx(math.log(2), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(
    c=st.floats(0.3, 3.0),
    pts=st.lists(st.floats(0.0, 4.0), min_size=1, max_size=5, unique=True),
    seed=st.integers(0, 1000),
)
def test_scale_invariance_of_information(c, pts, seed):
    masses = np.random.default_rng(seed).dirichlet(np.ones(len(pts)))
    ch = SisoChannel(1.0, 4.0, 1.0)
    d = DiscreteDistribution.from_arrays(pts, masses, merge_tol=1e-6)
    base = mutual_information(d, ch, build_grid(ch, delta=0.01))
    ch2 = ch.scaled(c)
    d2 = DiscreteDistribution.from_arrays(d.points / c, d.masses, merge_tol=0.0)
    moved = mutual_information(d2, ch2, build_grid(ch2, delta=0.01))
    assert moved == pytest.approx(base, abs=1e-9)
    assert 0.0 <= base <= d.entropy() + 1e-9
