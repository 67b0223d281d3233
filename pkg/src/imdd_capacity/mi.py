"""Mutual information of a discrete input over the unit-variance Gaussian channel.

The output axis is discretized into bins of width ``delta``; bin
probabilities are exact differences of the Gaussian tail.  Mass falling
outside the grid is folded into the two end bins so that every column of the
transition matrix sums to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .channel import DiscreteDistribution, RateNats, SisoChannel
from .errors import InvalidChannelError, ResourceError

__all__ = [
    "DEFAULT_DELTA",
    "DEFAULT_MARGIN",
    "DEFAULT_MAX_BINS",
    "OutputGrid",
    "build_grid",
    "transition_matrix",
    "transition_derivative",
    "divergences",
    "mutual_information",
    "mc_mutual_information",
    "McEstimate",
]

DEFAULT_DELTA = 1e-3
DEFAULT_MARGIN = 10.0
DEFAULT_MAX_BINS = 10_000_000

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OutputGrid:
    """Uniform binning of the output axis.

    Attributes
    ----------
    y_lo, y_hi : float
        Grid limits.
    delta : float
        Bin width.
    count : int
        Number of bins ``ceil((y_hi - y_lo)/delta)``.
    """

    y_lo: float
    y_hi: float
    delta: float
    count: int

    @property
    def edges(self) -> np.ndarray:
        """The ``count + 1`` finite bin edges."""
        return self.y_lo + self.delta * np.arange(self.count + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.y_lo + self.delta * (np.arange(self.count) + 0.5)


def build_grid(
    channel: SisoChannel,
    support_max: float | None = None,
    delta: float = DEFAULT_DELTA,
    margin_sigmas: float = DEFAULT_MARGIN,
    max_bins: int = DEFAULT_MAX_BINS,
) -> OutputGrid:
    """Grid covering ``[-margin, g*support_max + margin]``.

    Parameters
    ----------
    channel : SisoChannel
        Supplies the gain (and the default ``support_max = peak``).
    support_max : float, optional
        Largest input point that will be used with the grid.
    delta : float
        Bin width, positive.
    margin_sigmas : float
        Margin beyond the noiseless signal range in noise standard deviations.
    max_bins : int
        Cap on the number of bins.

    Examples
    --------
    >>> grid = build_grid(SisoChannel(1, 5, 1.25), delta=1e-3, margin_sigmas=10)
    >>> grid.y_lo, grid.y_hi, grid.count
    (-10.0, 15.0, 25000)
    """
    if not delta > 0 or not math.isfinite(delta):
        raise InvalidChannelError("delta must be positive")
    if not margin_sigmas > 0:
        raise InvalidChannelError("margin must be positive")
    if support_max is None:
        support_max = channel.peak
    if not math.isfinite(support_max) or support_max < 0:
        raise InvalidChannelError("support_max must be finite and nonnegative")
    y_lo = -float(margin_sigmas)
    y_hi = channel.g * float(support_max) + float(margin_sigmas)
    # tolerate float noise such as (15 - -10)/1e-3 = 25000.000000000004
    span = (y_hi - y_lo) / delta
    count = int(math.ceil(span - 1e-9 * max(1.0, span)))
    if count > max_bins:
        raise ResourceError(f"output grid needs {count} bins (cap {max_bins})")
    return OutputGrid(y_lo, y_hi, float(delta), max(count, 1))


#: Half-width (in noise standard deviations) of the band of bins computed per row.
#: Gaussian tails beyond it are below 1e-32 and are treated as zero.
BAND_SIGMAS = 12.0


def _band(x: float, g: float, grid: OutputGrid) -> tuple[int, int]:
    """Bin index range ``[j0, j1)`` within ``BAND_SIGMAS`` of the output mean ``g x``."""
    c = g * x
    j0 = int(math.floor((c - BAND_SIGMAS - grid.y_lo) / grid.delta))
    j1 = int(math.ceil((c + BAND_SIGMAS - grid.y_lo) / grid.delta)) + 1
    return max(j0, 0), min(max(j1, 0), grid.count)


def transition_matrix(points, channel: SisoChannel, grid: OutputGrid) -> np.ndarray:
    """Bin probabilities ``p[i, j] = P(Y in bin j | X = x_i)``.

    Row ``i`` corresponds to input point ``x_i`` (the transpose of the
    column convention in the literature; rows here are easier to slice).
    Each bin probability is a difference of Gaussian tails taken on the side
    of the mean where it does not cancel; the first and last bins absorb the
    mass outside the grid.  Only bins within ``BAND_SIGMAS`` of each row's
    mean are evaluated; the rest are zero.

    Parameters
    ----------
    points : DiscreteDistribution or array_like
        Input points (or a distribution, whose points are used).
    channel : SisoChannel
    grid : OutputGrid

    Returns
    -------
    ndarray, shape (k, count)
    """
    if isinstance(points, DiscreteDistribution):
        points = points.points
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    edges = grid.edges
    out = np.zeros((pts.size, grid.count))
    g = channel.g
    for i, x in enumerate(pts):
        j0, j1 = _band(float(x), g, grid)
        if j1 <= j0:
            # mean far outside the grid: all mass folds into the nearest end bin
            out[i, 0 if g * x < grid.y_lo else -1] = 1.0
            continue
        t = edges[j0:j1 + 1] - g * x
        tail = special.ndtr(-np.abs(t))  # accurate small tail on either side
        cdf = np.where(t < 0, tail, 1.0 - tail)
        sf = np.where(t > 0, tail, 1.0 - tail)
        if j0 == 0:
            cdf[0], sf[0] = 0.0, 1.0
        if j1 == grid.count:
            cdf[-1], sf[-1] = 1.0, 0.0
        upper = t[:-1] > 0
        out[i, j0:j1] = np.where(upper, sf[:-1] - sf[1:], cdf[1:] - cdf[:-1])
    return np.clip(out, 0.0, None)


def transition_derivative(points, channel: SisoChannel, grid: OutputGrid) -> np.ndarray:
    """Derivative of :func:`transition_matrix` with respect to each input point.

    ``d p[i, j] / d x_i = g (phi(lo_j - g x_i) - phi(hi_j - g x_i))`` with the
    folded outer edges at infinity contributing zero.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    edges = grid.edges
    out = np.zeros((pts.size, grid.count))
    g = channel.g
    for i, x in enumerate(pts):
        j0, j1 = _band(float(x), g, grid)
        if j1 <= j0:
            continue
        t = edges[j0:j1 + 1] - g * x
        dens = np.exp(-0.5 * t * t) / _SQRT2PI
        if j0 == 0:
            dens[0] = 0.0
        if j1 == grid.count:
            dens[-1] = 0.0
        out[i, j0:j1] = g * (dens[:-1] - dens[1:])
    return out


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise ``p log(p/q)`` with ``0 log 0 = 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * (np.log(p) - np.log(q))
    return np.where(p > 0, out, 0.0)


def divergences(p: np.ndarray, p_out: np.ndarray) -> np.ndarray:
    """Per-row relative entropies ``D(p[i] || p_out)`` in nats."""
    return _xlogy_ratio(p, p_out[None, :]).sum(axis=1)


def mutual_information(dist: DiscreteDistribution, channel: SisoChannel, grid: OutputGrid) -> RateNats:
    """Discretized mutual information ``I(X; Y)`` in nats.

    Computes ``sum_{i,j} a_i p_ji log(p_ji / sum_i' a_i' p_ji')`` with the
    convention ``0 log 0 = 0``.

    Examples
    --------
    >>> ch = SisoChannel(1, 5, 1.25)
    >>> d = DiscreteDistribution([0, 2, 5], [0.638, 0.1866, 0.1754])
    >>> round(mutual_information(d, ch, build_grid(ch)), 2)
    0.61
    """
    p = transition_matrix(dist.points, channel, grid)
    p_out = dist.masses @ p
    val = float(dist.masses @ divergences(p, p_out))
    return max(val, 0.0)


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo estimate with its standard error."""

    value: float
    stderr: float
    n_samples: int

    def __float__(self) -> float:
        return self.value


def mc_mutual_information(
    dist: DiscreteDistribution,
    channel: SisoChannel,
    n_samples: int = 1_000_000,
    seed: int = 0,
    chunk: int = 200_000,
) -> McEstimate:
    """Unbiased Monte-Carlo estimate of ``E[log p(Y|X)/p(Y)]``.

    Samples ``(X, Y)`` from the joint law and averages the exact
    information density, evaluated with a log-sum-exp over the support.
    Samples are drawn in chunks from independent child streams spawned from
    ``seed`` so results depend only on ``(seed, n_samples, chunk)``.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    x = dist.points
    loga = np.log(dist.masses)
    g = channel.g
    children = np.random.SeedSequence(seed).spawn((n_samples + chunk - 1) // chunk)
    total = 0.0
    total_sq = 0.0
    remaining = n_samples
    for ss in children:
        n = min(chunk, remaining)
        remaining -= n
        rng = np.random.default_rng(ss)
        idx = rng.choice(x.size, size=n, p=dist.masses)
        z = rng.standard_normal(n)
        # log p(y|x) - log p(y); the common Gaussian constant cancels.
        # Residuals y - g*x_j are formed as z + g*(x_i - x_j) so the drawn
        # point's own term is exactly z and a point mass gives exactly 0.
        cond = -0.5 * z * z
        resid = z[:, None] + g * (x[idx][:, None] - x[None, :])
        mix = special.logsumexp(loga[None, :] - 0.5 * resid**2, axis=1)
        dens = cond - mix
        total += dens.sum()
        total_sq += (dens * dens).sum()
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return McEstimate(float(mean), float(math.sqrt(var / n_samples)), int(n_samples))
