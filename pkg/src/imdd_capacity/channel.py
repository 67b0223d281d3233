"""Channel types, constraint canonicalization and Gaussian utilities.

The channel is ``Y = g X + Z`` with ``Z ~ N(0, 1)`` and a nonnegative input
``X`` subject to a peak constraint ``X <= A`` and an average constraint
``E[X] <= E``.  Either constraint may be absent, which is encoded with
``math.inf``.  All rates are in nats per transmission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import optimize, special

from .errors import InvalidChannelError, NumericError

__all__ = [
    "RateNats",
    "SisoChannel",
    "DiscreteDistribution",
    "TruncGaussParams",
    "q_function",
    "trunc_gauss_params",
    "tg_moments",
    "tg_moments_quad",
    "canonicalize",
    "trunc_exp_param",
    "to_bits",
]

#: Rates are plain floats in nats per transmission.
RateNats = float

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def to_bits(rate: float) -> float:
    """Convert a rate in nats to bits."""
    return rate / math.log(2.0)


def q_function(x):
    """Standard Gaussian tail probability ``Q(x) = P(N(0,1) > x)``.

    Evaluated through ``erfc`` so that large arguments keep full relative
    precision instead of cancelling in ``1 - Phi(x)``.

    Parameters
    ----------
    x : float or array_like
        Argument(s).

    Returns
    -------
    float or ndarray
        Tail probability, same shape as ``x``.

    Examples
    --------
    >>> float(q_function(0.0))
    0.5
    >>> round(float(q_function(1.0)), 6)
    0.158655
    """
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)
    return float(out) if np.ndim(out) == 0 else out


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT2PI


@dataclass(frozen=True)
class SisoChannel:
    """Single-input single-output IM/DD Gaussian channel with unit noise variance.

    Parameters
    ----------
    g : float
        Channel gain, ``g >= 0``.
    peak : float
        Peak intensity ``A > 0``; ``math.inf`` when there is no peak constraint.
    avg : float
        Average intensity ``E > 0``; ``math.inf`` when there is no average
        constraint.
    """

    g: float
    peak: float = math.inf
    avg: float = math.inf

    def __post_init__(self) -> None:
        for name in ("g", "peak", "avg"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError) as exc:
                raise InvalidChannelError(f"{name} must be a real number") from exc
            if math.isnan(value):
                raise InvalidChannelError(f"{name} must not be NaN")
            object.__setattr__(self, name, value)
        if self.g < 0 or math.isinf(self.g):
            raise InvalidChannelError("gain must be finite and nonnegative")
        if self.peak <= 0 or self.avg <= 0:
            raise InvalidChannelError("peak and average constraints must be positive")
        if math.isinf(self.peak) and math.isinf(self.avg):
            raise InvalidChannelError("at least one of peak/avg must be finite")

    @property
    def alpha(self) -> float:
        """Average-to-peak ratio ``E/A`` (0 for a peak-free channel, inf for average-free)."""
        if math.isinf(self.peak):
            return 0.0
        return self.avg / self.peak

    @property
    def has_peak(self) -> bool:
        return math.isfinite(self.peak)

    @property
    def has_avg(self) -> bool:
        return math.isfinite(self.avg)

    @property
    def regime(self) -> str:
        """One of ``"peak+avg"``, ``"peak"`` or ``"avg"``.

        A channel whose average constraint cannot bind (``E >= A/2``) is
        reported as ``"peak"``.
        """
        if not self.has_peak:
            return "avg"
        if not self.has_avg or self.avg >= self.peak / 2:
            return "peak"
        return "peak+avg"

    def canonical(self) -> "SisoChannel":
        return canonicalize(self)

    def scaled(self, c: float) -> "SisoChannel":
        """Return the equivalent channel ``(c g, A/c, E/c)``."""
        return SisoChannel(self.g * c, self.peak / c, self.avg / c)


def canonicalize(channel: SisoChannel) -> SisoChannel:
    """Clamp the average constraint to ``min(E, A/2)``.

    For a peak-limited channel the capacity-achieving input has mean ``E`` if
    ``E <= A/2`` and ``A/2`` otherwise, so larger averages are equivalent to
    ``A/2``.  Peak-only channels get ``avg = A/2`` as well.

    Examples
    --------
    >>> canonicalize(SisoChannel(1, 5, 4))
    SisoChannel(g=1.0, peak=5.0, avg=2.5)
    """
    if not isinstance(channel, SisoChannel):
        raise InvalidChannelError("expected a SisoChannel")
    if channel.has_peak and channel.avg > channel.peak / 2:
        return replace(channel, avg=channel.peak / 2)
    return channel


def trunc_exp_param(alpha: float) -> float:
    """Solve ``1/mu - exp(-mu)/(1 - exp(-mu)) = alpha`` for ``mu > 0``.

    The left side decreases strictly from 1/2 (at ``mu -> 0``) to 0, so a
    unique root exists for ``0 < alpha < 1/2``.  This is the exponent of the
    maximum-entropy (truncated-exponential) input on ``[0, 1]`` with mean
    ``alpha``.

    Parameters
    ----------
    alpha : float
        Target mean in ``(0, 1/2)``.

    Returns
    -------
    float
        The root ``mu*``; 0 when ``alpha >= 1/2``.
    """
    if alpha >= 0.5:
        return 0.0
    if alpha <= 0:
        raise InvalidChannelError("alpha must be positive")

    def f(m: float) -> float:
        if m < 1e-4:
            # series of 1/m - 1/expm1(m) avoids cancellation near 0
            return 0.5 - m / 12.0 + m**3 / 720.0 - alpha
        if m > 700.0:
            return 1.0 / m - alpha
        return 1.0 / m - 1.0 / math.expm1(m) - alpha

    hi = 700.0
    if f(hi) > 0:
        # alpha below 1/700: root is ~1/alpha
        hi = 2.0 / alpha
    return optimize.brentq(f, 1e-9, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported input law ``sum_i a_i delta(x - x_i)``.

    Parameters
    ----------
    points : array_like
        Strictly increasing support points.
    masses : array_like
        Positive masses summing to one within 1e-12.
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.points, dtype=float).ravel()
        a = np.array(self.masses, dtype=float).ravel()
        if x.size == 0 or x.size != a.size:
            raise ValueError("points and masses must be nonempty and of equal length")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(a)):
            raise ValueError("points and masses must be finite")
        if np.any(np.diff(x) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(a <= 0):
            raise ValueError("masses must be positive")
        if abs(a.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {a.sum():.15g}, not 1")
        x.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "masses", a)

    @classmethod
    def from_arrays(
        cls,
        points: Iterable[float],
        masses: Iterable[float],
        merge_tol: float = 1e-9,
        min_mass: float = 0.0,
    ) -> "DiscreteDistribution":
        """Build a distribution from raw optimizer output.

        Points are sorted, points closer than ``merge_tol`` are merged
        (masses added, location mass-weighted), masses ``<= min_mass`` are
        dropped and the rest renormalized.
        """
        x = np.asarray(list(points), dtype=float)
        a = np.clip(np.asarray(list(masses), dtype=float), 0.0, None)
        order = np.argsort(x, kind="stable")
        x, a = x[order], a[order]
        keep = a > min_mass
        x, a = x[keep], a[keep]
        if x.size == 0:
            raise ValueError("no positive mass left")
        mx, ma = [x[0]], [a[0]]
        for xi, ai in zip(x[1:], a[1:]):
            if xi - mx[-1] <= merge_tol:
                tot = ma[-1] + ai
                mx[-1] = (mx[-1] * ma[-1] + xi * ai) / tot
                ma[-1] = tot
            else:
                mx.append(xi)
                ma.append(ai)
        ma_arr = np.asarray(ma)
        return cls(np.asarray(mx), ma_arr / ma_arr.sum())

    @property
    def k(self) -> int:
        return int(self.points.size)

    def mean(self) -> float:
        return float(self.masses @ self.points)

    def variance(self) -> float:
        m = self.mean()
        return float(self.masses @ (self.points - m) ** 2)

    def entropy(self) -> float:
        """Shannon entropy of the masses in nats."""
        a = self.masses
        return float(-(a * np.log(a)).sum())


@dataclass(frozen=True)
class TruncGaussParams:
    """Gaussian ``N(mu, nu^2)`` truncated to ``[0, peak]``.

    ``eta`` is the normalizing constant ``1/(F(A) - F(0))``, ``mu_tilde`` and
    ``nu_tilde2`` are the mean and variance of the truncated law and
    ``entropy_offset`` is ``log(eta) + ((A - mu) p(A) + mu p(0))/2`` with
    ``p`` the truncated density, so that the differential entropy equals
    ``0.5*log(2*pi*e*nu**2) - entropy_offset``.  Build instances with
    :func:`trunc_gauss_params`.
    """

    mu: float
    nu: float
    peak: float
    eta: float = field(default=math.nan)
    mu_tilde: float = field(default=math.nan)
    nu_tilde2: float = field(default=math.nan)
    entropy_offset: float = field(default=math.nan)
    log_eta: float = field(default=math.nan)

    def pdf(self, x):
        """Truncated density at ``x`` (zero outside ``[0, peak]``)."""
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= self.peak)
        val = self.eta * _phi((x - self.mu) / self.nu) / self.nu
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def entropy(self) -> float:
        """Differential entropy in nats."""
        return 0.5 * math.log(2 * math.pi * math.e * self.nu**2) - self.entropy_offset


def _interval_mass(a: float, b: float) -> float:
    """``Phi(b) - Phi(a)`` for ``a < b`` computed on the accurate side."""
    if a > 0:
        return float(special.ndtr(-a) - special.ndtr(-b))
    return float(special.ndtr(b) - special.ndtr(a))


_ILL = 1e-6  # relative size below which a closed-form difference is not trusted


def tg_moments(mu, nu, peak):
    """Vectorized truncated-Gaussian moments by closed form.

    Returns
    -------
    log_eta, mu_tilde, var, offset, ill : ndarray
        ``ill`` flags entries whose variance or entropy offset results from
        a difference of much larger terms; recompute those with
        :func:`tg_moments_quad`.
    """
    mu, nu = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(nu, dtype=float))
    lo = -mu / nu
    hi = (peak - mu) / nu
    with np.errstate(all="ignore"):
        mass = np.where(lo > 0, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))
        log_eta = -np.log(mass)
        eta = 1.0 / mass
        p0 = eta * np.exp(-0.5 * lo * lo) / (_SQRT2PI * nu)
        if math.isinf(peak):
            pa = np.zeros_like(p0)
            a_pa = np.zeros_like(p0)
        else:
            pa = eta * np.exp(-0.5 * hi * hi) / (_SQRT2PI * nu)
            a_pa = (peak - mu) * pa
        mu_t = mu + nu * nu * (p0 - pa)
        m2_terms = np.maximum(np.maximum(1.0, np.abs(a_pa)), np.abs(mu * p0))
        var = nu * nu * (1.0 - a_pa - mu * p0) - (mu_t - mu) ** 2
        offset = log_eta + 0.5 * (a_pa + mu * p0)
        off_terms = np.maximum(np.maximum(np.abs(log_eta), np.abs(a_pa)), np.abs(mu * p0))
        ill = (~(mass > 1e-300) | ~np.isfinite(var) | (var < _ILL * nu * nu * m2_terms)
               | ~np.isfinite(offset) | (np.abs(offset - 0.5 * np.log(2 * math.pi * math.e * nu * nu))
                                         < _ILL * off_terms))
    return log_eta, mu_t, var, offset, ill


def tg_moments_quad(mu: float, nu: float, peak: float, nodes: int = 24) -> tuple[float, float, float, float]:
    """Truncated-Gaussian moments by composite Gauss-Legendre quadrature.

    Works in standardized units with the log-density shifted by its maximum
    on the interval, so narrow or far-tail truncations stay accurate.
    Returns ``(log_eta, mu_tilde, var, offset)``.
    """
    lo = -mu / nu
    hi = (peak - mu) / nu if math.isfinite(peak) else max(lo, 0.0) + 40.0
    scale = max(1.0, abs(lo), abs(hi))
    panels = int(min(4000, max(1, math.ceil((hi - lo) * scale / 2.0))))
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    t = (mid + half * x[None, :]).ravel()
    wt = (half * w[None, :]).ravel()
    ell = -0.5 * t * t
    lmax = -0.5 * (0.0 if lo <= 0 <= hi else min(lo * lo, hi * hi))
    dens = np.exp(ell - lmax)
    z = float((wt * dens).sum())
    pr = wt * dens / z
    mean_t = float((pr * t).sum())
    var_t = float((pr * (t - mean_t) ** 2).sum())
    # entropy of the standardized law: log z - E[ell - lmax]
    h_t = math.log(z) - float((pr * (ell - lmax)).sum())
    log_mass = math.log(z) + lmax - 0.5 * math.log(2 * math.pi)
    h_x = h_t + math.log(nu)
    offset = 0.5 * math.log(2 * math.pi * math.e * nu * nu) - h_x
    return -log_mass, mu + nu * mean_t, nu * nu * var_t, offset


def trunc_gauss_params(mu: float, nu: float, peak: float) -> TruncGaussParams:
    """Moments of a Gaussian truncated to ``[0, peak]``.

    Parameters
    ----------
    mu : float
        Location of the parent Gaussian.
    nu : float
        Scale of the parent Gaussian, positive.
    peak : float
        Upper truncation point ``A``; may be ``math.inf``.

    Returns
    -------
    TruncGaussParams
        With ``eta = 1/(F(A) - F(0))``,
        ``mu_tilde = mu + nu^2 eta (P(0) - P(A))`` and
        ``nu_tilde2 = nu^2 (1 - (A - mu) p(A) - mu p(0)) - (mu_tilde - mu)^2``
        where ``P`` is the parent density and ``p = eta P``.  When these
        differences cancel badly (narrow or far-tail truncation) the moments
        and entropy offset are obtained by quadrature instead.

    Raises
    ------
    InvalidChannelError
        If ``nu <= 0`` or ``peak <= 0``.
    NumericError
        If the truncation interval carries no representable probability.
    """
    mu, nu, peak = float(mu), float(nu), float(peak)
    if not nu > 0 or math.isinf(nu):
        raise InvalidChannelError("nu must be positive and finite")
    if not peak > 0:
        raise InvalidChannelError("peak must be positive")
    log_eta, mu_t, var, offset, ill = (float(v) for v in tg_moments(mu, nu, peak))
    if ill:
        log_eta, mu_t, var, offset = tg_moments_quad(mu, nu, peak)
    if not math.isfinite(log_eta) or not math.isfinite(offset):
        raise NumericError(f"truncation interval has negligible mass (mu={mu}, nu={nu}, A={peak})")
    if math.isfinite(peak):
        mu_t = min(max(mu_t, 0.0), peak)
        var = min(max(var, 0.0), peak * peak / 4)
    var = min(max(var, 0.0), nu * nu)
    eta = math.exp(log_eta) if log_eta < 700 else math.inf
    return TruncGaussParams(mu, nu, peak, eta, mu_t, var, offset, log_eta)
