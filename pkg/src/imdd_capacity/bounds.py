"""Closed-form and semi-analytic capacity bounds for the single-user channel.

Lower bounds evaluate the rate of a specific input law (truncated
exponential, truncated Gaussian, truncated geometric, exponential,
geometric).  Upper bounds come from duality with a chosen output law, from
relaxing the input to its maximal variance, and from sphere packing.  The
asymptotic expressions are exact capacity limits at high and low SNR.

Every function takes a :class:`~imdd_capacity.channel.SisoChannel`, works on
its canonical form and returns a :class:`BoundResult` in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import optimize, special

from ._optim import grid_refine_max, grid_refine_min
from .channel import (
    DiscreteDistribution,
    SisoChannel,
    canonicalize,
    q_function,
    trunc_exp_param,
    trunc_gauss_params,
)
from .errors import NumericError, RegimeError
from .mi import DEFAULT_DELTA, DEFAULT_MARGIN, build_grid, mutual_information

__all__ = [
    "BoundResult",
    "LOWER_METHODS",
    "UPPER_METHODS",
    "ASYMPTOTIC_METHODS",
    "lower_lmw",
    "lower_cma",
    "lower_fh",
    "lower_exp_avg",
    "lower_geom_avg",
    "upper_duality_lmw",
    "duality_objective",
    "duality_objective_half",
    "upper_mckellips",
    "upper_relaxation",
    "upper_sp_simplex",
    "upper_sp_cube",
    "asymptotic_high_snr",
    "asymptotic_low_snr",
    "applicable_methods",
    "evaluate",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)
_TWO_PI_E = 2.0 * math.pi * math.e

LOWER_METHODS = ("lmw", "cma", "fh", "exp", "geom")
UPPER_METHODS = ("duality", "mckellips", "relax", "sp_simplex", "sp_cube")
ASYMPTOTIC_METHODS = ("asym_hi", "asym_lo")


@dataclass(frozen=True)
class BoundResult:
    """A rate bound in nats with its provenance.

    Attributes
    ----------
    value : float
        Rate in nats per transmission.
    method : str
        Tag such as ``"lmw"`` or ``"duality"``.
    optimizer : dict
        Maximizing/minimizing parameters of the bound.
    notes : tuple of str
        Conventions applied while evaluating.
    """

    value: float
    method: str
    optimizer: dict[str, Any] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def kind(self) -> str:
        if self.method in LOWER_METHODS:
            return "lower"
        if self.method in UPPER_METHODS:
            return "upper"
        return "asymptotic"

    def __float__(self) -> float:
        return self.value


def _xlogx(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)


def _need_peak_avg(ch: SisoChannel, name: str) -> None:
    if not ch.has_peak:
        raise RegimeError(f"{name} needs a finite peak constraint")


def _need_avg_only(ch: SisoChannel, name: str) -> None:
    if ch.has_peak:
        raise RegimeError(f"{name} applies to average-only channels (peak = inf)")


# ---------------------------------------------------------------------------
# Lower bounds
# ---------------------------------------------------------------------------


def lower_lmw(channel: SisoChannel) -> BoundResult:
    """Rate of the truncated-exponential (maximum-entropy) input.

    For ``alpha = E/A < 1/2`` the bound is
    ``0.5 log(1 + g^2 A^2/(2 pi e) exp(2 mu alpha) ((1 - exp(-mu))/mu)^2)``
    where ``mu`` solves ``1/mu - exp(-mu)/(1 - exp(-mu)) = alpha``; at
    ``alpha = 1/2`` the input is uniform and the bound is
    ``0.5 log(1 + g^2 A^2/(2 pi e))``.
    """
    ch = canonicalize(channel)
    _need_peak_avg(ch, "lower_lmw")
    gA = ch.g * ch.peak
    alpha = ch.avg / ch.peak
    if alpha >= 0.5:
        return BoundResult(0.5 * math.log1p(gA * gA / _TWO_PI_E), "lmw", {"mu_star": 0.0})
    mu = trunc_exp_param(alpha)
    # exp(2 mu alpha) ((1 - e^-mu)/mu)^2 is e^{2 h} with h the entropy of the
    # truncated exponential on [0, 1]
    log_factor = 2 * mu * alpha + 2 * math.log(-math.expm1(-mu) / mu)
    val = 0.5 * math.log1p(gA * gA / _TWO_PI_E * math.exp(log_factor))
    return BoundResult(val, "lmw", {"mu_star": mu})


def _cma_value(mu: float, nu: float, g: float, peak: float) -> tuple[float, float]:
    """Truncated-Gaussian rate and input mean; ``(-inf, inf)`` when not representable."""
    try:
        tg = trunc_gauss_params(mu, nu, peak)
    except NumericError:
        return -math.inf, math.inf
    # eta * ((A - mu) P(A) + mu P(0)) = 2 (offset - log eta), which stays accurate
    # where the direct products cancel
    s = (g * nu) ** 2
    val = 0.5 * math.log1p(s) - (s * tg.entropy_offset + tg.log_eta) / (s + 1)
    return val, tg.mu_tilde


def lower_cma(channel: SisoChannel, n_grid: int = 120) -> BoundResult:
    """Rate of a truncated-Gaussian input, maximized over its parameters.

    Maximizes
    ``0.5 log(1 + g^2 nu^2) - log(eta)
    - eta g^2 nu^2 / (2 (g^2 nu^2 + 1)) ((A - mu) P(A) + mu P(0))``
    over ``(mu, nu)`` subject to the truncated mean not exceeding ``E``;
    ``P`` is the untruncated ``N(mu, nu^2)`` density.  With no peak
    constraint the ``P(A)`` term is dropped.

    The search runs over ``log nu`` on a grid with Brent refinement; for
    each ``nu`` the mean constraint caps ``mu`` at the root of
    ``mu_tilde(mu, nu) = E`` (the truncated mean increases with ``mu``),
    and ``mu`` is optimized below that cap.
    """
    ch = canonicalize(channel)
    g, A, E = ch.g, ch.peak, ch.avg
    if g == 0.0:
        return BoundResult(0.0, "cma", {"mu": math.nan, "nu": math.nan})
    if not math.isfinite(E):
        raise RegimeError("lower_cma needs a finite (canonical) average")
    scale = E

    def mu_cap(nu: float) -> float | None:
        lo = -30.0 * nu

        def h(m: float) -> float:
            return _cma_value(m, nu, g, A)[1] - E

        if h(lo) >= 0:
            return None
        if h(E) <= 0:
            return E
        return optimize.brentq(h, lo, E, xtol=1e-13 * max(1.0, E))

    def best_mu(nu: float) -> tuple[float, float]:
        cap = mu_cap(nu)
        if cap is None:
            return math.nan, -math.inf
        lo = max(-30.0 * nu, cap - (E + 10.0 * nu))
        return grid_refine_max(lambda m: _cma_value(m, nu, g, A)[0], lo, cap, n=24, xtol=1e-10)

    def outer(lognu: float) -> float:
        return best_mu(math.exp(lognu))[1]

    lo, hi = math.log(1e-3 * scale), math.log(30.0 * scale)
    lognu, val = grid_refine_max(outer, lo, hi, n=n_grid, xtol=1e-9)
    nu = math.exp(lognu)
    mu, val = best_mu(nu)
    val = max(val, 0.0)
    tg = trunc_gauss_params(mu, nu, A)
    return BoundResult(val, "cma", {"mu": float(mu), "nu": nu, "mu_tilde": float(tg.mu_tilde)})


def fh_masses(k: int, alpha: float) -> np.ndarray:
    """Truncated-geometric masses on ``k + 1`` equispaced points with mean ``alpha`` (fraction of A).

    ``a_i = t^i / sum_j t^j`` where ``t`` is the positive root of
    ``sum_{i=0}^k (1 - i/(k alpha)) t^i``; uniform when ``alpha >= 1/2``.
    """
    if alpha >= 0.5:
        return np.full(k + 1, 1.0 / (k + 1))
    i = np.arange(k + 1)
    c = 1.0 - i / (k * alpha)

    def poly(t: float) -> float:
        return float(np.polynomial.polynomial.polyval(t, c))

    # poly(0) = 1 and poly(1) = (k + 1)(1 - 1/(2 alpha)) < 0
    t0 = optimize.brentq(poly, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    logw = i * math.log(t0) if t0 > 0 else np.where(i == 0, 0.0, -np.inf)
    w = np.exp(logw - np.max(logw))
    return w / w.sum()


def lower_fh(
    channel: SisoChannel,
    k_max: int | None = None,
    delta: float = DEFAULT_DELTA,
    margin: float = DEFAULT_MARGIN,
    patience: int = 4,
) -> BoundResult:
    """Best rate of truncated-geometric inputs on ``k + 1`` equispaced points.

    Evaluates the discretized mutual information for ``k = 1, 2, ...`` and
    returns the maximum.  The search stops at ``k_max`` or after
    ``patience`` consecutive non-improving values of ``k``.
    """
    ch = canonicalize(channel)
    _need_peak_avg(ch, "lower_fh")
    alpha = ch.avg / ch.peak
    if k_max is None:
        k_max = int(min(200, max(8, math.ceil(2 * ch.g * ch.peak) + 4)))
    if ch.g == 0.0:
        return BoundResult(0.0, "fh", {"k": 1, "t0": alpha / (1 - alpha) if alpha < 0.5 else 1.0})
    grid = build_grid(ch, ch.peak, delta, margin)
    best = (-math.inf, 1)
    stall = 0
    for k in range(1, k_max + 1):
        a = fh_masses(k, alpha)
        pts = ch.peak * np.arange(k + 1) / k
        keep = a > 0
        dist = DiscreteDistribution.from_arrays(pts[keep], a[keep], merge_tol=0.0)
        val = mutual_information(dist, ch, grid)
        if val > best[0]:
            best, stall = (val, k), 0
        else:
            stall += 1
            if stall >= patience:
                break
    k = best[1]
    a = fh_masses(k, alpha)
    t0 = float(a[1] / a[0]) if k >= 1 else math.nan
    return BoundResult(best[0], "fh", {"k": k, "t0": t0})


def lower_exp_avg(channel: SisoChannel) -> BoundResult:
    """Rate of the exponential input under an average constraint only: ``0.5 log(1 + e g^2 E^2 / (2 pi))``."""
    ch = canonicalize(channel)
    _need_avg_only(ch, "lower_exp_avg")
    gE = ch.g * ch.avg
    return BoundResult(0.5 * math.log1p(math.e * gE * gE / (2 * math.pi)), "exp", {})


def geometric_distribution(spacing: float, avg: float, tail: float = 1e-10) -> DiscreteDistribution:
    """Geometric law on ``{0, l, 2l, ...}`` with mean ``avg``, truncated where the tail mass drops below ``tail``."""
    ratio = avg / (spacing + avg)
    n = int(math.ceil(math.log(tail) / math.log(ratio))) if ratio > 0 else 1
    i = np.arange(max(n, 1) + 1)
    a = (1 - ratio) * ratio**i
    return DiscreteDistribution.from_arrays(spacing * i, a, merge_tol=0.0)


def lower_geom_avg(
    channel: SisoChannel,
    ell_grid: Sequence[float] | None = None,
    delta: float = 1e-2,
    margin: float = DEFAULT_MARGIN,
) -> BoundResult:
    """Best rate of geometric inputs ``a_i = (l/(l+E)) (E/(l+E))^i`` on points ``i l``.

    Parameters
    ----------
    ell_grid : sequence of float, optional
        Candidate spacings; by default 16 log-spaced values between half a
        noise standard deviation (referred to the input) and
        ``max(20/g, 2E)``, refined around the best one.
    delta : float
        Output bin width.  The default is coarser than elsewhere because
        the support is long; the binning error is about ``delta^2/24``.
    """
    ch = canonicalize(channel)
    _need_avg_only(ch, "lower_geom_avg")
    E, g = ch.avg, ch.g
    if g == 0.0:
        return BoundResult(0.0, "geom", {"ell": math.nan})

    def rate(ell: float) -> float:
        dist = geometric_distribution(ell, E)
        grid = build_grid(ch, float(dist.points[-1]), delta, margin)
        return mutual_information(dist, ch, grid)

    if ell_grid is not None:
        vals = [rate(float(l)) for l in ell_grid]
        i = int(np.argmax(vals))
        return BoundResult(float(vals[i]), "geom", {"ell": float(ell_grid[i])})
    lo, hi = math.log(0.5 / g), math.log(max(20.0 / g, 2 * E))
    logl, val = grid_refine_max(lambda t: rate(math.exp(t)), lo, hi, n=16, xtol=1e-4)
    return BoundResult(val, "geom", {"ell": math.exp(logl)})


# ---------------------------------------------------------------------------
# Upper bounds
# ---------------------------------------------------------------------------


def duality_objective(nu: float, mu: float, gA: float, gE: float) -> float:
    """Duality upper-bound expression for ``E < A/2`` as a function of ``(nu, mu)``.

    Uses the output law whose roll-off scale is ``nu``; the ``mu`` term in
    front of the bracket ``exp(-nu^2/2) - exp(-(gA + nu)^2/2)`` is divided
    by ``gA sqrt(2 pi)``.
    """
    alpha = gE / gA
    lead = 1.0 - q_function(nu + gE) - q_function(nu + gA - gE)
    erf_nu = special.erf(nu / math.sqrt(2.0))
    # log(gA (e^{mu nu/gA} - e^{-mu(1+nu/gA)}) / (sqrt(2 pi) mu (1 - 2Q(nu))))
    log_arg = (
        math.log(gA)
        + mu * nu / gA
        + math.log(-math.expm1(-mu * (1.0 + 2.0 * nu / gA)))
        - math.log(_SQRT2PI * mu * erf_nu)
    )
    gauss = math.exp(-0.5 * nu * nu)
    return (
        lead * log_arg
        - 0.5
        + q_function(nu)
        + nu * gauss / _SQRT2PI
        + mu / (gA * _SQRT2PI) * (gauss - math.exp(-0.5 * (gA + nu) ** 2))
        + mu * alpha * (1.0 - 2.0 * q_function(nu + gA / 2))
    )


def duality_objective_half(nu: float, gA: float, mu: float = 1.0) -> float:
    """Duality upper-bound expression at ``E = A/2`` (uniform-with-Gaussian-tails output law)."""
    erf_nu = special.erf(nu / math.sqrt(2.0))
    return (
        (1.0 - 2.0 * q_function(nu + gA / 2)) * math.log((gA + 2 * nu) / (_SQRT2PI * mu * erf_nu))
        - 0.5
        + q_function(nu)
        + nu * math.exp(-0.5 * nu * nu) / _SQRT2PI
    )


def upper_duality_lmw(channel: SisoChannel) -> BoundResult:
    """Duality upper bound, minimized over the output-law parameters.

    ``E < A/2``: two-parameter minimization over ``(nu, mu) > 0`` in
    log-coordinates (grid over ``log nu`` with an inner grid-plus-Brent
    search over ``log mu``, then a Nelder-Mead polish).  ``E = A/2``:
    one-parameter minimization over ``nu`` with the factor ``mu`` in the
    logarithm fixed to 1.
    """
    ch = canonicalize(channel)
    _need_peak_avg(ch, "upper_duality_lmw")
    gA, gE = ch.g * ch.peak, ch.g * ch.avg
    if gA == 0.0:
        return BoundResult(0.0, "duality", {})
    if ch.avg >= ch.peak / 2:
        f = lambda t: duality_objective_half(math.exp(t), gA)
        t, val = grid_refine_min(f, math.log(1e-4), math.log(50.0), n=200)
        return BoundResult(
            max(val, 0.0), "duality", {"nu": math.exp(t), "mu": 1.0},
            notes=("factor mu in the E = A/2 expression fixed to 1",),
        )

    def f2(z: np.ndarray) -> float:
        try:
            v = duality_objective(math.exp(z[0]), math.exp(z[1]), gA, gE)
        except (ValueError, OverflowError, ZeroDivisionError):
            return math.inf
        return v if math.isfinite(v) else math.inf

    def inner(t: float) -> float:
        return grid_refine_min(lambda s: f2(np.array([t, s])), math.log(1e-4), math.log(1e3), n=40, xtol=1e-8)[1]

    t_best, _ = grid_refine_min(inner, math.log(1e-4), math.log(50.0), n=60, xtol=1e-8)
    s_best, _ = grid_refine_min(lambda s: f2(np.array([t_best, s])), math.log(1e-4), math.log(1e3), n=60)
    res = optimize.minimize(f2, np.array([t_best, s_best]), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
    z = res.x if res.fun <= f2(np.array([t_best, s_best])) else np.array([t_best, s_best])
    return BoundResult(max(float(f2(z)), 0.0), "duality", {"nu": math.exp(z[0]), "mu": math.exp(z[1])})


def upper_mckellips(channel: SisoChannel) -> BoundResult:
    """Peak-only upper bound ``log(1 + g A / sqrt(2 pi e))``.

    It also bounds channels with an additional average constraint, since
    removing a constraint cannot reduce capacity.
    """
    ch = canonicalize(channel)
    _need_peak_avg(ch, "upper_mckellips")
    return BoundResult(math.log1p(ch.g * ch.peak / math.sqrt(_TWO_PI_E)), "mckellips", {})


def upper_relaxation(channel: SisoChannel) -> BoundResult:
    """Gaussian-input relaxation ``0.5 log(1 + g^2 E (A - E))`` (maximum input variance ``E (A - E)``)."""
    ch = canonicalize(channel)
    _need_peak_avg(ch, "upper_relaxation")
    return BoundResult(0.5 * math.log1p(ch.g**2 * ch.avg * (ch.peak - ch.avg)), "relax", {})


def _sup_on_unit(f: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """Sup of a vectorized function on ``[0, 1]`` (endpoints included)."""
    x, v = grid_refine_max(lambda m: float(f(np.array(m))), 0.0, 1.0, n=200, xtol=1e-13)
    ends = [(0.0, float(f(np.array(0.0)))), (1.0, float(f(np.array(1.0))))]
    return max([(x, v)] + ends, key=lambda p: p[1])


def upper_sp_simplex(channel: SisoChannel) -> BoundResult:
    """Sphere-packing bound for the average constraint.

    ``sup_{m in [0,1]} m log(sqrt(e) g E / sqrt(2 pi)) - log((1-m)^{1-m} m^{3m/2})``
    with ``0^0 = 1``.
    """
    ch = canonicalize(channel)
    if not ch.has_avg:
        raise RegimeError("upper_sp_simplex needs an average constraint")
    if ch.g == 0.0:
        return BoundResult(0.0, "sp_simplex", {"mu": 0.0})
    c = math.log(math.sqrt(math.e) * ch.g * ch.avg / _SQRT2PI)
    m, v = _sup_on_unit(lambda m: m * c - (_xlogx(1 - m) + 1.5 * _xlogx(m)))
    return BoundResult(max(v, 0.0), "sp_simplex", {"mu": m})


def upper_sp_cube(channel: SisoChannel) -> BoundResult:
    """Sphere-packing bound for the peak constraint: the smaller of two suprema over ``m in [0, 1]``."""
    ch = canonicalize(channel)
    _need_peak_avg(ch, "upper_sp_cube")
    if ch.g == 0.0:
        return BoundResult(0.0, "sp_cube", {"mu": 0.0, "branch": 1})
    c = math.log(ch.g * ch.peak / math.sqrt(_TWO_PI_E))
    m1, v1 = _sup_on_unit(lambda m: m * c - (_xlogx(m) + 1.5 * _xlogx(1 - m)))
    m2, v2 = _sup_on_unit(lambda m: m * c - (0.5 * _xlogx(m) + _xlogx(1 - m) + (m - 1) * math.log(2.0)))
    if v1 <= v2:
        return BoundResult(max(v1, 0.0), "sp_cube", {"mu": m1, "branch": 1, "other": v2})
    return BoundResult(max(v2, 0.0), "sp_cube", {"mu": m2, "branch": 2, "other": v1})


# ---------------------------------------------------------------------------
# Asymptotics
# ---------------------------------------------------------------------------


def asymptotic_high_snr(channel: SisoChannel) -> BoundResult:
    """High-SNR capacity asymptote (may be negative at low SNR).

    * average only: ``0.5 log(e g^2 E^2 / (2 pi))``
    * ``alpha >= 1/2`` or peak only: ``0.5 log(g^2 A^2 / (2 pi e))``
    * ``alpha < 1/2``: ``0.5 log(g^2 A^2 exp(2 alpha mu) (1 - exp(-mu))^2 / (2 pi e mu^2))``
    """
    ch = canonicalize(channel)
    if ch.g == 0.0:
        return BoundResult(-math.inf, "asym_hi", {})
    if not ch.has_peak:
        gE = ch.g * ch.avg
        return BoundResult(0.5 * math.log(math.e * gE * gE / (2 * math.pi)), "asym_hi", {"regime": "avg"})
    gA = ch.g * ch.peak
    alpha = ch.avg / ch.peak
    base = 0.5 * math.log(gA * gA / _TWO_PI_E)
    if alpha >= 0.5:
        return BoundResult(base, "asym_hi", {"regime": "peak"})
    mu = trunc_exp_param(alpha)
    extra = alpha * mu + math.log(-math.expm1(-mu) / mu)
    return BoundResult(base + extra, "asym_hi", {"regime": "peak+avg", "mu_star": mu})


def asymptotic_low_snr(channel: SisoChannel) -> BoundResult:
    """Low-SNR capacity asymptote ``a (1 - a) g^2 A^2 / 2`` with ``a = min(alpha, 1/2)``."""
    ch = canonicalize(channel)
    _need_peak_avg(ch, "asymptotic_low_snr")
    a = min(ch.avg / ch.peak, 0.5)
    return BoundResult(a * (1 - a) * (ch.g * ch.peak) ** 2 / 2, "asym_lo", {"alpha": a})


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

_DISPATCH: dict[str, Callable[..., BoundResult]] = {
    "lmw": lower_lmw,
    "cma": lower_cma,
    "fh": lower_fh,
    "exp": lower_exp_avg,
    "geom": lower_geom_avg,
    "duality": upper_duality_lmw,
    "mckellips": upper_mckellips,
    "relax": upper_relaxation,
    "sp_simplex": upper_sp_simplex,
    "sp_cube": upper_sp_cube,
    "asym_hi": asymptotic_high_snr,
    "asym_lo": asymptotic_low_snr,
}


def applicable_methods(channel: SisoChannel, include_asymptotic: bool = False) -> list[str]:
    """Bound tags valid for the channel's constraint regime."""
    ch = canonicalize(channel)
    if ch.has_peak:
        out = ["lmw", "cma", "fh", "duality", "mckellips", "relax", "sp_simplex", "sp_cube"]
        if include_asymptotic:
            out += ["asym_hi", "asym_lo"]
    else:
        out = ["cma", "exp", "geom", "sp_simplex"]
        if include_asymptotic:
            out += ["asym_hi"]
    return out


def evaluate(channel: SisoChannel, methods: Iterable[str] | None = None, **kwargs: Any) -> dict[str, BoundResult]:
    """Evaluate several bounds by tag.

    ``kwargs`` are forwarded to the methods that accept them (``delta`` and
    ``margin`` for the numerically evaluated ones).
    """
    methods = list(methods) if methods is not None else applicable_methods(channel)
    out: dict[str, BoundResult] = {}
    for m in methods:
        if m not in _DISPATCH:
            raise KeyError(f"unknown bound method {m!r}")
        fn = _DISPATCH[m]
        extra = {k: v for k, v in kwargs.items() if m in ("fh", "geom") and k in ("delta", "margin")}
        out[m] = fn(channel, **extra)
    return out
