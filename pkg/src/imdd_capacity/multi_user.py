"""Two-user broadcast (BC) and multiple-access (MAC) rate regions.

Outer regions are unions of rectangles (BC) or a single pentagon (MAC)
built from single-user upper bounds.  Inner regions use truncated-Gaussian
inputs with superposition coding (BC) or joint decoding (MAC) and are
convexified by time sharing.  High- and low-SNR approximations are closed
form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import optimize

from .bounds import lower_cma, upper_duality_lmw, upper_relaxation
from .channel import SisoChannel, tg_moments, tg_moments_quad, trunc_gauss_params
from .errors import InvalidChannelError

__all__ = [
    "RateRegion2",
    "BcChannel",
    "MacChannel",
    "monotone_hull",
    "staircase_envelope",
    "bc_outer",
    "bc_inner_tg",
    "bc_high_snr_region",
    "bc_low_snr_region",
    "mac_outer",
    "mac_inner_tg",
    "mac_high_snr_region",
    "mac_low_snr_region",
    "high_snr_constant",
    "MAC_GAP",
]

_TWO_PI = 2.0 * math.pi

#: Gap of the high-SNR MAC approximation, ``0.5 log(9 e / (2 pi))``.
MAC_GAP = 0.5 * math.log(9.0 * math.e / _TWO_PI)


# ---------------------------------------------------------------------------
# Region container and geometry helpers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateRegion2:
    """Downward-closed two-user rate region described by its Pareto boundary.

    Attributes
    ----------
    boundary : ndarray, shape (m, 2)
        Vertices ``(r1, r2)`` in nats with ``r1`` nondecreasing and ``r2``
        nonincreasing, starting on the ``r2`` axis and ending on the ``r1``
        axis.  The region is everything dominated by the piecewise-linear
        curve through these vertices.
    tag : str
        ``"inner"``, ``"outer"`` or ``"asymptotic"``.
    params : list of dict
        Generating parameters per vertex (may be empty dicts for axis points).
    meta : dict
        Region-level metadata such as gap constants or user relabeling.
    """

    boundary: np.ndarray
    tag: str
    params: list[dict[str, Any]] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        b = np.asarray(self.boundary, dtype=float).reshape(-1, 2)
        if self.tag not in ("inner", "outer", "asymptotic"):
            raise ValueError("tag must be inner, outer or asymptotic")
        if np.any(b < -1e-12):
            raise ValueError("rates must be nonnegative")
        b = np.clip(b, 0.0, None)
        b.flags.writeable = False
        object.__setattr__(self, "boundary", b)

    @property
    def intercepts(self) -> tuple[float, float]:
        """Largest single-user rates ``(max r1, max r2)``."""
        return float(self.boundary[:, 0].max()), float(self.boundary[:, 1].max())

    def max_r2(self, r1: float) -> float:
        """Largest ``r2`` with ``(r1, r2)`` in the region (``-inf`` beyond the ``r1`` intercept)."""
        b = self.boundary
        if r1 > b[-1, 0] + 1e-15:
            return -math.inf
        if r1 <= b[0, 0]:
            return float(b[0, 1])
        return float(np.interp(r1, b[:, 0], b[:, 1]))

    def contains(self, point: Sequence[float], tol: float = 1e-6) -> bool:
        r1, r2 = float(point[0]), float(point[1])
        if r1 < -tol or r2 < -tol:
            return False
        return r2 <= self.max_r2(min(max(r1 - tol, 0.0), self.boundary[-1, 0])) + tol and r1 <= self.boundary[-1, 0] + tol

    def is_subset_of(self, other: "RateRegion2", tol: float = 1e-6, samples: int = 4) -> bool:
        """Check every vertex (and points along every edge) against ``other``."""
        b = self.boundary
        for i in range(len(b)):
            if not other.contains(b[i], tol):
                return False
            if i + 1 < len(b):
                for t in np.linspace(0, 1, samples + 2)[1:-1]:
                    if not other.contains((1 - t) * b[i] + t * b[i + 1], tol):
                        return False
        return True

    def swapped(self) -> "RateRegion2":
        """Same region with the two users exchanged."""
        return RateRegion2(self.boundary[::-1, ::-1].copy(), self.tag, self.params[::-1], dict(self.meta))

    def to_dict(self) -> dict[str, Any]:
        return {
            "tag": self.tag,
            "boundary": self.boundary.tolist(),
            "params": self.params,
            "meta": self.meta,
        }


def monotone_hull(points: np.ndarray) -> np.ndarray:
    """Pareto part of the convex hull of ``points`` together with the origin and axis projections.

    Uses Andrew's monotone chain.  The returned vertices run from the
    ``r2`` axis to the ``r1`` axis.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    pts = np.clip(pts, 0.0, None)
    if pts.size == 0:
        return np.zeros((1, 2))
    r1max, r2max = pts[:, 0].max(), pts[:, 1].max()
    extra = np.array([[0.0, 0.0], [0.0, pts[pts[:, 1].argmax(), 1]], [pts[pts[:, 0].argmax(), 0], 0.0]])
    pts = np.unique(np.vstack([pts, extra]), axis=0)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-18:
            upper.pop()
        upper.append(p)
    hull = np.array(upper[::-1])  # from left-most to right-most along the upper chain
    # keep the Pareto portion: from the highest point to the right-most point
    i0 = int(np.flatnonzero(hull[:, 1] >= r2max - 1e-15)[-1])
    right = np.flatnonzero(hull[i0:, 0] >= r1max - 1e-15)
    i1 = i0 + int(right[0]) if right.size else i0
    chain = hull[i0:i1 + 1]
    step = np.abs(np.diff(chain, axis=0)).max(axis=1) if len(chain) > 1 else np.zeros(0)
    chain = chain[np.concatenate([[True], step > 1e-13])]
    if chain[0, 0] > 0:
        chain = np.vstack([[0.0, chain[0, 1]], chain])
    if chain[-1, 1] > 0:
        chain = np.vstack([chain, [chain[-1, 0], 0.0]])
    return chain


def staircase_envelope(corners: np.ndarray) -> np.ndarray:
    """Pareto-optimal corners of a union of rectangles, ordered by ``r1``, closed to both axes.

    Consecutive corners are joined linearly when the region is queried;
    with a fine parameter grid this tracks the continuous envelope.
    """
    c = np.clip(np.asarray(corners, dtype=float).reshape(-1, 2), 0.0, None)
    order = np.lexsort((-c[:, 1], -c[:, 0]))
    c = c[order]
    keep = []
    best_r2 = -math.inf
    for p in c:
        if p[1] > best_r2 + 1e-15:
            keep.append(p)
            best_r2 = p[1]
    env = np.array(keep[::-1])
    if env[0, 0] > 0:
        env = np.vstack([[0.0, env[0, 1]], env])
    if env[-1, 1] > 0:
        env = np.vstack([env, [env[-1, 0], 0.0]])
    return env


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BcChannel:
    """Two-receiver broadcast channel ``Y_i = g_i X + Z_i`` with ``X in [0, A]``, ``E[X] <= E``.

    Gains are stored sorted (``g1 >= g2``); ``relabeled`` records whether the
    caller's users were swapped to achieve this.
    """

    g1: float
    g2: float
    peak: float
    avg: float
    relabeled: bool = False

    def __post_init__(self) -> None:
        for v in (self.g1, self.g2):
            if not (math.isfinite(v) and v >= 0):
                raise InvalidChannelError("gains must be finite and nonnegative")
        if not (math.isfinite(self.peak) and self.peak > 0):
            raise InvalidChannelError("BC needs a finite positive peak")
        if not self.avg > 0:
            raise InvalidChannelError("average constraint must be positive")
        if self.g1 < self.g2:
            g1, g2 = self.g2, self.g1
            object.__setattr__(self, "g1", float(g1))
            object.__setattr__(self, "g2", float(g2))
            object.__setattr__(self, "relabeled", not self.relabeled)
        object.__setattr__(self, "avg", float(min(self.avg, self.peak / 2)))

    @property
    def alpha(self) -> float:
        return self.avg / self.peak


@dataclass(frozen=True)
class MacChannel:
    """Two-transmitter MAC ``Y = g1 X1 + g2 X2 + Z`` with per-user peak and average limits."""

    g1: float
    g2: float
    peak1: float
    peak2: float
    avg1: float
    avg2: float

    def __post_init__(self) -> None:
        for v in (self.g1, self.g2):
            if not (math.isfinite(v) and v >= 0):
                raise InvalidChannelError("gains must be finite and nonnegative")
        for A, E in ((self.peak1, self.avg1), (self.peak2, self.avg2)):
            if not (math.isfinite(A) and A > 0 and E > 0):
                raise InvalidChannelError("MAC needs finite positive peaks and positive averages")
        object.__setattr__(self, "avg1", float(min(self.avg1, self.peak1 / 2)))
        object.__setattr__(self, "avg2", float(min(self.avg2, self.peak2 / 2)))

    @property
    def alphas(self) -> tuple[float, float]:
        return self.avg1 / self.peak1, self.avg2 / self.peak2

    @property
    def alpha12(self) -> float:
        return (self.g1 * self.avg1 + self.g2 * self.avg2) / (self.g1 * self.peak1 + self.g2 * self.peak2)


def _siso_upper(method: str, g: float, A: float, E: float) -> float:
    if A <= 0 or E <= 0 or g == 0:
        return 0.0
    ch = SisoChannel(g, A, min(E, A / 2))
    if method == "relax0":
        return upper_relaxation(ch).value
    if method == "lmw":
        return upper_duality_lmw(ch).value
    raise ValueError("method must be 'lmw' or 'relax0'")


def high_snr_constant(alpha: float) -> float:
    """``c = min(1/(2 pi e), e alpha^2 / (2 pi))``."""
    return min(1.0 / (_TWO_PI * math.e), math.e * alpha * alpha / _TWO_PI)


# ---------------------------------------------------------------------------
# Truncated-Gaussian grids
# ---------------------------------------------------------------------------


def _tg_table(peak: float, mus: np.ndarray, nus: np.ndarray) -> dict[str, np.ndarray]:
    """Truncated-Gaussian moments and entropy offsets on a (mu, nu) grid."""
    mu, nu = np.meshgrid(mus, nus, indexing="ij")
    mu, nu = mu.ravel(), nu.ravel()
    _, mu_t, var, phi, ill = tg_moments(mu, nu, peak)
    for k in np.flatnonzero(ill):
        try:
            _, mu_t[k], var[k], phi[k] = tg_moments_quad(float(mu[k]), float(nu[k]), peak)
        except (ValueError, ArithmeticError):
            mu_t[k] = var[k] = phi[k] = np.nan
    var = np.where(var > 0, var, np.nan)
    return {"mu": mu, "nu": nu, "mu_t": mu_t, "var": var, "phi": phi}


def _default_grid(peak: float, n_mu: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """Parameter grid: means across ``[0.1 A, 0.9 A]`` plus nonpositive means, widths up to ``A``.

    Nonpositive means with wide spreads approximate truncated exponentials,
    which is where the single-user optimum sits for small ``alpha``.
    """
    mus = peak * np.concatenate([np.linspace(0.1, 0.9, n_mu), [-1.0, -0.5, -0.25, 0.0]])
    nus = peak * np.array([1 / 8, 1 / 6, 1 / 4, 1 / 3, 1 / 2, 3 / 4, 1.0])
    return mus, nus


def _tg_point(peak: float, mu: float, nu: float) -> tuple[float, float, float] | None:
    """``(mu_tilde, var, phi)`` for one parameter set, or ``None`` when degenerate."""
    if not (nu > 0 and peak > 0 and math.isfinite(mu)):
        return None
    try:
        p = trunc_gauss_params(mu, nu, peak)
    except (ValueError, ArithmeticError):
        return None
    if not (p.nu_tilde2 > 0 and math.isfinite(p.entropy_offset)):
        return None
    return p.mu_tilde, p.nu_tilde2, p.entropy_offset


# ---------------------------------------------------------------------------
# Broadcast channel
# ---------------------------------------------------------------------------


def _rho_grid(n: int) -> np.ndarray:
    """Uniform grid on ``[0, 1]`` refined geometrically near 0.

    The strong user's rate rises steeply in ``rho`` at high SNR, so the
    boundary between ``rho = 0`` and the first uniform step needs extra
    points.
    """
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, n), np.geomspace(1e-6, 1.0 / max(n - 1, 1), 40)]))


def _finish(region: RateRegion2, relabeled: bool) -> RateRegion2:
    region.meta["relabeled"] = relabeled
    return region.swapped() if relabeled else region


def bc_outer(channel: BcChannel, method: str = "lmw", rho_grid: int = 101) -> RateRegion2:
    """Outer bound: union over ``rho`` of rectangles built from a single-user upper bound.

    For each ``rho``,
    ``r1 <= 0.5 log(1 + (g1/g2)^2 (exp(2 rbar(rho A, rho E)) - 1))`` and
    ``r2 <= rbar(A, E) - rbar(rho A, rho E)``, where ``rbar`` is the
    weak-user bound (``method="lmw"``: duality bound; ``"relax0"``:
    relaxation bound).  The union's Pareto envelope is returned.
    """
    ch = channel
    rhos = _rho_grid(rho_grid)
    full = _siso_upper(method, ch.g2, ch.peak, ch.avg)
    corners, params = [], []
    for rho in rhos:
        if ch.g2 == 0:
            r1 = _siso_upper(method, ch.g1, rho * ch.peak, rho * ch.avg)
            r2 = 0.0
        else:
            part = _siso_upper(method, ch.g2, rho * ch.peak, rho * ch.avg)
            r1 = 0.5 * math.log1p((ch.g1 / ch.g2) ** 2 * math.expm1(2 * part))
            r2 = max(full - part, 0.0)
        corners.append((r1, r2))
        params.append({"rho": float(rho)})
    env = staircase_envelope(np.array(corners))
    region = RateRegion2(env, "outer", _match_params(env, np.array(corners), params),
                         {"method": method, "rho_grid": rho_grid})
    return _finish(region, ch.relabeled)


def _match_params(env: np.ndarray, pts: np.ndarray, params: list[dict]) -> list[dict]:
    out = []
    for v in env:
        d = np.abs(pts - v).sum(axis=1)
        i = int(np.argmin(d))
        out.append(params[i] if d[i] < 1e-12 else {})
    return out


def _bc_rates_point(ch: BcChannel, rho: float, q: Sequence[float]) -> tuple[tuple[float, float] | None, float]:
    """Rates of one superposition point and the relative violation of the average budget."""
    mu1, nu1, mu2, nu2 = q
    A1, A2 = rho * ch.peak, (1 - rho) * ch.peak
    m1 = v1 = r1 = 0.0
    m2 = r2 = 0.0
    if A1 > 0:
        t1 = _tg_point(A1, mu1, nu1)
        if t1 is None:
            return None, math.inf
        m1, v1, f1 = t1
        r1 = 0.5 * math.log(nu1**2 / v1 + ch.g1**2 * nu1**2) - f1
    if A2 > 0:
        t2 = _tg_point(A2, mu2, nu2)
        if t2 is None:
            return None, math.inf
        m2, v2, f2 = t2
        r2 = 0.5 * math.log(nu2**2 / v2 + ch.g2**2 * nu2**2 / (ch.g2**2 * v1 + 1.0)) - f2
    if not (math.isfinite(r1) and math.isfinite(r2)):
        return None, math.inf
    viol = max(m1 + m2 - ch.avg, 0.0) / ch.avg
    return (max(r1, 0.0), max(r2, 0.0)), viol


def bc_inner_tg(
    channel: BcChannel,
    rho_grid: int = 101,
    n_mu: int = 9,
    polish_directions: int = 7,
) -> RateRegion2:
    """Superposition-coding inner bound with truncated-Gaussian layers.

    The peak is split as ``A1 = rho A`` (strong user's layer) and
    ``A2 = (1 - rho) A``; layer ``i`` is a Gaussian ``N(mu_i, nu_i^2)``
    truncated to ``[0, A_i]`` and the layer means must fit the average
    budget.  For each ``(rho, q)`` on a grid

    ``r1 <= 0.5 log(nu1^2/var1 + g1^2 nu1^2) - phi1``,
    ``r2 <= 0.5 log(nu2^2/var2 + g2^2 nu2^2/(g2^2 var1 + 1)) - phi2``.

    The best grid points in ``polish_directions`` weight directions are
    refined with Nelder-Mead, and the convex hull (time sharing) of all
    corner points is returned.  A zero-peak layer contributes rate 0.
    """
    ch = channel
    rhos = np.linspace(0.0, 1.0, rho_grid)
    pts_all, params_all = [], []
    for rho in rhos:
        A1, A2 = rho * ch.peak, (1 - rho) * ch.peak
        if A1 > 0:
            t1 = _tg_table(A1, *_default_grid(A1, n_mu))
        else:
            t1 = {k: np.zeros(1) for k in ("mu", "nu", "mu_t", "var", "phi")}
        if A2 > 0:
            t2 = _tg_table(A2, *_default_grid(A2, n_mu))
        else:
            t2 = {k: np.zeros(1) for k in ("mu", "nu", "mu_t", "var", "phi")}
        if A1 > 0:
            r1 = 0.5 * np.log(t1["nu"] ** 2 / t1["var"] + ch.g1**2 * t1["nu"] ** 2) - t1["phi"]
        else:
            r1 = np.zeros(1)
        if A2 > 0:
            denom = ch.g2**2 * t1["var"][:, None] + 1.0
            r2 = 0.5 * np.log(t2["nu"][None, :] ** 2 / t2["var"][None, :]
                              + ch.g2**2 * t2["nu"][None, :] ** 2 / denom) - t2["phi"][None, :]
        else:
            r2 = np.zeros((r1.size, 1))
        r1m = np.broadcast_to(r1[:, None], r2.shape)
        feas = (t1["mu_t"][:, None] + t2["mu_t"][None, :]) <= ch.avg * (1 + 1e-12)
        ok = feas & np.isfinite(r1m) & np.isfinite(r2)
        i, j = np.nonzero(ok)
        if i.size == 0:
            continue
        pts = np.column_stack([np.clip(r1m[i, j], 0, None), np.clip(r2[i, j], 0, None)])
        hull = monotone_hull(pts)
        for v in hull:
            d = np.abs(pts - v).sum(axis=1)
            k = int(np.argmin(d))
            if d[k] < 1e-12:
                pts_all.append(v)
                params_all.append({"rho": float(rho), "q": [float(t1["mu"][i[k]]), float(t1["nu"][i[k]]),
                                                            float(t2["mu"][j[k]]), float(t2["nu"][j[k]])]})
    pts_arr = np.array(pts_all) if pts_all else np.zeros((1, 2))

    if polish_directions > 0 and pts_all:
        extra_pts, extra_params = [], []
        for w in _directions(polish_directions):
            k = int(np.argmax(pts_arr @ w))
            start = params_all[k]
            x0 = np.array([start["rho"], *start["q"]])

            def neg(x, w=w):
                rho = float(np.clip(x[0], 0.0, 1.0))
                r, viol = _bc_rates_point(ch, rho, x[1:])
                if r is None:
                    return 1e6
                return -(w[0] * r[0] + w[1] * r[1]) + 1e3 * viol

            res = optimize.minimize(neg, x0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
            rho = float(np.clip(res.x[0], 0.0, 1.0))
            r, viol = _bc_rates_point(ch, rho, res.x[1:])
            if r is not None and viol == 0.0:
                extra_pts.append(r)
                extra_params.append({"rho": rho, "q": [float(v) for v in res.x[1:]]})
        if extra_pts:
            pts_arr = np.vstack([pts_arr, np.array(extra_pts)])
            params_all += extra_params
    hull = monotone_hull(pts_arr)
    region = RateRegion2(hull, "inner", _match_params(hull, pts_arr, params_all),
                         {"rho_grid": rho_grid, "n_mu": n_mu})
    return _finish(region, ch.relabeled)


def _cma_seed(g: float, A: float, E: float) -> list[float] | None:
    """Truncated-Gaussian parameters maximizing the single-user rate, as a polish seed."""
    if g == 0:
        # a silent user loses least with a narrow, nearly Gaussian law inside the window
        m = 0.5 * min(E, A / 2)
        return [m, 0.02 * m]
    opt = lower_cma(SisoChannel(g, A, E)).optimizer
    if not (math.isfinite(opt.get("mu", math.nan)) and math.isfinite(opt.get("nu", math.nan))):
        return None
    return [float(opt["mu"]), float(opt["nu"])]


def _directions(n: int) -> list[np.ndarray]:
    angles = np.linspace(0.0, math.pi / 2, n)
    return [np.array([math.cos(t), math.sin(t)]) for t in angles]


def bc_high_snr_region(channel: BcChannel, rho_grid: int = 1001) -> RateRegion2:
    """High-SNR approximation: union over ``rho`` of

    ``r1 <= 0.5 log(1 + c rho^2 g1^2 A^2)``,
    ``r2 <= 0.5 log(1 + c (1-rho)^2 g2^2 A^2 / (c rho^2 g2^2 A^2 + 1))``,

    with ``c = min(1/(2 pi e), e alpha^2/(2 pi))``.  The gap constant
    ``log(3 sqrt(c) / alpha)`` is stored in ``meta["gap"]``.
    """
    ch = channel
    c = high_snr_constant(ch.alpha)
    rho = _rho_grid(rho_grid)
    A2 = ch.peak**2
    r1 = 0.5 * np.log1p(c * rho**2 * ch.g1**2 * A2)
    r2 = 0.5 * np.log1p(c * (1 - rho) ** 2 * ch.g2**2 * A2 / (c * rho**2 * ch.g2**2 * A2 + 1))
    corners = np.column_stack([r1, r2])
    env = staircase_envelope(corners)
    params = [{"rho": float(x)} for x in rho]
    region = RateRegion2(env, "asymptotic", _match_params(env, corners, params),
                         {"c": c, "gap": math.log(3 * math.sqrt(c) / ch.alpha)})
    return _finish(region, ch.relabeled)


def bc_low_snr_region(channel: BcChannel) -> RateRegion2:
    """Low-SNR region ``r1/g1^2 + r2/g2^2 <= alpha (1 - alpha) A^2 / 2`` (TDMA with on-off keying)."""
    ch = channel
    s = ch.alpha * (1 - ch.alpha) * ch.peak**2 / 2
    b = np.array([[0.0, ch.g2**2 * s], [ch.g1**2 * s, 0.0]])
    region = RateRegion2(b, "asymptotic", [{}, {}], {"budget": s})
    return _finish(region, ch.relabeled)


# ---------------------------------------------------------------------------
# Multiple-access channel
# ---------------------------------------------------------------------------


def _pentagon(r1: float, r2: float, s: float) -> np.ndarray:
    """Pareto boundary of ``{r1 <= a, r2 <= b, r1 + r2 <= s}`` (a box when the sum cut is slack)."""
    r1, r2 = max(r1, 0.0), max(r2, 0.0)
    s = max(min(s, r1 + r2), 0.0)
    top = min(r2, s)
    right = min(r1, s)
    pts = [(0.0, top), (min(s - top, right), top), (right, min(s - right, top)), (right, 0.0)]
    out = [pts[0]]
    for p in pts[1:]:
        if abs(p[0] - out[-1][0]) > 1e-15 or abs(p[1] - out[-1][1]) > 1e-15:
            out.append(p)
    return np.array(out)


def mac_outer(channel: MacChannel, method: str = "lmw") -> RateRegion2:
    """Pentagon ``r_i <= rbar_{g_i}(A_i, E_i)``, ``r1 + r2 <= rbar_1(g1 A1 + g2 A2, g1 E1 + g2 E2)``."""
    ch = channel
    r1 = _siso_upper(method, ch.g1, ch.peak1, ch.avg1)
    r2 = _siso_upper(method, ch.g2, ch.peak2, ch.avg2)
    aggA = ch.g1 * ch.peak1 + ch.g2 * ch.peak2
    aggE = ch.g1 * ch.avg1 + ch.g2 * ch.avg2
    s = _siso_upper(method, 1.0, aggA, aggE)
    b = _pentagon(r1, r2, s)
    return RateRegion2(b, "outer", [{} for _ in b], {"method": method, "individual": [r1, r2], "sum": s})


def _mac_rates(ch: MacChannel, t1, t2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Individual and sum-rate cuts of the truncated-Gaussian pentagon (vectorized over grids)."""
    v1, n1, f1 = t1["var"][:, None], t1["nu"][:, None] ** 2, t1["phi"][:, None]
    v2, n2, f2 = t2["var"][None, :], t2["nu"][None, :] ** 2, t2["phi"][None, :]
    g1s, g2s = ch.g1**2, ch.g2**2
    r1 = 0.5 * np.log(n1 / v1 + g1s * n1) - f1
    r2 = 0.5 * np.log(n2 / v2 + g2s * n2) - f2
    s = 0.5 * np.log(n1 * n2 / (v1 * v2) + g1s * n1 * n2 / v2 + g2s * n1 * n2 / v1) - f1 - f2
    r1, r2, s = np.broadcast_arrays(r1, r2, s)
    return r1, r2, s


def mac_inner_tg(channel: MacChannel, n_mu: int = 9, polish_directions: int = 7) -> RateRegion2:
    """Truncated-Gaussian inner bound with joint decoding.

    For parameters ``q = (mu1, nu1, mu2, nu2)`` with truncated means within
    each user's average budget,

    ``r_i <= 0.5 log(nu_i^2/var_i + g_i^2 nu_i^2) - phi_i`` and
    ``r1 + r2 <= 0.5 log(nu1^2 nu2^2/(var1 var2) + g1^2 nu1^2 nu2^2/var2 + g2^2 nu1^2 nu2^2/var1) - phi1 - phi2``.

    A grid over ``q`` is refined by Nelder-Mead along ``polish_directions``
    weight directions; the convex hull of all pentagon corners is returned.
    """
    ch = channel
    t1 = _tg_table(ch.peak1, *_default_grid(ch.peak1, n_mu))
    t2 = _tg_table(ch.peak2, *_default_grid(ch.peak2, n_mu))
    r1, r2, s = _mac_rates(ch, t1, t2)
    feas = (t1["mu_t"][:, None] <= ch.avg1 * (1 + 1e-12)) & (t2["mu_t"][None, :] <= ch.avg2 * (1 + 1e-12))
    ok = feas & np.isfinite(r1) & np.isfinite(r2) & np.isfinite(s)
    pts, params = [], []
    for i, j in zip(*np.nonzero(ok)):
        q = [float(t1["mu"][i]), float(t1["nu"][i]), float(t2["mu"][j]), float(t2["nu"][j])]
        for p in _pentagon(r1[i, j], r2[i, j], s[i, j]):
            pts.append(p)
            params.append({"q": q})

    def rates_at(q) -> tuple[tuple[float, float, float] | None, float]:
        a = _tg_point(ch.peak1, q[0], q[1])
        b = _tg_point(ch.peak2, q[2], q[3])
        if a is None or b is None:
            return None, math.inf
        viol = max(a[0] - ch.avg1, 0.0) / ch.avg1 + max(b[0] - ch.avg2, 0.0) / ch.avg2
        ta = {"var": np.array([a[1]]), "nu": np.array([q[1]]), "phi": np.array([a[2]])}
        tb = {"var": np.array([b[1]]), "nu": np.array([q[3]]), "phi": np.array([b[2]])}
        x, y, z = _mac_rates(ch, ta, tb)
        r = (float(x[0, 0]), float(y[0, 0]), float(z[0, 0]))
        if not all(math.isfinite(v) for v in r):
            return None, math.inf
        return r, viol

    pts_arr = np.array(pts) if pts else np.zeros((1, 2))
    if polish_directions > 0:
        seeds = [params[k]["q"] for k in {int(np.argmax(pts_arr @ w)) for w in _directions(polish_directions)}] if pts else []
        q1 = _cma_seed(ch.g1, ch.peak1, ch.avg1)
        q2 = _cma_seed(ch.g2, ch.peak2, ch.avg2)
        if q1 is not None and q2 is not None:
            seeds.append(q1 + q2)
        # two sweeps over the directions; each optimum (and its user swap) seeds later directions
        dirs = _directions(polish_directions)
        for w in dirs + dirs[::-1]:
            def neg(x, w=w):
                r, viol = rates_at(x)
                if r is None:
                    return 1e6
                return -float(np.max(_pentagon(*r) @ w)) + 1e3 * viol

            best = min(seeds, key=lambda q: neg(np.array(q)), default=None)
            if best is None:
                continue
            res = optimize.minimize(neg, np.array(best), method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
            q = [float(v) for v in res.x]
            seeds += [q, q[2:] + q[:2]]
            for cand in (q, q[2:] + q[:2]):
                r, viol = rates_at(cand)
                if r is not None and viol == 0.0:
                    for p in _pentagon(*r):
                        pts.append(p)
                        params.append({"q": cand})
        if pts:
            pts_arr = np.array(pts)
    hull = monotone_hull(pts_arr)
    return RateRegion2(hull, "inner", _match_params(hull, pts_arr, params), {"n_mu": n_mu})


def mac_high_snr_region(channel: MacChannel) -> RateRegion2:
    """High-SNR pentagon with constants ``c_i`` and ``c_12``; gap ``0.5 log(9e/(2 pi))`` in ``meta``."""
    ch = channel
    a1, a2 = ch.alphas
    c1, c2, c12 = high_snr_constant(a1), high_snr_constant(a2), high_snr_constant(ch.alpha12)
    r1 = 0.5 * math.log1p(c1 * (ch.g1 * ch.peak1) ** 2)
    r2 = 0.5 * math.log1p(c2 * (ch.g2 * ch.peak2) ** 2)
    s = 0.5 * math.log1p(c12 * (ch.g1 * ch.peak1 + ch.g2 * ch.peak2) ** 2)
    b = _pentagon(r1, r2, s)
    return RateRegion2(b, "asymptotic", [{} for _ in b],
                       {"c": [c1, c2], "c12": c12, "alpha12": ch.alpha12, "gap": MAC_GAP,
                        "individual": [r1, r2], "sum": s})


def mac_low_snr_region(channel: MacChannel) -> RateRegion2:
    """Low-SNR box ``r_i <= alpha_i (1 - alpha_i) g_i^2 A_i^2 / 2`` (on-off keying with successive decoding)."""
    ch = channel
    a1, a2 = ch.alphas
    r1 = a1 * (1 - a1) * (ch.g1 * ch.peak1) ** 2 / 2
    r2 = a2 * (1 - a2) * (ch.g2 * ch.peak2) ** 2 / 2
    b = _pentagon(r1, r2, r1 + r2)
    return RateRegion2(b, "asymptotic", [{} for _ in b], {"individual": [r1, r2]})
