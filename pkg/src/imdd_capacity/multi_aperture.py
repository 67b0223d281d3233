"""Parallel, SIMO, MISO and MIMO intensity-modulated Gaussian channels.

Parallel channels are handled through intensity allocation across the
sub-channels combined with single-user bounds.  SIMO and (some) MISO
channels reduce exactly to single-user channels.  MIMO channels with
``nr >= nt`` use the QR successive-decoding scheme and the asymptotic
log-det expressions; the low-SNR regime is governed by a maximally
correlated binary input.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import optimize

from ._optim import grid_refine_max
from .bounds import (
    BoundResult,
    lower_cma,
    lower_exp_avg,
    lower_fh,
    lower_geom_avg,
    lower_lmw,
    upper_relaxation,
    upper_sp_cube,
)
from .channel import SisoChannel, trunc_exp_param
from .errors import DegenerateError, InvalidChannelError, RegimeError

__all__ = [
    "MimoChannel",
    "Allocation",
    "ParallelBounds",
    "MisoReduction",
    "MisoHighSnr",
    "CorrelatedBinary",
    "allocate_parallel_avg",
    "allocate_inverted_waterfill",
    "allocate_concave",
    "parallel_bounds",
    "parallel_low_snr_asymptote",
    "parallel_low_snr_log_curve",
    "simo_reduce",
    "miso_reduce",
    "miso_high_snr",
    "miso_low_snr_gamma",
    "mimo_qr_rate",
    "mimo_high_snr",
    "mimo_low_snr_eta",
    "sp_simplex_value",
    "householder_qr",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MimoChannel:
    """Channel ``Y = G X + Z`` with ``X in [0, A]^nt`` and ``sum_i E[X_i] <= E``.

    Parameters
    ----------
    G : array_like, shape (nr, nt)
        Nonnegative gain matrix.
    peak : float
        Per-input peak ``A`` (``math.inf`` for none).
    avg : float
        Total average ``E`` (``math.inf`` for none).
    """

    G: np.ndarray
    peak: float = math.inf
    avg: float = math.inf

    def __post_init__(self) -> None:
        G = np.array(self.G, dtype=float)
        if G.ndim == 1:
            G = G[None, :]
        if G.ndim != 2 or G.size == 0:
            raise InvalidChannelError("G must be a nonempty 2-D matrix")
        if not np.all(np.isfinite(G)) or np.any(G < 0):
            raise InvalidChannelError("gains must be finite and nonnegative")
        if not (self.peak > 0 and self.avg > 0):
            raise InvalidChannelError("constraints must be positive")
        if math.isinf(self.peak) and math.isinf(self.avg):
            raise InvalidChannelError("at least one constraint must be finite")
        G.flags.writeable = False
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "peak", float(self.peak))
        object.__setattr__(self, "avg", float(self.avg))

    @property
    def nr(self) -> int:
        return int(self.G.shape[0])

    @property
    def nt(self) -> int:
        return int(self.G.shape[1])

    @property
    def alpha(self) -> float:
        return self.avg / self.peak if math.isfinite(self.peak) else 0.0


# ---------------------------------------------------------------------------
# Allocation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Allocation:
    """Split of the total average intensity across sub-channels."""

    E: np.ndarray
    objective: float
    multiplier: float = math.nan
    notes: tuple[str, ...] = ()

    @property
    def active(self) -> np.ndarray:
        return self.E > 0

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))


def _surrogate_objective(c: np.ndarray, E: np.ndarray) -> float:
    return float(0.5 * np.log1p(c * E * E).sum())


def _kkt_root(c: np.ndarray, lam: float, sign: np.ndarray) -> np.ndarray:
    disc = np.sqrt(np.clip(1.0 - 4.0 * lam * lam / c, 0.0, None))
    return (1.0 + sign * disc) / (2.0 * lam)


def _solve_subset(c: np.ndarray, total: float, sign: np.ndarray) -> tuple[np.ndarray, float] | None:
    """KKT point with every channel of ``c`` active; ``sign`` picks the root branch per channel."""
    lam_max = float(np.min(np.sqrt(c)) / 2.0)

    def excess(lam: float) -> float:
        return float(_kkt_root(c, lam, sign).sum()) - total

    hi = lam_max
    lo = lam_max * 1e-12
    f_hi, f_lo = excess(hi), excess(lo)
    if f_hi * f_lo > 0:
        return None
    lam = optimize.brentq(excess, lo, hi, xtol=1e-16, rtol=1e-15, maxiter=500)
    E = _kkt_root(c, lam, sign)
    if np.any(E < 0):
        return None
    return E * (total / E.sum()), lam


def allocate_parallel_avg(gains: Sequence[float], E: float, max_enumerate: int = 16) -> Allocation:
    """Allocate ``E`` to maximize ``sum_i 0.5 log(1 + e g_i^2 E_i^2 / (2 pi))``.

    The objective is convex near 0 and concave beyond ``1/sqrt(c_i)``
    (``c_i = e g_i^2 / (2 pi)``), so the KKT conditions have several
    solutions.  On an active set every channel satisfies
    ``c_i E_i / (1 + c_i E_i^2) = lambda``, i.e.
    ``E_i = (1 +- sqrt(1 - 4 lambda^2/c_i)) / (2 lambda)``.  For up to
    ``max_enumerate`` channels every active subset is tried with the
    concave-branch root for all channels, and with the convex-branch root
    for one of them; single-channel allocations are always candidates.  The
    best feasible candidate is returned.  For more channels a multi-start
    local search is used instead.
    """
    g = np.asarray(gains, dtype=float).ravel()
    if np.any(g < 0):
        raise InvalidChannelError("gains must be nonnegative")
    if not E > 0:
        raise InvalidChannelError("E must be positive")
    n = g.size
    c = math.e * g * g / _TWO_PI
    best_E = np.zeros(n)
    best_val = -math.inf
    best_lam = math.nan
    usable = np.flatnonzero(c > 0)
    if usable.size == 0:
        return Allocation(np.zeros(n), 0.0, 0.0, ("all gains are zero",))

    def consider(E_vec: np.ndarray, lam: float) -> None:
        nonlocal best_E, best_val, best_lam
        val = _surrogate_objective(c, E_vec)
        if val > best_val + 1e-15:
            best_E, best_val, best_lam = E_vec, val, lam

    for i in usable:
        vec = np.zeros(n)
        vec[i] = E
        consider(vec, c[i] * E / (1 + c[i] * E * E))

    if usable.size <= max_enumerate:
        for r in range(2, usable.size + 1):
            for subset in itertools.combinations(usable, r):
                idx = np.array(subset)
                signs = [np.ones(r)]
                for j in range(r):
                    s = np.ones(r)
                    s[j] = -1.0
                    signs.append(s)
                for s in signs:
                    sol = _solve_subset(c[idx], E, s)
                    if sol is None:
                        continue
                    vec = np.zeros(n)
                    vec[idx] = sol[0]
                    consider(vec, sol[1])
    else:
        rng = np.random.default_rng(0)
        cons = ({"type": "eq", "fun": lambda x: x.sum() - E},)
        for start in [np.full(n, E / n)] + [rng.dirichlet(np.ones(n)) * E for _ in range(16)]:
            res = optimize.minimize(lambda x: -_surrogate_objective(c, x), start, method="SLSQP",
                                    bounds=[(0, E)] * n, constraints=cons)
            consider(np.clip(res.x, 0, None), math.nan)
    return Allocation(best_E, best_val, best_lam)


def allocate_inverted_waterfill(gains: Sequence[float], A: float, E: float) -> Allocation:
    """Low-SNR allocation ``E_i = max(0, A/2 - mu/g_i^2)`` with ``sum E_i = min(E, nt A/2)``."""
    g = np.asarray(gains, dtype=float).ravel()
    if not (A > 0 and E > 0) or math.isinf(A):
        raise InvalidChannelError("need finite A > 0 and E > 0")
    n = g.size
    g2 = g * g
    target = min(E, n * A / 2)
    pos = g2 > 0
    if not np.any(pos):
        return Allocation(np.zeros(n), 0.0, 0.0, ("all gains are zero",))
    target = min(target, np.count_nonzero(pos) * A / 2)

    def alloc(mu: float) -> np.ndarray:
        out = np.zeros(n)
        out[pos] = np.clip(A / 2 - mu / g2[pos], 0.0, None)
        return out

    if alloc(0.0).sum() <= target * (1 + 1e-15):
        mu = 0.0
    else:
        hi = A / 2 * float(g2[pos].max())
        mu = optimize.brentq(lambda m: alloc(m).sum() - target, 0.0, hi, xtol=1e-16, rtol=1e-15)
    E_vec = alloc(mu)
    obj = float((0.5 * g2 * E_vec * (A - E_vec)).sum())
    return Allocation(E_vec, obj, mu)


def allocate_concave(
    values: Sequence[Callable[[float], float]],
    caps: Sequence[float],
    total: float,
) -> Allocation:
    """Maximize ``sum_i f_i(E_i)`` over ``sum E_i <= total``, ``0 <= E_i <= cap_i`` for concave ``f_i``.

    Bisection on the multiplier ``lambda``: each ``E_i(lambda)`` maximizes
    ``f_i(E) - lambda E`` (a unimodal problem) and the sum is nonincreasing
    in ``lambda``.
    """
    n = len(values)
    caps_arr = np.array([min(float(cp), total) for cp in caps])

    def best_response(lam: float) -> np.ndarray:
        out = np.zeros(n)
        for i, f in enumerate(values):
            if caps_arr[i] <= 0:
                continue
            res = optimize.minimize_scalar(lambda e: -(f(e) - lam * e), bounds=(0.0, caps_arr[i]),
                                           method="bounded", options={"xatol": 1e-12 * max(1.0, caps_arr[i])})
            cands = [(0.0, f(0.0)), (caps_arr[i], f(caps_arr[i]) - lam * caps_arr[i]), (res.x, -res.fun)]
            out[i] = max(cands, key=lambda p: p[1])[0] if lam > 0 else caps_arr[i]
        return out

    def total_value(E_vec: np.ndarray) -> float:
        return float(sum(f(e) for f, e in zip(values, E_vec)))

    if caps_arr.sum() <= total:
        E_vec = caps_arr.copy()
        return Allocation(E_vec, total_value(E_vec), 0.0)
    lo, hi = 0.0, 1.0
    while best_response(hi).sum() > total:
        hi *= 4.0
        if hi > 1e12:
            break
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if best_response(mid).sum() > total:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(hi, 1e-300):
            break
    E_vec = best_response(hi)
    slack = total - E_vec.sum()
    if slack > 0:
        # distribute leftover budget (flat parts of f_i) to channels with room
        room = caps_arr - E_vec
        if room.sum() > 0:
            E_vec = E_vec + room * min(1.0, slack / room.sum())
    return Allocation(E_vec, total_value(E_vec), hi)


def sp_simplex_value(gE: float) -> tuple[float, float]:
    """Sphere-packing bound for average constraint ``E`` at gain ``g`` (as ``gE``) and its maximizer.

    The objective ``m c - (1-m) log(1-m) - 1.5 m log m`` (``c = log(sqrt(e) gE / sqrt(2 pi))``)
    is strictly concave in ``m``; its stationary point solves
    ``c + log(1-m) - 1.5 log m - 1/2 = 0``.
    """
    if gE <= 0:
        return 0.0, 0.0
    c = math.log(math.sqrt(math.e) * gE / math.sqrt(_TWO_PI))

    def dphi(m: float) -> float:
        return c + math.log1p(-m) - 1.5 * math.log(m) - 0.5

    lo, hi = 1e-300, 1.0 - 1e-16
    if dphi(hi) > 0:
        m = 1.0
    else:
        m = optimize.brentq(dphi, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=1000)
    val = m * c
    if m < 1:
        val -= (1 - m) * math.log1p(-m)
    if m > 0:
        val -= 1.5 * m * math.log(m)
    return max(val, 0.0), m


# ---------------------------------------------------------------------------
# Parallel-channel bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParallelBounds:
    """Lower and upper bounds for parallel channels.  Unpacks as ``lower, upper``."""

    lower: float
    upper: float
    lower_allocation: Allocation
    upper_allocation: Allocation
    method: str
    notes: tuple[str, ...] = ()

    def __iter__(self) -> Iterator[float]:
        return iter((self.lower, self.upper))


def _siso_lower(method: str, g: float, A: float, E: float) -> float:
    if E <= 0 or g == 0:
        return 0.0
    ch = SisoChannel(g, A, E)
    if math.isinf(A):
        fn = {"lmw": lower_exp_avg, "cma": lower_cma, "fh": lower_geom_avg}[method]
    else:
        fn = {"lmw": lower_lmw, "cma": lower_cma, "fh": lower_fh}[method]
    return fn(ch).value


def _siso_upper_finite(g: float, A: float, E: float) -> float:
    if E <= 0 or g == 0:
        return 0.0
    ch = SisoChannel(g, A, E)
    return min(upper_relaxation(ch).value, sp_simplex_value(g * min(E, A / 2))[0], upper_sp_cube(ch).value)


def parallel_bounds(gains: Sequence[float], A: float, E: float, method: str = "lmw") -> ParallelBounds:
    """Capacity bounds for parallel channels ``Y_i = g_i X_i + Z_i``.

    Lower bound: sum of single-user lower bounds of family ``method``
    (``lmw``, ``cma`` or ``fh``) at a heuristic allocation (the surrogate
    allocation of :func:`allocate_parallel_avg`; for finite ``A`` the
    inverted water-filling and equal split are also tried and the best
    sum is kept).  Without a peak constraint the families are the
    exponential, truncated-Gaussian and geometric inputs.

    Upper bound: the maximum over allocations of the sum of single-user
    upper bounds.  Without a peak constraint this is the average-constraint
    sphere-packing bound; with a peak it is the smallest of the relaxation
    and the two sphere-packing bounds.  Both are concave in ``E_i``, so the
    maximum is found exactly by bisection on the multiplier.
    """
    if method not in ("lmw", "cma", "fh"):
        raise ValueError("method must be one of lmw, cma, fh")
    g = np.asarray(gains, dtype=float).ravel()
    n = g.size
    if not E > 0 or not A > 0:
        raise InvalidChannelError("A and E must be positive")
    if math.isinf(E):
        if math.isinf(A):
            raise InvalidChannelError("at least one constraint must be finite")
        E = n * A / 2
    if not np.any(g > 0):
        zero = Allocation(np.zeros(n), 0.0)
        return ParallelBounds(0.0, 0.0, zero, zero, method)

    candidates = [allocate_parallel_avg(g, E)]
    if math.isfinite(A):
        candidates.append(allocate_inverted_waterfill(g, A, E))
        candidates.append(Allocation(np.full(n, min(E, n * A / 2) / n), math.nan))
    best_lower, best_alloc = -math.inf, candidates[0]
    for alloc in candidates:
        val = sum(_siso_lower(method, gi, A, ei) for gi, ei in zip(g, alloc.E))
        if val > best_lower:
            best_lower, best_alloc = val, alloc

    if math.isinf(A):
        fs = [lambda e, gi=gi: sp_simplex_value(gi * e)[0] for gi in g]
        caps = [E] * n
    else:
        fs = [lambda e, gi=gi: _siso_upper_finite(gi, A, e) for gi in g]
        caps = [A / 2] * n
    up = allocate_concave(fs, caps, E)
    return ParallelBounds(float(best_lower), up.objective, best_alloc, up, method)


def parallel_low_snr_asymptote(gains: Sequence[float], A: float, E: float) -> float:
    """``sum_i g_i^2 E_i (A - E_i) / 2`` at the inverted water-filling allocation."""
    return allocate_inverted_waterfill(gains, A, E).objective


def parallel_low_snr_log_curve(gains: Sequence[float], A: float, E: float) -> Allocation:
    """Maximize ``sum_i 0.5 log(1 + g_i^2 E_i (A - E_i))`` over ``sum E_i <= min(E, nt A/2)``.

    Each term is concave on ``[0, A/2]`` and its first-order expansion is the
    low-SNR asymptote, so the two agree as the SNR vanishes.  This is the
    curve drawn as the low-SNR asymptotic capacity of parallel channels in
    published plots; at moderate SNR it sits below the asymptote.
    """
    g = np.asarray(gains, dtype=float).ravel()
    if not (A > 0 and E > 0) or math.isinf(A):
        raise InvalidChannelError("need finite A > 0 and E > 0")
    total = min(E, g.size * A / 2)
    fs = [lambda e, gi=gi: 0.5 * math.log1p(gi * gi * e * (A - e)) for gi in g]
    return allocate_concave(fs, [A / 2] * g.size, total)


# ---------------------------------------------------------------------------
# SIMO / MISO
# ---------------------------------------------------------------------------


def simo_reduce(column: Sequence[float]) -> float:
    """Equivalent single-user gain of a SIMO channel: the Euclidean norm (maximum-ratio combining)."""
    col = np.asarray(column, dtype=float).ravel()
    if np.any(col < 0):
        raise InvalidChannelError("gains must be nonnegative")
    return float(np.linalg.norm(col))


@dataclass(frozen=True)
class MisoReduction:
    """Outcome of :func:`miso_reduce`.

    ``channel`` is the equivalent single-user channel when an exact
    reduction exists; otherwise ``channel`` is ``None`` and ``regime``
    explains why.
    """

    channel: SisoChannel | None
    regime: str
    gains_sorted: np.ndarray


def miso_reduce(row: Sequence[float], A: float, E: float) -> MisoReduction:
    """Reduce a MISO channel to a single-user channel where possible.

    * no peak: best-aperture selection, gain ``g_1``, average ``E``;
    * ``E >= nt A / 2`` or no average: repetition, gain ``||G||_1``, peak ``A``, average ``A/2``;
    * otherwise no exact reduction (``regime="peak+avg"``).
    """
    g = np.sort(np.asarray(row, dtype=float).ravel())[::-1]
    if np.any(g < 0):
        raise InvalidChannelError("gains must be nonnegative")
    n = g.size
    if math.isinf(A):
        return MisoReduction(SisoChannel(float(g[0]), math.inf, E), "avg", g)
    if math.isinf(E) or E >= n * A / 2:
        return MisoReduction(SisoChannel(float(g.sum()), A, A / 2), "peak", g)
    return MisoReduction(None, "peak+avg", g)


@dataclass(frozen=True)
class MisoHighSnr:
    """High-SNR MISO asymptote ``base + correction``."""

    base: float
    correction: float
    alpha_th: float
    omega: float = math.nan

    @property
    def value(self) -> float:
        return self.base + self.correction


def _miso_nu_at(omega: float, g: np.ndarray, alpha: float) -> float:
    mu = trunc_exp_param(omega)
    n = g.size
    i = np.arange(1, n + 1)
    target = alpha - omega + 1.0

    def ratio(loga: float) -> float:
        w = np.log(g) + i * loga
        w = np.exp(w - w.max())
        return float((i * w).sum() / w.sum()) - target

    if n == 1:
        p = np.ones(1)
    else:
        lo, hi = -50.0, 50.0
        while ratio(lo) > 0:
            lo *= 2
        while ratio(hi) < 0:
            hi *= 2
        loga = optimize.brentq(ratio, lo, hi, xtol=1e-14)
        w = np.log(g) + i * loga
        p = np.exp(w - w.max())
        p /= p.sum()
    q = g / g.sum()
    nz = p > 0
    kl = float((p[nz] * np.log(p[nz] / q[nz])).sum())
    em = math.exp(-mu)
    return 1.0 - math.log(mu / -math.expm1(-mu)) - mu * em / -math.expm1(-mu) - kl


def miso_high_snr(row: Sequence[float], A: float, alpha: float) -> MisoHighSnr:
    """High-SNR asymptote of a peak- and average-limited MISO channel.

    ``base = 0.5 log(||G||_1^2 A^2 / (2 pi e))``.  With
    ``alpha_th = 1/2 + sum_i g_i (i - 1) / ||G||_1`` (gains sorted
    descending), the correction is 0 for ``alpha > alpha_th`` and otherwise
    the supremum over ``omega`` in the open interval
    ``(max(0, 1/2 + alpha - alpha_th), min(1/2, alpha))`` of
    ``1 - log(mu/(1 - e^-mu)) - mu e^-mu/(1 - e^-mu) - D(p || G/||G||_1)``.
    A single-point interval (one aperture) is evaluated at that point.

    Raises
    ------
    DegenerateError
        When the interval is empty.
    """
    g = np.sort(np.asarray(row, dtype=float).ravel())[::-1]
    g = g[g > 0]
    if g.size == 0:
        raise DegenerateError("all gains are zero")
    l1 = float(g.sum())
    base = 0.5 * math.log(l1 * l1 * A * A / (_TWO_PI * math.e))
    alpha_th = 0.5 + float((g * np.arange(g.size)).sum()) / l1
    if alpha > alpha_th:
        return MisoHighSnr(base, 0.0, alpha_th)
    lo = max(0.0, 0.5 + alpha - alpha_th)
    hi = min(0.5, alpha)
    if hi < lo - 1e-12:
        raise DegenerateError("empty omega interval")
    if hi - lo <= 1e-12:
        omega = hi
        return MisoHighSnr(base, _miso_nu_at(omega, g, alpha), alpha_th, omega)
    eps = 1e-9 * (hi - lo)

    def f(w: float) -> float:
        try:
            return _miso_nu_at(w, g, alpha)
        except (ValueError, ZeroDivisionError, OverflowError):
            return -math.inf

    omega, val = grid_refine_max(f, lo + eps, hi - eps, n=200)
    return MisoHighSnr(base, val, alpha_th, omega)


@dataclass(frozen=True)
class CorrelatedBinary:
    """Maximally correlated binary input and the variance factor it attains.

    Attributes
    ----------
    value : float
        ``gamma`` (MISO) or ``eta`` (MIMO); the low-SNR capacity is ``value * A^2 / 2``.
    a : ndarray
        ``P(X_i = A)`` per input, in the caller's input order.
    atoms : ndarray, shape (m, nt)
        Support of the input law in units of ``A`` (0/1 entries).
    masses : ndarray
        Probabilities of the atoms.
    """

    value: float
    a: np.ndarray
    atoms: np.ndarray
    masses: np.ndarray

    def asymptote(self, A: float) -> float:
        return self.value * A * A / 2


def correlated_binary_law(a: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and masses of the maximally correlated ``{0, 1}^nt`` law with marginals ``a``.

    Inputs are switched on in order of decreasing ``a_i``: the atom with the
    ``j`` largest inputs on has mass ``a_(j) - a_(j+1)``.
    """
    a = np.clip(np.asarray(a, dtype=float).ravel(), 0.0, 1.0)
    n = a.size
    order = np.argsort(-a, kind="stable")
    sorted_a = a[order]
    levels = np.concatenate(([1.0], sorted_a, [0.0]))
    atoms = np.zeros((n + 1, n))
    for j in range(1, n + 1):
        atoms[j, order[:j]] = 1.0
    masses = levels[:-1] - levels[1:]
    masses[masses < 1e-15] = 0.0
    return atoms, masses


def _variance_factor(K: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``sum_ij K_ij min(a_i, a_j) (1 - max(a_i, a_j))`` for rows of ``a``."""
    mn = np.minimum(a[..., :, None], a[..., None, :])
    mx = np.maximum(a[..., :, None], a[..., None, :])
    return np.einsum("ij,...ij->...", K, mn * (1.0 - mx))


def _project(a: np.ndarray, alpha: float) -> np.ndarray:
    a = np.clip(a, 0.0, 1.0)
    s = a.sum()
    if s > alpha and s > 0:
        a = a * (alpha / s)
    return a


def _maximize_variance(K: np.ndarray, alpha: float) -> CorrelatedBinary:
    n = K.shape[0]
    if n <= 3:
        pts = 101
    elif n == 4:
        pts = 21
    else:
        pts = 0
    best_a = np.zeros(n)
    best_v = 0.0
    if pts:
        axis = np.linspace(0.0, 1.0, pts)
        grids = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
        grids = grids[grids.sum(axis=1) <= alpha + 1e-12]
        for s in range(0, grids.shape[0], 200_000):
            block = grids[s:s + 200_000]
            vals = _variance_factor(K, block)
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_v, best_a = float(vals[i]), block[i].copy()
        starts = [best_a]
    else:
        rng = np.random.default_rng(0)
        starts = [_project(rng.random(n), alpha) for _ in range(32)]
    for start in starts:
        res = optimize.minimize(lambda x: -float(_variance_factor(K, _project(x, alpha))), start,
                                method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
        cand = _project(res.x, alpha)
        v = float(_variance_factor(K, cand))
        if v > best_v:
            best_v, best_a = v, cand
    atoms, masses = correlated_binary_law(best_a)
    return CorrelatedBinary(best_v, best_a, atoms, masses)


def miso_low_snr_gamma(row: Sequence[float], alpha: float) -> CorrelatedBinary:
    """Low-SNR MISO factor ``gamma`` (capacity ~ ``gamma A^2 / 2``).

    ``gamma = max sum_ij g_i g_j min(a_i, a_j)(1 - max(a_i, a_j))`` over
    ``a in [0, 1]^nt`` with ``sum a_i <= alpha``: a dense grid (101 points
    per coordinate up to three inputs, 21 for four, random starts beyond)
    followed by a Nelder-Mead polish.
    """
    g = np.asarray(row, dtype=float).ravel()
    return _maximize_variance(np.outer(g, g), alpha)


def mimo_low_snr_eta(G, alpha: float) -> CorrelatedBinary:
    """Low-SNR MIMO factor ``eta``: :func:`miso_low_snr_gamma` with the Gram matrix ``G^T G``."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    return _maximize_variance(G.T @ G, alpha)


# ---------------------------------------------------------------------------
# MIMO
# ---------------------------------------------------------------------------


def householder_qr(G) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization with a nonnegative diagonal in ``U``.

    Uses LAPACK's Householder QR through :func:`numpy.linalg.qr` and flips
    signs so that ``u_ii >= 0``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    Q, U = np.linalg.qr(G, mode="reduced")
    s = np.sign(np.diag(U))
    s[s == 0] = 1.0
    return Q * s[None, :], U * s[:, None]


def mimo_qr_rate(G, E: float, method: str = "lmw") -> BoundResult:
    """Achievable rate of QR successive decoding on an average-limited MIMO channel.

    After ``Q^T Y = U X + Z`` the inputs are decoded last-to-first, each
    seeing an interference-free channel with gain ``u_ii``.  The rate is
    ``sum_i r_{u_ii}(E_i)`` for the average-only lower bound family
    ``method`` at the surrogate allocation on gains ``u_ii``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    nr, nt = G.shape
    if nr < nt:
        raise RegimeError("QR scheme needs nr >= nt")
    _, U = householder_qr(G)
    u = np.abs(np.diag(U))
    if np.any(u < 1e-12):
        raise DegenerateError("G is rank deficient")
    pb = parallel_bounds(u, math.inf, E, method)
    return BoundResult(pb.lower, method, {"u_diag": u.tolist(), "allocation": pb.lower_allocation.E.tolist()})


def mimo_high_snr(G, A: float = math.inf, alpha: float | None = None, E: float | None = None) -> BoundResult:
    """High-SNR asymptotes for ``nr >= nt`` (log-det expressions).

    * average only (``A = inf``, pass ``E``): ``0.5 log det(e E^2/(2 pi nt^2) G^T G)``;
    * ``alpha >= nt/2``: ``0.5 log det(A^2/(2 pi e) G^T G)``;
    * ``alpha < nt/2``: ``0.5 log det(e min(alpha^2 A^2/nt^2, A^2/e^2)/(2 pi) G^T G)``,
      which is within ``0.1 nt`` of capacity (recorded in the notes).
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    nt = G.shape[1]
    sign, logdet = np.linalg.slogdet(G.T @ G)
    logdet = float(logdet)
    if sign <= 0 or not np.isfinite(logdet):
        raise DegenerateError("G^T G is singular")
    if math.isinf(A):
        if E is None:
            raise InvalidChannelError("average-only asymptote needs E")
        s = math.e * E * E / (_TWO_PI * nt * nt)
        return BoundResult(0.5 * (nt * math.log(s) + logdet), "asym_hi", {"regime": "avg"})
    if alpha is None:
        alpha = (E / A) if E is not None else math.inf
    if alpha >= nt / 2:
        s = A * A / (_TWO_PI * math.e)
        return BoundResult(0.5 * (nt * math.log(s) + logdet), "asym_hi", {"regime": "peak"})
    s = math.e * min(alpha**2 * A * A / nt**2, A * A / math.e**2) / _TWO_PI
    return BoundResult(0.5 * (nt * math.log(s) + logdet), "asym_hi", {"regime": "peak+avg", "gap": 0.1 * nt},
                       notes=(f"asymptotic gap at most {0.1 * nt:g} nats",))
