"""Numerical capacity of the peak- and average-limited single-user channel.

Three layers:

* :func:`blahut_arimoto` finds the optimal masses for a fixed set of input
  points, with a Lagrange multiplier enforcing the mean constraint.
* :func:`optimality_check` evaluates the Smith-type certificate: a
  distribution is capacity achieving iff ``J(x) >= 0`` on ``[0, A]`` with
  equality on its support.
* :func:`optimize_fixed_k` and :func:`capacity` search jointly over point
  locations and masses, growing the support size until a certified
  distribution is found.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize, special

from .channel import DiscreteDistribution, RateNats, SisoChannel, canonicalize
from .errors import ConvergenceError, DegenerateError, InvalidChannelError, RegimeError
from .mi import (
    DEFAULT_DELTA,
    DEFAULT_MARGIN,
    OutputGrid,
    build_grid,
    divergences,
    transition_derivative,
    transition_matrix,
)

__all__ = [
    "CapacityOptions",
    "BaaTrace",
    "BaaResult",
    "OptimalityReport",
    "FixedKResult",
    "CapacityResult",
    "blahut_arimoto",
    "optimality_check",
    "optimize_fixed_k",
    "capacity",
]

_TINY = 1e-300

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CapacityOptions:
    """Numerical settings shared by the capacity routines.

    Attributes
    ----------
    delta, margin : float
        Output-grid bin width and margin (noise standard deviations).
    tol : float
        Blahut-Arimoto stopping rule ``|r_t - r_{t-1}| < tol``.
    max_iter : int
        Blahut-Arimoto iteration cap.
    x_grid_step : float
        Spacing of the input grid on which the certificate is sampled.
    psi_tol, j_tol, support_tol : float
        Certificate tolerances: ``psi > psi_tol``, ``J >= -j_tol`` off the
        support and ``|J| <= support_tol`` on it.
    n_starts : int
        Number of cold starts per support size (equispaced plus perturbed).
    n_starts_warm : int
        Number of cold starts tried after a warm start has failed.
    seed : int
        Seed for the perturbed starts.
    k_max : int
        Largest support size tried by :func:`capacity`.
    jump_threshold : float
        Certificate deficit (nats) above which :func:`capacity` inserts a
        point at every separated local minimum of ``J`` instead of one;
        ``0`` disables multi-point insertion.
    """

    delta: float = DEFAULT_DELTA
    margin: float = DEFAULT_MARGIN
    tol: float = 1e-7
    max_iter: int = 500
    x_grid_step: float = 0.05
    psi_tol: float = 1e-6
    j_tol: float = 1e-4
    support_tol: float = 1e-3
    n_starts: int = 8
    n_starts_warm: int = 1
    seed: int = 0
    k_max: int = 80
    jump_threshold: float = 0.05


# ---------------------------------------------------------------------------
# Blahut-Arimoto
# ---------------------------------------------------------------------------


@dataclass
class BaaTrace:
    """Per-iteration history of a Blahut-Arimoto run."""

    masses: list[np.ndarray] = field(default_factory=list)
    rates: list[float] = field(default_factory=list)
    multipliers: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.rates)


@dataclass(frozen=True)
class BaaResult:
    """Outcome of :func:`blahut_arimoto`.

    Unpacks as ``masses, rate, trace``.
    """

    points: np.ndarray
    masses: np.ndarray
    rate: RateNats
    trace: BaaTrace
    nu: float

    def __iter__(self) -> Iterator:
        return iter((self.masses, self.rate, self.trace))

    @property
    def distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution.from_arrays(self.points, self.masses, merge_tol=0.0)


def _solve_multiplier(logw: np.ndarray, x: np.ndarray, avg: float) -> float:
    """Smallest ``nu >= 0`` with ``mean(softmax(logw - nu x)) <= avg``.

    The mean is strictly decreasing in ``nu`` (its derivative is minus a
    variance), so the root is bracketed by doubling and then polished with
    Brent's method.
    """

    def excess(nu: float) -> float:
        w = special.softmax(logw - nu * x)
        return float(w @ x) - avg

    if not math.isfinite(avg) or excess(0.0) <= 0:
        return 0.0
    if x.min() >= avg:
        raise InvalidChannelError("average constraint cannot be met with the given points")
    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise ConvergenceError("could not bracket the mean-constraint multiplier")
    return optimize.brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-14, maxiter=500)


def blahut_arimoto(
    channel: SisoChannel,
    points: Sequence[float],
    opts: CapacityOptions | None = None,
    *,
    init_masses: Sequence[float] | None = None,
    grid: OutputGrid | None = None,
    record_trace: bool = True,
) -> BaaResult:
    """Optimal masses on a fixed support under peak and average constraints.

    Each iteration computes the posterior ``q_ij = a_i p_ji / sum_i' a_i' p_ji'``
    and the update ``a_i ~ exp(-nu x_i) prod_j q_ij^{p_ji}``, where ``nu >= 0``
    makes the updated mean equal ``E`` (``nu = 0`` when the unconstrained
    update already satisfies it).  The reported rate is
    ``sum_ij a_i p_ji log(q_ij / a_i)``, which increases monotonically.

    Parameters
    ----------
    channel : SisoChannel
        Canonicalized internally; needs a finite average after that.
    points : sequence of float
        Sorted input points in ``[0, A]``.
    opts : CapacityOptions, optional
        Uses ``delta``, ``margin``, ``tol`` and ``max_iter``.
    init_masses : sequence of float, optional
        Starting masses (default uniform).
    grid : OutputGrid, optional
        Precomputed output grid.
    record_trace : bool
        Keep every iterate in the returned trace.

    Returns
    -------
    BaaResult

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations without meeting ``tol``; ``best`` holds
        the last :class:`BaaResult`.

    Examples
    --------
    >>> masses, rate, trace = blahut_arimoto(SisoChannel(1, 5, 1.25), [0, 2, 5])
    >>> np.round(masses, 3), round(rate, 2)
    (array([0.639, 0.185, 0.176]), 0.61)
    """
    opts = opts or CapacityOptions()
    ch = canonicalize(channel)
    if not math.isfinite(ch.avg):
        raise RegimeError("Blahut-Arimoto needs a finite average constraint")
    x = np.asarray(points, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one point")
    if np.any(np.diff(x) < 0):
        raise ValueError("points must be sorted")
    if x[0] < 0 or (ch.has_peak and x[-1] > ch.peak * (1 + 1e-12)):
        raise ValueError("points must lie in [0, A]")
    if grid is None:
        grid = build_grid(ch, float(x[-1]), opts.delta, opts.margin)
    p = transition_matrix(x, ch, grid)
    return _baa_core(x, p, ch.avg, opts.tol, opts.max_iter, init_masses, record_trace)


def _baa_core(
    x: np.ndarray,
    p: np.ndarray,
    avg: float,
    tol: float,
    max_iter: int,
    init_masses=None,
    record_trace: bool = True,
) -> BaaResult:
    k = x.size
    trace = BaaTrace()
    if k == 1:
        trace.masses.append(np.ones(1))
        trace.rates.append(0.0)
        trace.multipliers.append(0.0)
        trace.converged = True
        return BaaResult(x, np.ones(1), 0.0, trace, 0.0)
    if init_masses is None:
        a = np.full(k, 1.0 / k)
    else:
        a = np.clip(np.asarray(init_masses, dtype=float), _TINY, None)
        a = a / a.sum()
    loga = np.log(a)
    rate_prev = -math.inf
    nu = 0.0
    for it in range(max_iter):
        p_out = np.maximum(a @ p, _TINY)
        # sum_j p_ji log q_ij = log a_i + D(p_i || p_out)
        logw = loga + divergences(p, p_out)
        nu = _solve_multiplier(logw, x, avg)
        z = logw - nu * x
        loga_new = z - special.logsumexp(z)
        a_new = np.exp(loga_new)
        rate = float(a_new @ (logw - loga_new))
        a, loga = a_new, loga_new
        if record_trace:
            trace.masses.append(a.copy())
            trace.rates.append(rate)
            trace.multipliers.append(nu)
        if abs(rate - rate_prev) < tol:
            trace.converged = True
            return BaaResult(x, a, rate, trace, nu)
        rate_prev = rate
    result = BaaResult(x, a, rate_prev, trace, nu)
    raise ConvergenceError(f"Blahut-Arimoto did not converge in {max_iter} iterations", best=result)


# ---------------------------------------------------------------------------
# Optimality certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalityReport:
    """Certificate of (non-)optimality of a discrete input.

    Attributes
    ----------
    psi : float
        Lagrange multiplier of the mean constraint, ``(I - D(0)) / E``; zero
        when the constraint is not binding.
    x_grid, J : ndarray
        Sampled certificate function ``J(x) = I - D(x) + psi (x - E)``.
    J_support : ndarray
        ``J`` at the support points.
    is_optimal : bool
        All conditions met.
    max_support_abs_J, min_J : float
        ``max |J|`` on the support and ``min J`` over the grid.
    argmin_x : float
        Grid location of ``min_J``.
    binding : bool
        Whether the mean constraint is active.
    rate : float
        Mutual information of the distribution on the same grid.
    """

    psi: float
    x_grid: np.ndarray
    J: np.ndarray
    J_support: np.ndarray
    is_optimal: bool
    max_support_abs_J: float
    min_J: float
    argmin_x: float
    binding: bool
    rate: float
    zero_in_support: bool


def _divergence_profile(xs: np.ndarray, ch: SisoChannel, grid: OutputGrid, p_out: np.ndarray,
                        chunk_elems: int = 4_000_000) -> np.ndarray:
    """``D(p(.|x) || p_out)`` for many ``x`` without materializing a huge matrix."""
    rows = max(1, chunk_elems // max(grid.count, 1))
    out = np.empty(xs.size)
    for s in range(0, xs.size, rows):
        block = transition_matrix(xs[s:s + rows], ch, grid)
        out[s:s + rows] = divergences(block, p_out)
    return out


def optimality_check(
    dist: DiscreteDistribution,
    channel: SisoChannel,
    x_grid_step: float | None = None,
    opts: CapacityOptions | None = None,
    *,
    grid: OutputGrid | None = None,
) -> OptimalityReport:
    """Evaluate the optimality certificate of ``dist``.

    With ``D(x)`` the relative entropy between the output law given ``x``
    and the output law induced by ``dist`` (both on the discretized output
    axis) and ``I = sum_i a_i D(x_i)``:

    * ``psi = (I - D(0)) / E`` when the mean constraint binds, else 0,
    * ``J(x) = I - D(x) + psi (x - E)``.

    ``dist`` is certified when 0 carries positive mass, ``psi > psi_tol``
    (binding case only), ``J >= -j_tol`` on the sampled grid and
    ``|J| <= support_tol`` at the support points.

    Raises
    ------
    DegenerateError
        For a one-point distribution.
    """
    opts = opts or CapacityOptions()
    step = opts.x_grid_step if x_grid_step is None else float(x_grid_step)
    ch = canonicalize(channel)
    if dist.k < 2:
        raise DegenerateError("certificate is undefined for a one-point distribution")
    if not ch.has_peak:
        raise RegimeError("certificate needs a finite peak constraint")
    if grid is None:
        grid = build_grid(ch, ch.peak, opts.delta, opts.margin)
    a, xs = dist.masses, dist.points
    p = transition_matrix(xs, ch, grid)
    p_out = np.maximum(a @ p, _TINY)
    d_supp = divergences(p, p_out)
    rate = float(a @ d_supp)

    n = max(int(math.ceil(ch.peak / step)), 1)
    x_grid = np.linspace(0.0, ch.peak, n + 1)
    d_grid = _divergence_profile(x_grid, ch, grid, p_out)
    d0 = float(_divergence_profile(np.zeros(1), ch, grid, p_out)[0])

    mean = dist.mean()
    # published masses are rounded, so "mean equals E" is judged loosely
    binding = ch.avg < ch.peak / 2 and mean >= ch.avg * (1 - 1e-3)
    psi = (rate - d0) / ch.avg if binding else 0.0
    target = ch.avg if binding else 0.0
    J = rate - d_grid + psi * (x_grid - target)
    J_supp = rate - d_supp + psi * (xs - target)
    i_min = int(np.argmin(J))
    zero_in = bool(xs[0] <= 1e-9 * max(1.0, ch.peak))
    ok = (
        zero_in
        and (psi > opts.psi_tol or not binding)
        and float(J.min()) >= -opts.j_tol
        and float(np.abs(J_supp).max()) <= opts.support_tol
    )
    return OptimalityReport(
        psi=float(psi),
        x_grid=x_grid,
        J=J,
        J_support=J_supp,
        is_optimal=bool(ok),
        max_support_abs_J=float(np.abs(J_supp).max()),
        min_J=float(J[i_min]),
        argmin_x=float(x_grid[i_min]),
        binding=bool(binding),
        rate=rate,
        zero_in_support=zero_in,
    )


# ---------------------------------------------------------------------------
# Joint optimization over locations and masses
# ---------------------------------------------------------------------------


class _JointObjective:
    """Negative mutual information and its gradient in ``(a, u)``.

    Locations are ``x = [0, A u_1, ..., A u_{k-1}]`` so every variable lives
    in ``[0, 1]``; the first point is pinned at zero.
    """

    def __init__(self, ch: SisoChannel, k: int, grid: OutputGrid) -> None:
        self.ch, self.k, self.grid = ch, k, grid
        self._key: bytes | None = None
        self._val = 0.0
        self._grad = np.zeros(2 * k - 1)

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = z[: self.k]
        x = np.concatenate(([0.0], self.ch.peak * z[self.k:]))
        return a, x

    def _evaluate(self, z: np.ndarray) -> None:
        key = z.tobytes()
        if key == self._key:
            return
        a, x = self.split(z)
        a = np.clip(a, 0.0, None)
        p = transition_matrix(x, self.ch, self.grid)
        dp = transition_derivative(x, self.ch, self.grid)
        p_out = np.maximum(a @ p, _TINY)
        with np.errstate(divide="ignore"):
            logratio = np.where(p > 0, np.log(np.maximum(p, _TINY)) - np.log(p_out)[None, :], 0.0)
        d = (p * logratio).sum(axis=1)
        dx = a * (dp * logratio).sum(axis=1)
        self._val = -float(a @ d)
        self._grad = -np.concatenate((d - 1.0, self.ch.peak * dx[1:]))
        self._key = key

    def value(self, z: np.ndarray) -> float:
        self._evaluate(z)
        return self._val

    def grad(self, z: np.ndarray) -> np.ndarray:
        self._evaluate(z)
        return self._grad


@dataclass(frozen=True)
class FixedKResult:
    """Best ``k``-point distribution found and its certificate.

    ``certified`` is false when the certificate fails for the best
    distribution, meaning the support size ``k`` is not optimal.
    """

    dist: DiscreteDistribution
    rate: RateNats
    report: OptimalityReport
    certified: bool
    k: int
    starts_tried: int


def _start_points(ch: SisoChannel, k: int, n_starts: int, seed: int) -> list[np.ndarray]:
    base = np.linspace(0.0, ch.peak, k)
    starts = [base]
    rng = np.random.default_rng(seed + 7919 * k)
    spacing = ch.peak / max(k - 1, 1)
    for _ in range(max(n_starts - 1, 0)):
        pert = base.copy()
        pert[1:] = np.clip(pert[1:] + rng.normal(0.0, 0.25 * spacing, k - 1), 0.0, ch.peak)
        pert[-1] = ch.peak if rng.random() < 0.5 else pert[-1]
        starts.append(np.sort(pert))
    return starts


def _loose_masses(x: np.ndarray, p: np.ndarray, avg: float) -> np.ndarray:
    try:
        return _baa_core(x, p, avg, 1e-6, 300, record_trace=False).masses
    except ConvergenceError as err:
        return err.best.masses


def _polish(ch: SisoChannel, z: np.ndarray, obj: _JointObjective, grid: OutputGrid,
            opts: CapacityOptions) -> BaaResult:
    """Clean up optimizer output and re-solve masses exactly on the final support."""
    a, x = obj.split(z)
    dist = DiscreteDistribution.from_arrays(x, np.clip(a, 0, None) + 0.0,
                                            merge_tol=1e-6 * ch.peak, min_mass=1e-10)
    p = transition_matrix(dist.points, ch, grid)
    try:
        return _baa_core(dist.points, p, ch.avg, min(opts.tol, 1e-11), 200 * opts.max_iter,
                         init_masses=dist.masses, record_trace=False)
    except ConvergenceError as err:
        return err.best


def _run_start(ch: SisoChannel, x0: np.ndarray, a0: np.ndarray | None, grid: OutputGrid,
               opts: CapacityOptions) -> BaaResult:
    k = x0.size
    obj = _JointObjective(ch, k, grid)
    if a0 is None:
        a0 = _loose_masses(x0, transition_matrix(x0, ch, grid), ch.avg)
    z0 = np.concatenate((a0, x0[1:] / ch.peak))
    A, E = ch.peak, ch.avg
    cons = [
        {"type": "eq", "fun": lambda z: np.sum(z[:k]) - 1.0,
         "jac": lambda z: np.concatenate((np.ones(k), np.zeros(k - 1)))},
        {"type": "ineq", "fun": lambda z: E - z[:k] @ np.concatenate(([0.0], A * z[k:])),
         "jac": lambda z: -np.concatenate(([0.0], A * z[k:], A * z[1:k]))},
    ]
    res = optimize.minimize(
        obj.value, z0, jac=obj.grad, method="SLSQP", bounds=[(0.0, 1.0)] * (2 * k - 1),
        constraints=cons, options={"ftol": 1e-13, "maxiter": 1000},
    )
    z = res.x if np.all(np.isfinite(res.x)) else z0
    return _polish(ch, z, obj, grid, opts)


def optimize_fixed_k(
    channel: SisoChannel,
    k: int,
    opts: CapacityOptions | None = None,
    *,
    warm_start: DiscreteDistribution | None = None,
    grid: OutputGrid | None = None,
) -> FixedKResult:
    """Jointly optimize ``k`` point locations and masses.

    The first point is pinned at 0.  Each start runs a sequential quadratic
    programming solve of the concave-in-masses, nonconvex-in-locations
    problem with the exact gradient of the discretized mutual information,
    then re-solves the masses on the final support with
    :func:`blahut_arimoto`.  Starts are tried in order (warm start first,
    then equispaced, then perturbed) and the search stops at the first
    certified distribution, since the certificate proves global optimality.

    Parameters
    ----------
    channel : SisoChannel
        Needs finite peak; canonicalized internally.
    k : int
        Support size, at least 2.
    opts : CapacityOptions, optional
    warm_start : DiscreteDistribution, optional
        Initial guess with exactly ``k`` points, tried first.

    Returns
    -------
    FixedKResult
        ``certified`` tells whether the best distribution passed.
    """
    opts = opts or CapacityOptions()
    ch = canonicalize(channel)
    if k < 2:
        raise ValueError("k must be at least 2")
    if not ch.has_peak:
        raise RegimeError("fixed-k search needs a finite peak constraint")
    if grid is None:
        grid = build_grid(ch, ch.peak, opts.delta, opts.margin)

    starts: list[tuple[np.ndarray, np.ndarray | None]] = []
    n_cold = opts.n_starts
    if warm_start is not None and warm_start.k == k:
        starts.append((np.asarray(warm_start.points, dtype=float).copy(), np.asarray(warm_start.masses).copy()))
        n_cold = opts.n_starts_warm
    starts += [(s, None) for s in _start_points(ch, k, n_cold, opts.seed)]

    best: FixedKResult | None = None
    for n, (x0, a0) in enumerate(starts, start=1):
        if x0[0] != 0.0:
            x0 = np.concatenate(([0.0], x0[1:]))
        baa = _run_start(ch, x0, a0, grid, opts)
        dist = baa.distribution
        if dist.k < 2:
            continue
        report = optimality_check(dist, ch, opts=opts, grid=grid)
        cand = FixedKResult(dist, report.rate, report, report.is_optimal, k, n)
        if best is None or cand.rate > best.rate + 1e-12 or (cand.certified and not best.certified):
            best = cand
        if cand.certified:
            best = cand
            break
    if best is None:
        raise ConvergenceError(f"no usable start at k={k}")
    return FixedKResult(best.dist, best.rate, best.report, best.certified, k, len(starts) if not best.certified else best.starts_tried)


@dataclass(frozen=True)
class CapacityResult:
    """Capacity of a peak-limited channel with its optimal input.

    ``certified`` is true when the optimality certificate holds at the
    configured tolerances.  ``gap`` bounds how far ``rate`` can be below
    capacity on the sampled grid: by weak duality capacity is at most
    ``rate + max(0, -min J)``.
    """

    dist: DiscreteDistribution
    rate: RateNats
    k: int
    report: OptimalityReport | None
    history: tuple[FixedKResult, ...] = ()
    certified: bool = True

    @property
    def gap(self) -> float:
        if self.report is None:
            return 0.0
        return max(0.0, -float(self.report.min_J))

    @property
    def upper(self) -> float:
        """Dual upper estimate ``rate + gap``."""
        return self.rate + self.gap


def _insert_point(prev: FixedKResult, ch: SisoChannel) -> DiscreteDistribution | None:
    """Warm start for ``k + 1``: add a small mass where the certificate is most violated."""
    x_new = prev.report.argmin_x
    pts = np.asarray(prev.dist.points)
    if np.min(np.abs(pts - x_new)) < 1e-6 * ch.peak:
        gaps = np.diff(pts)
        j = int(np.argmax(gaps))
        x_new = 0.5 * (pts[j] + pts[j + 1])
        if ch.peak - pts[-1] > gaps[j] / 2:
            x_new = ch.peak
    return _with_points(prev.dist, [x_new])


def _with_points(dist: DiscreteDistribution, new: Sequence[float], eps: float = 0.02) -> DiscreteDistribution | None:
    points = np.concatenate((dist.points, new))
    each = eps / len(new)
    masses = np.concatenate((dist.masses * (1 - eps), np.full(len(new), each)))
    try:
        return DiscreteDistribution.from_arrays(points, masses, merge_tol=0.0)
    except ValueError:
        return None


def _deficit_minima(prev: FixedKResult, ch: SisoChannel, threshold: float) -> list[float]:
    """Locations of local minima of ``J`` below ``-threshold``, away from current points, deepest first."""
    x = prev.report.x_grid
    J = prev.report.J
    if x is None or J is None or len(J) < 3:
        return []
    inner = (J[1:-1] <= J[:-2]) & (J[1:-1] <= J[2:])
    idx = list(np.flatnonzero(inner) + 1)
    if J[0] < J[1]:
        idx.append(0)
    if J[-1] < J[-2]:
        idx.append(len(J) - 1)
    idx = [i for i in idx if J[i] < -threshold]
    idx.sort(key=lambda i: J[i])
    pts = np.asarray(prev.dist.points)
    spacing = ch.peak / max(prev.dist.k, 1)
    out: list[float] = []
    for i in idx:
        xi = float(x[i])
        if np.min(np.abs(pts - xi)) < 0.25 * spacing or any(abs(xi - o) < 0.25 * spacing for o in out):
            continue
        out.append(xi)
    return out


def suggest_k(channel: SisoChannel) -> int:
    """Conservative lower estimate of the optimal support size.

    Optimal supports grow roughly like ``g A / 2`` at moderate and high
    SNR; starting the search at ``0.3 g A`` stays below the optimum while
    skipping most of the small, certainly-too-small sizes.
    """
    ch = canonicalize(channel)
    if not ch.has_peak:
        return 2
    return max(2, int(0.3 * ch.g * ch.peak))


def capacity(
    channel: SisoChannel,
    opts: CapacityOptions | None = None,
    *,
    k_start: int | None = None,
    gap_tol: float | None = None,
) -> CapacityResult:
    """Capacity and optimal input of a channel with finite peak constraint.

    Increases the support size ``k`` from ``k_start`` until
    :func:`optimize_fixed_k` certifies a distribution.  Each new ``k`` is
    warm-started from the previous best distribution with extra points
    inserted where the certificate is negative: one point at the deepest
    violation, or one per well-separated local minimum of ``J`` below
    ``-opts.jump_threshold`` when the support is clearly too small.

    Parameters
    ----------
    channel : SisoChannel
        Finite peak required; the average is clamped to ``A/2`` if larger.
    opts : CapacityOptions, optional
    k_start : int, optional
        First support size tried.  Defaults to :func:`suggest_k`; passing
        the optimal size of a nearby channel speeds up sweeps.
    gap_tol : float, optional
        Also stop, without a certificate, once the dual gap bound
        ``-min J`` of the best distribution falls below this value (nats).
        Useful for large ``g A`` with coarse grids, where the last few
        support points add rate far below any tolerance of interest.

    Returns
    -------
    CapacityResult
        ``k`` is the support size of the returned distribution.

    Raises
    ------
    RegimeError
        When the peak is infinite.
    ConvergenceError
        When no certified distribution is found up to ``opts.k_max``; the
        best candidate is attached as ``best``.

    Examples
    --------
    >>> res = capacity(SisoChannel(1, 5, 1.25))
    >>> res.k, round(res.rate, 3)
    (3, 0.626)
    """
    opts = opts or CapacityOptions()
    ch = canonicalize(channel)
    if not ch.has_peak:
        raise RegimeError("exact capacity needs a finite peak constraint")
    if ch.g == 0.0:
        return CapacityResult(DiscreteDistribution([0.0], [1.0]), 0.0, 1, None)
    grid = build_grid(ch, ch.peak, opts.delta, opts.margin)
    history: list[FixedKResult] = []
    warm: DiscreteDistribution | None = None
    k = max(2, suggest_k(ch) if k_start is None else k_start)
    while k <= opts.k_max:
        res = optimize_fixed_k(ch, k, opts, warm_start=warm, grid=grid)
        log.debug("k=%d rate=%.9f certified=%s min_J=%.2e starts=%d",
                  k, res.rate, res.certified, res.report.min_J, res.starts_tried)
        history.append(res)
        if res.certified:
            return CapacityResult(res.dist, res.rate, res.dist.k, res.report, tuple(history))
        if gap_tol is not None and res.report.zero_in_support and -res.report.min_J <= gap_tol:
            log.debug("stopping at k=%d on gap bound %.2e", k, -res.report.min_J)
            return CapacityResult(res.dist, res.rate, res.dist.k, res.report, tuple(history), certified=False)
        warm = None
        if res.dist.k == k:
            new = _deficit_minima(res, ch, opts.jump_threshold) if opts.jump_threshold > 0 else []
            if len(new) > 1:
                new = new[: max(1, min(len(new), opts.k_max - k))]
                warm = _with_points(res.dist, new)
            else:
                warm = _insert_point(res, ch)
        k = warm.k if warm is not None else k + 1
    best = max(history, key=lambda r: r.rate)
    raise ConvergenceError(f"no certified distribution up to k={opts.k_max}",
                           best=CapacityResult(best.dist, best.rate, best.dist.k, best.report, tuple(history),
                                               certified=False))
