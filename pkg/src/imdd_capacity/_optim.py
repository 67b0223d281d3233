"""Small scalar optimization helpers shared by the bound modules."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import optimize


def grid_refine_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    n: int = 200,
    xtol: float = 1e-12,
) -> tuple[float, float]:
    """Maximize a scalar function on ``[lo, hi]``.

    ``f`` is sampled on ``n`` equispaced points; the best sample and its two
    neighbours bracket a bounded Brent search.  Non-finite samples are
    treated as ``-inf``.

    Returns
    -------
    x, value : float
        Maximizer and maximum.
    """
    xs = np.linspace(lo, hi, n)
    vals = np.array([f(float(x)) for x in xs], dtype=float)
    vals[~np.isfinite(vals)] = -np.inf
    i = int(np.argmax(vals))
    best_x, best_v = float(xs[i]), float(vals[i])
    if not np.isfinite(best_v):
        return best_x, best_v
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n - 1)]
    if b > a:
        def neg(x: float) -> float:
            v = f(x)
            return -v if np.isfinite(v) else np.inf

        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded", options={"xatol": xtol})
        if res.success and -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    return best_x, best_v


def grid_refine_min(f, lo, hi, n=200, xtol=1e-12):
    """Minimizing counterpart of :func:`grid_refine_max`."""
    x, v = grid_refine_max(lambda t: -f(t), lo, hi, n, xtol)
    return x, -v
