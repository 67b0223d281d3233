"""Command-line interface: ``imdd siso | sweep | region | mimo``.

Rates are printed in nats unless ``--bits`` is given.  JSON numbers are
rounded to 10 significant digits; CSV follows RFC 4180.  Exit status is 0
on success, 2 on invalid input and 3 when a numerical search does not
converge (partial results go to stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .bounds import ASYMPTOTIC_METHODS, LOWER_METHODS, UPPER_METHODS, applicable_methods, evaluate
from .capacity import CapacityOptions, capacity
from .channel import SisoChannel
from .errors import ConvergenceError, ImddError
from .multi_aperture import (
    householder_qr,
    mimo_high_snr,
    mimo_low_snr_eta,
    mimo_qr_rate,
    miso_high_snr,
    miso_low_snr_gamma,
    miso_reduce,
    parallel_bounds,
    parallel_low_snr_asymptote,
    simo_reduce,
)
from .multi_user import (
    BcChannel,
    MacChannel,
    bc_high_snr_region,
    bc_inner_tg,
    bc_low_snr_region,
    bc_outer,
    mac_high_snr_region,
    mac_inner_tg,
    mac_low_snr_region,
    mac_outer,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

_LOG2 = math.log(2.0)


class UsageError(Exception):
    """Invalid command-line input (exit status 2)."""


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def _sig10(v: Any) -> Any:
    """Round floats to 10 significant digits recursively; non-finite floats become strings."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return float(f"{v:.10g}")
    if isinstance(v, np.ndarray):
        return _sig10(v.tolist())
    if isinstance(v, dict):
        return {str(k): _sig10(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_sig10(x) for x in v]
    return v


def dumps_json(obj: Any) -> str:
    return json.dumps(_sig10(obj), indent=2, ensure_ascii=False) + "\n"


def dumps_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if x is None else (f"{x:.10g}" if isinstance(x, float) else x) for x in row])
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _float(text: str) -> float:
    """Parse a float; accepts ``inf``."""
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if math.isnan(v):
        raise argparse.ArgumentTypeError("nan is not allowed")
    return v


def _fraction(text: str) -> float:
    """Parse a float or a fraction such as ``1/3``."""
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError) as exc:
            raise argparse.ArgumentTypeError(f"bad fraction: {text!r}") from exc
    return _float(text)


def _workers() -> int:
    raw = os.environ.get("IMDD_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def _ordered_map(fn: Callable[[Any], Any], items: Sequence[Any]) -> list[Any]:
    """Map in a worker pool capped by ``IMDD_THREADS``; results keep input order."""
    n = min(_workers(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# siso
# ---------------------------------------------------------------------------

_ALL_TAGS = ("capacity",) + LOWER_METHODS + UPPER_METHODS + ASYMPTOTIC_METHODS


def _parse_methods(text: str | None, ch: SisoChannel) -> list[str]:
    if text is None or text == "all":
        methods = (["capacity"] if ch.has_peak else []) + applicable_methods(ch)
        return methods
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in _ALL_TAGS]
    if bad:
        raise UsageError(f"unknown method(s): {', '.join(bad)}; choose from {', '.join(_ALL_TAGS)}")
    return methods


def _capacity_opts(args: argparse.Namespace, ch: SisoChannel) -> CapacityOptions:
    delta = args.delta
    if delta is None:
        delta = 1e-3 if ch.g * ch.peak <= 20 else 1e-2
    return CapacityOptions(delta=delta, tol=args.tol)


def _siso_results(ch: SisoChannel, methods: Sequence[str], args: argparse.Namespace) -> dict[str, Any]:
    """Evaluate the requested quantities; raises ConvergenceError with partial results attached."""
    out: dict[str, Any] = {}
    scale = 1.0 / _LOG2 if args.bits else 1.0
    for m in methods:
        if m == "capacity":
            if ch.g == 0:
                out[m] = {"value": 0.0, "kind": "exact", "k": 1, "points": [0.0], "masses": [1.0]}
                continue
            try:
                res = capacity(ch, _capacity_opts(args, ch), gap_tol=args.gap_tol)
            except ConvergenceError as exc:
                best = exc.best
                partial = dict(out)
                if best is not None:
                    partial[m] = {"value": best.rate * scale, "kind": "exact", "certified": False}
                exc.partial = partial  # type: ignore[attr-defined]
                raise
            out[m] = {
                "value": res.rate * scale,
                "kind": "exact",
                "k": res.k,
                "points": res.dist.points.tolist(),
                "masses": res.dist.masses.tolist(),
                "certified": res.certified,
                "psi": res.report.psi if res.report is not None else None,
                "gap": res.gap * scale,
            }
            continue
        if ch.g == 0:
            out[m] = {"value": 0.0, "kind": _kind(m), "optimizer": {}, "notes": ["zero gain"]}
            continue
        b = evaluate(ch, [m])[m]
        out[m] = {"value": b.value * scale, "kind": b.kind, "optimizer": b.optimizer, "notes": list(b.notes)}
    return out


def _kind(m: str) -> str:
    if m in LOWER_METHODS:
        return "lower"
    if m in UPPER_METHODS:
        return "upper"
    return "asymptotic"


def cmd_siso(args: argparse.Namespace) -> int:
    try:
        ch = SisoChannel(args.gain, args.peak, args.avg)
    except ImddError as exc:
        raise UsageError(str(exc)) from exc
    methods = _parse_methods(args.methods, ch)
    if "capacity" in methods and not ch.has_peak:
        raise UsageError("capacity needs a finite --peak")
    results = _siso_results(ch, methods, args)
    payload = {
        "channel": {"gain": ch.g, "peak": ch.peak, "avg": ch.avg, "regime": ch.regime},
        "unit": "bits" if args.bits else "nats",
        "results": results,
    }
    if args.format == "csv":
        _emit(dumps_csv(list(results), [[r["value"] for r in results.values()]]), args.output)
    else:
        _emit(dumps_json(payload), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """Parameter sweep description.

    ``variable`` is ``peak`` (average fixed), ``avg`` (peak fixed) or
    ``alpha`` (peak swept with ``avg = alpha * peak``).  With ``scale``
    set to ``log10`` the axis values are ``10 log10`` of the swept
    quantity, the usual dB convention for intensity plots.
    """

    variable: str
    start: float
    stop: float
    points: int
    scale: str = "linear"

    def __post_init__(self) -> None:
        if self.variable not in ("peak", "avg", "alpha"):
            raise UsageError("--variable must be peak, avg or alpha")
        if self.scale not in ("linear", "log10"):
            raise UsageError("--scale must be linear or log10")
        if not self.start < self.stop:
            raise UsageError("sweep start must be below stop")
        if self.points < 2:
            raise UsageError("a sweep needs at least 2 points")

    def axis(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    def values(self) -> np.ndarray:
        x = self.axis()
        if self.scale == "log10":
            return 10.0 ** (x / 10.0)
        return x


def _sweep_channel(spec: SweepSpec, v: float, args: argparse.Namespace) -> SisoChannel:
    if spec.variable == "peak":
        return SisoChannel(args.gain, v, args.avg)
    if spec.variable == "avg":
        return SisoChannel(args.gain, args.peak, v)
    if args.alpha is None:
        raise UsageError("--alpha is required for an alpha sweep")
    return SisoChannel(args.gain, v, args.alpha * v)


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = SweepSpec(args.variable, args.start, args.stop, args.points, args.scale)
    try:
        channels = [_sweep_channel(spec, float(v), args) for v in spec.values()]
    except ImddError as exc:
        raise UsageError(str(exc)) from exc
    methods = _parse_methods(args.methods, channels[0])
    if "capacity" in methods and not channels[0].has_peak:
        raise UsageError("capacity needs a finite peak")

    def run(ch: SisoChannel) -> dict[str, Any]:
        return _siso_results(ch, methods, args)

    try:
        rows = _ordered_map(run, channels)
    except ConvergenceError as exc:
        sys.stderr.write(dumps_json({"error": str(exc), "partial": getattr(exc, "partial", {})}))
        return EXIT_NOT_CONVERGED
    header = ["x", "peak", "avg"] + methods
    table = [[float(x), ch.peak, ch.avg] + [r[m]["value"] for m in methods]
             for x, ch, r in zip(spec.axis(), channels, rows)]
    if args.format == "json":
        payload = {
            "sweep": {"variable": spec.variable, "scale": spec.scale, "start": spec.start,
                      "stop": spec.stop, "points": spec.points},
            "unit": "bits" if args.bits else "nats",
            "columns": header,
            "rows": table,
        }
        _emit(dumps_json(payload), args.output)
    else:
        _emit(dumps_csv(header, table), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# region
# ---------------------------------------------------------------------------


def _scaled_region(region, scale: float) -> dict[str, Any]:
    d = region.to_dict()
    d["boundary"] = (np.asarray(d["boundary"]) * scale).tolist()
    return d


def cmd_region(args: argparse.Namespace) -> int:
    kinds = [k.strip() for k in args.regions.split(",") if k.strip()]
    bad = [k for k in kinds if k not in ("outer", "inner", "high", "low")]
    if bad:
        raise UsageError(f"unknown region kind(s): {', '.join(bad)}")
    peak = args.peak
    avg = args.avg if args.avg is not None else (args.alpha * peak if args.alpha is not None else None)
    if avg is None:
        raise UsageError("give --avg or --alpha")
    scale = 1.0 / _LOG2 if args.bits else 1.0
    out: dict[str, Any] = {"unit": "bits" if args.bits else "nats", "regions": {}}
    try:
        if args.mac:
            peak2 = args.peak2 if args.peak2 is not None else peak
            avg2 = args.avg2 if args.avg2 is not None else (
                args.alpha * peak2 if args.alpha is not None else avg * peak2 / peak)
            ch = MacChannel(args.g1, args.g2, peak, peak2, avg, avg2)
            out["channel"] = {"type": "mac", "g": [ch.g1, ch.g2], "peak": [ch.peak1, ch.peak2],
                              "avg": [ch.avg1, ch.avg2]}
            makers = {
                "outer": lambda: mac_outer(ch, args.outer_method),
                "inner": lambda: mac_inner_tg(ch),
                "high": lambda: mac_high_snr_region(ch),
                "low": lambda: mac_low_snr_region(ch),
            }
        else:
            ch = BcChannel(args.g1, args.g2, peak, avg)
            out["channel"] = {"type": "bc", "g": [args.g1, args.g2], "peak": peak, "avg": ch.avg}
            makers = {
                "outer": lambda: bc_outer(ch, args.outer_method, rho_grid=args.rho_grid),
                "inner": lambda: bc_inner_tg(ch, rho_grid=args.rho_grid),
                "high": lambda: bc_high_snr_region(ch),
                "low": lambda: bc_low_snr_region(ch),
            }
    except ImddError as exc:
        raise UsageError(str(exc)) from exc
    regions = _ordered_map(lambda k: makers[k](), kinds)
    for k, reg in zip(kinds, regions):
        out["regions"][k] = _scaled_region(reg, scale)
    _emit(dumps_json(out), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mimo
# ---------------------------------------------------------------------------


def read_matrix(path: str) -> np.ndarray:
    """Read a nonnegative gain matrix from a JSON 2-D array or whitespace-separated text (row-major)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read matrix file: {exc}") from exc
    stripped = text.strip()
    if not stripped:
        raise UsageError("matrix file is empty")
    try:
        if stripped[0] == "[":
            data = json.loads(stripped)
            G = np.array(data, dtype=float)
        else:
            G = np.loadtxt(io.StringIO(text), dtype=float, ndmin=2)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"malformed matrix: {exc}") from exc
    if G.ndim == 1:
        G = G[None, :]
    if G.ndim != 2 or G.size == 0:
        raise UsageError("matrix must be a nonempty 2-D array")
    if not np.all(np.isfinite(G)) or np.any(G < 0):
        raise UsageError("matrix entries must be finite and nonnegative")
    return G


def cmd_mimo(args: argparse.Namespace) -> int:
    if not (args.parallel or args.simo or args.miso or args.qr or args.high_snr or args.low_snr):
        raise UsageError("choose at least one of --parallel --simo --miso --qr --high-snr --low-snr")
    G = read_matrix(args.matrix)
    nr, nt = G.shape
    scale = 1.0 / _LOG2 if args.bits else 1.0
    A, E = args.peak, args.avg
    out: dict[str, Any] = {"shape": [nr, nt], "unit": "bits" if args.bits else "nats"}
    try:
        if args.parallel:
            if nr != nt or np.count_nonzero(G - np.diag(np.diag(G))):
                raise UsageError("--parallel needs a diagonal matrix")
            pb = parallel_bounds(np.diag(G), A, E, args.method)
            out["parallel"] = {"lower": pb.lower * scale, "upper": pb.upper * scale,
                               "allocation": pb.lower_allocation.E.tolist(),
                               "upper_allocation": pb.upper_allocation.E.tolist(),
                               "active": int(pb.lower_allocation.n_active)}
            if math.isfinite(A):
                out["parallel"]["low_snr_asymptote"] = parallel_low_snr_asymptote(np.diag(G), A, E) * scale
        if args.simo:
            if nt != 1:
                raise UsageError("--simo needs a column vector")
            g = simo_reduce(G[:, 0])
            ch = SisoChannel(g, A, E)
            bounds = {m: b.value * scale for m, b in evaluate(ch, applicable_methods(ch)).items()} if g > 0 else {}
            out["simo"] = {"gain": g, "bounds": bounds}
        if args.miso:
            if nr != 1:
                raise UsageError("--miso needs a row vector")
            red = miso_reduce(G[0], A, E)
            entry: dict[str, Any] = {"regime": red.regime}
            if red.channel is not None:
                ch = red.channel
                entry["reduced"] = {"gain": ch.g, "peak": ch.peak, "avg": ch.avg}
                entry["bounds"] = {m: b.value * scale for m, b in evaluate(ch, applicable_methods(ch)).items()}
            out["miso"] = entry
        if args.qr:
            r = mimo_qr_rate(G, E, args.method)
            _, U = householder_qr(G)
            out["qr"] = {"rate": r.value * scale, "u_diag": np.diag(U).tolist(),
                         "allocation": r.optimizer["allocation"]}
        if args.high_snr:
            alpha = E / A if math.isfinite(A) else None
            if nr == 1 and nt > 1 and math.isfinite(A):
                h = miso_high_snr(G[0], A, alpha)
                out["high_snr"] = {"value": h.value * scale, "base": h.base * scale,
                                   "correction": h.correction * scale, "alpha_th": h.alpha_th}
            else:
                h = mimo_high_snr(G, A, alpha, E)
                out["high_snr"] = {"value": h.value * scale, "meta": h.optimizer}
        if args.low_snr:
            if not math.isfinite(A):
                raise UsageError("--low-snr needs a finite --peak")
            alpha = E / A
            cb = miso_low_snr_gamma(G[0], alpha) if nr == 1 else mimo_low_snr_eta(G, alpha)
            out["low_snr"] = {"factor": cb.value, "asymptote": cb.asymptote(A) * scale,
                              "a": cb.a.tolist(), "atoms": (cb.atoms * A).tolist(), "masses": cb.masses.tolist()}
    except ImddError as exc:
        raise UsageError(str(exc)) from exc
    _emit(dumps_json(out), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imdd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bits", action="store_true", help="report rates in bits instead of nats")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--delta", type=_float, default=None,
                         help="output-grid bin width (default 1e-3, or 1e-2 when gA > 20)")
    numeric.add_argument("--tol", type=_float, default=1e-7, help="Blahut-Arimoto stopping tolerance")
    numeric.add_argument("--gap-tol", type=_float, default=None,
                         help="accept a capacity estimate once its dual gap bound is below this")
    numeric.add_argument("--methods", default=None,
                         help="comma-separated tags (capacity, lmw, cma, fh, exp, geom, duality, mckellips, "
                              "relax, sp_simplex, sp_cube, asym_hi, asym_lo) or 'all'")

    s = sub.add_parser("siso", parents=[common, numeric], help="single-channel capacity and bounds")
    s.add_argument("--gain", type=_float, required=True)
    s.add_argument("--peak", type=_float, default=math.inf)
    s.add_argument("--avg", type=_float, default=math.inf)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_siso)

    w = sub.add_parser("sweep", parents=[common, numeric], help="evaluate methods along a parameter axis")
    w.add_argument("--variable", choices=("peak", "avg", "alpha"), required=True)
    w.add_argument("--start", type=_float, required=True)
    w.add_argument("--stop", type=_float, required=True)
    w.add_argument("--points", type=int, required=True)
    w.add_argument("--scale", choices=("linear", "log10"), default="linear",
                   help="log10: axis values are 10*log10 of the swept quantity")
    w.add_argument("--gain", type=_float, default=1.0)
    w.add_argument("--peak", type=_float, default=math.inf)
    w.add_argument("--avg", type=_float, default=math.inf)
    w.add_argument("--alpha", type=_fraction, default=None)
    w.add_argument("--format", choices=("csv", "json"), default="csv")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("region", parents=[common], help="two-user BC or MAC rate regions")
    kind = r.add_mutually_exclusive_group(required=True)
    kind.add_argument("--bc", action="store_true")
    kind.add_argument("--mac", action="store_true")
    r.add_argument("--g1", type=_float, required=True)
    r.add_argument("--g2", type=_float, required=True)
    r.add_argument("--peak", type=_float, required=True, help="peak (user 1 peak for --mac)")
    r.add_argument("--avg", type=_float, default=None, help="average (user 1 average for --mac)")
    r.add_argument("--alpha", type=_fraction, default=None, help="average-to-peak ratio for all users")
    r.add_argument("--peak2", type=_float, default=None)
    r.add_argument("--avg2", type=_float, default=None)
    r.add_argument("--regions", default="outer,inner,high,low")
    r.add_argument("--outer-method", choices=("lmw", "relax0"), default="lmw")
    r.add_argument("--rho-grid", type=int, default=101)
    r.set_defaults(func=cmd_region)

    m = sub.add_parser("mimo", parents=[common], help="parallel, SIMO, MISO and MIMO channels")
    m.add_argument("--matrix", required=True, help="JSON 2-D array or whitespace-separated text, row-major")
    m.add_argument("--peak", type=_float, default=math.inf)
    m.add_argument("--avg", type=_float, default=math.inf)
    m.add_argument("--method", choices=("lmw", "cma", "fh"), default="lmw")
    m.add_argument("--parallel", action="store_true")
    m.add_argument("--simo", action="store_true")
    m.add_argument("--miso", action="store_true")
    m.add_argument("--qr", action="store_true")
    m.add_argument("--high-snr", action="store_true")
    m.add_argument("--low-snr", action="store_true")
    m.set_defaults(func=cmd_mimo)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except UsageError as exc:
        sys.stderr.write(f"imdd: error: {exc}\n")
        return EXIT_INVALID
    except ConvergenceError as exc:
        sys.stderr.write(dumps_json({"error": str(exc), "partial": getattr(exc, "partial", {})}))
        return EXIT_NOT_CONVERGED
    except (ImddError, ValueError) as exc:
        sys.stderr.write(f"imdd: error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
