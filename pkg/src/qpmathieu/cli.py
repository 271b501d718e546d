"""Command-line front end.

Every file-producing subcommand also writes ``<prefix>.manifest``, a flat
key=value record of the invocation that ``qpmathieu rerun`` can replay.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import cmath
import math
import shlex
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .core import RationalPoint, SystemParams, Variant, fundamental_period
from .floquet import (DEFAULT_CUTOFF, EigenFailure, SingularHalfPeriod, classify,
                      robust_monodromy, multipliers)
from .hill import (ScanLine, TruncationTooDeep, resonance_curves, trace_transition_curves,
                   transition_csv)
from .integrator import IntegrationError, IntegratorConfig
from .slowflow import MuWindow, NoWindowFound, overlay_band, stability_window
from .sweep import (SweepSpec, chart_from_csv, export_csv, render_chart, run_sweep)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
FAILED_CELL_LIMIT = 0.01
LARGE_GRID = 400

NUMERIC_ERRORS = (IntegrationError, SingularHalfPeriod, EigenFailure, NoWindowFound,
                  np.linalg.LinAlgError)


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ argument types

def rational(text: str) -> Fraction:
    """Parse "num/denom" (or a plain integer) into an exact positive fraction."""
    try:
        num, _, den = text.partition("/")
        value = Fraction(int(num), int(den) if den else 1)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected num/denom, got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("rational parameters must be positive")
    return value


def interval(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError("interval must have hi > lo")
    return lo, hi


def scan_range(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if not (hi > lo and step > 0):
        raise argparse.ArgumentTypeError("need hi > lo and step > 0")
    return lo, hi, step


def region(text: str) -> tuple[int, int, int, int]:
    try:
        parts = tuple(int(v) for v in text.split(":"))
    except ValueError:
        parts = ()
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("region is i_lo:i_hi:j_lo:j_hi")
    return parts


def nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# ------------------------------------------------------------------ output helpers

def _cfg(args) -> IntegratorConfig:
    return IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol)


def _fmt_complex(z: complex, digits: int = 8) -> str:
    re = round(z.real, digits) + 0.0
    im = round(z.imag, digits) + 0.0
    return f"{re:.{digits}g}{im:+.{digits}g}i"


class Outputs:
    """Collects written files so the manifest can list them."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self.files: list[str] = []

    def write(self, suffix: str, data: str | bytes) -> str:
        path = Path(self.prefix + suffix)
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data)
        self.files.append(str(path))
        return str(path)


def write_manifest(out: Outputs, command: str, argv: list[str], args, started: float) -> None:
    lines = [
        f"subcommand={command}",
        f"argv={shlex.join(argv)}",
        f"version={__version__}",
        f"duration_s={time.time() - started:.3f}",
    ]
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command"):
            continue
        lines.append(f"flag.{key}={value}")
    lines.append(f"outputs={','.join(out.files + [out.prefix + '.manifest'])}")
    Path(out.prefix + ".manifest").write_text("\n".join(lines) + "\n")


def read_manifest(path: str) -> dict[str, str]:
    entries = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"malformed manifest line {line!r}")
            entries[key.strip()] = value
    if "argv" not in entries:
        raise UsageError("manifest has no argv entry")
    return entries


# ------------------------------------------------------------------ subcommands

def cmd_point(args, argv) -> int:
    p = RationalPoint.from_fractions(args.alpha, args.beta)
    params = p.params(args.eps, args.variant)
    T = fundamental_period(p)
    phi, route = robust_monodromy(params, T, _cfg(args))
    ms = multipliers(phi)
    stable = ms.max_norm <= args.cutoff
    print(f"alpha = {args.alpha} ({p.alpha:.9g}), beta = {args.beta} ({p.beta:.9g}), "
          f"eps = {args.eps:g}, variant = {params.variant.value}")
    print(f"period T = {T:.12g} (= {T / math.pi:.9g} pi)")
    print(f"monodromy route: {route}")
    if phi.det_drift is not None:
        print(f"|det Phi(T/2) - 1| = {phi.det_drift:.3e}")
    print("multipliers:")
    for lam in ms.values:
        r, theta = cmath.polar(lam)
        print(f"  {_fmt_complex(lam)}    |lam| = {r:.10g}  arg = {theta:+.10g}")
    print(f"configuration: {classify(ms).value}")
    print(f"max |lam| = {ms.max_norm:.10g} (cutoff {args.cutoff:g})")
    print(f"verdict: {'stable' if stable else 'unstable'}")
    return EXIT_OK


def cmd_sweep(args, argv) -> int:
    if args.n > LARGE_GRID and not args.full:
        raise UsageError(f"n={args.n} is an overnight job; pass --full to run it anyway")
    spec = SweepSpec(n=args.n, epsilon=args.eps, cutoff=args.cutoff, variant=args.variant,
                     region=args.region, integrator=_cfg(args))
    started = time.time()
    chart = run_sweep(spec, workers=args.workers)
    out = Outputs(args.out)
    out.write(".pgm", render_chart(chart, args.mode))
    out.write(".csv", export_csv(chart))
    write_manifest(out, "sweep", argv, args, started)
    n_cells = len(spec.cells())
    n_fail = len(chart.failures)
    print(f"{n_cells} cells, {int(chart.unstable_mask().sum())} unstable, {n_fail} failed")
    for i, j, err in chart.failures[:20]:
        print(f"  failed ({i}, {j}): {err}", file=sys.stderr)
    if n_fail > FAILED_CELL_LIMIT * n_cells:
        print(f"error: {n_fail}/{n_cells} cells failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_transition(args, argv) -> int:
    if (args.scan_beta is None) == (args.scan_alpha is None):
        raise UsageError("give exactly one of --scan-beta or --scan-alpha")
    if args.scan_beta is not None:
        if args.alpha_range is None:
            raise UsageError("--scan-beta needs --alpha-range")
        scan = ScanLine("beta", args.scan_beta, *args.alpha_range, samples=args.samples)
    else:
        if args.beta_range is None:
            raise UsageError("--scan-alpha needs --beta-range")
        scan = ScanLine("alpha", args.scan_alpha, *args.beta_range, samples=args.samples)
    started = time.time()
    pts = trace_transition_curves(args.variant, args.eps, args.N, args.M, scan, args.root_tol)
    for p in pts:
        print(f"alpha = {p.alpha:.9f}  beta = {p.beta:.9f}")
    if not pts:
        print("no sign changes along the scan")
    if args.out:
        out = Outputs(args.out)
        out.write(".csv", transition_csv(pts))
        write_manifest(out, "transition", argv, args, started)
    return EXIT_OK


SYSTEMS = {
    "mathieu": (["delta"], ["1"]),
    "qp-mathieu": (["delta"], ["1", "omega"]),
    "plain": (["alpha", "beta"], ["alpha", "beta"]),
    "squared": (["alpha**2", "beta**2"], ["alpha", "beta"]),
}


def cmd_resonance(args, argv) -> int:
    lam, omega = SYSTEMS[args.system]
    started = time.time()
    rc = resonance_curves(lam, omega, args.k)
    text = rc.to_text()
    sys.stdout.write(text)
    if args.system == "squared":
        slopes = rc.line_slopes()
        print("line slopes alpha/beta: " + ", ".join(str(q) for q in slopes))
    if args.out:
        out = Outputs(args.out)
        out.write(".txt", text)
        write_manifest(out, "resonance", argv, args, started)
    return EXIT_OK


def cmd_slowflow(args, argv) -> int:
    lo, hi, step = args.scan
    started = time.time()
    report = stability_window(mu_range=(lo, hi), scan_step=step, refine_tol=args.refine,
                              cfg=_cfg(args), workers=args.workers)
    sys.stdout.write(report.to_text())
    if args.out:
        out = Outputs(args.out)
        out.write(".txt", report.to_text())
        out.write(".csv", report.to_csv())
        write_manifest(out, "slowflow", argv, args, started)
    return EXIT_OK


def cmd_overlay(args, argv) -> int:
    spec = SweepSpec(n=args.n, epsilon=args.eps, cutoff=args.cutoff, variant=args.variant)
    try:
        chart = chart_from_csv(Path(args.chart).read_text(), spec)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    started = time.time()
    if args.mu_window is not None:
        window = MuWindow(*args.mu_window)
    else:
        window = stability_window(cfg=_cfg(args)).primary
    out = Outputs(args.out)
    out.write(".pgm", overlay_band(chart, window, alpha_min=args.alpha_min, mode=args.mode))
    write_manifest(out, "overlay", argv, args, started)
    print(f"band from mu window ({window.mu_minus:.6f}, {window.mu_plus:.6f})")
    return EXIT_OK


def cmd_rerun(args, argv) -> int:
    entries = read_manifest(args.manifest)
    replay = shlex.split(entries["argv"])
    if args.out:
        if "--out" not in replay:
            raise UsageError("manifest run wrote no files; nothing to redirect")
        replay[replay.index("--out") + 1] = args.out
    return main(replay)


# ------------------------------------------------------------------ parser

def _add_numeric(p, cutoff=True):
    p.add_argument("--rtol", type=float, default=1e-10, help="integrator relative tolerance")
    p.add_argument("--atol", type=float, default=1e-10, help="integrator absolute tolerance")
    if cutoff:
        p.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF,
                       help="stable iff max |multiplier| <= cutoff")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpmathieu",
                                     description="Stability of quasiperiodically forced "
                                                 "coupled Mathieu-type systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("point", help="Floquet diagnostics at one rational point")
    p.add_argument("--alpha", type=rational, required=True, help="num/denom")
    p.add_argument("--beta", type=rational, required=True, help="num/denom")
    p.add_argument("--eps", type=nonneg_float, required=True)
    p.add_argument("--variant", type=Variant.parse, default=Variant.SQUARED)
    _add_numeric(p)
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("sweep", help="stability chart on an n x n grid")
    p.add_argument("--n", type=positive_int, default=200)
    p.add_argument("--eps", type=nonneg_float, default=0.1)
    p.add_argument("--variant", type=Variant.parse, default=Variant.SQUARED)
    p.add_argument("--region", type=region, default=None, help="i_lo:i_hi:j_lo:j_hi")
    p.add_argument("--workers", type=positive_int, default=None)
    p.add_argument("--mode", choices=["binary", "grayscale"], default="binary")
    p.add_argument("--full", action="store_true", help=f"allow n > {LARGE_GRID}")
    p.add_argument("--out", required=True, help="output prefix")
    _add_numeric(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("transition", help="Hill-determinant sign changes along a scan line")
    p.add_argument("--variant", type=Variant.parse, default=Variant.SQUARED)
    p.add_argument("--eps", type=nonneg_float, required=True)
    p.add_argument("--N", type=positive_int, default=5)
    p.add_argument("--M", type=positive_int, default=3)
    p.add_argument("--scan-beta", type=float, default=None, help="fix beta, sweep alpha")
    p.add_argument("--scan-alpha", type=float, default=None, help="fix alpha, sweep beta")
    p.add_argument("--alpha-range", type=interval, default=None)
    p.add_argument("--beta-range", type=interval, default=None)
    p.add_argument("--samples", type=positive_int, default=200)
    p.add_argument("--root-tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_transition)

    p = sub.add_parser("resonance", help="resonance curves for small epsilon")
    p.add_argument("--system", choices=sorted(SYSTEMS), default="squared")
    p.add_argument("--k", type=positive_int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("slowflow", help="stable mu window of the slow-flow system")
    p.add_argument("--scan", type=scan_range, default=(0.15, 0.21, 1e-3), help="lo:hi:step")
    p.add_argument("--refine", type=float, default=1e-5)
    p.add_argument("--workers", type=positive_int, default=None)
    p.add_argument("--out", default=None)
    _add_numeric(p, cutoff=False)
    p.set_defaults(func=cmd_slowflow)

    p = sub.add_parser("overlay", help="draw the predicted stable band on a sweep chart")
    p.add_argument("--chart", required=True, help="CSV written by the sweep subcommand")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--eps", type=nonneg_float, required=True)
    p.add_argument("--variant", type=Variant.parse, default=Variant.SQUARED)
    p.add_argument("--mu-window", type=interval, default=None,
                   help="mu_minus:mu_plus (computed when omitted)")
    p.add_argument("--alpha-min", type=float, default=0.0)
    p.add_argument("--mode", choices=["binary", "grayscale"], default="binary")
    p.add_argument("--out", required=True)
    _add_numeric(p)
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write to a new prefix instead")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, argv)
    except (UsageError, TruncationTooDeep, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
