"""Stability charts over the (alpha, beta) unit square.

Cell (i, j) of an n-grid is the rational point alpha = i/n, beta = j/n,
integrated over its exact gcd period. Cells are independent; the sweep
farms them out to a process pool and reassembles the chart afterwards.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import RationalPoint, Variant, fundamental_period
from .floquet import (DEFAULT_CUTOFF, EigenFailure, SingularHalfPeriod, multipliers,
                      robust_monodromy)
from .integrator import IntegrationError, IntegratorConfig

__all__ = [
    "SweepSpec",
    "StabilityChart",
    "run_sweep",
    "evaluate_cell",
    "render_chart",
    "export_csv",
    "chart_from_csv",
    "read_pgm",
    "write_pgm",
    "CSV_HEADER",
    "FAILURE_GRAY",
    "SKIPPED_GRAY",
]

CSV_HEADER = "i,j,alpha,beta,max_norm,stable"
FAILURE_GRAY = 128
SKIPPED_GRAY = 64
DESK_RESOLUTION = 200
FULL_RESOLUTION = 800


@dataclass(frozen=True)
class SweepSpec:
    n: int = DESK_RESOLUTION
    epsilon: float = 0.1
    cutoff: float = DEFAULT_CUTOFF
    variant: Variant = Variant.SQUARED
    # inclusive index ranges (i_lo, i_hi, j_lo, j_hi); None covers the full square
    region: tuple[int, int, int, int] | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid resolution must be at least 2")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.region is not None:
            i_lo, i_hi, j_lo, j_hi = (int(v) for v in self.region)
            if not (1 <= i_lo <= i_hi <= self.n and 1 <= j_lo <= j_hi <= self.n):
                raise ValueError(f"region {self.region} outside [1, {self.n}]^2")
            object.__setattr__(self, "region", (i_lo, i_hi, j_lo, j_hi))

    @property
    def bounds(self) -> tuple[int, int, int, int]:
        return self.region if self.region is not None else (1, self.n, 1, self.n)

    def cells(self) -> list[tuple[int, int]]:
        """Row-major with i fastest."""
        i_lo, i_hi, j_lo, j_hi = self.bounds
        return [(i, j) for j in range(j_lo, j_hi + 1) for i in range(i_lo, i_hi + 1)]


@dataclass
class StabilityChart:
    """``max_norms[j-1, i-1]`` holds cell (i, j); NaN where not computed or failed."""

    spec: SweepSpec
    max_norms: np.ndarray
    failures: list[tuple[int, int, str]]

    def computed(self) -> np.ndarray:
        mask = np.zeros_like(self.max_norms, dtype=bool)
        i_lo, i_hi, j_lo, j_hi = self.spec.bounds
        mask[j_lo - 1:j_hi, i_lo - 1:i_hi] = True
        return mask

    def norm(self, i: int, j: int) -> float:
        return float(self.max_norms[j - 1, i - 1])

    def stable(self, i: int, j: int) -> bool | None:
        v = self.norm(i, j)
        if math.isnan(v):
            return None
        return v <= self.spec.cutoff

    def unstable_mask(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.nan_to_num(self.max_norms, nan=-np.inf) > self.spec.cutoff

    def stable_mask(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.nan_to_num(self.max_norms, nan=np.inf) <= self.spec.cutoff


def evaluate_cell(i: int, j: int, n: int, epsilon: float, variant: Variant,
                  cfg: IntegratorConfig) -> tuple[int, int, float, str | None]:
    """Max multiplier modulus of one grid cell; failures come back as an error tag."""
    p = RationalPoint(i, j, n)
    try:
        phi, _ = robust_monodromy(p.params(epsilon, variant), fundamental_period(p), cfg)
        return i, j, multipliers(phi).max_norm, None
    except (IntegrationError, SingularHalfPeriod, EigenFailure, np.linalg.LinAlgError) as exc:
        return i, j, math.nan, type(exc).__name__


def _evaluate_batch(batch, n, epsilon, variant, cfg):
    return [evaluate_cell(i, j, n, epsilon, variant, cfg) for i, j in batch]


def _cost(cell):
    i, j = cell
    return -1.0 / math.gcd(i, j)


def run_sweep(spec: SweepSpec, workers: int | None = None, batch_size: int = 16,
              progress=None) -> StabilityChart:
    """Evaluate every cell of ``spec``; results do not depend on ``workers``.

    ``progress`` is an optional callable receiving the number of finished cells.
    """
    workers = workers or os.cpu_count() or 1
    cells = spec.cells()
    norms = np.full((spec.n, spec.n), np.nan)
    failures: list[tuple[int, int, str]] = []
    args = (spec.n, spec.epsilon, spec.variant, spec.integrator)

    def collect(results):
        for i, j, v, err in results:
            norms[j - 1, i - 1] = v
            if err is not None:
                failures.append((i, j, err))
        if progress is not None:
            progress(len(results))

    if workers == 1 or len(cells) <= batch_size:
        for start in range(0, len(cells), batch_size):
            collect(_evaluate_batch(cells[start:start + batch_size], *args))
    else:
        # long gcd=1 periods first so the tail of the queue is short work
        ordered = sorted(cells, key=_cost)
        batches = [ordered[k:k + batch_size] for k in range(0, len(ordered), batch_size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_evaluate_batch, b, *args) for b in batches]
            for fut in futures:
                collect(fut.result())
    failures.sort(key=lambda f: (f[1], f[0]))
    return StabilityChart(spec, norms, failures)


def _chart_pixels(chart: StabilityChart, mode: str) -> np.ndarray:
    norms = chart.max_norms
    computed = chart.computed()
    failed = computed & np.isnan(norms)
    if mode == "binary":
        img = np.where(chart.unstable_mask(), 255, 0).astype(np.uint8)
    elif mode == "grayscale":
        clamped = np.clip(np.nan_to_num(norms, nan=1.0), 1.0, 10.0)
        img = np.round(255 * np.log10(clamped)).astype(np.uint8)
    else:
        raise ValueError(f"unknown render mode {mode!r}")
    img[failed] = FAILURE_GRAY
    img[~computed] = SKIPPED_GRAY
    # beta grows upward: image row 0 is j = n
    return img[::-1].copy()


def write_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary (P5, maxval 255) graymap."""
    buf = io.BytesIO(data)
    tokens: list[bytes] = []
    while len(tokens) < 4:
        line = buf.readline()
        if not line:
            raise ValueError("truncated PGM header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:4])
    if maxval != 255:
        raise ValueError("only maxval 255 is supported")
    raw = buf.read(w * h)
    if len(raw) != w * h:
        raise ValueError("truncated PGM data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)


def render_chart(chart: StabilityChart, mode: str = "binary") -> bytes:
    """PGM image of the chart.

    Binary: white where max norm exceeds the cutoff, black otherwise.
    Grayscale: log10 of the max norm clamped to [1, 10], 0 -> black.
    Failed cells are mid-gray and cells outside the region dark gray.
    """
    return write_pgm(_chart_pixels(chart, mode.lower()))


def export_csv(chart: StabilityChart) -> str:
    """One row per computed cell, row-major with i fastest."""
    n = chart.spec.n
    lines = [CSV_HEADER]
    for i, j in chart.spec.cells():
        v = chart.norm(i, j)
        if math.isnan(v):
            flag, val = -1, "nan"
        else:
            flag, val = int(v <= chart.spec.cutoff), f"{v:.9g}"
        lines.append(f"{i},{j},{i / n:.9g},{j / n:.9g},{val},{flag}")
    return "\n".join(lines) + "\n"


def chart_from_csv(text: str, spec: SweepSpec) -> StabilityChart:
    """Rebuild a chart from ``export_csv`` output; ``spec`` supplies n, epsilon and cutoff."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError("not a stability chart CSV")
    norms = np.full((spec.n, spec.n), np.nan)
    failures = []
    seen = []
    for ln in lines[1:]:
        i, j, _, _, val, flag = ln.split(",")
        i, j = int(i), int(j)
        if not (1 <= i <= spec.n and 1 <= j <= spec.n):
            raise ValueError(f"cell ({i}, {j}) outside an n={spec.n} grid")
        norms[j - 1, i - 1] = float(val)
        seen.append((i, j))
        if int(flag) == -1:
            failures.append((i, j, "recorded"))
    if spec.region is None and len(seen) != spec.n * spec.n and seen:
        ii, jj = zip(*seen)
        spec = replace(spec, region=(min(ii), max(ii), min(jj), max(jj)))
    return StabilityChart(spec, norms, failures)
