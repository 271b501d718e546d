"""Slow flow near the 1:1 resonance alpha ~ beta.

With beta = alpha + eps^2 beta2 and slow time T = eps^2 t, the amplitudes of
the first-order solution obey dY/dT = Q(T) Y. Rescaling time to t* = beta2 T
and writing mu = 1/(24 alpha^3 beta2) leaves the one-parameter, 2 pi-periodic
system

    dY/dt* = [A + mu (A0 + A1 cos t* + A2 cos 2t* + B1 sin t* + B2 sin 2t*)] Y

whose stable window in mu maps back to a thin stable band beside alpha = beta.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .floquet import half_period_monodromy, multipliers
from .integrator import IntegratorConfig, integrate_linear
from .sweep import StabilityChart, _chart_pixels, write_pgm

__all__ = [
    "NoWindowFound",
    "SlowFlowModel",
    "MuWindow",
    "WindowReport",
    "MU_CUTOFF",
    "BAND_GRAY",
    "mu_rhs",
    "q_matrix",
    "mu_max_norm",
    "mu_monodromy",
    "stability_window",
    "stability_band",
    "overlay_band",
]

MU_CUTOFF = 1.0 + 1e-6
BAND_GRAY = 192
TWO_PI = 2.0 * math.pi


class NoWindowFound(RuntimeError):
    """No stable mu in the scanned range; usually a sign the matrices are wrong."""


def _m(rows) -> np.ndarray:
    return np.array(rows, dtype=float)


@dataclass(frozen=True)
class SlowFlowModel:
    A: np.ndarray = field(default_factory=lambda: _m(
        [[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]]))
    A0: np.ndarray = field(default_factory=lambda: _m(
        [[0, -2, 0, 1], [2, 0, 5, 0], [0, -2, 0, 1], [2, 0, 5, 0]]))
    A1: np.ndarray = field(default_factory=lambda: _m(
        [[0, 1, 0, 1], [5, 0, 5, 0], [0, 1, 0, 1], [5, 0, 5, 0]]))
    A2: np.ndarray = field(default_factory=lambda: _m(
        [[0, 3, 0, 0], [3, 0, 0, 0], [0, 3, 0, 0], [3, 0, 0, 0]]))
    B1: np.ndarray = field(default_factory=lambda: _m(
        [[-1, 0, 7, 0], [0, -7, 0, 1], [-1, 0, 7, 0], [0, -7, 0, 1]]))
    B2: np.ndarray = field(default_factory=lambda: _m(
        [[3, 0, 0, 0], [0, -3, 0, 0], [3, 0, 0, 0], [0, -3, 0, 0]]))

    # the t-invariance involution of the mu-system
    G: np.ndarray = field(default_factory=lambda: np.diag([1.0, -1.0, 1.0, -1.0]))

    def trig_form(self, mu: float):
        """Coefficients in the integrator's ``C0 + sum Cc cos + Cs sin`` layout."""
        c0 = self.A + mu * self.A0
        freqs = np.array([1.0, 2.0])
        cc = np.stack([mu * self.A1, mu * self.A2])
        cs = np.stack([mu * self.B1, mu * self.B2])
        return c0, freqs, cc, cs


def mu_rhs(model: SlowFlowModel, mu: float, tstar: float) -> np.ndarray:
    return model.A + mu * (model.A0 + model.A1 * math.cos(tstar)
                           + model.A2 * math.cos(2 * tstar)
                           + model.B1 * math.sin(tstar) + model.B2 * math.sin(2 * tstar))


def q_matrix(alpha: float, beta2: float, T: float) -> np.ndarray:
    """Slow-flow matrix Q(T), written out entry by entry."""
    if beta2 == 0:
        raise ValueError("beta2 must be nonzero")
    k = 24 * alpha**3 * beta2
    s1, s2 = math.sin(beta2 * T), math.sin(2 * beta2 * T)
    c1, c2 = math.cos(beta2 * T), math.cos(2 * beta2 * T)
    row1 = [-s1 + 3 * s2, -2 + c1 + 3 * c2, 7 * s1, 1 + c1]
    row2 = [2 + 5 * c1 + 3 * c2, -7 * s1 - 3 * s2, 5 + 5 * c1, s1]
    row3 = [-s1 + 3 * s2, -2 + c1 + 3 * c2, 7 * s1, 1 + k + c1]
    row4 = [2 + 5 * c1 + 3 * c2, -7 * s1 - 3 * s2, 5 - k + 5 * c1, s1]
    return np.array([row1, row2, row3, row4])


def mu_monodromy(model: SlowFlowModel, mu: float, cfg: IntegratorConfig | None = None,
                 half_period: bool = True) -> np.ndarray:
    """Monodromy over one 2 pi period.

    The mu-system always has a double multiplier at +1. Direct integration
    splits it by roughly the square root of the local error (1e-6 and more),
    which is as large as the stability cutoff itself. Rebuilding Phi(2 pi)
    from Phi(pi) through the involution keeps reciprocity exact and leaves
    the pair on the unit circle.
    """
    cfg = cfg or IntegratorConfig()
    if not half_period:
        states, *_ = integrate_linear(*model.trig_form(mu), np.eye(4), [TWO_PI], cfg)
        return states[-1]
    states, *_ = integrate_linear(*model.trig_form(mu), np.eye(4), [math.pi], cfg)
    return half_period_monodromy(states[-1], model.G)


def mu_max_norm(model: SlowFlowModel, mu: float, cfg: IntegratorConfig | None = None) -> float:
    return multipliers(mu_monodromy(model, mu, cfg)).max_norm


@dataclass(frozen=True)
class MuWindow:
    mu_minus: float
    mu_plus: float

    def __post_init__(self):
        if not 0 < self.mu_minus < self.mu_plus:
            raise ValueError("need 0 < mu_minus < mu_plus")

    def __contains__(self, mu: float) -> bool:
        return self.mu_minus <= mu <= self.mu_plus


@dataclass(frozen=True)
class WindowReport:
    windows: tuple[MuWindow, ...]
    primary: MuWindow
    scan_mu: np.ndarray
    scan_norm: np.ndarray
    cutoff: float
    # primary endpoints recomputed at a looser cutoff, to show how little they move
    loose_cutoff: float
    loose_window: MuWindow | None

    def to_csv(self) -> str:
        lines = ["mu,max_norm"]
        lines += [f"{m:.9g},{v:.9g}" for m, v in zip(self.scan_mu, self.scan_norm)]
        lines.append(f"mu_minus,{self.primary.mu_minus:.9g}")
        lines.append(f"mu_plus,{self.primary.mu_plus:.9g}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = [f"stable window (cutoff {self.cutoff:.9g}): "
               f"{self.primary.mu_minus:.6f} < mu < {self.primary.mu_plus:.6f}"]
        for w in self.windows:
            if w != self.primary:
                out.append(f"additional window: {w.mu_minus:.6f} < mu < {w.mu_plus:.6f}")
        if self.loose_window is not None:
            out.append(f"at cutoff {self.loose_cutoff:g}: {self.loose_window.mu_minus:.6f} "
                       f"< mu < {self.loose_window.mu_plus:.6f}")
        out.append(f"scan points: {len(self.scan_mu)}")
        return "\n".join(out) + "\n"


def _refine(f, lo: float, hi: float, lo_stable: bool, tol: float) -> float:
    """Bisect the stability flip between ``lo`` and ``hi``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) == lo_stable:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan(model, grid, cfg, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(mu_max_norm, [model] * len(grid), grid,
                                          [cfg] * len(grid))))
    return np.array([mu_max_norm(model, mu, cfg) for mu in grid])


def _windows_from_scan(model, grid, norms, cutoff, refine_tol, cfg):
    stable = norms <= cutoff
    f = lambda mu: mu_max_norm(model, mu, cfg) <= cutoff  # noqa: E731
    out = []
    k = 0
    while k < len(grid):
        if not stable[k]:
            k += 1
            continue
        start = k
        while k + 1 < len(grid) and stable[k + 1]:
            k += 1
        lo = grid[start] if start == 0 else _refine(f, grid[start - 1], grid[start],
                                                    False, refine_tol)
        hi = grid[k] if k == len(grid) - 1 else _refine(f, grid[k], grid[k + 1],
                                                       True, refine_tol)
        if lo < hi:
            out.append(MuWindow(float(lo), float(hi)))
        k += 1
    return out


def stability_window(model: SlowFlowModel | None = None,
                     mu_range: tuple[float, float] = (0.15, 0.21), scan_step: float = 1e-3,
                     refine_tol: float = 1e-5, cfg: IntegratorConfig | None = None,
                     cutoff: float = MU_CUTOFF, workers: int | None = None,
                     anchor: float = 0.185, loose_cutoff: float = 1.0 + 1e-4) -> WindowReport:
    """Scan mu, classify each point by its Floquet multipliers over one 2 pi period,
    and bisect the edges of every stable run.

    The window containing ``anchor`` (or else the widest one) is the primary window.
    """
    model = model or SlowFlowModel()
    cfg = cfg or IntegratorConfig()
    lo, hi = mu_range
    if not 0 < lo < hi <= 1:
        raise ValueError("mu_range must lie inside (0, 1]")
    if not scan_step > 0:
        raise ValueError("scan_step must be positive")
    count = int(round((hi - lo) / scan_step)) + 1
    grid = np.linspace(lo, hi, count)
    norms = _scan(model, grid, cfg, workers)
    windows = _windows_from_scan(model, grid, norms, cutoff, refine_tol, cfg)
    if not windows:
        raise NoWindowFound(f"no stable mu in [{lo}, {hi}] at cutoff {cutoff}")
    primary = next((w for w in windows if anchor in w),
                   max(windows, key=lambda w: w.mu_plus - w.mu_minus))
    loose = _windows_from_scan(model, grid, norms, loose_cutoff, refine_tol, cfg)
    loose_primary = next((w for w in loose if w.mu_minus <= primary.mu_plus
                          and primary.mu_minus <= w.mu_plus), None)
    return WindowReport(tuple(windows), primary, grid, norms, cutoff, loose_cutoff,
                        loose_primary)


def stability_band(alpha: float, epsilon: float, w: MuWindow):
    """beta-intervals (above alpha, below alpha) predicted stable by the slow flow."""
    if not (alpha > 0 and epsilon > 0):
        raise ValueError("alpha and epsilon must be positive")
    near = epsilon**2 / (24 * alpha**3 * w.mu_plus)
    far = epsilon**2 / (24 * alpha**3 * w.mu_minus)
    return (alpha + near, alpha + far), (alpha - far, alpha - near)


def overlay_band(chart: StabilityChart, w: MuWindow, alpha_min: float = 0.0,
                 mode: str = "binary") -> bytes:
    """Chart image with the predicted band edges drawn in ``BAND_GRAY``.

    Each column alpha = i/n above ``alpha_min`` gets the four edge values of
    beta marked in the nearest row.
    """
    img = _chart_pixels(chart, mode)
    n = chart.spec.n
    eps = chart.spec.epsilon
    if eps > 0:
        for i in range(1, n + 1):
            alpha = i / n
            if alpha < alpha_min:
                continue
            for interval in stability_band(alpha, eps, w):
                for beta in interval:
                    j = int(round(beta * n))
                    if 1 <= j <= n:
                        img[n - j, i - 1] = BAND_GRAY
    return write_pgm(img)
