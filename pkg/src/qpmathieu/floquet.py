"""Monodromy matrices, Floquet multipliers and the stability verdict."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import G, RationalPoint, SystemParams, fundamental_period
from .integrator import FundamentalMatrix, IntegratorConfig, integrate_fundamental

__all__ = [
    "DEFAULT_CUTOFF",
    "SingularHalfPeriod",
    "EigenFailure",
    "MultiplierSet",
    "MultiplierConfiguration",
    "StabilityVerdict",
    "half_period_monodromy",
    "monodromy",
    "full_period_monodromy",
    "robust_monodromy",
    "characteristic_polynomial",
    "companion_roots",
    "multipliers",
    "classify",
    "verdict",
    "det_guard",
    "rational_verdict",
]

DEFAULT_CUTOFF = 1.025
CLASSIFY_TOL = 1e-4
RESIDUAL_TOL = 1e-8
SINGULAR_TOL = 1e-3


class SingularHalfPeriod(ArithmeticError):
    """det Phi(T/2) is too far from 1 for the inverse to be trusted."""


class EigenFailure(ArithmeticError):
    pass


class MultiplierConfiguration(enum.Enum):
    CENTRE_CENTRE = "centre-centre"
    SADDLE_CENTRE = "saddle-centre"
    KREIN_QUARTET = "krein-quartet"
    REAL_SADDLE_PAIR = "real-saddle-pair"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class MultiplierSet:
    values: np.ndarray
    residuals: np.ndarray

    @property
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def product(self) -> complex:
        return complex(np.prod(self.values))

    def reciprocity_defect(self) -> float:
        """Smallest max |lam_i lam_j - 1| over the three pairings of four values."""
        v = self.values
        pairings = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))
        return float(min(max(abs(v[a] * v[b] - 1) for a, b in p) for p in pairings))


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    max_norm: float
    cutoff: float
    period: float | None = None
    multipliers: MultiplierSet | None = None
    half_period_det_drift: float | None = None
    route: str = "half-period"


def half_period_monodromy(half: np.ndarray, involution: np.ndarray = G) -> np.ndarray:
    """Phi(T) = G Phi(T/2)^-1 G Phi(T/2) for t-invariant systems.

    The inverse is applied through an LU solve rather than formed explicitly.
    """
    half = np.asarray(half, dtype=float)
    g = np.asarray(involution, dtype=float)
    try:
        return g @ np.linalg.solve(half, g @ half)
    except np.linalg.LinAlgError as exc:
        raise SingularHalfPeriod("Phi(T/2) is numerically singular") from exc


def det_guard(half: np.ndarray, rel_tol: float) -> float:
    """Largest |det Phi(T/2) - 1| attributable to integration error alone.

    A relative entry error ``rel_tol`` perturbs the determinant by up to
    ``cond(Phi) * rel_tol``; grossly unstable points have huge condition numbers.
    """
    cond = float(np.linalg.cond(half))
    if not np.isfinite(cond):
        return SINGULAR_TOL
    return max(SINGULAR_TOL, cond * max(rel_tol, np.finfo(float).eps))


def monodromy(params: SystemParams, T: float,
              cfg: IntegratorConfig | None = None) -> FundamentalMatrix:
    """Monodromy matrix from integration over the half period only."""
    cfg = cfg or IntegratorConfig()
    half = integrate_fundamental(params, T / 2, cfg)
    if not np.all(np.isfinite(half.entries)):
        raise SingularHalfPeriod("non-finite Phi(T/2)")
    drift = abs(np.linalg.det(half.entries) - 1)
    if not drift <= det_guard(half.entries, cfg.rel_tol):
        raise SingularHalfPeriod(f"|det Phi(T/2) - 1| = {drift:.3e}")
    phi = half_period_monodromy(half.entries)
    return FundamentalMatrix(float(T), phi, drift, half.n_steps, half.n_rejected)


def full_period_monodromy(params: SystemParams, T: float,
                          cfg: IntegratorConfig | None = None) -> FundamentalMatrix:
    """Direct integration over the whole period (no inversion)."""
    return integrate_fundamental(params, T, cfg)


def robust_monodromy(params: SystemParams, T: float, cfg: IntegratorConfig | None = None,
                     full_period_fallback: bool = True) -> tuple[FundamentalMatrix, str]:
    """Half-period monodromy, retried over the full period when Phi(T/2) can't be inverted.

    Only grossly unstable points trigger the retry: there the largest
    multiplier is still well resolved even though det Phi is not.
    """
    try:
        return monodromy(params, T, cfg), "half-period"
    except SingularHalfPeriod:
        if not full_period_fallback:
            raise
    full = full_period_monodromy(params, T, cfg)
    if not np.all(np.isfinite(full.entries)):
        raise SingularHalfPeriod("full-period fallback overflowed")
    return full, "full-period"


def characteristic_polynomial(m: np.ndarray) -> np.ndarray:
    """Coefficients of det(lam I - m), highest power first (Faddeev-LeVerrier)."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.zeros_like(m)
    eye = np.eye(n)
    for k in range(1, n + 1):
        mk = m @ mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(m @ mk) / k
    return coeffs


def _polish(coeffs: np.ndarray, root: complex) -> complex:
    p = np.polyval(coeffs, root)
    dp = np.polyval(np.polyder(coeffs), root)
    if dp == 0:
        return root
    cand = root - p / dp
    return cand if abs(np.polyval(coeffs, cand)) < abs(p) else root


def _conjugate_closed(roots: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Snap near-real roots to the real axis and pair the rest as exact conjugates."""
    scale = max(1.0, float(np.max(np.abs(roots))))
    real = [complex(r.real, 0.0) for r in roots if abs(r.imag) <= tol * scale]
    upper = sorted((r for r in roots if r.imag > tol * scale), key=lambda z: (z.real, z.imag))
    lower = [r for r in roots if r.imag < -tol * scale]
    if len(upper) != len(lower):
        # unbalanced split from rounding: keep raw values
        return roots
    out = real + [z for u in upper for z in (u, u.conjugate())]
    return np.array(out, dtype=complex)


def companion_roots(m: np.ndarray) -> np.ndarray:
    """Roots of the characteristic polynomial, each with one Newton polishing step.

    Accurate only while ``||m||`` stays moderate; the coefficients lose
    precision roughly like ``eps * ||m||^k``.
    """
    coeffs = characteristic_polynomial(m)
    return np.array([_polish(coeffs, r) for r in np.roots(coeffs)])


def multipliers(phi: FundamentalMatrix | np.ndarray, method: str = "qr") -> MultiplierSet:
    """Eigenvalues of a real 4x4 monodromy matrix, certified by residuals.

    ``method="qr"`` runs Hessenberg QR on the matrix itself; ``"charpoly"``
    goes through the characteristic polynomial instead. The residual of each
    value is the smallest singular value of ``Phi - lam I`` relative to
    ``max(1, ||Phi||_2)``.
    """
    m = phi.entries if isinstance(phi, FundamentalMatrix) else np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(m)):
        raise EigenFailure("non-finite monodromy matrix")
    if method == "qr":
        roots = np.linalg.eigvals(m).astype(complex)
    elif method == "charpoly":
        roots = companion_roots(m)
    else:
        raise ValueError(f"unknown eigenvalue method {method!r}")
    roots = _conjugate_closed(roots)
    norm = max(1.0, float(np.linalg.norm(m, 2)))
    eye = np.eye(m.shape[0])
    res = np.array([np.linalg.svd(m - lam * eye, compute_uv=False)[-1] / norm for lam in roots])
    if np.any(res > RESIDUAL_TOL):
        raise EigenFailure(f"eigen residual {res.max():.3e} exceeds {RESIDUAL_TOL:g}")
    order = np.lexsort((roots.imag, roots.real, -np.abs(roots)))
    return MultiplierSet(roots[order], res[order])


def classify(ms: MultiplierSet, tol: float = CLASSIFY_TOL) -> MultiplierConfiguration:
    C = MultiplierConfiguration
    v = np.asarray(ms.values, dtype=complex)
    for a in range(len(v)):
        for b in range(a + 1, len(v)):
            if abs(v[a] - v[b]) <= tol:
                return C.DEGENERATE
    on_circle = np.abs(np.abs(v) - 1) <= tol
    is_real = np.abs(v.imag) <= tol
    n_on = int(on_circle.sum())
    if n_on == 4:
        # unit-modulus reals are +-1 multipliers: a transition, not a centre
        return C.DEGENERATE if is_real.any() else C.CENTRE_CENTRE
    if n_on == 2 and not is_real[on_circle].any() and is_real[~on_circle].all():
        return C.SADDLE_CENTRE
    if n_on == 0 and is_real.all():
        return C.REAL_SADDLE_PAIR
    if n_on == 0 and not is_real.any():
        return C.KREIN_QUARTET
    return C.DEGENERATE


def verdict(params: SystemParams | RationalPoint, cutoff: float = DEFAULT_CUTOFF,
            cfg: IntegratorConfig | None = None, *, epsilon: float | None = None,
            period: float | None = None, full_period_fallback: bool = True) -> StabilityVerdict:
    """Stable iff the largest multiplier modulus does not exceed ``cutoff``.

    ``params`` may be a RationalPoint (with ``epsilon``) so the gcd period is
    exact; arbitrary real parameters need an explicit ``period``.
    """
    if isinstance(params, RationalPoint):
        if epsilon is None:
            raise ValueError("epsilon required with a RationalPoint")
        T = fundamental_period(params) if period is None else period
        params = params.params(epsilon)
    else:
        if period is None:
            raise ValueError("arbitrary real parameters need an explicit period")
        T = period
    phi, route = robust_monodromy(params, T, cfg, full_period_fallback)
    ms = multipliers(phi)
    mx = ms.max_norm
    return StabilityVerdict(mx <= cutoff, mx, cutoff, T, ms, phi.det_drift, route)


def rational_verdict(p: RationalPoint, epsilon: float, variant=None,
                     cutoff: float = DEFAULT_CUTOFF, cfg: IntegratorConfig | None = None,
                     full_period_fallback: bool = True) -> StabilityVerdict:
    params = p.params(epsilon) if variant is None else p.params(epsilon, variant)
    return verdict(params, cutoff, cfg, period=fundamental_period(p),
                   full_period_fallback=full_period_fallback)
