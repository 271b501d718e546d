"""Harmonic balance: truncated Hill matrices, transition curves and resonance curves.

Transition solutions are expanded as

    (x, y) = sum_{n,m} (A_nm, B_nm) exp(i t (n alpha + m beta) / (2M))

so that cos(beta t) shifts the m index by 2M and cos(alpha t) shifts n by 2M.
With truncation |n|, |m| <= N the coefficient matrix has dimension 2(2N+1)^2.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import sympy
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .core import SystemParams, Variant

__all__ = [
    "TruncationTooDeep",
    "HillMatrix",
    "DeterminantValue",
    "ScanLine",
    "TransitionPoint",
    "ResonanceCurve",
    "ResonanceCurveSet",
    "build_hill",
    "determinant",
    "dense_determinant",
    "coupling_blocks",
    "trace_transition_curves",
    "resonance_curves",
    "resonance_lines_for_seq",
    "transition_csv",
    "curves_csv",
]


class TruncationTooDeep(ValueError):
    """N > 2M - 1 lets a vanishing diagonal term (gamma_20 = 0 style) into the matrix."""


@dataclass(frozen=True)
class HillMatrix:
    N: int
    M: int
    params: SystemParams
    matrix: sp.csr_matrix
    # row -> (component, n, m) with component "A" (x) or "B" (y)
    labels: tuple[tuple[str, int, int], ...]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, component: str, n: int, m: int) -> int:
        side = 2 * self.N + 1
        base = 0 if component == "A" else side * side
        return base + (n + self.N) * side + (m + self.N)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()


@dataclass(frozen=True)
class DeterminantValue:
    sign: int
    log_magnitude: float

    @classmethod
    def zero(cls) -> "DeterminantValue":
        return cls(0, -math.inf)

    def __mul__(self, other: "DeterminantValue") -> "DeterminantValue":
        if self.sign == 0 or other.sign == 0:
            return DeterminantValue.zero()
        return DeterminantValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    @property
    def value(self) -> float:
        """Plain float; overflows to +-inf for large log magnitudes."""
        if self.sign == 0:
            return 0.0
        with np.errstate(over="ignore"):
            return float(self.sign * np.exp(self.log_magnitude))


def _labels(N: int) -> list[tuple[str, int, int]]:
    rng = range(-N, N + 1)
    return [(c, n, m) for c in "AB" for n in rng for m in rng]


def build_hill(params: SystemParams, N: int, M: int) -> HillMatrix:
    """Coefficient matrix of the truncated recurrence relations.

    Row (A, n, m):  (lam_x - w^2) A_nm + eps/2 (A_{n,m-2M} + A_{n,m+2M} + B_{n-2M,m} + B_{n+2M,m})
    Row (B, n, m):  (lam_y - w^2) B_nm + the same eps/2 coupling
    with w = (n alpha + m beta) / (2M) and lam_x, lam_y the diagonal of P0.
    """
    if N < 1 or M < 1:
        raise ValueError("N and M must be positive")
    if N > 2 * M - 1:
        raise TruncationTooDeep(f"N={N} exceeds 2M-1={2 * M - 1}")
    labels = _labels(N)
    side = 2 * N + 1
    half = side * side

    def idx(c, n, m):
        return (0 if c == "A" else half) + (n + N) * side + (m + N)

    lam_x, lam_y = params.diagonal
    a, b, eps = params.alpha, params.beta, params.epsilon
    shift = 2 * M
    rows, cols, vals = [], [], []
    for r, (c, n, m) in enumerate(labels):
        w = (n * a + m * b) / (2 * M)
        rows.append(r)
        cols.append(r)
        vals.append((lam_x if c == "A" else lam_y) - w * w)
        if eps == 0:
            continue
        for cc, nn, mm in (("A", n, m - shift), ("A", n, m + shift),
                           ("B", n - shift, m), ("B", n + shift, m)):
            if abs(nn) <= N and abs(mm) <= N:
                rows.append(r)
                cols.append(idx(cc, nn, mm))
                vals.append(eps / 2)
    dim = len(labels)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    return HillMatrix(N, M, params, mat, tuple(labels))


def coupling_blocks(h: HillMatrix) -> list[np.ndarray]:
    """Index sets of the connected components of the coupling graph."""
    pattern = h.matrix.copy()
    pattern.data = np.ones_like(pattern.data)
    k, labels = connected_components(pattern, directed=False)
    return [np.flatnonzero(labels == c) for c in range(k)]


def _perm_sign(perm: np.ndarray) -> int:
    seen = np.zeros(len(perm), dtype=bool)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _sparse_block_det(block: sp.csc_matrix) -> DeterminantValue:
    if block.shape[0] == 1:
        v = float(block[0, 0])
        return DeterminantValue.zero() if v == 0 else DeterminantValue(int(np.sign(v)), math.log(abs(v)))
    try:
        lu = splu(block, permc_spec="NATURAL", diag_pivot_thresh=1.0,
                  options={"SymmetricMode": False})
    except RuntimeError:
        # SuperLU reports an exactly singular factor
        return DeterminantValue.zero()
    diag = lu.U.diagonal()
    if np.any(diag == 0):
        return DeterminantValue.zero()
    sign = _perm_sign(lu.perm_r) * _perm_sign(lu.perm_c) * int(np.prod(np.sign(diag)))
    return DeterminantValue(sign, float(np.sum(np.log(np.abs(diag)))))


def determinant(h: HillMatrix) -> DeterminantValue:
    """Sign and log-magnitude of det(C), factorized over coupling blocks."""
    if h.params.epsilon == 0:
        d = h.diagonal()
        if np.any(d == 0):
            return DeterminantValue.zero()
        return DeterminantValue(int(np.prod(np.sign(d))), float(np.sum(np.log(np.abs(d)))))
    csc = h.matrix.tocsc()
    out = DeterminantValue(1, 0.0)
    for members in coupling_blocks(h):
        out = out * _sparse_block_det(csc[members][:, members].tocsc())
        if out.sign == 0:
            break
    return out


def dense_determinant(h: HillMatrix) -> DeterminantValue:
    """Reference value from a dense LAPACK LU of the whole matrix."""
    sign, logdet = np.linalg.slogdet(h.matrix.toarray())
    if sign == 0:
        return DeterminantValue.zero()
    return DeterminantValue(int(sign), float(logdet))


@dataclass(frozen=True)
class ScanLine:
    """One-parameter family of (alpha, beta): one coordinate fixed, the other swept."""

    fixed: str  # "alpha" or "beta"
    value: float
    lo: float
    hi: float
    samples: int = 200

    def __post_init__(self):
        if self.fixed not in ("alpha", "beta"):
            raise ValueError("fixed must be 'alpha' or 'beta'")
        if not self.hi > self.lo:
            raise ValueError("empty scan range")
        if self.samples < 2:
            raise ValueError("need at least two samples")

    def point(self, s: float) -> tuple[float, float]:
        return (self.value, s) if self.fixed == "alpha" else (s, self.value)

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.samples)


@dataclass(frozen=True)
class TransitionPoint:
    s: float
    alpha: float
    beta: float


def _det_sign(variant: Variant, epsilon: float, N: int, M: int, line: ScanLine,
              s: float) -> int:
    a, b = line.point(s)
    return determinant(build_hill(SystemParams(a, b, epsilon, variant), N, M)).sign


def _bisect_sign_change(f: Callable[[float], int], lo: float, hi: float, f_lo: int,
                        tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0:
            return float(mid)
        if f_mid == f_lo:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def _diagonal_roots(variant: Variant, N: int, M: int, scan: ScanLine,
                    root_tol: float) -> list[float]:
    # at eps = 0 each gamma_nm = gamma_-n-m appears twice, so det never changes
    # sign; the zeros of the individual diagonal factors are the transition points
    grid = scan.grid()
    diag = lambda s: build_hill(SystemParams(*scan.point(s), 0.0, variant), N, M).diagonal()  # noqa: E731
    values = np.array([diag(s) for s in grid])
    roots: list[float] = []
    for col in range(values.shape[1]):
        sg = np.sign(values[:, col])
        for k in range(len(grid) - 1):
            if sg[k] == 0:
                roots.append(float(grid[k]))
            elif sg[k + 1] != 0 and sg[k] != sg[k + 1]:
                f = lambda s, c=col: int(np.sign(diag(s)[c]))  # noqa: E731
                roots.append(_bisect_sign_change(f, grid[k], grid[k + 1], int(sg[k]), root_tol))
        if sg[-1] == 0:
            roots.append(float(grid[-1]))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > root_tol:
            merged.append(r)
    return merged


def trace_transition_curves(variant: Variant | str, epsilon: float, N: int, M: int,
                            scan: ScanLine, root_tol: float = 1e-6) -> list[TransitionPoint]:
    """Sign changes of the Hill determinant along ``scan``, bisected to ``root_tol``.

    Points where the determinant only touches zero (even-order zeros) are not
    reported. With ``epsilon == 0`` the zeros of the diagonal factors are
    returned directly.
    """
    variant = Variant.parse(variant)
    build_hill(SystemParams(*scan.point(scan.lo), epsilon, variant), N, M)  # validates N, M
    if epsilon == 0:
        return [TransitionPoint(r, *scan.point(r))
                for r in _diagonal_roots(variant, N, M, scan, root_tol)]
    f = lambda s: _det_sign(variant, epsilon, N, M, scan, s)  # noqa: E731
    grid = scan.grid()
    signs = [f(s) for s in grid]
    roots = []
    for k in range(len(grid) - 1):
        g0, g1 = signs[k], signs[k + 1]
        if g0 == 0:
            if 0 < k and signs[k - 1] * g1 < 0:
                roots.append(float(grid[k]))
        elif g1 != 0 and g0 != g1:
            roots.append(_bisect_sign_change(f, grid[k], grid[k + 1], g0, root_tol))
    return [TransitionPoint(float(r), *scan.point(r)) for r in roots]


def transition_csv(points: Sequence[TransitionPoint], curve_id: str = "det") -> str:
    lines = ["curve_id,alpha,beta"]
    lines += [f"{curve_id},{p.alpha:.9g},{p.beta:.9g}" for p in points]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- resonance curves

def _canonical(vec: tuple[int, ...]) -> tuple[int, ...]:
    for v in vec:
        if v != 0:
            return vec if v > 0 else tuple(-x for x in vec)
    return vec


_FUNCTIONS = {"sqrt", "sin", "cos", "exp", "log", "pi"}


def _parse(expr: str) -> sympy.Expr:
    # every bare identifier is a plain symbol; sympy would otherwise read "beta" as a function
    names = set(re.findall(r"[A-Za-z_]\w*", expr)) - _FUNCTIONS
    return sympy.sympify(expr, locals={k: sympy.Symbol(k) for k in names})


def _format_combination(n: Sequence[int], omega: Sequence[str]) -> str:
    terms = [(k, "" if w.strip() == "1" else f"*{w}") for k, w in zip(n, omega) if k != 0]
    if not terms:
        return "0"
    if len(terms) == 1 and terms[0][1] == "" and terms[0][0] > 0:
        return str(terms[0][0])
    out = f"{terms[0][0]}{terms[0][1]}"
    for k, w in terms[1:]:
        out += f" {'+' if k > 0 else '-'} {abs(k)}{w}"
    return f"({out})"


@dataclass(frozen=True)
class ResonanceCurve:
    """lambda_j^2 - (n . omega)^2 / 4 = 0 for eigen index j and integer vector n."""

    j: int
    n: tuple[int, ...]


@dataclass(frozen=True)
class ResonanceCurveSet:
    """Resonance curves of X'' + (diag(lam_sq) + eps P1(t)) X = 0.

    ``lam_sq`` and ``omega`` are expression strings in the free parameters
    (``"alpha**2"``, ``"1"``, ``"omega"``), parsed with sympy.
    """

    lam_sq: tuple[str, ...]
    omega: tuple[str, ...]
    K: int
    curves: tuple[ResonanceCurve, ...]

    @property
    def symbols(self) -> list[sympy.Symbol]:
        free = set()
        for e in self.lam_sq + self.omega:
            free |= _parse(e).free_symbols
        return sorted(free, key=lambda s: s.name)

    def expression(self, curve: ResonanceCurve) -> sympy.Expr:
        lam = _parse(self.lam_sq[curve.j])
        s = sum(k * _parse(w) for k, w in zip(curve.n, self.omega))
        return sympy.expand(lam - s**2 / 4)

    def identity(self, curve: ResonanceCurve) -> str:
        lam = self.lam_sq[curve.j].replace("**", "^")
        return f"{lam} = {_format_combination(curve.n, self.omega)}^2/4"

    def identities(self) -> list[str]:
        return [self.identity(c) for c in self.curves]

    def residual(self, curve: ResonanceCurve, **values) -> np.ndarray:
        """lambda_j^2 - (n . omega)^2/4 evaluated numerically (broadcasts over arrays)."""
        syms = self.symbols
        missing = [s.name for s in syms if s.name not in values]
        if missing:
            raise ValueError(f"missing values for {missing}")
        f = sympy.lambdify(syms, self.expression(curve), "numpy")
        return np.asarray(f(*(values[s.name] for s in syms)), dtype=float)

    def line_slopes(self, x: str = "alpha", y: str = "beta") -> list[Fraction]:
        """Positive rational slopes x/y of curves that are straight lines through the origin.

        Curves that vanish identically (a zero diagonal term) carry no line.
        """
        xs, ys, r = sympy.symbols(f"{x} {y} r_", positive=True)
        slopes: set[Fraction] = set()
        for curve in self.curves:
            expr = self.expression(curve).subs({sympy.Symbol(x): r * ys, sympy.Symbol(y): ys})
            expr = sympy.factor(expr)
            if expr == 0:
                continue
            for root in sympy.solve(sympy.cancel(expr / ys**2), r):
                if root.is_Rational and root > 0:
                    slopes.add(Fraction(int(root.p), int(root.q)))
        return sorted(slopes)

    def to_text(self) -> str:
        return "\n".join(self.identities()) + "\n"


def resonance_curves(lam_sq: Sequence[str], omega: Sequence[str], K: int) -> ResonanceCurveSet:
    """Enumerate resonance curves for every integer vector with max-norm <= K.

    n and -n describe the same curve and are kept once (first nonzero entry positive).
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if len(lam_sq) == 0 or len(omega) == 0:
        raise ValueError("need at least one eigenvalue and one frequency")
    vecs = sorted({_canonical(v) for v in itertools.product(range(-K, K + 1), repeat=len(omega))})
    curves = tuple(ResonanceCurve(j, v) for j in range(len(lam_sq)) for v in vecs)
    return ResonanceCurveSet(tuple(lam_sq), tuple(omega), K, curves)


def resonance_lines_for_seq(K: int) -> list[Fraction]:
    """Positive slopes alpha/beta of the resonance lines of the squared system.

    alpha = +-m beta/(2 +- n) and beta = +-n alpha/(2 +- m) for |n|, |m| <= K;
    a vanishing denominator (n or m = +-2 with the matching sign) only gives an
    axis and is dropped.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    slopes: set[Fraction] = set()
    for n in range(-K, K + 1):
        for m in range(-K, K + 1):
            for s1 in (1, -1):
                for s2 in (1, -1):
                    den = 2 + s2 * n
                    if den != 0 and m != 0:
                        slopes.add(Fraction(s1 * m, den))
                    den = 2 + s2 * m
                    if den != 0 and n != 0:
                        # beta = s1 n alpha / den  ->  alpha/beta = den / (s1 n)
                        slopes.add(Fraction(den, s1 * n))
    return sorted(q for q in slopes if q > 0)


def curves_csv(curve_set: ResonanceCurveSet, alpha_grid: np.ndarray, beta_grid: np.ndarray,
               **fixed) -> str:
    """Zero-set samples of every curve on an (alpha, beta) grid as "curve_id,alpha,beta".

    A grid edge is reported where the residual changes sign; the point is
    placed by linear interpolation along that edge.
    """
    lines = ["curve_id,alpha,beta"]
    for cid, (curve, pts) in enumerate(zip(curve_set.curves,
                                           curve_zero_sets(curve_set, alpha_grid, beta_grid,
                                                           **fixed))):
        lines += [f"{cid},{a:.9g},{b:.9g}" for a, b in pts]
    return "\n".join(lines) + "\n"


def curve_zero_sets(curve_set: ResonanceCurveSet, alpha_grid: np.ndarray,
                    beta_grid: np.ndarray, **fixed) -> list[np.ndarray]:
    """Points (alpha, beta) sampling each curve's zero set on the given grid."""
    A, B = np.meshgrid(np.asarray(alpha_grid, float), np.asarray(beta_grid, float))
    out = []
    for curve in curve_set.curves:
        F = np.broadcast_to(curve_set.residual(curve, alpha=A, beta=B, **fixed), A.shape)
        pts = []
        for axis in (0, 1):
            f0 = F[:-1, :] if axis == 0 else F[:, :-1]
            f1 = F[1:, :] if axis == 0 else F[:, 1:]
            a0 = A[:-1, :] if axis == 0 else A[:, :-1]
            a1 = A[1:, :] if axis == 0 else A[:, 1:]
            b0 = B[:-1, :] if axis == 0 else B[:, :-1]
            b1 = B[1:, :] if axis == 0 else B[:, 1:]
            hit = (np.sign(f0) != np.sign(f1)) | (f0 == 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                w = np.where(f0 == f1, 0.0, f0 / (f0 - f1))
            w = np.clip(w, 0.0, 1.0)
            pa = a0 + w * (a1 - a0)
            pb = b0 + w * (b1 - b0)
            pts.append(np.column_stack([pa[hit], pb[hit]]))
        out.append(np.vstack(pts) if pts else np.empty((0, 2)))
    return out
