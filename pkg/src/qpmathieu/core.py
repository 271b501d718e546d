"""Parameter space and coefficient matrices of the coupled Mathieu-type systems.

Both supported systems share the second-order form

    X'' + [P0 + eps * P1(t)] X = 0,    X = (x, y)

with P1(t) = [[cos(beta t), cos(alpha t)], [cos(beta t), cos(alpha t)]].
``Variant.SQUARED`` uses P0 = diag(alpha^2, beta^2); ``Variant.PLAIN`` uses
P0 = diag(alpha, beta).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "Variant",
    "SystemParams",
    "RationalPoint",
    "StateVector",
    "G",
    "rhs_matrix",
    "trig_coefficients",
    "fundamental_period",
    "scale_equivalent",
]


class Variant(enum.Enum):
    SQUARED = "squared"
    PLAIN = "plain"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"squared": cls.SQUARED, "squareddiagonal": cls.SQUARED,
                   "plain": cls.PLAIN, "plaindiagonal": cls.PLAIN}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown system variant {value!r}") from None


@dataclass(frozen=True)
class SystemParams:
    alpha: float
    beta: float
    epsilon: float
    variant: Variant = Variant.SQUARED

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "variant", Variant.parse(self.variant))

    @property
    def diagonal(self) -> tuple[float, float]:
        if self.variant is Variant.SQUARED:
            return self.alpha**2, self.beta**2
        return self.alpha, self.beta


@dataclass(frozen=True)
class RationalPoint:
    """Grid point alpha = i/n, beta = j/n."""

    i: int
    j: int
    n: int

    def __post_init__(self):
        if min(self.i, self.j, self.n) < 1:
            raise ValueError("i, j, n must be positive integers")

    @classmethod
    def from_fractions(cls, alpha: Fraction, beta: Fraction) -> "RationalPoint":
        alpha, beta = Fraction(alpha), Fraction(beta)
        n = math.lcm(alpha.denominator, beta.denominator)
        return cls(alpha.numerator * (n // alpha.denominator),
                   beta.numerator * (n // beta.denominator), n)

    @property
    def alpha(self) -> float:
        return self.i / self.n

    @property
    def beta(self) -> float:
        return self.j / self.n

    def params(self, epsilon: float, variant: Variant = Variant.SQUARED) -> SystemParams:
        return SystemParams(self.alpha, self.beta, epsilon, variant)


@dataclass(frozen=True)
class StateVector:
    x: float
    y: float
    xdot: float = 0.0
    ydot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.xdot, self.ydot], dtype=float)


# block diag(I, -I) in (x, y, xdot, ydot) ordering; G == G^-1
G = np.diag([1.0, 1.0, -1.0, -1.0])


def trig_coefficients(params: SystemParams):
    """Decompose A(t) as ``C0 + sum_k Cc[k] cos(freqs[k] t) + Cs[k] sin(freqs[k] t)``.

    This is the form consumed by the integration kernel.
    """
    da, db = params.diagonal
    eps = params.epsilon
    c0 = np.zeros((4, 4))
    c0[0, 2] = c0[1, 3] = 1.0
    c0[2, 0] = -da
    c0[3, 1] = -db
    freqs = np.array([params.beta, params.alpha])
    cc = np.zeros((2, 4, 4))
    # cos(beta t) multiplies x in both rows, cos(alpha t) multiplies y
    cc[0, 2, 0] = cc[0, 3, 0] = -eps
    cc[1, 2, 1] = cc[1, 3, 1] = -eps
    cs = np.zeros((2, 4, 4))
    return c0, freqs, cc, cs


def rhs_matrix(params: SystemParams, t: float) -> np.ndarray:
    """First-order system matrix A(t) acting on (x, y, xdot, ydot)."""
    da, db = params.diagonal
    eps = params.epsilon
    cb = eps * math.cos(params.beta * t)
    ca = eps * math.cos(params.alpha * t)
    return np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-(da + cb), -ca, 0.0, 0.0],
        [-cb, -(db + ca), 0.0, 0.0],
    ])


def fundamental_period(p: RationalPoint) -> float:
    """T = 2 pi n / gcd(i, j)."""
    return 2.0 * math.pi * p.n / math.gcd(p.i, p.j)


def scale_equivalent(params: SystemParams, m: float) -> SystemParams:
    """Map (alpha, beta, eps) to (m alpha, m beta, m^2 eps).

    Substituting t' = m t shows both parameter sets share stability. Only
    exact for the squared variant; the plain variant scales differently.
    """
    if not m > 0:
        raise ValueError("scale factor must be positive")
    return SystemParams(m * params.alpha, m * params.beta, m * m * params.epsilon,
                        params.variant)
