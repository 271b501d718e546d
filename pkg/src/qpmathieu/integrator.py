"""Adaptive Dormand-Prince 5(4) integration of linear trigonometric-coefficient systems.

The kernel integrates ``dY/dt = A(t) Y`` for a d x k matrix ``Y`` where

    A(t) = C0 + sum_k ( Cc[k] cos(w_k t) + Cs[k] sin(w_k t) ).

Every column shares a single step-size controller, so the fundamental
matrix is advanced as one flat d*k dimensional state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import StateVector, SystemParams, trig_coefficients

__all__ = [
    "IntegratorConfig",
    "FundamentalMatrix",
    "IntegrationError",
    "StepSizeUnderflow",
    "StateOverflow",
    "integrate_fundamental",
    "integrate_state",
    "integrate_linear",
]


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    """The step-size controller fell below the representable resolution of t."""


class StateOverflow(IntegrationError):
    """The solution grew past the double-precision range (violent instability)."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 1.0
    monitor_determinant: bool = False
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise ValueError("tolerances must lie in (0, 1)")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True)
class FundamentalMatrix:
    time: float
    entries: np.ndarray
    det_drift: float | None = None
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))


# status codes returned by the kernel
_OK, _UNDERFLOW, _TOO_MANY, _OVERFLOW = 0, 1, 2, 3

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)


@numba.njit(cache=True)
def _eval_a(c0, freqs, cc, cs, t, out):
    d = c0.shape[0]
    for r in range(d):
        for c in range(d):
            out[r, c] = c0[r, c]
    for k in range(freqs.shape[0]):
        co = math.cos(freqs[k] * t)
        si = math.sin(freqs[k] * t)
        for r in range(d):
            for c in range(d):
                out[r, c] += co * cc[k, r, c] + si * cs[k, r, c]


@numba.njit(cache=True)
def _deriv(c0, freqs, cc, cs, t, y, amat, out):
    _eval_a(c0, freqs, cc, cs, t, amat)
    d, k = y.shape
    for r in range(d):
        for c in range(k):
            s = 0.0
            for q in range(d):
                s += amat[r, q] * y[q, c]
            out[r, c] = s


@numba.njit(cache=True)
def _err_norm(y, ynew, err, rtol, atol):
    d, k = y.shape
    acc = 0.0
    for r in range(d):
        for c in range(k):
            sc = atol + rtol * max(abs(y[r, c]), abs(ynew[r, c]))
            v = err[r, c] / sc
            acc += v * v
    return math.sqrt(acc / (d * k))


@numba.njit(cache=True)
def _dopri_kernel(c0, freqs, cc, cs, y0, t_out, rtol, atol, hmax, monitor, max_steps):
    """Integrate from t=0 through every time in ``t_out`` (ascending, > 0).

    Returns (states, status, n_accepted, n_rejected, det_drift).
    """
    d, k = y0.shape
    n_out = t_out.shape[0]
    states = np.empty((n_out, d, k))
    amat = np.empty((d, d))
    y = y0.copy()
    ynew = np.empty((d, k))
    ytmp = np.empty((d, k))
    errv = np.empty((d, k))
    k1 = np.empty((d, k))
    k2 = np.empty((d, k))
    k3 = np.empty((d, k))
    k4 = np.empty((d, k))
    k5 = np.empty((d, k))
    k6 = np.empty((d, k))
    k7 = np.empty((d, k))

    t = 0.0
    t_final = t_out[n_out - 1]
    _deriv(c0, freqs, cc, cs, t, y, amat, k1)

    # initial step: Hairer, Norsett & Wanner, section II.4
    d0 = 0.0
    d1 = 0.0
    for r in range(d):
        for c in range(k):
            sc = atol + rtol * abs(y[r, c])
            d0 += (y[r, c] / sc) ** 2
            d1 += (k1[r, c] / sc) ** 2
    d0 = math.sqrt(d0 / (d * k))
    d1 = math.sqrt(d1 / (d * k))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, hmax, t_final)
    for r in range(d):
        for c in range(k):
            ytmp[r, c] = y[r, c] + h0 * k1[r, c]
    _deriv(c0, freqs, cc, cs, h0, ytmp, amat, k2)
    d2 = 0.0
    for r in range(d):
        for c in range(k):
            sc = atol + rtol * abs(y[r, c])
            d2 += ((k2[r, c] - k1[r, c]) / sc) ** 2
    d2 = math.sqrt(d2 / (d * k)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1, hmax)

    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    safe = 0.9
    facc1 = 5.0   # 1 / (min shrink factor 0.2)
    facc2 = 0.1   # 1 / (max growth factor 10)
    facold = 1e-4
    reject = False

    n_acc = 0
    n_rej = 0
    drift = 0.0
    status = 0
    out_idx = 0

    while out_idx < n_out:
        target = t_out[out_idx]
        if n_acc + n_rej >= max_steps:
            status = 2
            break
        if h < 16.0 * 2.220446049250313e-16 * max(abs(t), 1.0):
            status = 1
            break
        hit = False
        if t + h >= target or t + 1.01 * h >= target:
            h = target - t
            hit = True

        for r in range(d):
            for c in range(k):
                ytmp[r, c] = y[r, c] + h * _A21 * k1[r, c]
        _deriv(c0, freqs, cc, cs, t + _C2 * h, ytmp, amat, k2)
        for r in range(d):
            for c in range(k):
                ytmp[r, c] = y[r, c] + h * (_A31 * k1[r, c] + _A32 * k2[r, c])
        _deriv(c0, freqs, cc, cs, t + _C3 * h, ytmp, amat, k3)
        for r in range(d):
            for c in range(k):
                ytmp[r, c] = y[r, c] + h * (_A41 * k1[r, c] + _A42 * k2[r, c] + _A43 * k3[r, c])
        _deriv(c0, freqs, cc, cs, t + _C4 * h, ytmp, amat, k4)
        for r in range(d):
            for c in range(k):
                ytmp[r, c] = y[r, c] + h * (_A51 * k1[r, c] + _A52 * k2[r, c]
                                            + _A53 * k3[r, c] + _A54 * k4[r, c])
        _deriv(c0, freqs, cc, cs, t + _C5 * h, ytmp, amat, k5)
        for r in range(d):
            for c in range(k):
                ytmp[r, c] = y[r, c] + h * (_A61 * k1[r, c] + _A62 * k2[r, c] + _A63 * k3[r, c]
                                            + _A64 * k4[r, c] + _A65 * k5[r, c])
        _deriv(c0, freqs, cc, cs, t + h, ytmp, amat, k6)
        for r in range(d):
            for c in range(k):
                ynew[r, c] = y[r, c] + h * (_A71 * k1[r, c] + _A73 * k3[r, c] + _A74 * k4[r, c]
                                            + _A75 * k5[r, c] + _A76 * k6[r, c])
        _deriv(c0, freqs, cc, cs, t + h, ynew, amat, k7)
        for r in range(d):
            for c in range(k):
                errv[r, c] = h * (_E1 * k1[r, c] + _E3 * k3[r, c] + _E4 * k4[r, c]
                                  + _E5 * k5[r, c] + _E6 * k6[r, c] + _E7 * k7[r, c])
        err = _err_norm(y, ynew, errv, rtol, atol)
        if not math.isfinite(err):
            ymax = 0.0
            for r in range(d):
                for c in range(k):
                    ymax = max(ymax, abs(y[r, c]))
            if ymax > 1e100:
                status = 3
                break
            # a trial stage blew up from a modest state: just shrink the step
            h = h / facc1
            reject = True
            n_rej += 1
            continue

        fac11 = err ** expo1
        fac = fac11 / facold ** beta
        fac = max(facc2, min(facc1, fac / safe))
        hnew = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            n_acc += 1
            t = target if hit else t + h
            for r in range(d):
                for c in range(k):
                    y[r, c] = ynew[r, c]
                    k1[r, c] = k7[r, c]
            if monitor and d == k:
                dv = abs(np.linalg.det(y) - 1.0)
                if dv > drift:
                    drift = dv
            if hit:
                for r in range(d):
                    for c in range(k):
                        states[out_idx, r, c] = y[r, c]
                out_idx += 1
            if abs(hnew) > hmax:
                hnew = hmax
            if reject:
                hnew = min(hnew, h)
            reject = False
            h = hnew
        else:
            hnew = h / min(facc1, fac11 / safe)
            reject = True
            n_rej += 1
            h = hnew

    return states, status, n_acc, n_rej, drift


def integrate_linear(c0, freqs, cc, cs, y0, t_out, cfg: IntegratorConfig):
    """Run the kernel and translate failure codes into exceptions."""
    t_out = np.ascontiguousarray(np.atleast_1d(np.asarray(t_out, dtype=float)))
    if t_out.size == 0 or np.any(t_out <= 0) or np.any(np.diff(t_out) <= 0):
        raise ValueError("output times must be positive and strictly increasing")
    y0 = np.ascontiguousarray(np.asarray(y0, dtype=float))
    if y0.ndim == 1:
        y0 = y0[:, None]
    states, status, n_acc, n_rej, drift = _dopri_kernel(
        np.ascontiguousarray(c0, dtype=float), np.ascontiguousarray(freqs, dtype=float),
        np.ascontiguousarray(cc, dtype=float), np.ascontiguousarray(cs, dtype=float),
        y0, t_out, cfg.rel_tol, cfg.abs_tol, cfg.max_step,
        cfg.monitor_determinant, cfg.max_steps)
    if status == _UNDERFLOW:
        raise StepSizeUnderflow(
            f"step size underflow before t={t_out[-1]:g} after {n_acc} accepted steps")
    if status == _OVERFLOW:
        raise StateOverflow(f"solution left the floating-point range before t={t_out[-1]:g}")
    if status == _TOO_MANY:
        raise IntegrationError(f"exceeded max_steps={cfg.max_steps}")
    return states, n_acc, n_rej, (drift if cfg.monitor_determinant else None)


def integrate_fundamental(params: SystemParams, t_end: float,
                          cfg: IntegratorConfig | None = None) -> FundamentalMatrix:
    """Solve dPhi/dt = A(t) Phi, Phi(0) = I, up to ``t_end``."""
    cfg = cfg or IntegratorConfig()
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    states, n_acc, n_rej, drift = integrate_linear(
        *trig_coefficients(params), np.eye(4), [t_end], cfg)
    return FundamentalMatrix(float(t_end), states[-1], drift, n_acc, n_rej)


def integrate_state(params: SystemParams, initial: StateVector | np.ndarray, t_end: float,
                    cfg: IntegratorConfig | None = None, samples: int = 2):
    """Trajectory sampled at ``samples`` uniform times on [0, t_end].

    Returns ``(times, states)`` with ``states`` of shape (samples, 4) in
    (x, y, xdot, ydot) order; row 0 is the initial condition.
    """
    cfg = cfg or IntegratorConfig()
    if samples < 2:
        raise ValueError("need at least two samples")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    y0 = initial.as_array() if isinstance(initial, StateVector) else np.asarray(initial, float)
    times = np.linspace(0.0, t_end, samples)
    states, *_ = integrate_linear(*trig_coefficients(params), y0, times[1:], cfg)
    out = np.empty((samples, 4))
    out[0] = y0
    out[1:] = states[:, :, 0]
    return times, out
