import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from qpmathieu.core import StateVector, SystemParams, rhs_matrix
from qpmathieu.integrator import (IntegrationError, IntegratorConfig, StateOverflow,
                                  integrate_fundamental, integrate_linear, integrate_state)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=1.5)
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=0)


def test_unit_oscillators_full_period():
    phi = integrate_fundamental(SystemParams(1.0, 1.0, 0.0), 2 * math.pi)
    assert np.allclose(phi.entries, np.eye(4), atol=1e-8)


def test_unit_oscillators_quarter_period():
    phi = integrate_fundamental(SystemParams(1.0, 1.0, 0.0), math.pi / 2).entries
    expected = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], float)
    assert np.allclose(phi, expected, atol=1e-8)


def test_cosine_solution():
    times, states = integrate_state(SystemParams(1.0, 0.7, 0.0), StateVector(1, 0), 20.0,
                                    samples=41)
    assert np.allclose(states[:, 0], np.cos(times), atol=1e-8)
    assert np.allclose(states[:, 1], 0.0, atol=1e-12)


def test_liouville_at_island_point():
    p = SystemParams(435 / 800, 425 / 800, 0.1)
    phi = integrate_fundamental(p, 320 * math.pi, IntegratorConfig(monitor_determinant=True))
    assert abs(phi.det - 1) < 1e-6
    assert phi.det_drift is not None and phi.det_drift < 1e-6


def test_island_trajectories():
    start = StateVector(1, 1)
    _, inside = integrate_state(SystemParams(435 / 800, 425 / 800, 0.1), start,
                                3200 * math.pi, samples=4001)
    _, outside = integrate_state(SystemParams(436 / 800, 425 / 800, 0.1), start,
                                 1600 * math.pi, samples=2001)
    amp = np.abs(inside[:, :2]).max(axis=1)
    # the nearly double multiplier at 1 gives a large but saturating excursion (~80)
    assert amp.max() < 100
    assert amp[2000:].max() <= 1.05 * amp[:2001].max()
    assert np.abs(outside[:, :2]).max() > 1e6


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0.0, 0.4), st.floats(1.0, 60.0))
def test_state_equals_fundamental_times_initial(alpha, beta, eps, t_end):
    p = SystemParams(alpha, beta, eps)
    y0 = np.array([0.3, -1.0, 0.5, 0.2])
    _, states = integrate_state(p, y0, t_end, samples=2)
    phi = integrate_fundamental(p, t_end).entries
    scale = max(1.0, np.abs(phi).max())
    assert np.allclose(states[-1], phi @ y0, atol=1e-9 * scale, rtol=0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 0.4))
def test_liouville_long_horizon(alpha, beta, eps):
    try:
        phi = integrate_fundamental(SystemParams(alpha, beta, eps), 1600 * math.pi)
    except StateOverflow:
        # growth past 1e300: nothing left to measure
        return
    # det drift grows with the conditioning of Phi; cap the sample at moderate growth
    if np.linalg.cond(phi.entries) < 1e6:
        assert abs(phi.det - 1) < 1e-6


def test_matches_independent_solver():
    # scipy's 8th-order pair as an independent reference
    p = SystemParams(0.37, 0.81, 0.3)
    t_end = 40.0
    ref = solve_ivp(lambda t, y: (rhs_matrix(p, t) @ y.reshape(4, 4)).ravel(), (0, t_end),
                    np.eye(4).ravel(), method="DOP853", rtol=1e-12, atol=1e-12)
    ours = integrate_fundamental(p, t_end).entries
    assert np.allclose(ours, ref.y[:, -1].reshape(4, 4), atol=1e-8)


def test_error_decreases_with_tolerance():
    p = SystemParams(0.9, 0.4, 0.0)
    t = 30.0
    exact = np.array([math.cos(0.9 * t), math.sin(0.9 * t) / 0.9])
    errs = []
    for tol in (1e-6, 1e-8, 1e-10, 1e-12):
        phi = integrate_fundamental(p, t, IntegratorConfig(rel_tol=tol, abs_tol=tol)).entries
        errs.append(abs(phi[0, 0] - exact[0]) + abs(phi[0, 2] - exact[1]))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_output_times_hit_exactly():
    p = SystemParams(1.0, 1.0, 0.0)
    times, states = integrate_state(p, StateVector(1, 0), 2 * math.pi, samples=5)
    assert times[-1] == 2 * math.pi
    assert np.allclose(states[:, 0], np.cos(times), atol=1e-9)


def test_step_budget_exhaustion_raises():
    p = SystemParams(0.5, 0.5, 0.1)
    with pytest.raises(IntegrationError):
        integrate_fundamental(p, 1000.0, IntegratorConfig(max_steps=10))


def test_bad_times_rejected():
    c = np.zeros((4, 4))
    with pytest.raises(ValueError):
        integrate_linear(c, np.zeros(0), np.zeros((0, 4, 4)), np.zeros((0, 4, 4)),
                         np.eye(4), [1.0, 0.5], IntegratorConfig())
    with pytest.raises(ValueError):
        integrate_fundamental(SystemParams(1, 1, 0), 0.0)


def test_zero_frequency_list_is_constant_system():
    # A = [[0, 1], [-4, 0]] gives cos 2t
    c0 = np.array([[0.0, 1.0], [-4.0, 0.0]])
    states, *_ = integrate_linear(c0, np.zeros(0), np.zeros((0, 2, 2)), np.zeros((0, 2, 2)),
                                  np.array([1.0, 0.0]), [1.0], IntegratorConfig())
    assert states[-1, 0, 0] == pytest.approx(math.cos(2.0), abs=1e-9)


def test_violent_instability_reports_overflow():
    with pytest.raises(StateOverflow):
        integrate_fundamental(SystemParams(1.0, 0.5, 0.375), 1600 * math.pi)
