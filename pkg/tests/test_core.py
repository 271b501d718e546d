import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpmathieu.core import (G, RationalPoint, StateVector, SystemParams, Variant,
                            fundamental_period, rhs_matrix, scale_equivalent,
                            trig_coefficients)


def test_variant_parse_accepts_aliases():
    assert Variant.parse("SquaredDiagonal") is Variant.SQUARED
    assert Variant.parse("plain") is Variant.PLAIN
    assert Variant.parse(Variant.PLAIN) is Variant.PLAIN
    with pytest.raises(ValueError):
        Variant.parse("cubic")


@pytest.mark.parametrize("alpha,beta,eps", [(0, 0.5, 0.1), (0.5, -1, 0.1), (0.5, 0.5, -0.1)])
def test_params_reject_bad_values(alpha, beta, eps):
    with pytest.raises(ValueError):
        SystemParams(alpha, beta, eps)


def test_diagonal_depends_on_variant():
    assert SystemParams(0.5, 0.25, 0.1).diagonal == (0.25, 0.0625)
    assert SystemParams(0.5, 0.25, 0.1, "plain").diagonal == (0.5, 0.25)


def test_rhs_at_zero():
    a = rhs_matrix(SystemParams(0.5, 0.25, 0.1), 0.0)
    expected = np.array([[0, 0, 1, 0], [0, 0, 0, 1],
                         [-0.35, -0.1, 0, 0], [-0.1, -0.1625, 0, 0]])
    assert np.allclose(a, expected, atol=1e-15)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 0.4), st.floats(-50, 50))
def test_trig_form_reassembles_rhs(alpha, beta, eps, t):
    params = SystemParams(alpha, beta, eps)
    c0, freqs, cc, cs = trig_coefficients(params)
    a = c0 + sum(cc[k] * math.cos(freqs[k] * t) + cs[k] * math.sin(freqs[k] * t)
                 for k in range(len(freqs)))
    assert np.allclose(a, rhs_matrix(params, t), atol=1e-14)


@settings(max_examples=50)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 0.4), st.floats(-50, 50),
       st.sampled_from(list(Variant)))
def test_t_invariance(alpha, beta, eps, t, variant):
    # A(-t) G + G A(t) = 0 holds exactly because only cosines appear
    p = SystemParams(alpha, beta, eps, variant)
    assert np.array_equal(rhs_matrix(p, -t) @ G, -(G @ rhs_matrix(p, t)))
    assert np.trace(rhs_matrix(p, t)) == 0


@pytest.mark.parametrize("i,j,n,expected", [
    (435, 425, 800, 320 * math.pi),
    (436, 425, 800, 1600 * math.pi),
    (1, 1, 1, 2 * math.pi),
    (2, 4, 10, 10 * math.pi),
])
def test_fundamental_period(i, j, n, expected):
    assert fundamental_period(RationalPoint(i, j, n)) == pytest.approx(expected, rel=1e-15)


def test_period_is_common_to_both_frequencies():
    p = RationalPoint(12, 18, 40)
    T = fundamental_period(p)
    for w in (p.alpha, p.beta):
        cycles = w * T / (2 * math.pi)
        assert abs(cycles - round(cycles)) < 1e-12


def test_rational_point_from_fractions():
    p = RationalPoint.from_fractions(Fraction(1, 2), Fraction(1, 3))
    assert (p.i, p.j, p.n) == (3, 2, 6)
    with pytest.raises(ValueError):
        RationalPoint(0, 1, 2)


def test_state_vector_layout():
    assert np.array_equal(StateVector(1, 2).as_array(), [1, 2, 0, 0])


def test_scale_equivalent_squared_example():
    # (alpha, beta, eps) -> (alpha/2, beta/2, eps/4)
    s = scale_equivalent(SystemParams(0.5, 0.4, 0.025), 0.5)
    assert (s.alpha, s.beta) == (0.25, 0.2)
    assert s.epsilon == pytest.approx(0.00625)
    with pytest.raises(ValueError):
        scale_equivalent(SystemParams(0.5, 0.4, 0.025), 0)


@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0.0, 0.4), st.floats(0.2, 3.0),
       st.floats(-20, 20))
def test_scaled_rhs_is_time_rescaled(alpha, beta, eps, m, t):
    # x(t) solves the original system iff x(t/m) solves the scaled one, so
    # the second-derivative block scales by m^2
    p = SystemParams(alpha, beta, eps)
    s = scale_equivalent(p, m)
    lhs = rhs_matrix(s, t / m)[2:, :2]
    rhs = m * m * rhs_matrix(p, t)[2:, :2]
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)
