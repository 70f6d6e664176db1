import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppcform.controller import (MAX_TILT, AuxiliaryState, CorridorCollapseError,
                                SingularOffsetError, ThrustDegenerateError, aux_step, boundaries,
                                cauchy_schwarz_coefficient, control_law, saturate, sliding_rate,
                                sliding_value, transformed_error_dynamics, uav_forward_map,
                                uav_input_map, ugv_input_map)
from ppcform.dynamics import QuadParams, UgvParams, hand_point_acceleration, ugv_accelerations
from ppcform.ppc import PerformanceProfile

from .helpers import random_states

PROFILE_EPS = PerformanceProfile(0.3, 5.0)


# ---------------------------------------------------------------- corridor

def test_boundaries_examples():
    c = boundaries(AuxiliaryState.zeros(1), 1.0, 1.0, 1.0)
    assert c.lower[0] == 1.0 and c.upper[0] == 1.0
    c = boundaries(AuxiliaryState(np.array([0.3]), np.zeros(1)), 1.0, 1.0, 1.0)
    assert c.lower[0] == pytest.approx(0.7) and c.upper[0] == pytest.approx(1.3)
    c = boundaries(AuxiliaryState(np.array([0.3 * 0.3]), np.zeros(1)), 0.3, 1.0, 1.0)
    assert c.bound_lo[0] == pytest.approx(-0.21) and c.bound_hi[0] == pytest.approx(0.39)


def test_corridor_collapse_raises():
    with pytest.raises(CorridorCollapseError):
        boundaries(AuxiliaryState(np.array([0.995]), np.zeros(1)), 1.0, 1.0, 1.0)


# ---------------------------------------------------------------- auxiliary system

def test_aux_origin_is_equilibrium():
    a = aux_step(AuxiliaryState.zeros(3), np.zeros(3), 8.0, 1e-3)
    assert not a.q1.any() and not a.q2.any()


def test_aux_dc_gain():
    a = AuxiliaryState.zeros(1)
    for k in range(5000):
        a = aux_step(a, np.array([2.0]), 8.0, 1e-3, k * 1e-3)
    assert a.q1[0] == pytest.approx(2.0 / 64.0, rel=1e-9)


def test_aux_impulse_decay():
    w, dt = 8.0, 1e-3
    a = aux_step(AuxiliaryState.zeros(1), np.array([100.0]), w, dt)
    q = [a.q1[0]]
    for k in range(1, 3000):
        a = aux_step(a, np.zeros(1), w, dt, k * dt)
        q.append(a.q1[0])
    q = np.abs(np.array(q))
    peak_k = int(np.argmax(q))
    after = np.flatnonzero(q < 0.01 * q[peak_k])
    first = after[after > peak_k][0]
    # t exp(-w t) peaks at 1/w and drops below 1% of the peak 6.64/w later
    assert (first - peak_k) * dt <= 7.0 / w
    assert peak_k * dt == pytest.approx(1.0 / w, abs=2 * dt)


# ---------------------------------------------------------------- transformed error

def test_perfect_tracking_fixed_point():
    terms = transformed_error_dynamics(np.zeros(1), np.zeros(1), AuxiliaryState.zeros(1),
                                       PROFILE_EPS.evaluate(2.0), 1.0, 1.0)
    assert terms.eps[0] == 0.0 and terms.eps_dot[0] == 0.0 and terms.delta[0] == 0.0
    assert sliding_value(terms, 5.0)[0] == 0.0


def _eps_along(t, q1):
    aux = AuxiliaryState(np.array([q1]), np.zeros(1))
    return transformed_error_dynamics(np.array([0.1 * math.sin(t)]),
                                      np.array([0.1 * math.cos(t)]), aux,
                                      PROFILE_EPS.evaluate(t), 1.0, 1.0)


@pytest.mark.parametrize("t", [0.8, 1.9, 3.1, 4.4, 6.0])
@pytest.mark.parametrize("q1", [0.0, 0.05])
def test_eps_derivatives_finite_difference(t, q1):
    h1, h2 = 1e-5, 1e-4
    terms = _eps_along(t, q1)
    fd1 = (_eps_along(t + h1, q1).eps[0] - _eps_along(t - h1, q1).eps[0]) / (2 * h1)
    assert fd1 == pytest.approx(terms.eps_dot[0], rel=1e-4, abs=1e-12)
    # eps_ddot = delta + r_s * (e_v_dot - q2_dot), with frozen aux and
    # e_v_dot = -0.1 sin t
    analytic = terms.delta[0] + terms.r_s[0] * (-0.1 * math.sin(t))
    fd2 = (_eps_along(t + h2, q1).eps[0] - 2 * terms.eps[0]
           + _eps_along(t - h2, q1).eps[0]) / h2**2
    assert fd2 == pytest.approx(analytic, rel=1e-3, abs=1e-9)


def test_rs_positive_inside_corridor(rng):
    e_p, e_v, aux, rho, d1, d2 = random_states(rng, 5000)
    terms = transformed_error_dynamics(e_p, e_v, aux, rho, d1, d2)
    assert np.all(terms.r_s > 0)


# ---------------------------------------------------------------- control law

def test_control_law_pure_feedforward():
    terms = transformed_error_dynamics(np.zeros(2), np.zeros(2), AuxiliaryState.zeros(2),
                                       PROFILE_EPS.evaluate(7.0), 1.0, 1.0)
    v = control_law(terms, AuxiliaryState.zeros(2), 5.0, 5.0, 8.0,
                    np.array([0.4, -1.0]), np.array([0.2, 0.3]))
    np.testing.assert_allclose(v, [0.6, -0.7], rtol=0, atol=1e-15)


def test_closed_loop_identity(rng):
    n = 1000
    e_p, e_v, aux, rho, d1, d2 = random_states(rng, n)
    lam, ks, w = rng.uniform(1, 10, n), rng.uniform(1, 20, n), rng.uniform(1, 10, n)
    zv_dot, zerr_dot, hv_dot = rng.normal(size=n), rng.normal(size=n), rng.normal(size=n)
    terms = transformed_error_dynamics(e_p, e_v, aux, rho, d1, d2)
    v = control_law(terms, aux, lam, ks, w, zv_dot, hv_dot)
    s = sliding_value(terms, lam)
    s_dot = sliding_rate(terms, aux, v, lam, w, zv_dot, zerr_dot, hv_dot)
    target = terms.r_s * (-ks * s + zerr_dot)
    assert np.max(np.abs(s_dot - target) / (1 + np.abs(s_dot))) < 1e-9


# ---------------------------------------------------------------- saturation

def test_saturate_examples():
    assert saturate(3.0, -2.0, 2.0) == (2.0, -1.0)
    assert saturate(0.5, -2.0, 2.0) == (0.5, 0.0)
    assert saturate(-5.0, -2.0, 2.0) == (-2.0, 3.0)


@given(v=st.floats(-1e6, 1e6), lo=st.floats(-100, -0.01), hi=st.floats(0.01, 100))
def test_saturate_idempotent(v, lo, hi):
    u, du = saturate(v, lo, hi)
    u2, du2 = saturate(u, lo, hi)
    assert u2 == u and du2 == 0.0
    assert u == pytest.approx(v + du, abs=1e-12 * max(1.0, abs(v)))


# ---------------------------------------------------------------- input maps

QUAD = QuadParams()
UGV = UgvParams()


def test_uav_hover():
    u1, phi, theta = uav_input_map(np.zeros(3), 0.0, QUAD)
    assert u1 == pytest.approx(QUAD.mass * QUAD.g)
    assert phi == 0.0 and theta == 0.0


def test_uav_round_trip(rng):
    done = 0
    while done < 2000:
        u = rng.uniform([-5, -5, -4], [5, 5, 6])
        psi = rng.uniform(-math.pi, math.pi)
        u1, phi, theta = uav_input_map(u, psi, QUAD, max_tilt=math.pi / 2)
        if abs(phi) > MAX_TILT or abs(theta) > MAX_TILT:
            continue
        back = uav_forward_map(u1, phi, theta, psi, QUAD)
        np.testing.assert_allclose(back, u, rtol=0, atol=1e-9)
        # the clipped map is identical inside the envelope
        assert uav_input_map(u, psi, QUAD)[1] == phi
        done += 1


def test_uav_tilt_is_clipped():
    _, phi, theta = uav_input_map(np.array([20.0, -20.0, 0.0]), 0.0, QUAD)
    assert theta == pytest.approx(MAX_TILT) and phi == pytest.approx(MAX_TILT)


def test_uav_degenerate_thrust():
    with pytest.raises(ThrustDegenerateError):
        uav_input_map(np.array([0.0, 0.0, -QUAD.g]), 0.0, QUAD)


@settings(max_examples=500)
@given(phi=st.floats(-MAX_TILT, MAX_TILT), theta=st.floats(-MAX_TILT, MAX_TILT),
       psi=st.floats(-math.pi, math.pi))
def test_coefficient_bound(phi, theta, psi):
    assert cauchy_schwarz_coefficient(phi, theta, psi) ** 2 <= 7 / 16 + 1e-15


def test_ugv_aligned_inversion():
    t1, t2 = ugv_input_map(np.array([1.0, 0.0]), 0.0, 0.0, 0.0, UGV)
    assert t1 == pytest.approx(UGV.mass * UGV.wheel_radius / 2)
    assert t2 == pytest.approx(UGV.mass * UGV.wheel_radius / 2)
    t1, t2 = ugv_input_map(np.zeros(2), 0.0, 0.0, 0.0, UGV)
    assert t1 == 0.0 and t2 == 0.0


def test_ugv_round_trip(rng):
    for _ in range(2000):
        x = np.array([0.0, 0.0, rng.uniform(-math.pi, math.pi), rng.normal(), rng.normal()])
        torques = rng.normal(scale=0.05, size=2)
        acc = hand_point_acceleration(x, torques, UGV)
        t1, t2 = ugv_input_map(acc, x[2], x[3], x[4], UGV)
        np.testing.assert_allclose([t1, t2], torques, rtol=0, atol=1e-9)
        # forward through the wheel model again
        vd, wd = ugv_accelerations(np.array([t1, t2]), UGV)
        vd0, wd0 = ugv_accelerations(torques, UGV)
        assert vd == pytest.approx(vd0, abs=1e-9) and wd == pytest.approx(wd0, abs=1e-9)


def test_ugv_zero_offset_rejected():
    with pytest.raises(SingularOffsetError):
        ugv_input_map(np.zeros(2), 0.0, 0.0, 0.0, UgvParams(offset=0.0))
