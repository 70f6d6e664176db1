"""Sliding-mode formation controller with variable performance corridors,
actuator saturation and the anti-windup auxiliary system, plus the maps from
commanded accelerations to physical UAV/UGV inputs.

All per-channel functions are elementwise over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import ppc
from .dynamics import GRAVITY, QuadParams, UgvParams, integrate

COLLAPSE_TOL = 0.01
MAX_TILT = math.radians(30.0)


class CorridorCollapseError(RuntimeError):
    pass


class ThrustDegenerateError(ValueError):
    pass


class SingularOffsetError(ValueError):
    pass


@dataclass
class AuxiliaryState:
    q1: np.ndarray
    q2: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "AuxiliaryState":
        return cls(np.zeros(shape), np.zeros(shape))


class Corridor(NamedTuple):
    lower: np.ndarray      # half-width below zero, normalized
    upper: np.ndarray      # half-width above zero, normalized
    bound_lo: np.ndarray   # -lower * rho_eps
    bound_hi: np.ndarray   # upper * rho_eps
    x_a: np.ndarray


class ErrorTerms(NamedTuple):
    eps: np.ndarray
    eps_dot: np.ndarray
    delta: np.ndarray      # every eps_ddot term not multiplied by v
    r_s: np.ndarray        # positive slope multiplying v in s_dot


def boundaries(aux: AuxiliaryState, rho_eps: float, delta1, delta2,
               check: bool = True) -> Corridor:
    """Corridor ``-(delta1 - x_a) rho < e_p < (delta2 + x_a) rho`` with
    ``x_a = q1 / rho``."""
    x_a = aux.q1 / rho_eps
    lower = delta1 - x_a
    upper = delta2 + x_a
    if check and (np.any(lower <= COLLAPSE_TOL) or np.any(upper <= COLLAPSE_TOL)):
        raise CorridorCollapseError(
            f"corridor collapsed: min lower={np.min(lower):.4g}, min upper={np.min(upper):.4g}")
    return Corridor(lower, upper, -lower * rho_eps, upper * rho_eps, x_a)


def aux_derivative(q1, q2, du, omega_a):
    return q2, -omega_a**2 * q1 - 2.0 * omega_a * q2 + du


def aux_step(aux: AuxiliaryState, du, omega_a, dt: float, t: float = 0.0) -> AuxiliaryState:
    """Critically damped filter ``q1' = q2, q2' = -w^2 q1 - 2 w q2 + du``."""
    du = np.asarray(du, dtype=float)

    def f(_t, s):
        return np.stack(aux_derivative(s[0], s[1], du, omega_a))

    out = integrate(f, np.stack([aux.q1, aux.q2]), t, dt)
    return AuxiliaryState(out[0], out[1])


def transformed_error_dynamics(e_p, e_v, aux: AuxiliaryState, rho_terms, delta1,
                               delta2, counter: ppc.ClampCounter | None = None) -> ErrorTerms:
    """Transformed tracking error, its derivative and the drift term.

    With ``y = (e_p - q1) / rho`` the transform is
    ``eps = 0.5 ln((y + delta1) / (delta2 - y))``, identical to the corridor
    map evaluated at ``x = e_p / rho`` with moving half-widths.
    """
    rho, rho_dot, rho_ddot = rho_terms
    x = e_p / rho
    x_a = aux.q1 / rho
    lower = delta1 - x_a
    upper = delta2 + x_a
    eps = ppc.transform_asym(x, lower, upper, counter)
    # re-derive x from the (possibly clamped) eps-domain input
    x = np.clip(x, -lower + ppc.DOMAIN_MARGIN, upper - ppc.DOMAIN_MARGIN)
    slope = ppc.asym_slope(x, lower, upper)
    curv = ppc.asym_slope_dx(x, lower, upper)
    dp = e_p - aux.q1
    dv = e_v - aux.q2
    y_dot = dv / rho - dp * rho_dot / rho**2
    eps_dot = slope * y_dot
    delta = curv * y_dot**2 + slope * (2.0 * dp * rho_dot**2 / rho**3
                                       - 2.0 * dv * rho_dot / rho**2
                                       - dp * rho_ddot / rho**2)
    return ErrorTerms(eps, eps_dot, delta, slope / rho)


def sliding_value(terms: ErrorTerms, lambda_s):
    return lambda_s * terms.eps + terms.eps_dot


def control_law(terms: ErrorTerms, aux: AuxiliaryState, lambda_s, k_s, omega_a,
                zeta_v_dot, h_v_dot):
    """Commanded acceleration ``v``.

    Substituting it into ``s_dot`` leaves ``r_s (-k_s s + zeta_err_v_dot)``.
    """
    s = sliding_value(terms, lambda_s)
    return (-k_s * s + h_v_dot + zeta_v_dot - omega_a**2 * aux.q1
            - 2.0 * omega_a * aux.q2
            - (terms.delta + lambda_s * terms.eps_dot) / terms.r_s)


def sliding_rate(terms: ErrorTerms, aux: AuxiliaryState, v, lambda_s, omega_a,
                 zeta_v_dot, zeta_err_v_dot, h_v_dot):
    """Open-loop ``s_dot`` for an arbitrary command ``v``."""
    return (terms.r_s * (v - h_v_dot - zeta_v_dot + zeta_err_v_dot
                         + omega_a**2 * aux.q1 + 2.0 * omega_a * aux.q2)
            + terms.delta + lambda_s * terms.eps_dot)


def saturate(v, lo, hi):
    """Return ``(u, du)`` with ``u = clip(v)`` and ``du = u - v``."""
    u = np.clip(v, lo, hi)
    return u, u - v


# --------------------------------------------------------------------------
# input maps

def uav_input_map(u_cmd, psi_d, params: QuadParams, max_tilt: float = MAX_TILT):
    """Thrust and roll/pitch references producing the acceleration ``u_cmd``.

    ``u_cmd`` has shape ``(..., 3)``.  Returns ``(U1, phi_d, theta_d)``; the
    angles are clipped to ``+-max_tilt``.
    """
    u = np.asarray(u_cmd, dtype=float)
    ux, uy, uz = u[..., 0], u[..., 1], u[..., 2] + params.g
    if np.any(uz <= 0.1):
        raise ThrustDegenerateError("vertical command leaves no usable thrust")
    cpsi, spsi = np.cos(psi_d), np.sin(psi_d)
    u1 = params.mass * np.sqrt(ux**2 + uy**2 + uz**2)
    theta = np.arctan2(ux * cpsi + uy * spsi, uz)
    phi = np.arctan2(np.cos(theta) * (ux * spsi - uy * cpsi), uz)
    return (u1, np.clip(phi, -max_tilt, max_tilt),
            np.clip(theta, -max_tilt, max_tilt))


def uav_forward_map(u1, phi, theta, psi, params: QuadParams):
    """Translational acceleration produced by thrust ``u1`` at the given attitude."""
    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cpsi, spsi = np.cos(psi), np.sin(psi)
    return np.stack([(cphi * sth * cpsi + sphi * spsi) * u1 / params.mass,
                     (cphi * sth * spsi - sphi * cpsi) * u1 / params.mass,
                     cphi * cth * u1 / params.mass - params.g], axis=-1)


def ugv_input_map(u_cmd, heading, speed, turn_rate, params: UgvParams):
    """Wheel torques ``(T1, T2)`` that give the hand point acceleration ``u_cmd``."""
    if params.offset <= 1e-6:
        raise SingularOffsetError("hand-point offset must be positive")
    u = np.asarray(u_cmd, dtype=float)
    c, s = np.cos(heading), np.sin(heading)
    L = params.offset
    w2 = L * turn_rate**2
    vw = speed * turn_rate
    # [c, -L s; s, L c] [v_dot, w_dot]^T = rhs, inverted in closed form
    rx = u[..., 0] + w2 * c + vw * s
    ry = u[..., 1] + w2 * s - vw * c
    v_dot = c * rx + s * ry
    w_dot = (-s * rx + c * ry) / L
    r, d = params.wheel_radius, params.half_track
    a = params.mass * r * v_dot
    b = params.inertia * r * w_dot / d
    return 0.5 * (a + b), 0.5 * (a - b)


def cauchy_schwarz_coefficient(phi, theta, psi):
    """x-channel thrust direction coefficient bounded by 7/16 at 30 deg tilt."""
    return (np.cos(phi) * np.sin(theta) * np.cos(psi) + np.sin(phi) * np.sin(psi))


__all__ = [
    "AuxiliaryState", "Corridor", "ErrorTerms", "CorridorCollapseError",
    "ThrustDegenerateError", "SingularOffsetError", "boundaries", "aux_step",
    "transformed_error_dynamics", "sliding_value", "control_law", "sliding_rate",
    "saturate", "uav_input_map", "uav_forward_map", "ugv_input_map",
    "cauchy_schwarz_coefficient", "GRAVITY",
]
