"""Plants (virtual leader, quadrotor, differential-drive UGV) and the shared
fixed-step integrator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

GRAVITY = 9.81


class NonFiniteStateError(FloatingPointError):
    pass


def integrate(f: Callable[[float, np.ndarray], np.ndarray], state: np.ndarray,
              t: float, dt: float) -> np.ndarray:
    """One classical RK4 step of ``dx/dt = f(t, x)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    h2 = 0.5 * dt
    k1 = f(t, state)
    k2 = f(t + h2, state + h2 * k1)
    k3 = f(t + h2, state + h2 * k2)
    k4 = f(t + dt, state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError(f"non-finite state after step at t={t:.6f}")
    return out


# --------------------------------------------------------------------------
# virtual leader

@dataclass(frozen=True)
class LeaderTrajectory:
    """Quintic climb to ``altitude`` on ``[0, t0]``, then
    ``[t - t0, 2 sin(0.5 (t - t0)), altitude]``.

    The cruise branch starts with velocity ``(1, 1, 0)`` while the climb ends
    at rest in x and y, so the leader velocity jumps at ``t0``.
    """

    t0: float = 5.0
    altitude: float = 4.0
    amplitude: float = 2.0
    omega: float = 0.5
    speed: float = 1.0

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, velocity and acceleration (``u0``) at ``t``."""
        if t <= self.t0:
            s = t / self.t0
            z = self.altitude * (10 * s**3 - 15 * s**4 + 6 * s**5)
            dz = self.altitude * (30 * s**2 - 60 * s**3 + 30 * s**4) / self.t0
            ddz = self.altitude * (60 * s - 180 * s**2 + 120 * s**3) / self.t0**2
            return (np.array([0.0, 0.0, z]), np.array([0.0, 0.0, dz]),
                    np.array([0.0, 0.0, ddz]))
        tau = t - self.t0
        w = self.omega
        return (np.array([self.speed * tau, self.amplitude * math.sin(w * tau), self.altitude]),
                np.array([self.speed, self.amplitude * w * math.cos(w * tau), 0.0]),
                np.array([0.0, -self.amplitude * w * w * math.sin(w * tau), 0.0]))

    def velocity_jump(self) -> np.ndarray:
        """Cruise velocity at ``t0+`` minus climb velocity at ``t0``."""
        return np.array([self.speed, self.amplitude * self.omega, 0.0])


@dataclass
class LeaderState:
    p: np.ndarray
    v: np.ndarray


def leader_step(traj: LeaderTrajectory, state: LeaderState, t: float,
                dt: float) -> LeaderState:
    """Integrate ``p' = v, v' = u0(t)`` over one step.

    A step that crosses ``t0`` is split there and the velocity jump applied.
    """
    if t < 0:
        raise ValueError("t must be >= 0")

    def f(tt, x):
        return np.concatenate([x[3:], traj.state(tt)[2]])

    x = np.concatenate([state.p, state.v])
    t_end = t + dt
    if t < traj.t0 < t_end:
        x = integrate(f, x, t, traj.t0 - t)
        x[3:] += traj.velocity_jump()
        x = integrate(f, x, traj.t0, t_end - traj.t0)
    else:
        if t == traj.t0:
            x[3:] += traj.velocity_jump()
        x = integrate(f, x, t, dt)
    return LeaderState(x[:3].copy(), x[3:].copy())


# --------------------------------------------------------------------------
# quadrotor

@dataclass(frozen=True)
class QuadParams:
    mass: float = 1.5
    ix: float = 0.02
    iy: float = 0.02
    iz: float = 0.04
    ir: float = 0.0
    omega_bar: float = 0.0
    g: float = GRAVITY


@dataclass
class QuadrotorPlant:
    """Arrays of shape ``(..., 12)``: position, velocity, (phi, theta, psi),
    and the three Euler-angle rates."""

    x: np.ndarray

    @property
    def position(self):
        return self.x[..., 0:3]

    @property
    def velocity(self):
        return self.x[..., 3:6]

    @property
    def angles(self):
        return self.x[..., 6:9]

    @property
    def rates(self):
        return self.x[..., 9:12]


def quad_derivative(x: np.ndarray, inputs: np.ndarray, p: QuadParams) -> np.ndarray:
    """Right-hand side of the six second-order quadrotor equations.

    ``inputs[..., 0:4]`` are ``U1..U4``.
    """
    phi, theta, psi = x[..., 6], x[..., 7], x[..., 8]
    dphi, dtheta, dpsi = x[..., 9], x[..., 10], x[..., 11]
    u1, u2, u3, u4 = (inputs[..., k] for k in range(4))
    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cpsi, spsi = np.cos(psi), np.sin(psi)
    out = np.empty_like(x)
    out[..., 0:6] = 0.0
    out[..., 0:3] = x[..., 3:6]
    out[..., 3] = (cphi * sth * cpsi + sphi * spsi) * u1 / p.mass
    out[..., 4] = (cphi * sth * spsi - sphi * cpsi) * u1 / p.mass
    out[..., 5] = cphi * cth * u1 / p.mass - p.g
    out[..., 6:9] = x[..., 9:12]
    out[..., 9] = (dtheta * dpsi * (p.iy - p.iz) / p.ix
                   - p.ir / p.ix * dtheta * p.omega_bar + u2 / p.ix)
    out[..., 10] = (dphi * dpsi * (p.iz - p.ix) / p.iy
                    - p.ir / p.iy * dphi * p.omega_bar + u3 / p.iy)
    out[..., 11] = dphi * dtheta * (p.ix - p.iy) / p.iz + u4 / p.iz
    return out


def quad_full_step(plant: QuadrotorPlant, inputs: np.ndarray, p: QuadParams,
                   dt: float, t: float = 0.0) -> QuadrotorPlant:
    inputs = np.asarray(inputs, dtype=float)
    return QuadrotorPlant(integrate(lambda _t, x: quad_derivative(x, inputs, p),
                                    plant.x, t, dt))


def double_integrator_step(pos: np.ndarray, vel: np.ndarray, u: np.ndarray,
                           dt: float, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Simplified plant ``x'' = u`` per axis with ``u`` held over the step."""
    x = np.stack([pos, vel])
    u = np.asarray(u, dtype=float)

    def f(_t, s):
        return np.stack([s[1], np.broadcast_to(u, s[1].shape)])

    out = integrate(f, x, t, dt)
    return out[0], out[1]


quad_simple_step = double_integrator_step


@dataclass(frozen=True)
class AttitudeGains:
    """Critically damped PD on each Euler angle: ``kd = 2 sqrt(kp)``."""

    kp: float = 100.0
    kd: float = 20.0
    kp_yaw: float | None = None
    kd_yaw: float | None = None


def inner_loop_attitude(plant: QuadrotorPlant, phi_d, theta_d, psi_d,
                        p: QuadParams, gains: AttitudeGains = AttitudeGains()):
    """Feedback-linearizing attitude loop returning ``(U2, U3, U4)``.

    The coupling and gyroscopic terms are cancelled so each angle obeys
    ``angle'' = kp (angle_d - angle) - kd angle'``.
    """
    phi, theta, psi = plant.angles[..., 0], plant.angles[..., 1], plant.angles[..., 2]
    dphi, dtheta, dpsi = plant.rates[..., 0], plant.rates[..., 1], plant.rates[..., 2]
    kpy = gains.kp if gains.kp_yaw is None else gains.kp_yaw
    kdy = gains.kd if gains.kd_yaw is None else gains.kd_yaw
    a_phi = gains.kp * (phi_d - phi) - gains.kd * dphi
    a_theta = gains.kp * (theta_d - theta) - gains.kd * dtheta
    a_psi = kpy * (psi_d - psi) - kdy * dpsi
    u2 = p.ix * (a_phi - dtheta * dpsi * (p.iy - p.iz) / p.ix
                 + p.ir / p.ix * dtheta * p.omega_bar)
    u3 = p.iy * (a_theta - dphi * dpsi * (p.iz - p.ix) / p.iy
                 + p.ir / p.iy * dphi * p.omega_bar)
    u4 = p.iz * (a_psi - dphi * dtheta * (p.ix - p.iy) / p.iz)
    return u2, u3, u4


# --------------------------------------------------------------------------
# differential-drive UGV

@dataclass(frozen=True)
class UgvParams:
    mass: float = 1.0
    inertia: float = 0.02
    wheel_radius: float = 0.02
    half_track: float = 0.1
    offset: float = 0.2


@dataclass
class UgvPlant:
    """Arrays of shape ``(..., 5)``: hand-point ``x, y``, heading, linear and
    angular speed."""

    x: np.ndarray

    @property
    def position(self):
        return self.x[..., 0:2]

    def hand_velocity(self, p: UgvParams) -> np.ndarray:
        th, v, w = self.x[..., 2], self.x[..., 3], self.x[..., 4]
        c, s = np.cos(th), np.sin(th)
        return np.stack([v * c - p.offset * w * s, v * s + p.offset * w * c], axis=-1)


def ugv_accelerations(torques: np.ndarray, p: UgvParams):
    """``(v_dot, w_dot)`` from right/left wheel torques."""
    t1, t2 = torques[..., 0], torques[..., 1]
    v_dot = (t1 + t2) / (p.mass * p.wheel_radius)
    w_dot = (t1 - t2) * p.half_track / (p.inertia * p.wheel_radius)
    return v_dot, w_dot


def ugv_derivative(x: np.ndarray, torques: np.ndarray, p: UgvParams) -> np.ndarray:
    th, v, w = x[..., 2], x[..., 3], x[..., 4]
    c, s = np.cos(th), np.sin(th)
    v_dot, w_dot = ugv_accelerations(torques, p)
    return np.stack([v * c - p.offset * w * s, v * s + p.offset * w * c,
                     w, v_dot, w_dot], axis=-1)


def hand_point_acceleration(x: np.ndarray, torques: np.ndarray, p: UgvParams) -> np.ndarray:
    """Planar acceleration of the hand point (the simplified-model input)."""
    th, v, w = x[..., 2], x[..., 3], x[..., 4]
    c, s = np.cos(th), np.sin(th)
    v_dot, w_dot = ugv_accelerations(torques, p)
    along = v_dot - p.offset * w * w
    across = p.offset * w_dot + v * w
    return np.stack([along * c - across * s, along * s + across * c], axis=-1)


def ugv_step(plant: UgvPlant, torques: np.ndarray, p: UgvParams, dt: float,
             t: float = 0.0) -> tuple[UgvPlant, np.ndarray]:
    """Advance the UGV one step; also return the hand-point acceleration at
    the start of the step for logging."""
    torques = np.asarray(torques, dtype=float)
    acc = hand_point_acceleration(plant.x, torques, p)
    x = integrate(lambda _t, s: ugv_derivative(s, torques, p), plant.x, t, dt)
    return UgvPlant(x), acc
