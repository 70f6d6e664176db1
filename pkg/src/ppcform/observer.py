"""Distributed leader-state observer with a prescribed-performance constraint
on the neighborhood error.

State vectors are flat over *channels* (one per agent and axis).  The laws
need ``L^-1`` and ``L^T`` of the whole graph, so they are evaluated in stacked
form; only the neighborhood error has a per-agent message-passing form.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import integrate
from .graph import WeightSnapshot


@dataclass(frozen=True)
class ObserverGains:
    k1: np.ndarray | float = 2.0
    k2: np.ndarray | float = 50.0
    eta: np.ndarray | float = 1.0
    p: np.ndarray | float = 1.0
    sigma1: np.ndarray | float = 0.01
    sigma2: np.ndarray | float = 0.01


@dataclass
class ObserverState:
    zeta_p: np.ndarray
    zeta_v: np.ndarray
    abar1: np.ndarray
    abar2: np.ndarray

    @classmethod
    def at_rest(cls, positions: np.ndarray) -> "ObserverState":
        z = np.zeros_like(positions, dtype=float)
        return cls(np.array(positions, dtype=float), z.copy(), z.copy(), z.copy())

    def as_array(self) -> np.ndarray:
        return np.stack([self.zeta_p, self.zeta_v, self.abar1, self.abar2])

    @classmethod
    def from_array(cls, a: np.ndarray) -> "ObserverState":
        return cls(a[0], a[1], a[2], a[3])


def neighborhood_error(zeta_p, zeta_v, leader_p, leader_v, laplacian, pinning):
    """Stacked ``xi = L^f zeta - b zeta_0`` for one axis (or block-diagonal
    stack of axes)."""
    xi_p = laplacian @ zeta_p - pinning * leader_p
    xi_v = laplacian @ zeta_v - pinning * leader_v
    return xi_p, xi_v


def neighborhood_error_agent(i: int, zeta_p, zeta_v, leader_p, leader_v,
                             weights: WeightSnapshot):
    """Agent ``i``'s error from its own neighbors' messages only."""
    xi_p = 0.0
    xi_v = 0.0
    for j in np.flatnonzero(weights.adjacency[i]):
        a = weights.adjacency[i, j]
        xi_p += a * (zeta_p[i] - zeta_p[j])
        xi_v += a * (zeta_v[i] - zeta_v[j])
    b = weights.pinning[i]
    if b > 0:
        xi_p += b * (zeta_p[i] - leader_p)
        xi_v += b * (zeta_v[i] - leader_v)
    return xi_p, xi_v


def virtual_laws(xi_p, xi_v, eps, r, gamma, gains: ObserverGains,
                 laplacian_inv, laplacian_t):
    """``alpha1 = -K1 R eps + Gamma L^-1 xi_p`` and
    ``alpha2 = -H K2 xi_v - H L^T R P eps``."""
    alpha1 = -gains.k1 * r * eps + gamma * (laplacian_inv @ xi_p)
    alpha2 = -gains.eta * gains.k2 * xi_v - gains.eta * (laplacian_t @ (r * gains.p * eps))
    return alpha1, alpha2


def observer_derivative(s: np.ndarray, alpha1, alpha2, gains: ObserverGains) -> np.ndarray:
    zeta_v, abar1, abar2 = s[1], s[2], s[3]
    return np.stack([zeta_v + abar1, abar2,
                     (alpha1 - abar1) / gains.sigma1,
                     (alpha2 - abar2) / gains.sigma2])


def observer_step(state: ObserverState, alpha1, alpha2, gains: ObserverGains,
                  dt: float, t: float = 0.0) -> ObserverState:
    """Advance the observer one step with the virtual laws held constant."""
    if dt > 0.5 * np.min([np.min(gains.sigma1), np.min(gains.sigma2)]):
        warnings.warn("observer step exceeds half the filter time constant",
                      RuntimeWarning, stacklevel=2)
    out = integrate(lambda _t, s: observer_derivative(s, alpha1, alpha2, gains),
                    state.as_array(), t, dt)
    return ObserverState.from_array(out)


def lyapunov_surrogate(eps, zeta_err_v, abar1, alpha1, abar2, alpha2,
                       gains: ObserverGains) -> float:
    """``0.5 eps'P eps + 0.5 zv' H^-1 zv + 0.5|a1~|^2 + 0.5|a2~|^2``."""
    p = np.broadcast_to(gains.p, np.shape(eps))
    eta = np.broadcast_to(gains.eta, np.shape(zeta_err_v))
    return float(0.5 * np.sum(p * eps**2) + 0.5 * np.sum(zeta_err_v**2 / eta)
                 + 0.5 * np.sum((abar1 - alpha1) ** 2)
                 + 0.5 * np.sum((abar2 - alpha2) ** 2))

