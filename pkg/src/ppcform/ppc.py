"""Performance boundary functions and barrier error transformations.

The same code serves the observer corridor (symmetric, ``|x| < 1``) and the
tracking corridor (asymmetric, ``-lower < x < upper``); callers keep two
distinct :class:`PerformanceProfile` instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DOMAIN_MARGIN = 1e-9


class BoundaryDomainError(ValueError):
    """Raised when a corridor half-width is not strictly positive."""


@dataclass
class ClampCounter:
    """Counts transform inputs pushed back inside the open corridor."""

    count: int = 0

    def add(self, n: int) -> None:
        self.count += int(n)


@dataclass(frozen=True)
class PerformanceProfile:
    """``rho(t) = rho_inf * csc(pi t / 2T)`` on ``[0, T]``, ``rho_inf`` afterwards.

    ``csc`` diverges at ``t = 0``; values are capped at ``rho_cap``
    (default ``1e3 * rho_inf``) and the capped plateau reports zero
    derivatives.
    """

    rho_inf: float
    horizon: float
    rho_cap: float | None = None
    _t_cap: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.rho_inf <= 0 or self.horizon <= 0:
            raise ValueError("rho_inf and horizon must be positive")
        cap = self.rho_cap if self.rho_cap is not None else 1e3 * self.rho_inf
        if cap < self.rho_inf:
            raise ValueError("rho_cap must be >= rho_inf")
        object.__setattr__(self, "rho_cap", float(cap))
        # csc(theta) == cap / rho_inf at the plateau edge
        t_cap = 2.0 * self.horizon / math.pi * math.asin(self.rho_inf / cap)
        object.__setattr__(self, "_t_cap", t_cap)

    @property
    def rho_max(self) -> float:
        return self.rho_cap

    def evaluate(self, t: float) -> tuple[float, float, float]:
        """Return ``(rho, rho_dot, rho_ddot)`` at scalar time ``t``."""
        if t > self.horizon:
            return self.rho_inf, 0.0, 0.0
        if t <= self._t_cap:
            return self.rho_cap, 0.0, 0.0
        w = math.pi / (2.0 * self.horizon)
        theta = w * t
        csc = 1.0 / math.sin(theta)
        cot = math.cos(theta) * csc
        rho = self.rho_inf * csc
        rho_dot = -w * rho * cot
        rho_ddot = w * w * rho * (cot * cot + csc * csc)
        return rho, rho_dot, rho_ddot


def rho(profile: PerformanceProfile, t: float) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    return profile.evaluate(t)[0]


def rho_derivatives(profile: PerformanceProfile, t: float) -> tuple[float, float]:
    if t < 0:
        raise ValueError("t must be >= 0")
    _, d1, d2 = profile.evaluate(t)
    return d1, d2


def _clamp(x, lo, hi, counter: ClampCounter | None):
    x = np.asarray(x, dtype=float)
    out = np.clip(x, lo, hi)
    if counter is not None:
        counter.add(np.count_nonzero(out != x))
    return out if out.ndim else float(out)


def transform_sym(x, counter: ClampCounter | None = None):
    """Symmetric barrier map ``0.5 * ln((1 + x) / (1 - x))`` on ``(-1, 1)``."""
    lim = 1.0 - DOMAIN_MARGIN
    x = _clamp(x, -lim, lim, counter)
    return np.arctanh(x) if isinstance(x, np.ndarray) else math.atanh(x)


def inverse_transform_sym(eps):
    return np.tanh(eps) if isinstance(eps, np.ndarray) else math.tanh(eps)


def _check_halfwidths(lower, upper) -> None:
    if np.any(np.asarray(lower) <= 0) or np.any(np.asarray(upper) <= 0):
        raise BoundaryDomainError("corridor half-widths must be positive")


def transform_asym(x, lower, upper, counter: ClampCounter | None = None):
    """Asymmetric barrier map on ``(-lower, upper)``.

    ``eps = 0.5 * ln((x + lower) / (upper - x))``; it diverges to ``-inf`` at
    the lower wall and ``+inf`` at the upper wall.
    """
    _check_halfwidths(lower, upper)
    x = _clamp(x, -np.asarray(lower) + DOMAIN_MARGIN,
               np.asarray(upper) - DOMAIN_MARGIN, counter)
    return 0.5 * np.log((x + lower) / (upper - x))


def inverse_transform_asym(eps, lower, upper):
    e2 = np.exp(2.0 * np.asarray(eps, dtype=float))
    x = (upper * e2 - lower) / (1.0 + e2)
    return x if x.ndim else float(x)


def asym_slope(x, lower, upper):
    """``d eps / d x`` of :func:`transform_asym` (always positive inside)."""
    return 0.5 * (1.0 / (x + lower) + 1.0 / (upper - x))


def asym_slope_dx(x, lower, upper):
    """Second derivative ``d^2 eps / d x^2`` of :func:`transform_asym`."""
    return 0.5 * (1.0 / (upper - x) ** 2 - 1.0 / (x + lower) ** 2)


def transform_factors(x, profile: PerformanceProfile, t: float):
    """Return ``(r, gamma)`` for the symmetric transform.

    ``r = 1 / (rho (1 + x)(1 - x))`` is the slope of ``eps`` w.r.t. the raw
    error and ``gamma = rho_dot / rho``.
    """
    rho_t, rho_dot, _ = profile.evaluate(t)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        raise BoundaryDomainError("normalized error outside (-1, 1)")
    r = 1.0 / (rho_t * (1.0 + x) * (1.0 - x))
    gamma = rho_dot / rho_t
    return (r if r.ndim else float(r)), gamma


def transform_factors_asym(x, lower, upper, rho_t: float):
    """Slope factor of the asymmetric transform w.r.t. the raw error."""
    _check_halfwidths(lower, upper)
    return asym_slope(x, lower, upper) / rho_t
