"""Run metrics computed from a trace (or a trace re-read from CSV)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

STEADY_WINDOW = 5.0


@dataclass(frozen=True)
class RunMetrics:
    observer_violations: int
    tracking_violations: int
    steady_max_xi_p: float
    steady_max_e_p: float
    convergence_time: float          # nan if never converged
    containment_ratio: float         # over t > horizon; nan without UGVs
    saturation_duty: float
    duration: float

    def as_dict(self) -> dict:
        return asdict(self)

    def equals(self, other: "RunMetrics") -> bool:
        a, b = self.as_dict(), other.as_dict()
        return all(a[k] == b[k] or (isinstance(a[k], float) and math.isnan(a[k])
                                    and math.isnan(b[k])) for k in a)


def observer_violation_mask(trace) -> np.ndarray:
    return ~(np.abs(trace["xi_p"]) < trace.rho[:, None])


def tracking_violation_mask(trace) -> np.ndarray:
    e = trace["e_p"]
    return ~((trace["bound_lo"] < e) & (e < trace["bound_hi"]))


def convergence_time(trace, bound: float | None = None) -> float:
    """First time after which every ``|xi_p| < bound`` holds to the end."""
    bound = trace.rho_inf if bound is None else bound
    ok = np.all(np.abs(trace["xi_p"]) < bound, axis=1)
    if not ok.size or not ok[-1]:
        return math.nan
    bad = np.flatnonzero(~ok)
    return float(trace.t[0] if not bad.size else trace.t[bad[-1] + 1])


def points_in_hull(points: np.ndarray, vertices: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Batched point-in-convex-hull test.

    ``points``: ``(T, P, 2)``; ``vertices``: ``(T, V, 2)``.  A point is
    outside iff some vertex pair spans a hull edge with every vertex on one
    side and the point strictly on the other.
    """
    T, P, _ = points.shape
    inside = np.ones((T, P), dtype=bool)
    V = vertices.shape[1]
    for a, b in combinations(range(V), 2):
        pa, pb = vertices[:, a], vertices[:, b]
        d = pb - pa
        cross_v = d[:, None, 0] * (vertices[..., 1] - pa[:, None, 1]) - \
            d[:, None, 1] * (vertices[..., 0] - pa[:, None, 0])
        cross_p = d[:, None, 0] * (points[..., 1] - pa[:, None, 1]) - \
            d[:, None, 1] * (points[..., 0] - pa[:, None, 0])
        left = np.all(cross_v >= -tol, axis=1)
        right = np.all(cross_v <= tol, axis=1)
        out = (left[:, None] & (cross_p < -tol)) | (right[:, None] & (cross_p > tol))
        inside &= ~out
    return inside


def planar_positions(trace):
    """``(T, n_uav, 2)`` and ``(T, n_ugv, 2)`` x/y positions."""
    lay = trace.layout
    xp = trace["xp"]
    uav = np.stack([np.stack([xp[:, lay.channel(i, 0)], xp[:, lay.channel(i, 1)]], -1)
                    for i in range(lay.n_uav)], axis=1)
    ugv_ids = range(lay.n_uav, lay.n_agents)
    if not len(ugv_ids):
        return uav, np.zeros((len(trace.t), 0, 2))
    ugv = np.stack([np.stack([xp[:, lay.channel(i, 0)], xp[:, lay.channel(i, 1)]], -1)
                    for i in ugv_ids], axis=1)
    return uav, ugv


def containment_series(trace) -> np.ndarray:
    """``(T, n_ugv)`` booleans: UGV inside the hull of UAV planar positions."""
    uav, ugv = planar_positions(trace)
    return points_in_hull(ugv, uav)


def containment_ratio(trace, t_from: float) -> float:
    sel = trace.t > t_from
    if trace.layout.n_agents == trace.layout.n_uav or not sel.any():
        return math.nan
    uav, ugv = planar_positions(trace)
    return float(points_in_hull(ugv[sel], uav[sel]).mean())


def compute_metrics(trace) -> RunMetrics:
    t = trace.t
    if not len(t):
        return RunMetrics(0, 0, math.nan, math.nan, math.nan, math.nan, math.nan, 0.0)
    steady = t >= t[-1] - STEADY_WINDOW
    return RunMetrics(
        observer_violations=int(observer_violation_mask(trace).sum()),
        tracking_violations=int(tracking_violation_mask(trace).sum()),
        steady_max_xi_p=float(np.max(np.abs(trace["xi_p"][steady]))),
        steady_max_e_p=float(np.max(np.abs(trace["e_p"][steady]))),
        convergence_time=convergence_time(trace),
        containment_ratio=containment_ratio(trace, trace.horizon),
        saturation_duty=float(np.mean(trace["du"] != 0.0)),
        duration=float(t[-1]),
    )
