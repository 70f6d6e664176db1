"""Directed leader-follower topology with time-windowed link-weight faults.

Agents are indexed ``0..n-1`` internally (agent ``k+1`` in configs).  Edge
weights follow the receiver convention: ``adjacency[i, j] > 0`` means agent
``i`` listens to agent ``j``; ``pinning[i] > 0`` means agent ``i`` listens to
the leader.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LEADER = 0  # node id of the leader in edge tuples; followers are 1..n
CLAMP_FRACTION = 0.05
DEGENERATE_TOL = 1e-9
NOISE_MODES = ("held", "smoothed", "none")


class DegenerateTopologyError(RuntimeError):
    pass


@dataclass(frozen=True)
class TopologySpec:
    adjacency: np.ndarray
    pinning: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.adjacency, dtype=float)
        b = np.array(self.pinning, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise ValueError("adjacency must be n x n and pinning length n")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops are not allowed")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("weights must be non-negative")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "pinning", b)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]],
                   weights: Sequence[float] | None = None) -> "TopologySpec":
        """Build from ``(source, target)`` pairs using 1-based follower ids
        and ``0`` for the leader."""
        a = np.zeros((n, n))
        b = np.zeros(n)
        weights = [1.0] * len(edges) if weights is None else weights
        for (src, dst), w in zip(edges, weights):
            if not 1 <= dst <= n or not 0 <= src <= n:
                raise ValueError(f"edge {src}->{dst} out of range")
            if src == LEADER:
                b[dst - 1] = w
            else:
                a[dst - 1, src - 1] = w
        return cls(a, b)

    def nominal_weight(self, edge: tuple[int, int]) -> float:
        src, dst = edge
        if src == LEADER:
            return float(self.pinning[dst - 1])
        return float(self.adjacency[dst - 1, src - 1])

    def laplacian(self) -> np.ndarray:
        """Fault-free Laplacian with pinning on the diagonal."""
        return np.diag(self.adjacency.sum(axis=1) + self.pinning) - self.adjacency

    def restrict(self, agents: Sequence[int]) -> "TopologySpec":
        idx = np.asarray(agents)
        return TopologySpec(self.adjacency[np.ix_(idx, idx)], self.pinning[idx])


@dataclass(frozen=True)
class PerturbationSpec:
    """``amplitude * sin(frequency * t) * noise(t)`` with ``noise`` in [0, 1]."""

    amplitude: float = 0.5
    frequency: float = 1.0
    noise_mode: str = "held"
    tau: float = 0.5

    def __post_init__(self) -> None:
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
        if self.noise_mode == "smoothed" and self.tau <= 0:
            raise ValueError("tau must be positive for smoothed noise")

    def value(self, t: float, noise: float) -> float:
        if self.noise_mode == "none":
            noise = 1.0
        return self.amplitude * math.sin(self.frequency * t) * noise


@dataclass(frozen=True)
class FaultEntry:
    edge: tuple[int, int]
    t_on: float
    t_off: float
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)

    def __post_init__(self) -> None:
        if not self.t_on < self.t_off:
            raise ValueError("fault window needs t_on < t_off")

    def active(self, t: float) -> bool:
        return self.t_on <= t <= self.t_off


@dataclass(frozen=True)
class FaultSchedule:
    entries: tuple[FaultEntry, ...] = ()

    def realize(self, seed: int, dt: float, n_steps: int) -> "FaultRealization":
        """Draw every noise sample of a run up front.

        Sample ``k`` of entry ``e`` depends only on ``(seed, e)`` and ``k``.
        """
        noise = []
        for e, entry in enumerate(self.entries):
            rng = np.random.default_rng([seed, e])
            held = rng.random(n_steps + 1)
            p = entry.perturbation
            if p.noise_mode == "smoothed":
                a = 1.0 - math.exp(-dt / p.tau)
                out = np.empty_like(held)
                acc = held[0]
                for k, h in enumerate(held):
                    out[k] = acc
                    acc += a * (h - acc)
                held = out
            noise.append(held)
        return FaultRealization(self, dt, noise)


@dataclass(frozen=True)
class FaultRealization:
    schedule: FaultSchedule
    dt: float
    noise: list

    def step_index(self, t: float) -> int:
        return int(round(t / self.dt))

    def sample(self, e: int, t: float) -> float:
        k = min(self.step_index(t), len(self.noise[e]) - 1)
        return float(self.noise[e][k])


@dataclass(frozen=True)
class WeightSnapshot:
    t: float
    adjacency: np.ndarray
    pinning: np.ndarray
    active: tuple[bool, ...] = ()
    clamp_events: int = 0


@dataclass(frozen=True)
class FaultedLaplacian:
    t: float
    matrix: np.ndarray
    degrees: np.ndarray
    weights: WeightSnapshot


def effective_weights(spec: TopologySpec, faults: FaultRealization | None,
                      t: float) -> WeightSnapshot:
    """Faulted weights ``a_ij + delta_a_ij(t)`` and ``b_i + delta_b_i(t)``.

    A perturbation that would push a weight below ``CLAMP_FRACTION`` times
    its nominal value is clamped there, so signs never flip.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if faults is None or not faults.schedule.entries:
        return WeightSnapshot(t, spec.adjacency, spec.pinning)
    a = spec.adjacency.copy()
    b = spec.pinning.copy()
    active = []
    clamps = 0
    for e, entry in enumerate(faults.schedule.entries):
        on = entry.active(t)
        active.append(on)
        if not on:
            continue
        nominal = spec.nominal_weight(entry.edge)
        w = nominal + entry.perturbation.value(t, faults.sample(e, t))
        floor = CLAMP_FRACTION * nominal
        if w < floor:
            w = floor
            clamps += 1
        src, dst = entry.edge
        if src == LEADER:
            b[dst - 1] = w
        else:
            a[dst - 1, src - 1] = w
    return WeightSnapshot(t, a, b, tuple(active), clamps)


def build_faulted_laplacian(weights: WeightSnapshot) -> FaultedLaplacian:
    degrees = weights.adjacency.sum(axis=1) + weights.pinning
    matrix = np.diag(degrees) - weights.adjacency
    return FaultedLaplacian(weights.t, matrix, degrees, weights)


def has_leader_spanning_tree(spec: TopologySpec) -> bool:
    """True iff every follower is reachable from the leader."""
    n = spec.n
    seen = np.zeros(n, dtype=bool)
    queue = deque(np.flatnonzero(spec.pinning > 0).tolist())
    seen[queue] = True
    while queue:
        j = queue.popleft()
        # receivers of j
        for i in np.flatnonzero(spec.adjacency[:, j] > 0):
            if not seen[i]:
                seen[i] = True
                queue.append(i)
    return bool(seen.all())


def min_eigen_lower_bound(lap: FaultedLaplacian | np.ndarray) -> float:
    """Smallest singular value of the faulted Laplacian.

    Used in place of the minimum eigenvalue so the bound
    ``||zeta_err|| <= ||xi|| / s_min`` stays valid for non-symmetric matrices.
    """
    m = lap.matrix if isinstance(lap, FaultedLaplacian) else np.asarray(lap)
    s = np.linalg.svd(m, compute_uv=False)
    smin = float(s[-1]) if s.size else 0.0
    if smin < DEGENERATE_TOL:
        raise DegenerateTopologyError(f"smallest singular value {smin:.3e}")
    return smin
