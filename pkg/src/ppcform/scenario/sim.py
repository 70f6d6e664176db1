"""Closed-loop simulation of the observer, controller and plants."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import controller as ctl
from ..controller import AuxiliaryState
from ..dynamics import (QuadrotorPlant, UgvPlant, integrate, inner_loop_attitude,
                        quad_derivative, ugv_derivative)
from ..graph import DegenerateTopologyError, effective_weights
from ..observer import ObserverGains, observer_derivative
from ..ppc import DOMAIN_MARGIN, ClampCounter
from .config import AXES, ScenarioConfig

log = logging.getLogger(__name__)

TRACE_FIELDS = ("xp", "xv", "zeta_p", "zeta_v", "xi_p", "xi_v", "e_p", "e_v",
                "bound_lo", "bound_hi", "eps", "s", "v", "u", "du", "xa")


class SimulationAbort(RuntimeError):
    """A run stopped early; ``agent`` is 1-based, ``axis`` one of x/y/z."""

    def __init__(self, reason: str, t: float, agent: int | None = None,
                 axis: str | None = None, detail: str = ""):
        self.reason, self.t, self.agent, self.axis = reason, t, agent, axis
        where = f" agent {agent} axis {axis}" if agent is not None else ""
        super().__init__(f"{reason} at t={t:.4f}{where}{': ' + detail if detail else ''}")


@dataclass(frozen=True)
class Layout:
    """Flat channel indexing: one channel per (agent, axis), agent-major."""

    agent: np.ndarray
    axis: np.ndarray
    n_agents: int
    n_uav: int

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Layout":
        agent, axis = [], []
        for i in range(cfg.n_agents):
            for a in range(3 if cfg.is_uav(i) else 2):
                agent.append(i)
                axis.append(a)
        return cls(np.array(agent), np.array(axis), cfg.n_agents, cfg.n_uav)

    @property
    def size(self) -> int:
        return len(self.agent)

    @property
    def is_uav(self) -> np.ndarray:
        return self.agent < self.n_uav

    def gain(self, arr: np.ndarray) -> np.ndarray:
        return np.asarray(arr)[self.agent, self.axis]

    def channel(self, agent: int, axis: int) -> int:
        hits = np.flatnonzero((self.agent == agent) & (self.axis == axis))
        if not hits.size:
            raise KeyError((agent, axis))
        return int(hits[0])

    def block_laplacian(self, adjacency: np.ndarray, pinning: np.ndarray):
        """Stacked Laplacian over channels (couples equal axes only) and the
        stacked pinning vector."""
        same = self.axis[:, None] == self.axis[None, :]
        a = np.where(same, adjacency[self.agent[:, None], self.agent[None, :]], 0.0)
        b = pinning[self.agent]
        return np.diag(a.sum(axis=1) + b) - a, b


def formation_phase(cfg: ScenarioConfig, i: int) -> tuple[float, float, float]:
    """``(radius, rate, phase)`` of agent ``i`` (0-based).

    The phase uses the global 1-based agent number: ``2 pi k / N`` for UAVs
    and ``2 pi k / M`` for UGVs.
    """
    f = cfg.formation
    k = i + 1
    if cfg.is_uav(i):
        return f["uav_radius"], f["uav_rate"], 2.0 * math.pi * k / cfg.n_uav
    return f["ugv_radius"], f["ugv_rate"], 2.0 * math.pi * k / cfg.n_ugv


def formation_plan_eval(cfg: ScenarioConfig, i: int, t: float):
    """Formation offset, its velocity and acceleration for agent ``i``.

    Returns arrays of length 3 for UAVs (zero z-offset) and 2 for UGVs.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    radius, rate, phase = formation_phase(cfg, i)
    ang = rate * t + phase
    c, s = math.cos(ang), math.sin(ang)
    hp = [radius * c, radius * s]
    hv = [-radius * rate * s, radius * rate * c]
    ha = [-radius * rate**2 * c, -radius * rate**2 * s]
    if cfg.is_uav(i):
        hp.append(0.0)
        hv.append(0.0)
        ha.append(0.0)
    return np.array(hp), np.array(hv), np.array(ha)


class _FormationVec:
    def __init__(self, cfg: ScenarioConfig, layout: Layout):
        params = np.array([formation_phase(cfg, i) for i in range(cfg.n_agents)])
        self.radius = params[layout.agent, 0] * (layout.axis < 2)
        self.rate = params[layout.agent, 1]
        self.phase = params[layout.agent, 2]
        self.is_x = layout.axis == 0

    def __call__(self, t: float):
        ang = self.rate * t + self.phase
        c, s = np.cos(ang), np.sin(ang)
        r, w = self.radius, self.rate
        hp = r * np.where(self.is_x, c, s)
        hv = r * w * np.where(self.is_x, -s, c)
        ha = -r * w * w * np.where(self.is_x, c, s)
        return hp, hv, ha


def initial_positions(cfg: ScenarioConfig, layout: Layout) -> np.ndarray:
    pos = np.zeros(layout.size)
    for c, (i, a) in enumerate(zip(layout.agent, layout.axis)):
        pos[c] = (cfg.uav_initial[i, a] if cfg.is_uav(i)
                  else cfg.ugv_initial[i - cfg.n_uav, a])
    return pos


def initial_errors(cfg: ScenarioConfig, layout: Layout):
    """Neighborhood and tracking errors at ``t = 0`` (observers start at each
    agent's own position)."""
    pos = initial_positions(cfg, layout)
    p0, _, _ = cfg.leader.state(0.0)
    lap, b = layout.block_laplacian(cfg.topology.adjacency, cfg.topology.pinning)
    xi_p = lap @ pos - b * p0[layout.axis]
    hp, _, _ = _FormationVec(cfg, layout)(0.0)
    return xi_p, pos - hp - p0[layout.axis]


@dataclass
class Trace:
    """Per-step log; channel arrays have shape ``(n_records, n_channels)``."""

    layout: Layout
    t: np.ndarray
    rho: np.ndarray
    rho_eps: np.ndarray
    leader: np.ndarray
    fault_active: np.ndarray
    data: dict
    rho_inf: float
    rho_eps_inf: float
    horizon: float

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    @property
    def n_records(self) -> int:
        return len(self.t)


@dataclass
class RunResult:
    trace: Trace
    metrics: "RunMetrics"
    diagnostics: dict = field(default_factory=dict)
    aborted: SimulationAbort | None = None

    @property
    def ok(self) -> bool:
        return (self.aborted is None and self.metrics.observer_violations == 0
                and self.metrics.tracking_violations == 0)


class Simulation:
    """One configured run; call :meth:`run` once."""

    def __init__(self, cfg: ScenarioConfig, agent_order: np.ndarray | None = None):
        self.cfg = cfg
        self.layout = lay = Layout.from_config(cfg)
        self.C = lay.size
        obs = cfg.observer
        self.gains = ObserverGains(**{k: lay.gain(v) for k, v in obs.items()})
        c = cfg.controller
        self.lambda_s, self.k_s = lay.gain(c["lambda_s"]), lay.gain(c["k_s"])
        self.omega_a = lay.gain(c["omega_a"])
        self.delta1, self.delta2 = lay.gain(c["delta1"]), lay.gain(c["delta2"])
        lo = np.where(lay.is_uav, cfg.uav_lo[lay.axis], cfg.ugv_lo[np.minimum(lay.axis, 1)])
        hi = np.where(lay.is_uav, cfg.uav_hi[lay.axis], cfg.ugv_hi[np.minimum(lay.axis, 1)])
        self.u_lo, self.u_hi = lo, hi
        lap, _ = lay.block_laplacian(cfg.topology.adjacency, cfg.topology.pinning)
        try:
            self.lap_inv = np.linalg.inv(lap)
        except np.linalg.LinAlgError as exc:
            raise DegenerateTopologyError("nominal Laplacian is singular") from exc
        self.lap_t = lap.T.copy()
        self.formation = _FormationVec(cfg, lay)
        # evaluation order of agents inside a step; results must not depend on it
        self.order = np.arange(self.C) if agent_order is None else self._channel_order(agent_order)
        self.realization = cfg.faults.realize(cfg.seed, cfg.dt, cfg.n_steps)
        self.counter = ClampCounter()
        self.weight_clamps = 0

    def _channel_order(self, agent_order):
        return np.concatenate([np.flatnonzero(self.layout.agent == i) for i in agent_order])

    # ------------------------------------------------------------------
    def run(self, raise_on_abort: bool = False) -> RunResult:
        from .metrics import compute_metrics

        cfg, lay, C = self.cfg, self.layout, self.C
        n_rec = cfg.n_steps + 1
        data = {k: np.full((n_rec, C), np.nan) for k in TRACE_FIELDS}
        t_arr = np.arange(n_rec) * cfg.dt
        rho_arr = np.full(n_rec, np.nan)
        rho_eps_arr = np.full(n_rec, np.nan)
        leader_arr = np.full((n_rec, 3), np.nan)
        fault_arr = np.zeros(n_rec, dtype=bool)

        pos0 = initial_positions(cfg, lay)
        # observer (4 rows), auxiliary system (2 rows), simplified plant (2 rows)
        state = np.zeros((8, C))
        state[0] = pos0
        state[6] = pos0
        full = cfg.fidelity == "full"
        if full:
            quad, ugv = self._init_full_plants()

        aborted = None
        n_done = n_rec
        for k in range(n_rec):
            t = t_arr[k]
            try:
                if full:
                    state[6], state[7] = self._full_channel_states(quad, ugv)
                rec = self._control(t, state)
            except (ctl.CorridorCollapseError, DegenerateTopologyError, SimulationAbort) as exc:
                aborted = exc if isinstance(exc, SimulationAbort) else SimulationAbort(
                    type(exc).__name__, t, detail=str(exc))
                n_done = k
                break
            for name in TRACE_FIELDS:
                data[name][k] = rec[name]
            rho_arr[k], rho_eps_arr[k] = rec["rho"], rec["rho_eps"]
            leader_arr[k] = rec["leader"]
            fault_arr[k] = rec["fault_active"]
            if k == n_rec - 1:
                break
            try:
                state = self._advance(t, state, rec)
                if full:
                    quad, ugv = self._advance_full(t, quad, ugv, rec)
            except FloatingPointError as exc:
                aborted = SimulationAbort("non-finite-state", t, detail=str(exc))
                n_done = k + 1
                break

        if aborted is not None:
            log.warning("run aborted: %s", aborted)
            if raise_on_abort:
                raise aborted
            data = {k: v[:n_done] for k, v in data.items()}
            t_arr, rho_arr, rho_eps_arr = t_arr[:n_done], rho_arr[:n_done], rho_eps_arr[:n_done]
            leader_arr, fault_arr = leader_arr[:n_done], fault_arr[:n_done]

        trace = Trace(lay, t_arr, rho_arr, rho_eps_arr, leader_arr, fault_arr, data,
                      cfg.profile.rho_inf, cfg.profile_eps.rho_inf, cfg.profile.horizon)
        diagnostics = {"transform_clamps": self.counter.count,
                       "weight_clamps": self.weight_clamps}
        return RunResult(trace, compute_metrics(trace), diagnostics, aborted)

    # ------------------------------------------------------------------
    def _control(self, t: float, state: np.ndarray) -> dict:
        cfg, lay = self.cfg, self.layout
        ax = lay.axis
        zeta_p, zeta_v, abar2 = state[0], state[1], state[3]
        q1, q2 = state[4], state[5]
        xp, xv = state[6], state[7]

        # (1) faulted weights
        w = effective_weights(cfg.topology, self.realization, t)
        self.weight_clamps += w.clamp_events
        lap_f, b_f = lay.block_laplacian(w.adjacency, w.pinning)
        p0, v0, _ = cfg.leader.state(t)

        # (2) neighborhood errors
        xi_p = lap_f @ zeta_p - b_f * p0[ax]
        xi_v = lap_f @ zeta_v - b_f * v0[ax]

        # (3) observer virtual laws
        rho, rho_dot, _ = cfg.profile.evaluate(t)
        x = xi_p / rho
        lim = 1.0 - DOMAIN_MARGIN
        n_clamp = np.count_nonzero(np.abs(x) > lim)
        if n_clamp:
            self.counter.add(n_clamp)
            x = np.clip(x, -lim, lim)
        eps_o = np.arctanh(x)
        r = 1.0 / (rho * (1.0 - x) * (1.0 + x))
        gamma = rho_dot / rho
        if cfg.laws_laplacian == "faulted":
            lap_inv, lap_t = np.linalg.inv(lap_f), lap_f.T
        else:
            lap_inv, lap_t = self.lap_inv, self.lap_t
        g = self.gains
        alpha1 = -g.k1 * r * eps_o + gamma * (lap_inv @ xi_p)
        alpha2 = -g.eta * g.k2 * xi_v - g.eta * (lap_t @ (r * g.p * eps_o))

        # (4) tracking errors against the formation plan and leader
        hp, hv, ha = self.formation(t)
        e_p = xp - hp - p0[ax]
        e_v = xv - hv - v0[ax]

        # (5) variable corridor
        rho_e = cfg.profile_eps.evaluate(t)
        aux = AuxiliaryState(q1, q2)
        cor = ctl.boundaries(aux, rho_e[0], self.delta1, self.delta2, check=False)
        bad = np.flatnonzero((cor.lower <= ctl.COLLAPSE_TOL) | (cor.upper <= ctl.COLLAPSE_TOL))
        if bad.size:
            c = int(bad[0])
            raise SimulationAbort("corridor-collapse", t, int(lay.agent[c]) + 1, AXES[ax[c]],
                                  f"lower={cor.lower[c]:.4g} upper={cor.upper[c]:.4g}")

        # (6) sliding-mode law, per channel in the configured order
        order = self.order
        terms = ctl.transformed_error_dynamics(e_p[order], e_v[order],
                                               AuxiliaryState(q1[order], q2[order]),
                                               rho_e, self.delta1[order], self.delta2[order],
                                               self.counter)
        v = np.empty(self.C)
        s = np.empty(self.C)
        eps = np.empty(self.C)
        s[order] = ctl.sliding_value(terms, self.lambda_s[order])
        eps[order] = terms.eps
        v[order] = ctl.control_law(terms, AuxiliaryState(q1[order], q2[order]),
                                   self.lambda_s[order], self.k_s[order],
                                   self.omega_a[order], abar2[order], ha[order])

        # (7) saturation
        u, du = ctl.saturate(v, self.u_lo, self.u_hi)
        return dict(xp=xp, xv=xv, zeta_p=zeta_p, zeta_v=zeta_v, xi_p=xi_p, xi_v=xi_v,
                    e_p=e_p, e_v=e_v, bound_lo=cor.bound_lo, bound_hi=cor.bound_hi,
                    eps=eps, s=s, v=v, u=u, du=du, xa=cor.x_a, rho=rho, rho_eps=rho_e[0],
                    leader=p0, fault_active=any(w.active), alpha1=alpha1, alpha2=alpha2)

    def _advance(self, t: float, state: np.ndarray, rec: dict) -> np.ndarray:
        g, w = self.gains, self.omega_a
        alpha1, alpha2, du, u = rec["alpha1"], rec["alpha2"], rec["du"], rec["u"]

        def f(_t, s):
            out = np.empty_like(s)
            out[0:4] = observer_derivative(s[0:4], alpha1, alpha2, g)
            out[4] = s[5]
            out[5] = -w * w * s[4] - 2.0 * w * s[5] + du
            out[6] = s[7]
            out[7] = u
            return out

        return integrate(f, state, t, self.cfg.dt)

    # ------------------------------------------------------------------
    # full-dynamics plants
    def _init_full_plants(self):
        cfg = self.cfg
        quad = np.zeros((cfg.n_uav, 12))
        quad[:, 0:3] = cfg.uav_initial
        quad[:, 8] = cfg.yaw
        ugv = np.zeros((cfg.n_ugv, 5))
        ugv[:, 0:2] = cfg.ugv_initial
        ugv[:, 2] = cfg.ugv_heading
        return quad, ugv

    def _full_channel_states(self, quad, ugv):
        lay = self.layout
        pos = np.empty(self.C)
        vel = np.empty(self.C)
        uav = lay.is_uav
        pos[uav] = quad[lay.agent[uav], lay.axis[uav]]
        vel[uav] = quad[lay.agent[uav], 3 + lay.axis[uav]]
        g = ~uav
        hv = UgvPlant(ugv).hand_velocity(self.cfg.ugv)
        j = lay.agent[g] - self.cfg.n_uav
        pos[g] = ugv[j, lay.axis[g]]
        vel[g] = hv[j, lay.axis[g]]
        return pos, vel

    def _advance_full(self, t, quad, ugv, rec):
        cfg, lay = self.cfg, self.layout
        u = rec["u"]
        if cfg.n_uav:
            uav = lay.is_uav
            ucmd = np.zeros((cfg.n_uav, 3))
            ucmd[lay.agent[uav], lay.axis[uav]] = u[uav]
            try:
                u1, phi_d, theta_d = ctl.uav_input_map(ucmd, cfg.yaw, cfg.uav)
            except ctl.ThrustDegenerateError as exc:
                raise SimulationAbort("thrust-degenerate", t, detail=str(exc)) from exc
            u2, u3, u4 = inner_loop_attitude(QuadrotorPlant(quad), phi_d, theta_d, cfg.yaw,
                                             cfg.uav, cfg.attitude)
            inputs = np.stack([u1, u2, u3, u4], axis=-1)
            quad = integrate(lambda _t, x: quad_derivative(x, inputs, cfg.uav), quad, t, cfg.dt)
        if cfg.n_ugv:
            g = ~lay.is_uav
            ucmd = np.zeros((cfg.n_ugv, 2))
            ucmd[lay.agent[g] - cfg.n_uav, lay.axis[g]] = u[g]
            t1, t2 = ctl.ugv_input_map(ucmd, ugv[:, 2], ugv[:, 3], ugv[:, 4], cfg.ugv)
            torques = np.stack([t1, t2], axis=-1)
            ugv = integrate(lambda _t, x: ugv_derivative(x, torques, cfg.ugv), ugv, t, cfg.dt)
        return quad, ugv


def run(cfg: ScenarioConfig, raise_on_abort: bool = False) -> RunResult:
    return Simulation(cfg).run(raise_on_abort=raise_on_abort)
