"""Scenario configuration: TOML schema, loading and validation.

Schema (all sections optional except where a default cannot be inferred;
see ``data/paper_scenario.toml`` for the canonical example)::

    [simulation]  dt, duration, seed, fidelity ("simplified" | "full"), output
    [agents]      uav_initial = [[x, y, z], ...], ugv_initial = [[x, y], ...],
                  ugv_heading = <rad> | [<rad>, ...]
    [uav]         mass, ix, iy, iz, ir, omega_bar, g, yaw
    [ugv]         mass, inertia, wheel_radius, half_track, offset
    [attitude]    kp, kd
    [topology]    edges = [[src, dst], ...]  (0 = leader, followers 1..N+M)
                  weights = [...]  (optional, default 1)
                  laws_laplacian = "nominal" | "faulted"
    [[faults]]    edge = [src, dst], t_on, t_off, amplitude, frequency,
                  noise = "held" | "smoothed" | "none", tau
    [performance] horizon, rho_inf, rho_eps_inf, rho_cap, rho_eps_cap
    [observer]    k1, k2, eta, p, sigma1, sigma2
    [controller]  lambda_s, k_s, omega_a, delta1, delta2
    [saturation]  uav_lo, uav_hi  ([x, y, z]), ugv_lo, ugv_hi  ([x, y])
    [leader]      t0, altitude, amplitude, omega, speed
    [formation]   uav_radius, uav_rate, ugv_radius, ugv_rate

Gain values accept a number, an ``{x, y, z}`` table, or a list with one
entry (number or table) per agent.
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..dynamics import GRAVITY, AttitudeGains, LeaderTrajectory, QuadParams, UgvParams
from ..graph import (FaultEntry, FaultSchedule, PerturbationSpec, TopologySpec,
                     has_leader_spanning_tree)
from ..observer import ObserverGains
from ..ppc import PerformanceProfile

AXES = ("x", "y", "z")
FIDELITIES = ("simplified", "full")
BUNDLED_SCENARIO = "paper_scenario.toml"


class ConfigParseError(ValueError):
    def __init__(self, path, line: int | None, column: int | None, msg: str):
        self.path, self.line, self.column = path, line, column
        where = f"{path}:{line}:{column}" if line is not None else str(path)
        super().__init__(f"{where}: {msg}")


class ConfigValidationError(ValueError):
    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))


@dataclass(frozen=True)
class ChannelGains:
    """Per-channel controller parameters (flat over agent/axis channels)."""

    lambda_s: np.ndarray
    k_s: np.ndarray
    omega_a: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray


@dataclass
class ScenarioConfig:
    raw: dict
    n_uav: int
    n_ugv: int
    uav_initial: np.ndarray
    ugv_initial: np.ndarray
    ugv_heading: np.ndarray
    uav: QuadParams
    ugv: UgvParams
    yaw: float
    attitude: AttitudeGains
    topology: TopologySpec
    faults: FaultSchedule
    laws_laplacian: str
    profile: PerformanceProfile
    profile_eps: PerformanceProfile
    observer: dict          # name -> (n_agents, 3) array
    controller: dict        # name -> (n_agents, 3) array
    uav_lo: np.ndarray
    uav_hi: np.ndarray
    ugv_lo: np.ndarray
    ugv_hi: np.ndarray
    leader: LeaderTrajectory
    formation: dict
    dt: float
    duration: float
    seed: int
    fidelity: str
    output: str
    source: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.n_uav + self.n_ugv

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def is_uav(self, i: int) -> bool:
        return i < self.n_uav

    def replace(self, **overrides) -> "ScenarioConfig":
        """Rebuild with dotted-path overrides, e.g. ``{"simulation.seed": 3}``."""
        raw = copy.deepcopy(self.raw)
        for key, value in overrides.items():
            set_path(raw, key, value)
        return build_config(raw, source=self.source)


def set_path(raw: dict, dotted: str, value) -> None:
    node = raw
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


# --------------------------------------------------------------------------
# loading

_LOC = re.compile(r"\(at line (\d+), column (\d+)\)")


def parse_text(text: str, path: str = "<string>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LOC.search(str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigParseError(path, line, col, _LOC.sub("", str(exc)).strip()) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(path, None, None, f"cannot read file: {exc}") from exc
    return build_config(parse_text(text, str(path)), source=str(path))


def paper_scenario_text() -> str:
    return resources.files("ppcform.scenario.data").joinpath(BUNDLED_SCENARIO).read_text()


def paper_scenario() -> ScenarioConfig:
    return build_config(parse_text(paper_scenario_text(), BUNDLED_SCENARIO),
                        source=BUNDLED_SCENARIO)


# --------------------------------------------------------------------------
# validation helpers

class _Collector:
    def __init__(self):
        self.errors: list[tuple[str, str]] = []

    def add(self, path: str, msg: str) -> None:
        self.errors.append((path, msg))

    def number(self, sec: dict, key: str, path: str, default=None, positive=False,
               nonneg=False):
        value = sec.get(key, default)
        full = f"{path}.{key}"
        if value is None:
            self.add(full, "required")
            return math.nan
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(full, f"expected a number, got {value!r}")
            return math.nan
        value = float(value)
        if not math.isfinite(value):
            self.add(full, "must be finite")
        elif positive and value <= 0:
            self.add(full, "must be > 0")
        elif nonneg and value < 0:
            self.add(full, "must be >= 0")
        return value

    def vector(self, value, length: int, path: str):
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            self.add(path, f"expected {length} numbers")
            return np.full(length, np.nan)
        if arr.shape != (length,) or not np.all(np.isfinite(arr)):
            self.add(path, f"expected {length} finite numbers")
            return np.full(length, np.nan)
        return arr


def _axis_table(value, path: str, col: _Collector) -> np.ndarray:
    if isinstance(value, dict):
        out = np.full(3, np.nan)
        for k, v in value.items():
            if k not in AXES:
                col.add(f"{path}.{k}", "unknown axis")
                continue
            out[AXES.index(k)] = col.number(value, k, path)
        for a, ax in enumerate(AXES):
            if ax not in value:
                out[a] = out[0] if ax == "z" and not np.isnan(out[0]) else np.nan
                if np.isnan(out[a]):
                    col.add(f"{path}.{ax}", "required")
        return out
    v = col.number({"_": value}, "_", path)
    return np.full(3, v)


def broadcast_gain(value, n: int, path: str, col: _Collector, positive=True) -> np.ndarray:
    """Expand a gain spec to an ``(n, 3)`` array."""
    if isinstance(value, list):
        if len(value) != n:
            col.add(path, f"expected {n} per-agent entries, got {len(value)}")
            return np.full((n, 3), np.nan)
        out = np.stack([_axis_table(v, f"{path}[{i}]", col) for i, v in enumerate(value)])
    else:
        out = np.tile(_axis_table(value, path, col), (n, 1))
    if positive and np.any(out <= 0):
        col.add(path, "all gains must be > 0")
    return out


def _edges(topo: dict, n: int, col: _Collector):
    edges = topo.get("edges")
    if not isinstance(edges, list) or not edges:
        col.add("topology.edges", "required non-empty list of [src, dst]")
        return [], []
    out = []
    for k, e in enumerate(edges):
        if (not isinstance(e, list) or len(e) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
            col.add(f"topology.edges[{k}]", "expected [src, dst] integers")
            continue
        src, dst = e
        if not (0 <= src <= n and 1 <= dst <= n):
            col.add(f"topology.edges[{k}]", f"agent ids must be in 0..{n} (dst >= 1)")
        elif src == dst:
            col.add(f"topology.edges[{k}]", "self-loops are not allowed")
        else:
            out.append((src, dst))
    weights = topo.get("weights", [1.0] * len(out))
    if not isinstance(weights, list) or len(weights) != len(edges):
        col.add("topology.weights", "must list one weight per edge")
        weights = [1.0] * len(out)
    ws = []
    for k, w in enumerate(weights[:len(out)]):
        ws.append(col.number({"w": w}, "w", f"topology.weights[{k}]", positive=True))
    return out, ws


# --------------------------------------------------------------------------
# build

def build_config(raw: dict, source: str | None = None) -> ScenarioConfig:
    col = _Collector()
    sim = raw.get("simulation", {})
    dt = col.number(sim, "dt", "simulation", 0.001, positive=True)
    duration = col.number(sim, "duration", "simulation", 30.0, positive=True)
    seed = sim.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        col.add("simulation.seed", "must be a non-negative integer")
        seed = 0
    fidelity = sim.get("fidelity", "simplified")
    if fidelity not in FIDELITIES:
        col.add("simulation.fidelity", f"must be one of {FIDELITIES}")
    output = str(sim.get("output", "out"))

    agents = raw.get("agents", {})
    uav0 = agents.get("uav_initial", [])
    ugv0 = agents.get("ugv_initial", [])
    try:
        uav_initial = np.asarray(uav0, dtype=float).reshape(-1, 3)
    except ValueError:
        col.add("agents.uav_initial", "expected a list of [x, y, z]")
        uav_initial = np.zeros((0, 3))
    try:
        ugv_initial = np.asarray(ugv0, dtype=float).reshape(-1, 2)
    except ValueError:
        col.add("agents.ugv_initial", "expected a list of [x, y]")
        ugv_initial = np.zeros((0, 2))
    n_uav, n_ugv = len(uav_initial), len(ugv_initial)
    n = n_uav + n_ugv
    if n_uav == 0:
        col.add("agents.uav_initial", "at least one UAV is required")
    heading = agents.get("ugv_heading", 0.0)
    ugv_heading = (col.vector(heading, n_ugv, "agents.ugv_heading")
                   if isinstance(heading, list)
                   else np.full(n_ugv, col.number(agents, "ugv_heading", "agents", 0.0)))

    u = raw.get("uav", {})
    uav = QuadParams(
        mass=col.number(u, "mass", "uav", 1.5, positive=True),
        ix=col.number(u, "ix", "uav", 0.02, positive=True),
        iy=col.number(u, "iy", "uav", 0.02, positive=True),
        iz=col.number(u, "iz", "uav", 0.04, positive=True),
        ir=col.number(u, "ir", "uav", 0.0, nonneg=True),
        omega_bar=col.number(u, "omega_bar", "uav", 0.0),
        g=col.number(u, "g", "uav", GRAVITY, positive=True))
    yaw = col.number(u, "yaw", "uav", 0.0)
    g = raw.get("ugv", {})
    ugv = UgvParams(
        mass=col.number(g, "mass", "ugv", 1.0, positive=True),
        inertia=col.number(g, "inertia", "ugv", 0.02, positive=True),
        wheel_radius=col.number(g, "wheel_radius", "ugv", 0.02, positive=True),
        half_track=col.number(g, "half_track", "ugv", 0.1, positive=True),
        offset=col.number(g, "offset", "ugv", 0.2, positive=True))
    att = raw.get("attitude", {})
    attitude = AttitudeGains(kp=col.number(att, "kp", "attitude", 2500.0, positive=True),
                             kd=col.number(att, "kd", "attitude", 100.0, positive=True))

    topo = raw.get("topology", {})
    edges, weights = _edges(topo, n, col)
    topology = TopologySpec.from_edges(n, edges, weights) if n else TopologySpec(
        np.zeros((0, 0)), np.zeros(0))
    if n and edges and not has_leader_spanning_tree(topology):
        col.add("topology.edges",
                "graph has no spanning tree rooted at the leader (Assumption 1)")
    if n_uav and edges and not has_leader_spanning_tree(topology.restrict(range(n_uav))):
        col.add("topology.edges",
                "UAV subgraph (z axis) has no spanning tree rooted at the leader")
    laws = topo.get("laws_laplacian", "nominal")
    if laws not in ("nominal", "faulted"):
        col.add("topology.laws_laplacian", "must be 'nominal' or 'faulted'")

    entries = []
    fault_list = raw.get("faults", [])
    if not isinstance(fault_list, list):
        col.add("faults", "must be an array of tables")
        fault_list = []
    for k, f in enumerate(fault_list):
        path = f"faults[{k}]"
        e = f.get("edge")
        if not (isinstance(e, list) and len(e) == 2 and tuple(e) in set(edges)):
            col.add(f"{path}.edge", "must name an existing edge [src, dst]")
            continue
        t_on = col.number(f, "t_on", path, nonneg=True)
        t_off = col.number(f, "t_off", path, nonneg=True)
        if not t_on < t_off:
            col.add(path, "fault window needs t_on < t_off")
            continue
        amp = col.number(f, "amplitude", path, 0.5, nonneg=True)
        nominal = topology.nominal_weight(tuple(e))
        if amp >= nominal:
            col.add(f"{path}.amplitude",
                    "perturbation may flip the link sign (Assumption 3); "
                    "amplitude must be below the nominal weight")
        noise = f.get("noise", "held")
        if noise not in ("held", "smoothed", "none"):
            col.add(f"{path}.noise", "must be 'held', 'smoothed' or 'none'")
            continue
        pert = PerturbationSpec(amp, col.number(f, "frequency", path, 1.0),
                                noise, col.number(f, "tau", path, 0.5, positive=True))
        entries.append(FaultEntry(tuple(e), t_on, t_off, pert))

    perf = raw.get("performance", {})
    horizon = col.number(perf, "horizon", "performance", 5.0, positive=True)
    rho_inf = col.number(perf, "rho_inf", "performance", 0.1, positive=True)
    rho_eps_inf = col.number(perf, "rho_eps_inf", "performance", 0.3, positive=True)
    caps = {}
    for key, base in (("rho_cap", rho_inf), ("rho_eps_cap", rho_eps_inf)):
        caps[key] = col.number(perf, key, "performance", 1e3 * base, positive=True)
        if caps[key] < base:
            col.add(f"performance.{key}", "must be >= the terminal bound")

    obs = raw.get("observer", {})
    obs_defaults = dict(k1=2.0, k2=50.0, eta=1.0, p=1.0, sigma1=0.01, sigma2=0.01)
    observer = {k: broadcast_gain(obs.get(k, d), n, f"observer.{k}", col)
                for k, d in obs_defaults.items()}
    if n and math.isfinite(dt):
        smin = min(np.nanmin(observer["sigma1"]), np.nanmin(observer["sigma2"]))
        if dt > smin / 5.0 + 1e-15:
            col.add("simulation.dt",
                    f"dt={dt} exceeds min(sigma)/5={smin / 5.0:g}; filters would be unstable")

    ctl = raw.get("controller", {})
    ctl_defaults = dict(lambda_s=5.0, k_s={"x": 5.0, "y": 5.0, "z": 10.0},
                        omega_a=8.0, delta1=1.0, delta2=1.0)
    controller = {k: broadcast_gain(ctl.get(k, d), n, f"controller.{k}", col)
                  for k, d in ctl_defaults.items()}

    sat = raw.get("saturation", {})
    uav_lo = col.vector(sat.get("uav_lo", [-10.0, -10.0, -GRAVITY + 0.5]), 3, "saturation.uav_lo")
    uav_hi = col.vector(sat.get("uav_hi", [10.0, 10.0, 10.0]), 3, "saturation.uav_hi")
    ugv_lo = col.vector(sat.get("ugv_lo", [-5.0, -5.0]), 2, "saturation.ugv_lo")
    ugv_hi = col.vector(sat.get("ugv_hi", [5.0, 5.0]), 2, "saturation.ugv_hi")
    if np.any(uav_lo >= uav_hi):
        col.add("saturation.uav_lo", "must be below uav_hi on every axis")
    if np.any(ugv_lo >= ugv_hi):
        col.add("saturation.ugv_lo", "must be below ugv_hi on every axis")
    if np.any(uav_lo >= 0) or np.any(uav_hi <= 0) or np.any(ugv_lo >= 0) or np.any(ugv_hi <= 0):
        col.add("saturation", "limits must bracket zero (hover must be feasible)")

    ld = raw.get("leader", {})
    leader = LeaderTrajectory(
        t0=col.number(ld, "t0", "leader", 5.0, positive=True),
        altitude=col.number(ld, "altitude", "leader", 4.0),
        amplitude=col.number(ld, "amplitude", "leader", 2.0),
        omega=col.number(ld, "omega", "leader", 0.5),
        speed=col.number(ld, "speed", "leader", 1.0))

    fm = raw.get("formation", {})
    formation = dict(uav_radius=col.number(fm, "uav_radius", "formation", 3.0, nonneg=True),
                     uav_rate=col.number(fm, "uav_rate", "formation", 0.5),
                     ugv_radius=col.number(fm, "ugv_radius", "formation", 2.0, nonneg=True),
                     ugv_rate=col.number(fm, "ugv_rate", "formation", 0.3))

    if col.errors:
        raise ConfigValidationError(col.errors)

    cfg = ScenarioConfig(
        raw=raw, n_uav=n_uav, n_ugv=n_ugv, uav_initial=uav_initial,
        ugv_initial=ugv_initial, ugv_heading=ugv_heading, uav=uav, ugv=ugv, yaw=yaw,
        attitude=attitude, topology=topology, faults=FaultSchedule(tuple(entries)),
        laws_laplacian=laws,
        profile=PerformanceProfile(rho_inf, horizon, caps["rho_cap"]),
        profile_eps=PerformanceProfile(rho_eps_inf, horizon, caps["rho_eps_cap"]),
        observer=observer, controller=controller, uav_lo=uav_lo, uav_hi=uav_hi,
        ugv_lo=ugv_lo, ugv_hi=ugv_hi, leader=leader, formation=formation, dt=dt,
        duration=duration, seed=seed, fidelity=fidelity, output=output, source=source)
    _check_initial_feasibility(cfg)
    return cfg


def _check_initial_feasibility(cfg: ScenarioConfig) -> None:
    """Both corridors must contain the initial errors strictly."""
    from .sim import Layout, initial_errors

    layout = Layout.from_config(cfg)
    xi_p, e_p = initial_errors(cfg, layout)
    rho0 = cfg.profile.evaluate(0.0)[0]
    rho_e0 = cfg.profile_eps.evaluate(0.0)[0]
    errors = []
    for c in np.flatnonzero(np.abs(xi_p) >= rho0):
        errors.append((f"agents[{layout.agent[c] + 1}].{AXES[layout.axis[c]]}",
                       f"initial neighborhood error {xi_p[c]:.3g} outside +-rho(0)={rho0:.3g}"))
    lo = -layout.gain(cfg.controller["delta1"]) * rho_e0
    hi = layout.gain(cfg.controller["delta2"]) * rho_e0
    for c in np.flatnonzero((e_p <= lo) | (e_p >= hi)):
        errors.append((f"agents[{layout.agent[c] + 1}].{AXES[layout.axis[c]]}",
                       f"initial tracking error {e_p[c]:.3g} outside the corridor"))
    if errors:
        raise ConfigValidationError(errors)


def load_raw(path: str | Path) -> dict:
    return parse_text(Path(path).read_text(), str(path))


def default_raw() -> dict[str, Any]:
    return parse_text(paper_scenario_text(), BUNDLED_SCENARIO)
