import numpy as np

from ppcform.controller import AuxiliaryState
from ppcform.scenario.sim import TRACE_FIELDS, Layout, Trace


def toy_trace(n_steps=3, n_uav=1, n_ugv=0, dt=0.1, horizon=0.05, seed=0):
    """Small synthetic trace: everything well inside both corridors."""
    agent, axis = [], []
    for i in range(n_uav + n_ugv):
        for a in range(3 if i < n_uav else 2):
            agent.append(i)
            axis.append(a)
    lay = Layout(np.array(agent), np.array(axis), n_uav + n_ugv, n_uav)
    rng = np.random.default_rng(seed)
    C = lay.size
    data = {k: rng.uniform(-0.01, 0.01, (n_steps, C)) for k in TRACE_FIELDS}
    data["bound_lo"] = np.full((n_steps, C), -0.3)
    data["bound_hi"] = np.full((n_steps, C), 0.3)
    data["du"] = np.zeros((n_steps, C))
    data["xa"] = np.zeros((n_steps, C))
    t = np.arange(n_steps) * dt
    return Trace(lay, t, np.full(n_steps, 0.1), np.full(n_steps, 0.3),
                 np.zeros((n_steps, 3)), np.zeros(n_steps, dtype=bool), data,
                 0.1, 0.3, horizon)


def random_states(rng, n):
    """Random controller states strictly inside their corridors."""
    rho = rng.uniform(0.3, 5.0, n)
    rho_dot = -rng.uniform(0.0, 3.0, n)
    rho_ddot = rng.uniform(0.0, 5.0, n)
    d1, d2 = rng.uniform(0.5, 2.0, n), rng.uniform(0.5, 2.0, n)
    q1 = rng.uniform(-0.4, 0.4, n) * rho * np.minimum(d1, d2)
    q2 = rng.normal(size=n)
    aux = AuxiliaryState(q1, q2)
    lower, upper = d1 - q1 / rho, d2 + q1 / rho
    x = -lower + rng.uniform(0.02, 0.98, n) * (lower + upper)
    e_p = x * rho
    e_v = rng.normal(size=n)
    return e_p, e_v, aux, (rho, rho_dot, rho_ddot), d1, d2
