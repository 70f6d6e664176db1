import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppcform.scenario import Simulation, SimulationAbort, formation_plan_eval, run
from ppcform.scenario.sim import TRACE_FIELDS


# ---------------------------------------------------------------- formation plan

def test_formation_examples(bundled_cfg):
    hp, hv, ha = formation_plan_eval(bundled_cfg, 4, 0.0)          # UAV 5
    np.testing.assert_allclose(hp, [3.0, 0.0, 0.0], atol=1e-12)
    hp, _, _ = formation_plan_eval(bundled_cfg, 7, 0.0)            # UGV 8: 2*8*pi/4 = 4 pi
    np.testing.assert_allclose(hp, [2.0, 0.0], atol=1e-12)
    assert len(formation_plan_eval(bundled_cfg, 0, 1.0)[0]) == 3
    assert len(formation_plan_eval(bundled_cfg, 8, 1.0)[0]) == 2
    with pytest.raises(ValueError):
        formation_plan_eval(bundled_cfg, 0, -1.0)


@settings(max_examples=200, deadline=None)
@given(i=st.integers(0, 8), t=st.floats(0.0, 30.0))
def test_formation_radius_and_derivatives(bundled_cfg, i, t):
    hp, hv, ha = formation_plan_eval(bundled_cfg, i, t)
    radius = 3.0 if i < 5 else 2.0
    assert math.hypot(hp[0], hp[1]) == pytest.approx(radius, rel=1e-12)
    h = 1e-6
    p1, v1, _ = formation_plan_eval(bundled_cfg, i, t + h)
    p0, v0, _ = formation_plan_eval(bundled_cfg, i, max(t - h, 0.0))
    step = t + h - max(t - h, 0.0)
    np.testing.assert_allclose((p1 - p0) / step, hv, atol=1e-6)
    np.testing.assert_allclose((v1 - v0) / step, ha, atol=1e-6)


# ---------------------------------------------------------------- short runs

@pytest.fixture(scope="module")
def short_cfg(bundled_cfg):
    # a fault window inside the first second so the shuffle test sees it
    return bundled_cfg.replace(**{"simulation.duration": 1.0,
                                "faults": [{"edge": [1, 2], "t_on": 0.2, "t_off": 0.8},
                                           {"edge": [0, 5], "t_on": 0.5, "t_off": 0.9}]})


def test_record_per_step(short_cfg):
    res = run(short_cfg)
    tr = res.trace
    assert tr.n_records == short_cfg.n_steps + 1
    assert np.all(np.diff(tr.t) > 0)
    for name in TRACE_FIELDS:
        assert np.all(np.isfinite(tr[name])), name
    assert tr.fault_active.any()


def test_identical_runs_bit_identical(short_cfg):
    a, b = run(short_cfg), run(short_cfg)
    for name in TRACE_FIELDS:
        assert np.array_equal(a.trace[name], b.trace[name]), name
    assert a.metrics.equals(b.metrics)


def test_different_seed_changes_faulted_part(short_cfg):
    a = run(short_cfg)
    b = run(short_cfg.replace(**{"simulation.seed": 1}))
    before = a.trace.t < 0.2
    assert np.array_equal(a.trace["xi_p"][before], b.trace["xi_p"][before])
    assert not np.array_equal(a.trace["xi_p"], b.trace["xi_p"])


@pytest.mark.parametrize("order", [[8, 7, 6, 5, 4, 3, 2, 1, 0], [3, 0, 7, 5, 1, 8, 2, 6, 4]])
def test_agent_order_does_not_matter(short_cfg, order):
    base = Simulation(short_cfg).run()
    shuffled = Simulation(short_cfg, agent_order=np.array(order)).run()
    for name in TRACE_FIELDS:
        assert np.array_equal(base.trace[name], shuffled.trace[name]), name


def test_faulted_laws_mode_runs(short_cfg):
    res = run(short_cfg.replace(**{"topology.laws_laplacian": "faulted"}))
    assert res.ok


def test_collapse_aborts_cleanly(bundled_cfg):
    cfg = bundled_cfg.replace(**{"simulation.fidelity": "full", "simulation.duration": 2.0,
                               "attitude.kp": 100.0, "attitude.kd": 20.0})
    res = run(cfg)
    assert res.aborted is not None and not res.ok
    assert res.aborted.reason == "corridor-collapse"
    assert res.trace.n_records < cfg.n_steps + 1
    with pytest.raises(SimulationAbort):
        run(cfg, raise_on_abort=True)


# ---------------------------------------------------------------- bundled run invariants

def test_bundled_run_clean(bundled_run):
    assert bundled_run.ok
    assert bundled_run.diagnostics == {"transform_clamps": 0, "weight_clamps": 0}
    tr = bundled_run.trace
    assert tr.t[-1] == pytest.approx(30.0)
    for name in TRACE_FIELDS:
        assert np.all(np.isfinite(tr[name])), name


def _fault_free(tr, cfg):
    mask = np.ones(tr.n_records, dtype=bool)
    for e in cfg.faults.entries:
        mask &= ~((tr.t >= e.t_on) & (tr.t <= e.t_off))
    return mask


def test_sliding_value_stays_in_envelope(bundled_run, bundled_cfg):
    tr = bundled_run.trace
    T = bundled_cfg.profile.horizon
    s_norm = np.linalg.norm(tr["s"], axis=1)
    ref = s_norm[(tr.t > T) & (tr.t <= 2 * T)].max()
    late = (tr.t > 2 * T) & _fault_free(tr, bundled_cfg)
    assert s_norm[late].max() <= ref + 1e-6


def test_eps_bounded_by_sliding_value(bundled_run, bundled_cfg):
    tr = bundled_run.trace
    lam = bundled_cfg.controller["lambda_s"][tr.layout.agent, tr.layout.axis]
    T = bundled_cfg.profile.horizon
    s_sup = np.abs(tr["s"][tr.t > T]).max(axis=0)
    eps_late = np.abs(tr["eps"][tr.t > 2 * T]).max(axis=0)
    assert np.all(eps_late <= s_sup / lam)


def test_aux_envelope_decays_without_saturation(bundled_run):
    tr = bundled_run.trace
    du, xa = tr["du"], tr["xa"]
    dt = tr.t[1] - tr.t[0]
    checked = 0
    for c in range(du.shape[1]):
        quiet = du[:, c] == 0.0
        edges = np.flatnonzero(np.diff(quiet.astype(int)))
        starts = [0] + list(edges + 1)
        for a in starts:
            if not quiet[a]:
                continue
            b = a
            while b < len(quiet) and quiet[b]:
                b += 1
            if (b - a) * dt < 1.0 or not np.any(xa[a:b, c]):
                continue
            # skip the rise of the critically damped response
            a2 = a + int(0.25 / dt)
            mid = (a2 + b) // 2
            assert np.abs(xa[mid:b, c]).max() <= np.abs(xa[a2:mid, c]).max() + 1e-12
            checked += 1
    assert checked > 0


def test_unsaturated_channels_keep_static_corridor(bundled_run):
    tr = bundled_run.trace
    never = ~np.any(tr["du"] != 0.0, axis=0)
    assert never.any()
    assert not tr["xa"][:, never].any()
