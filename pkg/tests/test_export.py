import csv
import json
import math

import numpy as np
import pytest

from ppcform.scenario.export import (CSV_HEADER, export_csv, export_plotdata, read_csv,
                                     write_summary)
from ppcform.scenario.metrics import compute_metrics
from ppcform.scenario.sim import TRACE_FIELDS

from .helpers import toy_trace


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_header_and_row_count(tmp_path):
    tr = toy_trace(3, n_uav=1)
    rows = _rows(export_csv(tr, tmp_path / "t.csv"))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 3 * 3
    assert [r[2] for r in rows[1:4]] == ["x", "y", "z"]
    assert {r[1] for r in rows[1:]} == {"1"}


def test_ugv_channels_have_no_z(tmp_path):
    tr = toy_trace(2, n_uav=1, n_ugv=1)
    rows = _rows(export_csv(tr, tmp_path / "t.csv"))
    assert [(r[1], r[2]) for r in rows[1:6]] == [("1", "x"), ("1", "y"), ("1", "z"),
                                                 ("2", "x"), ("2", "y")]


def test_round_trip_is_bit_exact(tmp_path):
    tr = toy_trace(7, n_uav=2, n_ugv=1, seed=3)
    tr.fault_active[2:4] = True
    back = read_csv(export_csv(tr, tmp_path / "t.csv"), tr.rho_inf, tr.rho_eps_inf, tr.horizon)
    assert np.array_equal(back.t, tr.t) and np.array_equal(back.rho, tr.rho)
    assert np.array_equal(back.fault_active, tr.fault_active)
    assert np.array_equal(back.layout.agent, tr.layout.agent)
    assert back.layout.n_uav == 2
    for k in TRACE_FIELDS:
        assert np.array_equal(back[k], tr[k]), k
    assert compute_metrics(back).equals(compute_metrics(tr))
    assert np.isnan(back.rho_eps).all()


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(p, 0.1, 0.3, 0.5)


def test_summary_json_nan_is_null(tmp_path):
    m = compute_metrics(toy_trace(4))
    assert math.isnan(m.containment_ratio)
    payload = json.loads(write_summary(tmp_path / "s.json", m,
                                       {"transform_clamps": 0, "weight_clamps": 1}).read_text())
    assert payload["containment_ratio"] is None
    assert payload["diagnostics"]["weight_clamps"] == 1
    assert payload["aborted"] is None


def test_plotdata_on_bundled_run(bundled_run, tmp_path):
    names = {p.name for p in export_plotdata(bundled_run.trace, tmp_path, every=100)}
    assert {"snapshot_t10.csv", "snapshot_t20.csv", "snapshot_t30.csv",
            "observer_envelope.csv", "tracking_corridor.csv"} <= names
    snap = _rows(tmp_path / "snapshot_t20.csv")
    assert len(snap) == 1 + 9
    assert float(snap[1][0]) == pytest.approx(20.0)
    assert [r[2] for r in snap[1:]] == ["uav"] * 5 + ["ugv"] * 4
    assert all(float(r[5]) == 0.0 for r in snap[6:])
    env = _rows(tmp_path / "observer_envelope.csv")
    assert len(env[0]) == 3 + bundled_run.trace.layout.size
    assert all(float(r[2]) == -float(r[1]) for r in env[1:])


def test_plotdata_skips_snapshots_beyond_trace(tmp_path):
    names = {p.name for p in export_plotdata(toy_trace(3), tmp_path)}
    assert not any(n.startswith("snapshot") for n in names)
