"""Trace CSV export/import and small plot-data tables.

The trace CSV is long format, one row per (step, agent, axis).  Floats are
written with ``repr`` so every value round-trips exactly.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .config import AXES
from .sim import TRACE_FIELDS, Layout, Trace

CSV_HEADER = ("t", "agent", "axis", "xp", "xv", "zeta_p", "zeta_v", "xi_p", "xi_v",
              "rho", "e_p", "e_v", "bound_lo", "bound_hi", "eps", "s", "v", "u",
              "du", "xa", "fault_active")
SNAPSHOT_TIMES = (10.0, 20.0, 30.0)


def _channel_columns():
    # CSV columns after (t, agent, axis) that are per-channel trace fields
    return [c for c in CSV_HEADER[3:] if c in TRACE_FIELDS]


def export_csv(trace: Trace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lay = trace.layout
    cols = _channel_columns()
    # (T, C, F) block of per-channel values in header order
    block = np.stack([trace[c] for c in cols], axis=-1)
    labels = [(int(a) + 1, AXES[int(x)]) for a, x in zip(lay.agent, lay.axis)]
    rho_col = cols.index("xi_v") + 1      # rho sits after xi_v in the header
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(trace.n_records):
            t = float(trace.t[k])
            rho = float(trace.rho[k])
            fault = int(bool(trace.fault_active[k]))
            rows = block[k].tolist()
            for (agent, axis), vals in zip(labels, rows):
                w.writerow([t, agent, axis, *vals[:rho_col], rho, *vals[rho_col:], fault])
    return path


def read_csv(path, rho_inf: float, rho_eps_inf: float, horizon: float) -> Trace:
    """Rebuild a :class:`Trace` from an exported CSV.

    The CSV carries no leader state or tracking profile, so ``leader`` and
    ``rho_eps`` come back as NaN; every metric is still computable.
    """
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected trace header: {header}")
        rows = list(r)
    if not rows:
        raise ValueError("trace CSV has no data rows")
    # channel layout from the first time stamp
    t0 = rows[0][0]
    chans = []
    for row in rows:
        if row[0] != t0:
            break
        chans.append((int(row[1]) - 1, AXES.index(row[2])))
    C = len(chans)
    if len(rows) % C:
        raise ValueError("trace CSV rows do not form whole time steps")
    agent = np.array([c[0] for c in chans])
    axis = np.array([c[1] for c in chans])
    n_agents = int(agent.max()) + 1
    n_uav = int(len(np.unique(agent[axis == 2])))
    layout = Layout(agent, axis, n_agents, n_uav)

    num = np.array([[float(row[i]) for i in range(len(CSV_HEADER)) if i not in (1, 2)]
                    for row in rows]).reshape(len(rows) // C, C, -1)
    numeric = [c for c in CSV_HEADER if c not in ("agent", "axis")]
    col = {c: numeric.index(c) for c in numeric}
    data = {c: num[:, :, col[c]].copy() for c in TRACE_FIELDS}
    T = num.shape[0]
    return Trace(layout, num[:, 0, col["t"]].copy(), num[:, 0, col["rho"]].copy(),
                 np.full(T, np.nan), np.full((T, 3), np.nan),
                 num[:, 0, col["fault_active"]] != 0.0, data, rho_inf, rho_eps_inf, horizon)


def _nearest(t: np.ndarray, target: float) -> int | None:
    if not len(t) or target > t[-1] + 1e-9:
        return None
    return int(np.argmin(np.abs(t - target)))


def export_plotdata(trace: Trace, out_dir, every: int = 10) -> list[Path]:
    """Formation snapshots, observer envelope and tracking corridors.

    ``every`` decimates the time series tables.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lay = trace.layout
    written = []

    for ts in SNAPSHOT_TIMES:
        k = _nearest(trace.t, ts)
        if k is None:
            continue
        p = out / f"snapshot_t{ts:g}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "agent", "kind", "x", "y", "z"])
            for i in range(lay.n_agents):
                xyz = [trace["xp"][k, lay.channel(i, a)] if (lay.agent == i).sum() > a else 0.0
                       for a in range(3)]
                w.writerow([float(trace.t[k]), i + 1,
                            "uav" if i < lay.n_uav else "ugv", *map(float, xyz)])
        written.append(p)

    sel = slice(None, None, max(1, every))
    p = out / "observer_envelope.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "rho", "neg_rho", *(f"xi_p_{i + 1}{AXES[a]}"
                                             for i, a in zip(lay.agent, lay.axis))])
        for t, r, xi in zip(trace.t[sel].tolist(), trace.rho[sel].tolist(),
                            trace["xi_p"][sel].tolist()):
            w.writerow([t, r, -r, *xi])
    written.append(p)

    p = out / "tracking_corridor.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", "axis", "e_p", "bound_lo", "bound_hi", "xa"])
        e, lo, hi, xa = (trace[c][sel] for c in ("e_p", "bound_lo", "bound_hi", "xa"))
        for k, t in enumerate(trace.t[sel].tolist()):
            for c, (i, a) in enumerate(zip(lay.agent, lay.axis)):
                w.writerow([t, int(i) + 1, AXES[int(a)], float(e[k, c]), float(lo[k, c]),
                            float(hi[k, c]), float(xa[k, c])])
    written.append(p)
    return written


def write_summary(path, metrics, diagnostics: dict, aborted=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {k: (None if isinstance(v, float) and math.isnan(v) else v)
               for k, v in metrics.as_dict().items()}
    payload["diagnostics"] = diagnostics
    payload["aborted"] = None if aborted is None else str(aborted)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
