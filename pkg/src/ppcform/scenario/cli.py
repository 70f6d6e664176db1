"""Command-line interface: ``ppcform run|validate|paper-scenario|sweep``.

Exit status is 0 only for runs with zero corridor violations and no errors;
1 for violations or aborted runs; 2 for configuration or usage errors.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import (FIDELITIES, ConfigParseError, ConfigValidationError, load_config,
                     paper_scenario, paper_scenario_text)
from .export import export_csv, export_plotdata, write_summary
from .sim import run

ENV_OUT_DIR = "PPCFORM_OUT_DIR"
ENV_SEED = "PPCFORM_SEED"

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("ppcform")


def _seed_range(text: str) -> range:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError("expected A..B (inclusive), e.g. 0..49")
    a, b = int(m.group(1)), int(m.group(2))
    if b < a:
        raise argparse.ArgumentTypeError("empty seed range")
    return range(a, b + 1)


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppcform",
                                 description="Heterogeneous UAV/UGV formation simulator")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", type=Path, help="scenario TOML (default: bundled scenario)")
        p.add_argument("--out", type=Path,
                       help=f"output directory (env {ENV_OUT_DIR}; default from config)")
        p.add_argument("--duration", type=_positive_float)
        p.add_argument("--dt", type=_positive_float)
        p.add_argument("--fidelity", choices=FIDELITIES)
        p.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = sub.add_parser("run", help="simulate one scenario and write the trace CSV")
    add_run_flags(p)
    p.add_argument("--seed", type=_nonneg_int, help=f"fault seed (env {ENV_SEED})")
    p.add_argument("--no-trace", action="store_true", help="skip the trace CSV")

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("--config", type=Path, required=True)

    p = sub.add_parser("paper-scenario", help="print the bundled scenario file")
    p.add_argument("--out", type=Path, help="write to this file instead of stdout")

    p = sub.add_parser("sweep", help="run a range of fault seeds")
    add_run_flags(p)
    p.add_argument("--seeds", type=_seed_range, required=True, help="inclusive range A..B")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--traces", action="store_true", help="also write each run's trace CSV")
    return ap


def _load(args):
    cfg = load_config(args.config) if args.config else paper_scenario()
    over = {}
    if getattr(args, "duration", None) is not None:
        over["simulation.duration"] = args.duration
    if getattr(args, "dt", None) is not None:
        over["simulation.dt"] = args.dt
    if getattr(args, "fidelity", None) is not None:
        over["simulation.fidelity"] = args.fidelity
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get(ENV_SEED):
        seed = _nonneg_int(os.environ[ENV_SEED])
    if seed is not None:
        over["simulation.seed"] = seed
    return cfg.replace(**over) if over else cfg


def _out_dir(args, cfg) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(ENV_OUT_DIR)
    return Path(env) if env else Path(cfg.output)


def _report(label: str, result) -> str:
    m = result.metrics
    status = "ok" if result.ok else "FAIL"
    text = (f"{label}: {status}  observer_violations={m.observer_violations} "
            f"tracking_violations={m.tracking_violations} "
            f"steady_max_xi_p={m.steady_max_xi_p:.3g} steady_max_e_p={m.steady_max_e_p:.3g} "
            f"containment={m.containment_ratio:.3g} "
            f"transform_clamps={result.diagnostics['transform_clamps']}")
    if result.aborted is not None:
        text += f"  aborted: {result.aborted}"
    return text


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    result = run(cfg)
    if not args.no_trace:
        export_csv(result.trace, out / "trace.csv")
    export_plotdata(result.trace, out)
    write_summary(out / "summary.json", result.metrics, result.diagnostics, result.aborted)
    if not args.quiet or not result.ok:
        print(_report(f"seed {cfg.seed}", result))
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: valid ({cfg.n_uav} UAVs, {cfg.n_ugv} UGVs, "
          f"{cfg.n_steps} steps, fidelity {cfg.fidelity})")
    return EXIT_OK


def cmd_paper_scenario(args) -> int:
    text = paper_scenario_text()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sweep_one(cfg, seed: int, out: Path, traces: bool):
    cfg = cfg.replace(**{"simulation.seed": seed})
    result = run(cfg)
    run_dir = out / f"seed_{seed:04d}"
    if traces:
        export_csv(result.trace, run_dir / "trace.csv")
    write_summary(run_dir / "summary.json", result.metrics, result.diagnostics, result.aborted)
    return seed, result.ok, result.metrics, result.diagnostics, \
        None if result.aborted is None else str(result.aborted)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    seeds = list(args.seeds)
    jobs = max(1, min(args.jobs, len(seeds)))
    if jobs == 1:
        rows = [_sweep_one(cfg, s, out, args.traces) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, [cfg] * len(seeds), seeds,
                                 [out] * len(seeds), [args.traces] * len(seeds)))
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        fields = list(rows[0][2].as_dict())
        w.writerow(["seed", "ok", *fields, "transform_clamps", "weight_clamps", "aborted"])
        for seed, ok, m, diag, aborted in rows:
            w.writerow([seed, int(ok), *m.as_dict().values(), diag["transform_clamps"],
                        diag["weight_clamps"], aborted or ""])
    failed = [r[0] for r in rows if not r[1]]
    if not args.quiet or failed:
        print(f"sweep {seeds[0]}..{seeds[-1]}: {len(seeds) - len(failed)}/{len(seeds)} ok"
              + (f"; failing seeds {failed}" if failed else ""))
    return EXIT_OK if not failed else EXIT_VIOLATION


COMMANDS = {"run": cmd_run, "validate": cmd_validate,
            "paper-scenario": cmd_paper_scenario, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except argparse.ArgumentTypeError as exc:
        print(f"error: {ENV_SEED}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
