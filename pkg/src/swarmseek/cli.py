"""Command line entry point.

Subcommands::

    swarmseek run      --config cfg.json --out DIR   one trajectory + metrics
    swarmseek sweep    --config cfg.json --jobs 4    one pair per k_gamma (and run)
    swarmseek verify   --config cfg.json             verification report
    swarmseek print-defaults                         the fully populated default config

Exit codes: 0 success, 1 verification failure, 2 config error, 3 simulation
or output error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import (
    RunConfig,
    build_events,
    build_field,
    build_sim,
    build_swarm,
    default_config_text,
    dump_config,
    from_dict,
    parse_config,
)
from .errors import ConfigError, DegenerateSwarmError, SingularityError, SwarmSeekError
from .harness import run_scenario

log = logging.getLogger("swarmseek")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SIM = 0, 1, 2, 3

TRAJECTORY_COLUMNS = ("t", "rc_x", "rc_y", "dist", "sigma_rc", "grad_norm", "deformation", "theta", "guiding_defined")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def trajectory_table(traj):
    """Header and rows of the trajectory export (3-D runs add ``rc_z``)."""
    cols = list(TRAJECTORY_COLUMNS)
    if not traj.states:
        return cols, []
    cents = traj.centroids
    if cents.shape[1] == 3:
        cols.insert(3, "rc_z")
    d = traj.diagnostics
    rows = []
    for k, st in enumerate(traj.states):
        row = [st.t, *cents[k]]
        row += [d["dist"][k], d["sigma_rc"][k], d["grad_norm"][k], d["deformation"][k], d["theta"][k]]
        row.append(int(bool(d["guiding_defined"][k])))
        rows.append(row)
    return cols, rows


def _fmt(v) -> str:
    # repr of a Python float is the shortest round-trip decimal and ignores locale
    return str(v) if isinstance(v, int) else repr(float(v))


def trajectory_text(traj, fmt: str) -> str:
    cols, rows = trajectory_table(traj)
    if fmt == "json":
        return _json_text({"columns": cols, "rows": [[float(v) if not isinstance(v, int) else v for v in r] for r in rows]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _final_delta(traj) -> dict:
    if not traj.states or traj.states[-1].delta is None:
        return {}
    d = np.asarray(traj.states[-1].delta, dtype=float)
    return {"final_delta_raw": d, "final_delta_wrapped": np.remainder(d + np.pi, 2 * np.pi) - np.pi}


def execute_run(cfg: RunConfig, run_index: int = 0, k_gamma=None):
    """Run one scenario; return ``(trajectory, metrics)``."""
    field = build_field(cfg)
    sim = build_sim(cfg, k_gamma)
    swarm0 = build_swarm(cfg, run_index)
    traj, metrics = run_scenario(sim, field, swarm0, build_events(cfg))
    metrics.update(_final_delta(traj))
    metrics["seed"] = cfg.sim.seed
    metrics["run_index"] = run_index
    return traj, metrics


def _sweep_task(args):
    data, k, j, fmt = args
    cfg = from_dict(data)
    traj, metrics = execute_run(cfg, j, k)
    return trajectory_text(traj, fmt), _json_text(metrics), metrics


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.output.dir)
    fmt = cfg.output.format
    traj, metrics = execute_run(cfg)
    _write(out / "config.json", dump_config(cfg))
    _write(out / f"trajectory.{fmt}", trajectory_text(traj, fmt))
    _write(out / "metrics.json", _json_text(metrics))
    if metrics.get("error"):
        log.error("simulation error: %s (partial outputs kept in %s)", metrics["error"], out)
        return EXIT_SIM
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, jobs: int) -> int:
    out = Path(cfg.output.dir)
    fmt = cfg.output.format
    data = cfg.model_dump(mode="json")
    tasks = [(data, k, j, fmt) for k in cfg.harness.sweep.k_gamma for j in range(cfg.harness.runs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    _write(out / "config.json", dump_config(cfg))
    summary = []
    status = EXIT_OK
    for (_, k, j, _), (traj_text, metrics_text, metrics) in zip(tasks, results):
        stem = f"k_gamma_{k:g}_run_{j:03d}"
        _write(out / f"{stem}_trajectory.{fmt}", traj_text)
        _write(out / f"{stem}_metrics.json", metrics_text)
        summary.append({"k_gamma": k, "run_index": j, **{key: metrics.get(key) for key in
                        ("trapped", "t0", "max_deformation", "final_dist", "error")}})
        if metrics.get("error"):
            status = EXIT_SIM
    _write(out / "sweep_summary.json", _json_text(summary))
    return status


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import verify_suite

    reports = verify_suite(cfg.sim.seed, cfg.harness.verify_samples, runs=cfg.harness.runs)
    out = Path(cfg.output.dir)
    payload = {"seed": cfg.sim.seed, "sample_count": cfg.harness.verify_samples,
               "passed": all(r.passed for r in reports), "reports": [r.to_dict() for r in reports]}
    _write(out / "verification.json", _json_text(payload))
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.violations} violations in {r.samples} samples, "
              f"worst margin {r.worst_margin:.6g}")
    return EXIT_OK if payload["passed"] else EXIT_VERIFY


def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies must not reset values given before the subcommand
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=dflt(None), help="JSON config file (defaults apply when omitted)")
    common.add_argument("--out", default=dflt(None), help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, default=dflt(None), help="master seed (overrides sim.seed)")
    common.add_argument("--jobs", type=int, default=dflt(1), help="parallel runs for sweep")
    common.add_argument("--format", choices=("csv", "json"), default=dflt(None),
                        help="trajectory format (overrides output.format)")
    common.add_argument("-v", "--verbose", action="store_true", default=dflt(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags(suppress=True)
    p = argparse.ArgumentParser(prog="swarmseek", description="Swarm source-seeking simulator",
                                parents=[_common_flags(suppress=False)])
    p.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
    sub = p.add_subparsers(dest="command")
    for name, text in (("run", "simulate one scenario"), ("sweep", "simulate every k_gamma in harness.sweep"),
                       ("verify", "run the property verification suite"),
                       ("print-defaults", "print the default config")):
        sub.add_parser(name, help=text, parents=[common])
    return p


def load_config(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
        except UnicodeDecodeError:
            raise ConfigError(f"config {args.config} is not UTF-8") from None
        cfg = parse_config(text)
    else:
        cfg = RunConfig()
    data = cfg.model_dump(mode="json")
    if args.seed is not None:
        data["sim"]["seed"] = args.seed
    if args.out is not None:
        data["output"]["dir"] = args.out
    if args.format is not None:
        data["output"]["format"] = args.format
    return from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.print_defaults or args.command == "print-defaults":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.jobs)
        return cmd_verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularityError, DegenerateSwarmError) as exc:
        # raised before integration starts: the initial state is unusable
        print(f"invalid initial state: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except SwarmSeekError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
