"""
Command-line entry point.

Exit codes: 0 success, 1 a requested check failed, 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from dcclab import matrixkit as mk
from dcclab.config import ConfigError, RunConfig, load_config
from dcclab.errors import DccLabError
from dcclab.innovations import InnovationSpec
from dcclab.model import benchmark_spec
from dcclab.simulator import Trajectory, ensemble, moment_diagnostics, simulate
from dcclab.stationarity import McSettings, estimate_lyapunov_N, full_report

log = logging.getLogger("dcclab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULT_GRID_M1_SQ = (0.999, 1.001)
DEFAULT_GRID_INNOVATIONS = (
    {"family": "gaussian"},
    {"family": "student_t", "dof": 1.2},
    {"family": "student_t", "dof": 1.5},
    {"family": "student_t", "dof": 2.5},
    {"family": "student_t", "dof": 4.0},
)


class OutputError(Exception):
    pass


def fmt_float(x) -> str:
    """Shortest decimal that round-trips to the same binary64."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_all(files: dict[Path, str]) -> None:
    # everything is rendered before the first write, so a failed run leaves no report
    for path, text in files.items():
        write_atomic(path, text)


def trajectory_csv(traj: Trajectory) -> str:
    m = traj.m
    idx = mk.sym_index_map(m)
    pairs = [f"{i + 1}_{j + 1}" for i, j in idx.forward]
    header = (
        ["t"]
        + [f"z_{k + 1}" for k in range(m)]
        + [f"h_{k + 1}" for k in range(m)]
        + [f"Q_{p}" for p in pairs]
        + [f"R_{p}" for p in pairs]
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k in range(len(traj.t)):
        row = [str(int(traj.t[k]))]
        for arr in (traj.z[k], traj.h[k], traj.vech_Q[k], traj.vech_R[k]):
            row.extend(fmt_float(x) for x in arr)
        w.writerow(row)
    return buf.getvalue()


def trajectory_summary(traj: Trajectory) -> dict:
    out = {
        "horizon": traj.horizon,
        "burn_in": traj.burn_in,
        "records": int(len(traj.t)),
        "exploded": traj.exploded,
        "first_explosion_time": traj.first_explosion_time,
        "max_qmax": traj.max_qmax,
        "terminal_R_offdiag": traj.terminal_R_offdiag,
    }
    if len(traj.t):
        out["z_moments"] = {str(p): v for p, v in traj.z_moments(4).items()}
    if not traj.exploded and len(traj.t) >= 4:
        md = moment_diagnostics(traj, orders=(2, 4))
        out["moment_diagnostics"] = {
            f"{name}^{p}": {"mean": e.mean, "std_error": e.std_error, "half_ratio": e.half_ratio,
                            "stable": e.stable()}
            for (name, p), e in md.estimates.items()
        }
    return out


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg.innovations = cfg.innovations.with_seed(args.seed)
    if getattr(args, "out", None) is not None:
        cfg.out_dir = Path(args.out)
    return cfg


def cmd_check(cfg: RunConfig, args) -> int:
    spec = cfg.require_model()
    mc = cfg.mc
    if not cfg.check_uniqueness:
        mc = McSettings(mc.horizon, mc.replications, mc.samples, mc.seed, lyapunov=False, log_moment=False)
    report = full_report(spec, cfg.innovations, mc, norm=cfg.norm)
    files = {}
    if "json" in cfg.formats:
        files[cfg.out_dir / "report.json"] = dumps(report.to_dict())
    if "text" in cfg.formats:
        files[cfg.out_dir / "report.txt"] = report.to_text()
    write_all(files)
    print(report.to_text(), end="")
    ok = report.existence_established
    if cfg.check_uniqueness:
        ok = ok and report.uniqueness_established
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(cfg: RunConfig, args) -> int:
    spec = cfg.require_model()
    traj = simulate(spec, cfg.sim, cfg.innovations)
    summary = trajectory_summary(traj)
    summary["config"] = {"sim": cfg.sim.to_dict(), "innovations": cfg.innovations.to_dict()}
    files = {}
    if "csv" in cfg.formats:
        files[cfg.out_dir / "trajectory.csv"] = trajectory_csv(traj)
    files[cfg.out_dir / "summary.json"] = dumps(summary)
    write_all(files)
    msg = f"simulated {traj.horizon} steps, {len(traj.t)} records"
    if traj.exploded:
        msg += f"; exploded at t={traj.first_explosion_time}"
    print(msg)
    return EXIT_OK


def cmd_lyapunov(cfg: RunConfig, args) -> int:
    spec = cfg.require_model()
    seed = cfg.innovations.seed if cfg.mc.seed is None else cfg.mc.seed
    est = estimate_lyapunov_N(
        spec, cfg.innovations, cfg.mc.horizon, cfg.mc.replications, seed=seed, starred=cfg.starred
    )
    payload = est.to_dict()
    payload["per_replication"] = est.per_replication
    write_all({cfg.out_dir / "lyapunov.json": dumps(payload)})
    print(f"gamma_hat={est.gamma_hat!r} std_error={est.std_error!r} "
          f"bound E ln||N*||={est.log_norm_bound!r} passed={est.passed}")
    return EXIT_OK if est.passed else EXIT_FAIL


EXPERIMENT_COLUMNS = [
    "m1_sq", "family", "dof", "runs", "explosion_fraction", "errors", "unstable_runs",
    "max_qmax_q05", "max_qmax_q50", "max_qmax_q95", "growth_ratio_T_over_T10", "terminal_R12_std",
]


def run_experiment_grid(cfg: RunConfig, runs: int | None = None, parallel: int | None = None) -> list[dict]:
    exp = cfg.experiment
    grid_m = exp.get("m1_sq", DEFAULT_GRID_M1_SQ)
    grid_i = exp.get("innovations", DEFAULT_GRID_INNOVATIONS)
    n1 = exp.get("n1", math.sqrt(3.0))
    n_runs = runs if runs is not None else exp.get("runs", 20)
    rows = []
    for m1_sq in grid_m:
        spec = benchmark_spec(m1_sq, n1)
        for inn_raw in grid_i:
            d = {"seed": cfg.innovations.seed, "stream": cfg.innovations.stream, **inn_raw}
            inn = InnovationSpec.from_dict(d)
            res = ensemble(spec, cfg.sim, inn, n_runs, parallelism=parallel)
            q = res.max_qmax_quantiles((0.05, 0.5, 0.95))
            rows.append({
                "m1_sq": m1_sq,
                "family": inn.family.value,
                "dof": inn.dof,
                "runs": res.n_runs,
                "explosion_fraction": res.explosion_fraction,
                "errors": res.error_count,
                "unstable_runs": res.unstable_count,
                "max_qmax_q05": q[0.05],
                "max_qmax_q50": q[0.5],
                "max_qmax_q95": q[0.95],
                "growth_ratio_T_over_T10": res.growth_ratio,
                "terminal_R12_std": res.terminal_R12_std,
            })
            log.info("cell m1_sq=%s %s dof=%s done", m1_sq, inn.family.value, inn.dof)
    return rows


def cmd_experiment_s4(cfg: RunConfig, args) -> int:
    rows = run_experiment_grid(cfg, runs=args.runs, parallel=args.parallel)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPERIMENT_COLUMNS)
    for row in rows:
        w.writerow(["" if row[c] is None else (fmt_float(row[c]) if isinstance(row[c], float) else row[c])
                    for c in EXPERIMENT_COLUMNS])
    write_all({
        cfg.out_dir / "experiment_s4.csv": buf.getvalue(),
        cfg.out_dir / "experiment_s4.json": dumps({"cells": rows, "sim": cfg.sim.to_dict()}),
    })
    print(buf.getvalue(), end="")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "lyapunov": cmd_lyapunov,
    "experiment-s4": cmd_experiment_s4,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcc-lab", description="DCC-GARCH stationarity lab")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("check", "evaluate existence and uniqueness conditions"),
        ("simulate", "simulate one trajectory to CSV"),
        ("lyapunov", "estimate the top Lyapunov exponent of the bound matrices"),
        ("experiment-s4", "run the bivariate scalar simulation grid"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--runs", type=int, help="ensemble size")
        p.add_argument("--parallel", type=int, help="worker processes (overrides DCC_LAB_THREADS)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DccLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
