"""Experiment orchestration on top of the solver and the weak-form verifier."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import config as config_mod
from .config import ExperimentConfig
from .diagnostics import defect_integral, fmt, gronwall_check, read_csv, write_csv
from .grid import read_snapshot, write_snapshot
from .params import admissibility, chi_threshold_global
from .profiles import make_profile
from .solver import SolverAbort, Trajectory, run
from .weakform import verify, write_report

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("param", "defect_integral", "final_mass_u", "final_energy",
                "gronwall_slack", "aborted")


class InadmissibleParameters(ValueError):
    pass


@dataclass
class RunSummary:
    final_mass_u: float
    final_mass_v: float
    gronwall_slack: float
    defect_integral: float
    final_energy: float
    checks_failed: int

    def lines(self) -> list[str]:
        return [f"final_mass_u = {fmt(self.final_mass_u)}",
                f"final_mass_v = {fmt(self.final_mass_v)}",
                f"max_gronwall_slack = {fmt(self.gronwall_slack)}",
                f"defect_integral = {fmt(self.defect_integral)}",
                f"failed_checks = {self.checks_failed}"]


def initial_data(cfg: ExperimentConfig):
    u0 = make_profile(cfg.grid, cfg.init_u.profile, **cfg.init_u.kwargs())
    v0 = make_profile(cfg.grid, cfg.init_v.profile, **cfg.init_v.kwargs())
    return u0, v0


def simulate(cfg: ExperimentConfig, force: bool = False, keep_snapshots: bool = True) -> Trajectory:
    if not force and not admissibility(cfg.model).admissible:
        raise InadmissibleParameters(
            f"(chi, a, b) = ({cfg.model.chi}, {cfg.model.a}, {cfg.model.b}) is not admissible")
    u0, v0 = initial_data(cfg)
    return run(cfg.grid, u0, v0, cfg.model, cfg.solver, stride=cfg.stride,
               snapshot_stride=cfg.snapshot_stride if keep_snapshots else None)


def summarize(traj: Trajectory, rows=()) -> RunSummary:
    recs = traj.records
    return RunSummary(
        final_mass_u=recs[-1].mass_u,
        final_mass_v=recs[-1].mass_v,
        gronwall_slack=gronwall_check(recs, traj.params).violation,
        defect_integral=defect_integral(recs),
        final_energy=recs[-1].energy,
        checks_failed=sum(1 for r in rows if not r.passed),
    )


def write_snapshots(traj: Trajectory, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(len(traj)):
        write_snapshot(directory / f"u_{i:06d}.kslg", traj.grid, traj.times[i], traj.u[i])
        write_snapshot(directory / f"v_{i:06d}.kslg", traj.grid, traj.times[i], traj.v[i])


def load_trajectory(cfg: ExperimentConfig, outdir: Path) -> Trajectory:
    snapdir = outdir / "snapshots"
    u_files = sorted(snapdir.glob("u_*.kslg"))
    if not u_files:
        raise FileNotFoundError(f"no snapshots under {snapdir}")
    traj = Trajectory(cfg.grid, cfg.model)
    for uf in u_files:
        vf = uf.with_name("v_" + uf.name[2:])
        cells, t, u = read_snapshot(uf)
        _, tv, v = read_snapshot(vf)
        if cells != cfg.grid.cells or t != tv:
            raise ValueError(f"snapshot pair {uf.name} does not match the configuration")
        traj.times.append(t)
        traj.u.append(u)
        traj.v.append(v)
    diag = outdir / "diagnostics.csv"
    if diag.exists():
        traj.records = read_csv(diag)
    return traj


def run_experiment(cfg: ExperimentConfig, force: bool = False, outdir: Path | None = None):
    """Simulate, verify and write artifacts; return (trajectory, check rows, summary)."""
    outdir = Path(outdir or cfg.output_dir)
    traj = simulate(cfg, force=force)
    rows = verify(traj, cfg.weakform) if traj.horizon > 0 else []
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(config_mod.serialize(replace(cfg, output_dir=str(outdir))))
    write_csv(outdir / "diagnostics.csv", traj.records)
    write_report(outdir / "verification.csv", rows)
    write_snapshots(traj, outdir / "snapshots")
    return traj, rows, summarize(traj, rows)


def verify_artifacts(outdir: Path):
    outdir = Path(outdir)
    cfg = config_mod.load(outdir / "config.txt")
    traj = load_trajectory(cfg, outdir)
    rows = verify(traj, cfg.weakform)
    write_report(outdir / "verification.csv", rows)
    return rows


# -- sweeps ---------------------------------------------------------------

def _member(args):
    cfg, value, force, outdir = args
    axis = cfg.sweep.axis
    try:
        model = cfg.model.with_(**{axis: value})
        member = replace(cfg, model=model)
        traj = simulate(member, force=force, keep_snapshots=False)
    except (SolverAbort, InadmissibleParameters, ValueError) as exc:
        logger.warning("sweep member %s=%g aborted: %s", axis, value, exc)
        return value, None
    if outdir is not None:
        sub = Path(outdir) / f"member_{axis}_{value!r}"
        sub.mkdir(parents=True, exist_ok=True)
        write_csv(sub / "diagnostics.csv", traj.records)
    return value, summarize(traj)


def worker_count() -> int:
    env = os.environ.get("KSLG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def sweep(cfg: ExperimentConfig, force: bool = False, outdir: Path | None = None,
          workers: int | None = None) -> list[list[str]]:
    """Run every sweep member and return the summary rows (header excluded)."""
    values = list(cfg.sweep.values)
    jobs = [(cfg, v, force, outdir) for v in values]
    workers = workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_member, jobs))
    else:
        results = [_member(j) for j in jobs]
    rows = []
    threshold = chi_threshold_global(cfg.model.n) if cfg.model.n >= 2 else math.inf
    for value, summary in results:
        if summary is None:
            row = [fmt(value), "nan", "nan", "nan", "nan", "1"]
        else:
            row = [fmt(value), fmt(summary.defect_integral), fmt(summary.final_mass_u),
                   fmt(summary.final_energy), fmt(summary.gronwall_slack), "0"]
        if cfg.sweep.axis == "chi":
            row.append("above" if value > threshold else "below")
        rows.append(row)
    return rows


def sweep_header(cfg: ExperimentConfig) -> tuple[str, ...]:
    return SWEEP_HEADER + (("threshold_regime",) if cfg.sweep.axis == "chi" else ())


def write_sweep(path, cfg: ExperimentConfig, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sweep_header(cfg))
        w.writerows(rows)

