"""
Simulation Commands
===================
`simulate` runs one configuration (optionally resuming from its last
checkpoint); `eps-sweep` compares trajectories across decreasing eps.

Output directory layout:
    <directory>/manifest.json
    <directory>/diagnostics.csv
    <directory>/checkpoint_<step>/{v1,v2,T}.bin, totals.json
"""

import argparse
import logging
from pathlib import Path

from anisopede.config_files import ConfigError, echo_simulation_config, parse_simulation_config
from anisopede.models import RunManifest, SimulationConfig
from anisopede.scheduler import WorkerPool
from anisopede.services import initial_data
from anisopede.services.diagnostics import DiagnosticsWriter, read_table, truncate_after, write_sweep
from anisopede.services.estimate_monitors import MonitorState
from anisopede.services.grid_transforms import make_grid
from anisopede.services.solver import SolverError, eps_sweep, run
from anisopede.storage import (
    checkpoint_name,
    latest_checkpoint,
    read_checkpoint,
    read_manifest,
    run_context,
    write_checkpoint,
    write_manifest,
)

logger = logging.getLogger(__name__)


def _load(workdir: Path, config_path: str) -> SimulationConfig:
    return parse_simulation_config(workdir / config_path)


def simulate(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    config = _load(workdir, args.config)
    solver_config = config.solver
    out_dir = workdir / solver_config.directory
    grid = make_grid(solver_config.nx, solver_config.ny, solver_config.nz, solver_config.h)
    diagnostics_path = out_dir / "diagnostics.csv"

    monitor = MonitorState(config.monitor, solver_config.eps) if config.monitor.enabled else None
    resume = None
    if args.resume:
        manifest = read_manifest(out_dir)
        entry = latest_checkpoint(manifest)
        state, totals = read_checkpoint(Path(entry.files["v1"]).parent, grid)
        truncate_after(diagnostics_path, state.time)
        if monitor is not None:
            monitor = MonitorState.from_columns(read_table(diagnostics_path), config.monitor)
        resume = (state, totals)
        v0, T0 = state.v, state.T
    else:
        manifest = RunManifest(
            config_echo=echo_simulation_config(config),
            seed=solver_config.seed,
            diagnostics_path=str(diagnostics_path),
        )
        v0, T0 = initial_data.build(config.initial, grid, config.solver.seed)

    records = {"count": 0}
    with run_context(out_dir, manifest), DiagnosticsWriter(diagnostics_path, append=args.resume) as writer:

        def observer(state, record, totals):
            writer.write(record)
            records["count"] += 1
            if records["count"] % solver_config.checkpoint_every == 0:
                _checkpoint(out_dir, manifest, state, totals)

        try:
            trajectory = run(solver_config, v0, T0, observer=observer, monitor=monitor, resume=resume, keep_states=False)
        except SolverError as e:
            if e.last_state is not None:
                logger.info(f"Last valid state at t={e.last_state.time:.6g}")
            raise
        final = trajectory.final_state
        if final is not None and (not manifest.snapshots or manifest.snapshots[-1].time < final.time):
            _checkpoint(out_dir, manifest, final, trajectory.totals)

    logger.info(f"✓ Simulation finished: {writer.rows_written} rows in {diagnostics_path}")
    return 0


def _checkpoint(out_dir: Path, manifest: RunManifest, state, totals) -> None:
    entry = write_checkpoint(state, totals, out_dir / checkpoint_name(totals.step))
    if manifest.snapshots and manifest.snapshots[-1].time >= entry.time:
        return
    manifest.snapshots.append(entry)
    write_manifest(out_dir, manifest)


def sweep(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    config = _load(workdir, args.config)
    try:
        eps_values = [float(x) for x in args.eps.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"--eps: {e}") from e
    grid = make_grid(config.solver.nx, config.solver.ny, config.solver.nz, config.solver.h)
    v0, T0 = initial_data.build(config.initial, grid, config.solver.seed)
    rows = eps_sweep(config.solver, eps_values, v0, T0, WorkerPool())
    write_sweep(workdir / args.report, rows)
    failed = [r for r in rows if r.message]
    if failed:
        raise SolverError(f"{len(failed)} sweep member(s) failed: {failed[0].message}")
    return 0


def register(subparsers) -> None:
    """Add `simulate` and `eps-sweep` to the CLI."""
    p = subparsers.add_parser("simulate", help="Run one simulation configuration")
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--resume", action="store_true", help="Continue from the last checkpoint in the manifest")
    p.set_defaults(handler=simulate)

    p = subparsers.add_parser("eps-sweep", help="H1 distance between runs at consecutive eps values")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", required=True, help="Strictly decreasing list, e.g. 1e-1,1e-2,1e-3")
    p.add_argument("--report", default="eps_sweep.csv")
    p.set_defaults(handler=sweep)
