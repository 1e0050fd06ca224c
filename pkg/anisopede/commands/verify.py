"""
Lab Commands
============
`verify` fits the constant of one inequality over a seeded ensemble;
`gronwall-check` integrates random logarithmic Gronwall instances.
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from anisopede.config_files import ConfigError, parse_lab_config
from anisopede.models import LabConfig, LemmaId
from anisopede.scheduler import WorkerPool
from anisopede.services.diagnostics import write_inequality_report, write_report
from anisopede.services.grid_transforms import make_grid
from anisopede.services.inequality_lab import (
    LabError,
    check_gronwall,
    random_gronwall_instance,
    resolution_audit,
    run_ensemble,
)

logger = logging.getLogger(__name__)


def _grid_arg(text: str) -> tuple[int, int, int, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"--grid '{text}': expected nx,ny,nz,h")
    try:
        return int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
    except ValueError as e:
        raise ConfigError(f"--grid '{text}': {e}") from e


def _lab_config(args: argparse.Namespace) -> LabConfig:
    """Config file values, overridden by explicit flags."""
    workdir = Path(args.workdir)
    base = parse_lab_config(workdir / args.config).model_dump() if args.config else {}
    overrides = {
        "lemma": args.lemma,
        "samples": args.samples,
        "seed": args.seed,
        "grid": _grid_arg(args.grid) if args.grid else None,
        "family": args.family,
        "qmax": args.qmax,
        "radius": args.radius,
        "lam": args.lam,
        "report": args.report,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "lemma" not in base:
        raise ConfigError("--lemma is required (or a [lab] lemma key)")
    try:
        return LabConfig(**base)
    except ValueError as e:
        raise ConfigError(f"Invalid lab options: {e}") from e


def verify(args: argparse.Namespace) -> int:
    config = _lab_config(args)
    workdir = Path(args.workdir)
    pool = WorkerPool()
    grid = make_grid(*config.grid)

    if args.audit_grid:
        _, report, change = resolution_audit(config, make_grid(*_grid_arg(args.audit_grid)), grid, pool)
        logger.info(f"C* relative change between grids: {change:.3%}")
    else:
        report = run_ensemble(config, grid, pool)
    write_inequality_report(workdir / config.report, report)

    if report.absolute_violations:
        raise LabError(f"{config.lemma.value}: {report.absolute_violations} absolute violation(s)")
    if report.truncation_gap is not None:
        logger.info(f"sup over r truncation gap: {report.truncation_gap:.3e}")
    return 0


def gronwall(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    if args.samples < 1 or args.points < 2 or not args.horizon > 0:
        raise ConfigError("--samples >= 1, --points >= 2 and --horizon > 0 are required")
    times = np.linspace(0.0, args.horizon, args.points)

    def one(index: int):
        rng = np.random.default_rng([args.seed, index])
        instance = random_gronwall_instance(rng, args.horizon)
        return instance, check_gronwall(instance, times)

    results = WorkerPool().map(one, range(args.samples))
    rows = [
        (i, inst.K, inst.A0, inst.closure.value, inst.closure_param, rep.max_ratio, rep.violations,
         rep.hypothesis_holds, rep.horizon_reached)
        for i, (inst, rep) in enumerate(results)
    ]
    worst = max(rep.max_ratio for _, rep in results)
    write_report(
        workdir / args.report,
        ["instance", "K", "A0", "closure", "closure_param", "max_ratio", "violations", "hypothesis_holds", "horizon_reached"],
        rows,
        worst,
    )
    violations = sum(rep.violations for _, rep in results)
    if violations:
        raise LabError(f"Gronwall bound violated at {violations} output time(s)")
    logger.info(f"✓ {args.samples} Gronwall instances within the bound (max ratio {worst:.3e})")
    return 0


def register(subparsers) -> None:
    """Add `verify` and `gronwall-check` to the CLI."""
    p = subparsers.add_parser("verify", help="Fit C* of one inequality over random samples")
    p.add_argument("--config", help="INI file with a [lab] section")
    p.add_argument("--lemma", choices=[lemma.value for lemma in LemmaId])
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="nx,ny,nz,h")
    p.add_argument("--family", choices=["trig_poly", "gaussian_bump", "boundary_layer"])
    p.add_argument("--qmax", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--report")
    p.add_argument("--audit-grid", dest="audit_grid", help="Coarser grid nx,ny,nz,h for a resolution audit")
    p.set_defaults(handler=verify)

    p = subparsers.add_parser("gronwall-check", help="Check the logarithmic Gronwall bound on random instances")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--report", default="gronwall.csv")
    p.set_defaults(handler=gronwall)
