"""
Monitor Report Command
======================
Rebuilds the monitor series from a diagnostics table and writes one check
report per differential inequality plus a JSON summary.
"""

import argparse
import json
import logging
from pathlib import Path

from anisopede.config_files import parse_simulation_config
from anisopede.models import InequalityId, MonitorSettings
from anisopede.services.diagnostics import read_table, write_check_report
from anisopede.services.estimate_monitors import (
    MonitorState,
    check_diff_inequality,
    check_local_energy,
    check_prop31,
    check_prop51,
    check_prop53,
    compare_refinement,
)

logger = logging.getLogger(__name__)


def _checks(monitor: MonitorState) -> dict:
    checks = {}
    for inequality in InequalityId:
        if inequality == InequalityId.P52A:
            for q in monitor.config.q_values:
                check = check_diff_inequality(monitor, inequality, q)
                checks[check.label] = check
        elif inequality == InequalityId.P52B:
            for r in monitor.config.r_values:
                check = check_diff_inequality(monitor, inequality, r)
                checks[check.label] = check
        else:
            check = check_diff_inequality(monitor, inequality)
            checks[check.label] = check
    return checks


def monitor_report(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    settings_ = parse_simulation_config(workdir / args.config).monitor if args.config else MonitorSettings()
    out_dir = workdir / args.out
    out_dir.mkdir(parents=True, exist_ok=True)

    monitor = MonitorState.from_columns(read_table(workdir / args.diagnostics), settings_)
    checks = _checks(monitor)
    for label, check in checks.items():
        write_check_report(out_dir / f"{label}.csv", check)

    energy, energy_ok = check_prop31(monitor)
    _, running = check_prop53(monitor)
    summary = {
        "weighted_lq_sup": check_prop51(monitor).model_dump(),
        "energy_functional_ok": energy_ok,
        "energy_functional_final": energy[-1] if energy else None,
        "gradient_functional_sup": running[-1] if running else None,
        "local_energy": check_local_energy(monitor).model_dump(),
        "c_star": {label: check.c_star for label, check in checks.items()},
    }

    if args.fine:
        fine = MonitorState.from_columns(read_table(workdir / args.fine), settings_)
        fine_checks = _checks(fine)
        summary["refinement"] = {
            label: compare_refinement(checks[label], fine_checks[label], args.tolerance).model_dump()
            for label in checks
        }

    path = out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2))
    logger.info(f"✓ Monitor report written to {out_dir}")
    return 0


def register(subparsers) -> None:
    """Add `monitor-report` to the CLI."""
    p = subparsers.add_parser("monitor-report", help="Check the a priori estimates along a finished run")
    p.add_argument("--diagnostics", required=True, help="diagnostics.csv of the run")
    p.add_argument("--config", help="Simulation file whose [monitor] section produced the table")
    p.add_argument("--fine", help="diagnostics.csv of the same run at dt/2")
    p.add_argument("--tolerance", type=float, default=0.2)
    p.add_argument("--out", default="monitor_report")
    p.set_defaults(handler=monitor_report)
