"""
End-to-end tests of the command-line interface.
"""

import csv
import json

import pytest

from anisopede.main import build_parser, main
from anisopede.models import RunStatus
from anisopede.services.diagnostics import read_footer, read_table
from anisopede.storage import read_manifest

CONFIG = """\
[grid]
nx = 16
ny = 16
nz = 8
h = 0.5

[physics]
eps = 0.01
f0 = 1

[time]
dt = 0.001
t_end = {t_end}

[output]
interval = 0.01
directory = {directory}
checkpoint_every = 1

[initial]
builtin = shear3d,A=0.5

[monitor]
qmax = 16
stride = 2
"""


def _config(tmp_path, name="run.ini", t_end=0.02, directory="run"):
    path = tmp_path / name
    path.write_text(CONFIG.format(t_end=t_end, directory=directory))
    return name


def _cli(tmp_path, *args) -> int:
    return main(["--workdir", str(tmp_path), *args])


class TestParser:
    """Subcommand registration."""

    def test_subcommands(self):
        parser = build_parser()
        for command in ("simulate", "eps-sweep", "verify", "gronwall-check", "monitor-report"):
            args = parser.parse_args(
                {
                    "simulate": ["simulate", "--config", "a.ini"],
                    "eps-sweep": ["eps-sweep", "--config", "a.ini", "--eps", "0.1,0.01"],
                    "verify": ["verify", "--lemma", "n2.1"],
                    "gronwall-check": ["gronwall-check"],
                    "monitor-report": ["monitor-report", "--diagnostics", "d.csv"],
                }[command]
            )
            assert args.command == command
            assert callable(args.handler)


class TestSimulate:
    """simulate and eps-sweep."""

    def test_run_writes_table_checkpoints_and_manifest(self, tmp_path):
        assert _cli(tmp_path, "simulate", "--config", _config(tmp_path)) == 0
        manifest = read_manifest(tmp_path / "run")
        assert manifest.status == RunStatus.COMPLETED
        assert [entry.time for entry in manifest.snapshots] == [0.0, 0.01, 0.02]
        assert "[grid]" in manifest.config_echo
        table = read_table(tmp_path / "run" / "diagnostics.csv")
        assert table["time"].tolist() == [0.0, 0.01, 0.02]
        assert "u_q4_pow" in table

    def test_resume_matches_straight_run(self, tmp_path):
        assert _cli(tmp_path, "simulate", "--config", _config(tmp_path, "straight.ini", directory="straight")) == 0

        name = _config(tmp_path, "split.ini", t_end=0.01, directory="split")
        assert _cli(tmp_path, "simulate", "--config", name) == 0
        _config(tmp_path, "split.ini", t_end=0.02, directory="split")
        assert _cli(tmp_path, "simulate", "--config", name, "--resume") == 0

        straight = (tmp_path / "straight" / "diagnostics.csv").read_text()
        resumed = (tmp_path / "split" / "diagnostics.csv").read_text()
        assert resumed == straight
        assert read_manifest(tmp_path / "split").status == RunStatus.COMPLETED

    def test_resume_without_manifest(self, tmp_path):
        assert _cli(tmp_path, "simulate", "--config", _config(tmp_path), "--resume") == 1

    def test_missing_config(self, tmp_path):
        assert _cli(tmp_path, "simulate", "--config", "absent.ini") == 1

    def test_eps_sweep(self, tmp_path):
        name = _config(tmp_path, t_end=0.01)
        assert _cli(tmp_path, "eps-sweep", "--config", name, "--eps", "0.1,0.01", "--report", "sweep.csv") == 0
        with open(tmp_path / "sweep.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert [(float(r["eps"]), float(r["eps_next"])) for r in rows] == [(0.1, 0.01)]
        assert float(rows[0]["h1_distance"]) > 0
        assert rows[0]["status"] == "completed"

    def test_eps_sweep_rejects_increasing_values(self, tmp_path):
        assert _cli(tmp_path, "eps-sweep", "--config", _config(tmp_path), "--eps", "0.01,0.1") == 1


class TestLab:
    """verify and gronwall-check."""

    def test_verify(self, tmp_path):
        args = ["verify", "--lemma", "sup-z-l2", "--samples", "4", "--grid", "16,16,8,0.5", "--report", "lab.csv"]
        assert _cli(tmp_path, *args) == 0
        assert read_footer(tmp_path / "lab.csv") <= 1.0 + 1e-12
        assert len(read_table(tmp_path / "lab.csv")["ratio"]) == 4

    def test_verify_from_file(self, tmp_path):
        (tmp_path / "lab.ini").write_text("[lab]\nlemma = n2.3\nsamples = 3\ngrid = 16,16,8,0.5\nreport = n23.csv\n")
        assert _cli(tmp_path, "verify", "--config", "lab.ini", "--seed", "5") == 0
        assert (tmp_path / "n23.csv").exists()

    def test_verify_needs_a_lemma(self, tmp_path):
        assert _cli(tmp_path, "verify", "--samples", "2") == 1

    def test_verify_bad_grid(self, tmp_path):
        assert _cli(tmp_path, "verify", "--lemma", "n2.1", "--grid", "16,16") == 1

    def test_gronwall_check(self, tmp_path):
        assert _cli(tmp_path, "gronwall-check", "--samples", "3", "--report", "g.csv") == 0
        assert read_footer(tmp_path / "g.csv") <= 1.0
        with open(tmp_path / "g.csv", newline="") as handle:
            rows = [r for r in csv.DictReader(handle) if not r["instance"].startswith("C_star=")]
        assert [r["violations"] for r in rows] == ["0", "0", "0"]
        assert all(r["hypothesis_holds"] == "1" for r in rows)


class TestMonitorReport:
    """monitor-report over a finished run."""

    def test_report(self, tmp_path):
        name = _config(tmp_path)
        assert _cli(tmp_path, "simulate", "--config", name) == 0
        args = ["monitor-report", "--diagnostics", "run/diagnostics.csv", "--config", name, "--out", "checks"]
        assert _cli(tmp_path, *args) == 0
        summary = json.loads((tmp_path / "checks" / "summary.json").read_text())
        assert summary["energy_functional_ok"]
        assert "P33" in summary["c_star"]
        assert (tmp_path / "checks" / "P52a(q=4).csv").exists()

    def test_refinement(self, tmp_path):
        name = _config(tmp_path)
        assert _cli(tmp_path, "simulate", "--config", name) == 0
        args = [
            "monitor-report", "--diagnostics", "run/diagnostics.csv", "--fine", "run/diagnostics.csv",
            "--config", name, "--out", "checks",
        ]
        assert _cli(tmp_path, *args) == 0
        summary = json.loads((tmp_path / "checks" / "summary.json").read_text())
        assert all(verdict["stable"] for verdict in summary["refinement"].values())

    def test_table_without_monitor_columns(self, tmp_path):
        (tmp_path / "d.csv").write_text("time,kinetic_energy\n0,1\n")
        assert _cli(tmp_path, "monitor-report", "--diagnostics", "d.csv") == 1


@pytest.mark.slow
def test_taylor_acceptance_run(tmp_path):
    path = tmp_path / "taylor.ini"
    path.write_text(
        "[grid]\nnx = 32\nny = 32\nnz = 8\n[time]\ndt = 0.0001\nt_end = 0.1\n"
        "[initial]\nbuiltin = taylor,A=1\n[monitor]\nenabled = false\n"
    )
    assert _cli(tmp_path, "simulate", "--config", "taylor.ini") == 0
