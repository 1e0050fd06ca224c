"""
Diagnostics Tables
==================
Comma-separated output: the per-run diagnostics table, lab reports and
monitor check reports.

Floats are written with 17 significant digits, so re-parsing a table
reproduces the recorded values exactly. Tables are append-safe: reopening an
existing table checks its header instead of rewriting it.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from anisopede.config import settings
from anisopede.models import DiagnosticsRecord, DiffIneqCheck, GronwallReport, InequalityReport, SweepRow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FOOTER_KEY = "C_star="


class DiagnosticsError(IOError):
    """Unwritable table or a header that does not match."""
    pass


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), settings.FLOAT_FORMAT)


def parse_value(text: str) -> float:
    return math.nan if text == "" else float(text)


# =========================================
# Diagnostics table
# =========================================
class DiagnosticsWriter:
    """
    Writes one row per output time.

    The column order is fixed by the first record (base columns, then monitor
    columns). Each row is flushed as soon as it is written.
    """

    def __init__(self, path: PathLike, append: bool = False):
        self.path = Path(path)
        self.append = append
        self.columns: Optional[list[str]] = None
        self._handle = None
        self._writer = None
        self.rows_written = 0

    def open(self, columns: Sequence[str]) -> None:
        columns = list(columns)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.append and self.path.exists() and self.path.stat().st_size > 0:
                existing = read_header(self.path)
                if existing != columns:
                    raise DiagnosticsError(
                        f"{self.path}: header {existing} does not match the run's columns {columns}"
                    )
                self._handle = open(self.path, "a", newline="")
                self._writer = csv.writer(self._handle, lineterminator="\n")
            else:
                self._handle = open(self.path, "w", newline="")
                self._writer = csv.writer(self._handle, lineterminator="\n")
                self._writer.writerow(columns)
                self._handle.flush()
        except OSError as e:
            raise DiagnosticsError(f"Cannot open diagnostics table {self.path}: {e}") from e
        self.columns = columns

    def write(self, record: DiagnosticsRecord) -> None:
        if self.columns is None:
            self.open(record.columns())
        elif record.columns() != self.columns:
            raise DiagnosticsError(f"{self.path}: record columns changed mid-run")
        try:
            self._writer.writerow([format_value(v) for v in record.row()])
            self._handle.flush()
        except OSError as e:
            raise DiagnosticsError(f"Failed writing {self.path}: {e}") from e
        self.rows_written += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> "DiagnosticsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_header_only(path: PathLike, columns: Sequence[str]) -> None:
    with DiagnosticsWriter(path) as writer:
        writer.open(columns)


def read_header(path: PathLike) -> list[str]:
    with open(path, newline="") as handle:
        return next(csv.reader(handle), [])


def truncate_after(path: PathLike, time: float) -> int:
    """Drop rows later than `time` (resume from a checkpoint); returns rows kept.

    Kept rows are copied as text, so they stay byte-identical.
    """
    path = Path(path)
    if not path.exists():
        raise DiagnosticsError(f"Table {path} does not exist")
    lines = path.read_text().splitlines(keepends=True)
    if not lines:
        raise DiagnosticsError(f"Table {path} has no header")
    column = next(csv.reader([lines[0]])).index("time")
    kept = [line for line in lines[1:] if float(next(csv.reader([line]))[column]) <= time]
    path.write_text("".join([lines[0], *kept]))
    return len(kept)


def read_table(path: PathLike) -> dict[str, np.ndarray]:
    """Columns of a table as float arrays; footer lines are skipped."""
    path = Path(path)
    if not path.exists():
        raise DiagnosticsError(f"Table {path} does not exist")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise DiagnosticsError(f"Table {path} has no header")
        rows = [row for row in reader if row and not row[0].startswith(FOOTER_KEY)]
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DiagnosticsError(f"{path}: line {i} has {len(row)} fields, expected {len(header)}")
    data = np.array([[parse_value(x) for x in row] for row in rows], dtype=float).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


# =========================================
# Reports
# =========================================
def write_report(
    path: PathLike, header: Sequence[str], rows: Iterable[Sequence], c_star: Optional[float] = None
) -> Path:
    """A table with an optional `C_star=<value>` footer line."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([format_value(v) for v in row])
            if c_star is not None:
                handle.write(f"{FOOTER_KEY}{format_value(c_star)}\n")
    except OSError as e:
        raise DiagnosticsError(f"Failed writing report {path}: {e}") from e
    logger.info(f"✓ Report written to {path}")
    return path


def read_footer(path: PathLike) -> Optional[float]:
    with open(path) as handle:
        for line in handle:
            if line.startswith(FOOTER_KEY):
                return float(line[len(FOOTER_KEY):])
    return None


def write_inequality_report(path: PathLike, report: InequalityReport) -> Path:
    rows = zip(range(len(report.ratio)), report.lhs, report.rhs, report.ratio)
    return write_report(path, ["sample", "LHS", "RHS", "ratio"], rows, report.c_star)


def write_check_report(path: PathLike, check: DiffIneqCheck) -> Path:
    rows = zip(check.times, check.lhs, check.rhs, check.ratio)
    return write_report(path, ["t", "LHS", "RHS", "ratio"], rows, check.c_star)


def write_gronwall_report(path: PathLike, report: GronwallReport) -> Path:
    rows = zip(report.times, report.A, report.int_B, report.bound, report.ratio, report.slack)
    return write_report(path, ["t", "A", "int_B", "bound", "ratio", "slack"], rows, report.max_ratio)


def write_sweep(path: PathLike, rows: Sequence[SweepRow]) -> Path:
    data = ((r.eps, r.eps_next, r.distance, r.status.value, r.message or "") for r in rows)
    return write_report(path, ["eps", "eps_next", "h1_distance", "status", "message"], data)
