"""
Storage Module
==============
Snapshot files, checkpoints and the run manifest.

Snapshot format (one file per field):
    line 1:    ANISOPEDE1
    lines 2-8: nx=<int>, ny=<int>, nz=<int>, h=<float>, field=<name>,
               parity=<even|odd|none>, time=<float>, one key=value per line
    rest:      nx*ny*nz little-endian float64 values, x fastest (Fortran order)

A checkpoint is a directory holding v1.bin, v2.bin, T.bin and totals.json.
Floats in headers use 17 significant digits, so a write/read round trip is
bitwise.
"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import BinaryIO, Iterator, Optional, Union

import numpy as np
from pydantic import ValidationError

from anisopede.config import settings
from anisopede.models import Parity, RunManifest, RunStatus, RunTotals, SnapshotEntry
from anisopede.services.grid_transforms import Grid, GridError, RealField, make_grid
from anisopede.services.solver import SolverError, State

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
MAGIC = "ANISOPEDE1"
HEADER_KEYS = ("nx", "ny", "nz", "h", "field", "parity", "time")
FIELD_NAMES = ("v1", "v2", "T")
MANIFEST_NAME = "manifest.json"


class SnapshotError(IOError):
    """Unreadable or inconsistent snapshot file."""
    pass


class CheckpointError(IOError):
    """Incomplete checkpoint or manifest."""
    pass


# =========================================
# Snapshots
# =========================================
def _fmt(x: float) -> str:
    return format(float(x), settings.FLOAT_FORMAT)


def write_snapshot(path: PathLike, field: RealField, name: str, time: float) -> Path:
    path = Path(path)
    grid = field.grid
    values = {
        "nx": grid.nx,
        "ny": grid.ny,
        "nz": grid.nz,
        "h": _fmt(grid.h),
        "field": name,
        "parity": field.parity.value,
        "time": _fmt(time),
    }
    header = MAGIC + "\n" + "".join(f"{key}={values[key]}\n" for key in HEADER_KEYS)
    data = np.asarray(field.values, dtype="<f8").tobytes(order="F")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(header.encode("ascii"))
            handle.write(data)
    except OSError as e:
        raise SnapshotError(f"Failed writing snapshot {path}: {e}") from e
    return path


def _read_header(handle: BinaryIO, path: Path) -> dict:
    """Consume the magic line and the key=value lines, leaving the payload."""
    if handle.readline().rstrip(b"\n") != MAGIC.encode("ascii"):
        raise SnapshotError(f"{path}: not an {MAGIC} snapshot")
    meta = {}
    for expected in HEADER_KEYS:
        try:
            line = handle.readline().decode("ascii").rstrip("\n")
        except UnicodeDecodeError as e:
            raise SnapshotError(f"{path}: corrupted header") from e
        key, sep, value = line.partition("=")
        if not sep or key != expected:
            raise SnapshotError(f"{path}: header line {line!r} where {expected}=... was expected")
        meta[key] = value
    try:
        return {
            "nx": int(meta["nx"]),
            "ny": int(meta["ny"]),
            "nz": int(meta["nz"]),
            "h": float(meta["h"]),
            "field": meta["field"],
            "parity": Parity(meta["parity"]),
            "time": float(meta["time"]),
        }
    except ValueError as e:
        raise SnapshotError(f"{path}: corrupted header ({e})") from e


def read_snapshot(path: PathLike, grid: Optional[Grid] = None) -> tuple[RealField, dict]:
    """(field, header metadata); `grid` enforces the expected resolution."""
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            meta = _read_header(handle, path)
            payload = handle.read()
    except OSError as e:
        raise SnapshotError(f"Cannot read snapshot {path}: {e}") from e

    try:
        stored = make_grid(meta["nx"], meta["ny"], meta["nz"], meta["h"])
    except GridError as e:
        raise SnapshotError(f"{path}: {e}") from e
    if grid is not None and grid != stored:
        raise SnapshotError(f"{path}: grid {stored.describe()} does not match {grid.describe()}")
    expected = 8 * stored.nx * stored.ny * stored.nz
    if len(payload) != expected:
        raise SnapshotError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f8").reshape(stored.shape, order="F")
    return RealField(stored, values.astype(float), meta["parity"]), meta


# =========================================
# Checkpoints
# =========================================
def checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:08d}"


def write_checkpoint(state: State, totals: RunTotals, directory: PathLike) -> SnapshotEntry:
    """Write the state and running sums; returns the manifest entry."""
    directory = Path(directory)
    files = {}
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for name, field in zip(FIELD_NAMES, (*state.v, state.T)):
            files[name] = str(write_snapshot(directory / f"{name}.bin", field, name, state.time))
        payload = {"time": _fmt(state.time), "f0": _fmt(state.f0), "totals": totals.model_dump()}
        (directory / "totals.json").write_text(json.dumps(payload, indent=2))
    except (OSError, SnapshotError) as e:
        raise CheckpointError(f"Failed writing checkpoint {directory}: {e}") from e
    files["totals"] = str(directory / "totals.json")
    logger.info(f"Checkpoint at t={state.time:.6g} (step {totals.step}) -> {directory}")
    return SnapshotEntry(step=totals.step, time=state.time, files=files)


def read_checkpoint(directory: PathLike, grid: Optional[Grid] = None) -> tuple[State, RunTotals]:
    directory = Path(directory)
    totals_path = directory / "totals.json"
    if not totals_path.exists():
        raise CheckpointError(f"Checkpoint {directory} has no totals.json")
    try:
        payload = json.loads(totals_path.read_text())
        totals = RunTotals(**payload["totals"])
        time, f0 = float(payload["time"]), float(payload["f0"])
    except (KeyError, ValueError, ValidationError) as e:
        raise CheckpointError(f"{totals_path}: corrupted ({e})") from e

    fields = {}
    for name in FIELD_NAMES:
        try:
            field, meta = read_snapshot(directory / f"{name}.bin", grid)
        except SnapshotError as e:
            raise CheckpointError(str(e)) from e
        if meta["time"] != time:
            raise CheckpointError(f"{directory}: {name}.bin is at t={meta['time']}, totals at t={time}")
        fields[name] = field
        grid = field.grid
    return State(time, (fields["v1"], fields["v2"]), fields["T"], f0), totals


# =========================================
# Manifest
# =========================================
def write_manifest(directory: PathLike, manifest: RunManifest) -> Path:
    """Write manifest.json; every listed file must exist."""
    directory = Path(directory)
    for entry in manifest.snapshots:
        missing = [f for f in entry.files.values() if not Path(f).exists()]
        if missing:
            raise CheckpointError(f"Manifest lists missing files: {', '.join(missing)}")
    path = directory / MANIFEST_NAME
    try:
        directory.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.model_dump_json(indent=2))
    except OSError as e:
        raise CheckpointError(f"Failed writing manifest {path}: {e}") from e
    return path


def read_manifest(directory: PathLike) -> RunManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise CheckpointError(f"No manifest at {path}")
    try:
        return RunManifest.model_validate_json(path.read_text())
    except ValidationError as e:
        raise CheckpointError(f"{path}: invalid manifest ({e.errors()[0]['msg']})") from e


def latest_checkpoint(manifest: RunManifest) -> SnapshotEntry:
    if not manifest.snapshots:
        raise CheckpointError("Manifest lists no checkpoints to resume from")
    return manifest.snapshots[-1]


@contextmanager
def run_context(directory: PathLike, manifest: RunManifest) -> Iterator[RunManifest]:
    """
    Keeps manifest.json current around a run.

    Usage:
        with run_context(out_dir, manifest) as m:
            m.snapshots.append(write_checkpoint(...))

    On success the status becomes completed; a SolverError marks the run
    failed and any other exception (e.g. a full disk) marks it incomplete.
    The exception is re-raised either way.
    """
    manifest.status = RunStatus.RUNNING
    write_manifest(directory, manifest)
    try:
        yield manifest
        manifest.status = RunStatus.COMPLETED
    except SolverError as e:
        manifest.status = RunStatus.FAILED
        manifest.message = str(e)
        raise
    except Exception as e:
        manifest.status = RunStatus.INCOMPLETE
        manifest.message = f"{type(e).__name__}: {e}"
        raise
    finally:
        try:
            write_manifest(directory, manifest)
        except CheckpointError as e:
            logger.error(f"✗ Could not update manifest: {e}")
