"""
Initial Data
============
Builtin initial conditions and the closed-form solutions used for checks.
"""

import logging
import math
from typing import Callable

import numpy as np

from anisopede.models import InitialCondition, Parity
from anisopede.services.grid_transforms import Grid, RealField, sample, to_physical

logger = logging.getLogger(__name__)

Fields = tuple[tuple[RealField, RealField], RealField]


class InitialDataError(ValueError):
    """Unknown builtin or bad parameters."""
    pass


def _zero(grid: Grid, params: dict[str, float]) -> Fields:
    zero = np.zeros(grid.shape)
    return (RealField(grid, zero, Parity.EVEN), RealField(grid, zero, Parity.EVEN)), RealField(grid, zero, Parity.ODD)


def _taylor(grid: Grid, params: dict[str, float]) -> Fields:
    """v = (A sin(2 pi y), 0), T = 0."""
    return taylor_solution(grid, params.get("A", 1.0), 0.0)


def _taylor_green(grid: Grid, params: dict[str, float]) -> Fields:
    return taylor_green_solution(grid, params.get("A", 1.0), 0.0)


def _shear3d(grid: Grid, params: dict[str, float]) -> Fields:
    """Vertically sheared flow with a temperature anomaly; smooth and fully 3D."""
    A = params.get("A", 1.0)
    h = grid.h
    v1 = sample(grid, lambda x, y, z: A * np.sin(2 * np.pi * y) * np.cos(np.pi * z / h), Parity.EVEN)
    v2 = sample(grid, lambda x, y, z: A * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * z / h), Parity.EVEN)
    T = sample(grid, lambda x, y, z: 0.5 * A * np.cos(2 * np.pi * x) * np.sin(np.pi * z / h), Parity.ODD)
    return (v1, v2), T


def _random_smooth(grid: Grid, params: dict[str, float]) -> Fields:
    """Random Gaussian-damped Fourier modes, scaled so that max |v1| = A."""
    A = params.get("A", 1.0)
    modes = int(params.get("modes", 3))
    if modes < 1:
        raise InitialDataError("random_smooth needs modes >= 1")
    rng = np.random.default_rng(int(params.get("seed", 0)))
    jx = np.fft.fftfreq(grid.nx, d=1.0 / grid.nx)[:, None, None]
    jy = np.fft.fftfreq(grid.ny, d=1.0 / grid.ny)[None, :, None]
    jz = np.fft.fftfreq(grid.nz, d=1.0 / grid.nz)[None, None, :]
    band = (np.abs(jx) <= modes) & (np.abs(jy) <= modes) & (np.abs(jz) <= modes)
    envelope = np.exp(-(jx**2 + jy**2 + jz**2) / modes**2) * band

    def draw(parity: Parity) -> RealField:
        coeffs = envelope * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
        return RealField(grid, to_physical(coeffs), parity)

    v1, v2, T = draw(Parity.NONE), draw(Parity.NONE), draw(Parity.NONE)
    scale = A / max(float(np.max(np.abs(v1.values))), 1e-300)
    return (v1.scaled(scale), v2.scaled(scale)), T.scaled(scale)


BUILTINS: dict[str, Callable[[Grid, dict[str, float]], Fields]] = {
    "zero": _zero,
    "taylor": _taylor,
    "taylor_green": _taylor_green,
    "shear3d": _shear3d,
    "random_smooth": _random_smooth,
}


def build(initial: InitialCondition, grid: Grid, seed: int = 0) -> Fields:
    """
    Initial (v, T) from a builtin name or from snapshot files.

    Args:
        initial: parsed [initial] section
        grid: target grid
        seed: run seed; random builtins use it unless the initial
            condition carries its own seed parameter

    Returns:
        ((v1, v2), T) with the parities of the model
    """
    if initial.snapshots:
        from anisopede.storage import read_snapshot

        missing = {"v1", "v2", "T"} - set(initial.snapshots)
        if missing:
            raise InitialDataError(f"Snapshot initial data needs files for {sorted(missing)}")
        v1, v2, T = (read_snapshot(initial.snapshots[k], grid)[0] for k in ("v1", "v2", "T"))
        return (v1, v2), T
    builder = BUILTINS.get(initial.name)
    if builder is None:
        raise InitialDataError(f"Unknown initial condition '{initial.name}' (known: {', '.join(BUILTINS)})")
    logger.info(f"Initial data: {initial.echo()} on {grid.describe()}")
    params = {"seed": seed, **initial.params}
    return builder(grid, params)


# =========================================
# Closed-form solutions
# =========================================
def taylor_solution(grid: Grid, A: float, t: float) -> Fields:
    """v = (A exp(-4 pi^2 t) sin(2 pi y), 0), T = 0, for every eps."""
    amp = A * math.exp(-4 * np.pi**2 * t)
    v1 = sample(grid, lambda x, y, z: amp * np.sin(2 * np.pi * y), Parity.EVEN)
    zero = np.zeros(grid.shape)
    return (v1, RealField(grid, zero, Parity.EVEN)), RealField(grid, zero, Parity.ODD)


def taylor_green_solution(grid: Grid, A: float, t: float) -> Fields:
    """Decaying 2D Taylor-Green vortex, z-independent."""
    amp = A * math.exp(-8 * np.pi**2 * t)
    v1 = sample(grid, lambda x, y, z: amp * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), Parity.EVEN)
    v2 = sample(grid, lambda x, y, z: -amp * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y), Parity.EVEN)
    zero = np.zeros(grid.shape)
    return (v1, v2), RealField(grid, zero, Parity.ODD)
