"""
Shared fixtures: small grids, closed-form states and run configurations.
"""

import numpy as np
import pytest

from anisopede.models import MonitorSettings, Parity, SolverConfig
from anisopede.services.grid_transforms import RealField, make_grid, sample
from anisopede.services.initial_data import BUILTINS
from anisopede.services.solver import State


@pytest.fixture
def grid():
    return make_grid(16, 16, 8, 0.5)


@pytest.fixture
def grid16():
    return make_grid(16, 16, 16, 0.5)


@pytest.fixture
def shear_fields(grid):
    return BUILTINS["shear3d"](grid, {"A": 0.5})


@pytest.fixture
def overturning_state(grid16):
    """v = (sin 2pi x cos(pi z/h), 0), T = 0."""
    h = grid16.h
    v1 = sample(grid16, lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(np.pi * z / h), Parity.EVEN)
    zero = np.zeros(grid16.shape)
    return State(0.0, (v1, RealField(grid16, zero, Parity.EVEN)), RealField(grid16, zero, Parity.ODD))


@pytest.fixture
def solver_config():
    return SolverConfig(nx=16, ny=16, nz=8, h=0.5, dt=1e-3, t_end=0.02, output_interval=0.01)


@pytest.fixture
def monitor_settings():
    return MonitorSettings(qmax=16, q_values=[2.0, 4.0], r_values=[4.0], r0=0.25, stride=2)
