"""
Init file for services package
"""

from anisopede.services.grid_transforms import BandLimitError, GridError, ParityError
from anisopede.services.norms import NormError
from anisopede.services.solver import BlowUpError, CFLViolationError, SolverError
from anisopede.services.inequality_lab import LabError
from anisopede.services.estimate_monitors import MonitorError

__all__ = [
    "GridError",
    "ParityError",
    "BandLimitError",
    "NormError",
    "SolverError",
    "BlowUpError",
    "CFLViolationError",
    "LabError",
    "MonitorError",
]
