"""
Shared Models
=============
Enums and pydantic schemas used across the services: run configuration,
lab sample specifications, reports and the run manifest.
"""

import math
from enum import Enum as PyEnum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from anisopede.config import settings


# =========================================
# Enums
# =========================================
class Parity(str, PyEnum):
    EVEN = "even"
    ODD = "odd"
    NONE = "none"


class SampleFamily(str, PyEnum):
    TRIG_POLY = "trig_poly"
    GAUSSIAN_BUMP = "gaussian_bump"
    BOUNDARY_LAYER = "boundary_layer"


class LemmaId(str, PyEnum):
    N21 = "n2.1"
    N22 = "n2.2"
    N23 = "n2.3"
    DISK = "disk"
    DISK_N22 = "disk-n2.2"
    SUP_Z_L2 = "sup-z-l2"
    SUP_Z_L4 = "sup-z-l4"
    SUP_Z_DISK = "sup-z-disk"
    LOG_SOBOLEV = "log-sobolev"
    LOG_SOBOLEV_WHOLE = "log-sobolev-whole"
    GRONWALL = "gronwall"


class NormKind(str, PyEnum):
    LQ = "lq"
    H1 = "h1"
    SUP_Z_L2_S = "sup_z_l2_s"
    SUP_Z_L4_S = "sup_z_l4_s"
    LOCAL_DISK_L2 = "local_disk_l2"
    GRAD_H_L2 = "grad_h_l2"
    DZ_LQ = "dz_lq"


class InequalityId(str, PyEnum):
    P52A = "P52a"
    P52B = "P52b"
    P33 = "P33"
    P34 = "P34"
    P35 = "P35"
    P53 = "P53"


class GronwallClosure(str, PyEnum):
    CONSTANT = "constant"
    PROPORTIONAL = "proportional"


class RunStatus(str, PyEnum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
    INCOMPLETE = "incomplete"


# =========================================
# Geometry helpers
# =========================================
class Disk(BaseModel):
    """Horizontal disk D_r(center) on the unit torus."""
    model_config = ConfigDict(frozen=True)

    center: tuple[float, float] = (0.5, 0.5)
    radius: float = Field(..., gt=0)


class NormRequest(BaseModel):
    """One norm evaluation: the kind plus its exponent or region."""
    model_config = ConfigDict(frozen=True)

    kind: NormKind
    q: float = Field(2.0, ge=1)
    disk: Optional[Disk] = None

    @model_validator(mode="after")
    def _region_required(self):
        if self.kind == NormKind.LOCAL_DISK_L2 and self.disk is None:
            raise ValueError("local_disk_l2 requires a disk")
        return self


# =========================================
# Run configuration
# =========================================
class InitialCondition(BaseModel):
    """Builtin initializer name with parameters, or snapshot paths."""
    model_config = ConfigDict(extra="forbid")

    name: str = "zero"
    params: dict[str, float] = Field(default_factory=dict)
    snapshots: dict[str, str] = Field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "InitialCondition":
        """Parse `name,key=value,...` (e.g. `taylor,A=1.0`)."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty initial condition")
        params = {}
        for item in parts[1:]:
            if "=" not in item:
                raise ValueError(f"expected key=value, got '{item}'")
            key, value = item.split("=", 1)
            params[key.strip()] = float(value)
        return cls(name=parts[0], params=params)

    def echo(self) -> str:
        items = [self.name] + [f"{k}={format(v, settings.FLOAT_FORMAT)}" for k, v in self.params.items()]
        return ",".join(items)


class SolverConfig(BaseModel):
    """Grid, physics, time stepping and output settings of one run."""
    model_config = ConfigDict(extra="forbid")

    # [grid]
    nx: int = 32
    ny: int = 32
    nz: int = 16
    h: float = Field(0.5, gt=0)

    # [physics]
    eps: float = Field(0.0, ge=0)
    f0: float = 0.0

    # [time]
    dt: float = Field(1e-3, gt=0)
    t_end: float = Field(0.1, gt=0)
    adaptive: bool = False
    cfl: float = Field(default_factory=lambda: settings.DEFAULT_CFL_SAFETY, gt=0, le=1)

    # [output]
    output_interval: float = Field(0.01, gt=0)
    directory: str = "run"
    checkpoint_every: int = Field(10, ge=1)

    # [run]
    seed: int = 0

    @field_validator("nx", "ny", "nz")
    @classmethod
    def _even_resolution(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise ValueError("resolution must be an even integer >= 4")
        return v


class MonitorSettings(BaseModel):
    """Quantities tracked along a trajectory and their parameters."""
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    m: float = Field(default_factory=lambda: settings.DEFAULT_M)
    qmax: int = Field(default_factory=lambda: settings.DEFAULT_QMAX, ge=2)
    q_values: list[float] = Field(default_factory=lambda: [2.0, 4.0])
    r_values: list[float] = Field(default_factory=lambda: [4.0])
    r0: float = Field(0.25, gt=0, le=1)
    delta0: float = Field(1.0, gt=0)
    stride: int = Field(4, ge=1)

    @field_validator("m")
    @classmethod
    def _m_above_two(cls, v: float) -> float:
        if not 2 < v < math.inf:
            raise ValueError("m must lie in (2, inf)")
        return v

    @field_validator("q_values")
    @classmethod
    def _q_at_least_two(cls, v: list[float]) -> list[float]:
        if any(q < 2 for q in v):
            raise ValueError("q values must be >= 2")
        return v

    @field_validator("r_values")
    @classmethod
    def _r_above_two(cls, v: list[float]) -> list[float]:
        if any(r <= 2 for r in v):
            raise ValueError("r values must exceed 2")
        return v


class SimulationConfig(BaseModel):
    """A parsed `simulate` configuration file."""
    solver: SolverConfig
    initial: InitialCondition = Field(default_factory=InitialCondition)
    monitor: MonitorSettings = Field(default_factory=MonitorSettings)
    source: Optional[str] = None


class LabConfig(BaseModel):
    """A parsed lab configuration file ([lab] section)."""
    model_config = ConfigDict(extra="forbid")

    lemma: LemmaId
    samples: int = Field(1000, ge=1)
    seed: int = 0
    grid: tuple[int, int, int, float] = (32, 32, 32, 0.5)
    family: Optional[SampleFamily] = None
    qmax: int = Field(default_factory=lambda: settings.DEFAULT_QMAX, ge=2)
    p: tuple[float, float, float] = (4.0, 4.0, 4.0)
    lam: float = Field(0.5, gt=0)
    radius: float = Field(0.25, gt=0)
    horizon: float = Field(1.0, gt=0)
    report: str = "report.csv"


# =========================================
# Inequality lab
# =========================================
class SampleSpec(BaseModel):
    """Random test-function family for one ensemble member."""
    model_config = ConfigDict(frozen=True)

    family: SampleFamily = SampleFamily.TRIG_POLY
    seed: int = 0
    amplitude: tuple[float, float] = (0.5, 2.0)
    parity: Parity = Parity.NONE
    max_degree: Optional[int] = Field(None, ge=1)
    bump_count: int = Field(3, ge=1)
    width_range: tuple[float, float] = (0.08, 0.3)
    sharpness: float = Field(8.0, gt=0)

    @model_validator(mode="after")
    def _ordered_ranges(self):
        lo, hi = self.amplitude
        if not 0 < lo <= hi:
            raise ValueError("amplitude range must satisfy 0 < lo <= hi")
        wlo, whi = self.width_range
        if not 0 < wlo <= whi:
            raise ValueError("width range must satisfy 0 < lo <= hi")
        return self


class InequalityReport(BaseModel):
    """Per-sample sides of one lemma instance with the fitted constant."""
    lemma: LemmaId
    grid: tuple[int, int, int, float]
    lhs: list[float]
    rhs: list[float]
    ratio: list[float]
    c_star: float
    margin: float = 1e-9
    violations_at_c_star: int = 0
    absolute_violations: Optional[int] = None
    truncation_gap: Optional[float] = None
    histogram_counts: list[int] = Field(default_factory=list)
    histogram_edges: list[float] = Field(default_factory=list)


class PiecewisePolynomial(BaseModel):
    """f(t) = sum_k c_k t^k on [breakpoints[i], breakpoints[i+1])."""
    model_config = ConfigDict(frozen=True)

    breakpoints: list[float] = Field(default_factory=lambda: [0.0])
    coefficients: list[list[float]] = Field(default_factory=lambda: [[0.0]])

    @model_validator(mode="after")
    def _consistent_pieces(self):
        if len(self.breakpoints) != len(self.coefficients):
            raise ValueError("one coefficient list per breakpoint is required")
        if self.breakpoints[0] != 0.0:
            raise ValueError("the first breakpoint must be 0")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        return self


class GronwallInstance(BaseModel):
    """A, B, f data built so that A' + B <= K A log B + f holds."""
    model_config = ConfigDict(frozen=True)

    K: float = Field(1.0, ge=1)
    A0: float = Field(0.0, ge=0)
    f: PiecewisePolynomial = Field(default_factory=PiecewisePolynomial)
    closure: GronwallClosure = GronwallClosure.CONSTANT
    closure_param: float = math.e
    horizon: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _closure_keeps_b_above_one(self):
        if self.closure == GronwallClosure.CONSTANT and self.closure_param < math.e:
            raise ValueError("constant closure needs B >= e")
        if self.closure == GronwallClosure.PROPORTIONAL and self.closure_param <= 0:
            raise ValueError("proportional closure needs a positive factor")
        return self


class GronwallReport(BaseModel):
    """Conclusion check of the logarithmic Gronwall lemma along one ODE."""
    times: list[float]
    A: list[float]
    int_B: list[float]
    Q: list[float]
    bound: list[float]
    ratio: list[float]
    slack: list[float]
    max_ratio: float
    violations: int
    hypothesis_holds: bool
    horizon_reached: float


# =========================================
# Estimate monitors
# =========================================
class DiffIneqCheck(BaseModel):
    """LHS/RHS series of one differential inequality with C* fitted."""
    inequality: InequalityId
    label: str
    times: list[float]
    lhs: list[float]
    rhs: list[float]
    ratio: list[float]
    c_star: float


# =========================================
# Run manifest
# =========================================
class SnapshotEntry(BaseModel):
    step: int
    time: float
    files: dict[str, str]


class RunManifest(BaseModel):
    """What a run wrote, where, and whether it finished."""
    config_echo: str
    code_version: str = Field(default_factory=lambda: settings.APP_VERSION)
    seed: int = 0
    snapshots: list[SnapshotEntry] = Field(default_factory=list)
    diagnostics_path: str = "diagnostics.csv"
    status: RunStatus = RunStatus.RUNNING
    message: Optional[str] = None

    @field_validator("snapshots")
    @classmethod
    def _times_increasing(cls, v: list[SnapshotEntry]) -> list[SnapshotEntry]:
        times = [entry.time for entry in v]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        return v


# =========================================
# Solver output
# =========================================
class RunTotals(BaseModel):
    """Running sums carried across steps and checkpoints."""
    step: int = 0
    initial_energy: float = 0.0
    dissipation_h_v: float = 0.0
    dissipation_z_v: float = 0.0
    dissipation_h_T: float = 0.0
    dissipation_z_T: float = 0.0
    coupling_work: float = 0.0


class DiagnosticsRecord(BaseModel):
    """One row of the diagnostics table (one per output time)."""
    step: int
    time: float
    dt: float
    kinetic_energy: float
    thermal_energy: float
    dissipation_h_v: float
    dissipation_z_v: float
    dissipation_h_T: float
    dissipation_z_T: float
    coupling_work: float
    energy_residual: float
    barotropic_residual: float
    parity_residual: float
    w_top_max: float
    max_v: float
    cfl_number: float
    monitor: dict[str, float] = Field(default_factory=dict)

    @classmethod
    def base_columns(cls) -> list[str]:
        return [name for name in cls.model_fields if name != "monitor"]

    def columns(self) -> list[str]:
        return self.base_columns() + list(self.monitor)

    def row(self) -> list[float]:
        return [getattr(self, name) for name in self.base_columns()] + list(self.monitor.values())


class SweepRow(BaseModel):
    """H1 distance between the trajectories of two consecutive eps values."""
    eps: float
    eps_next: float
    distance: Optional[float] = None
    status: RunStatus = RunStatus.COMPLETED
    message: Optional[str] = None


# =========================================
# Monitor verdicts
# =========================================
class BoundCheck(BaseModel):
    """Sup over time of a tracked quantity against its initial value."""
    label: str
    value: float
    initial: float
    growth_factor: float
    growth_flag: bool


class LocalEnergyCheck(BaseModel):
    """First time the local energy profile exceeds 8 delta0^2."""
    r0: float
    delta0: float
    t0: float
    exceeded: bool
    times: list[float]
    profile: list[float]


class RefinementVerdict(BaseModel):
    """Whether a fitted constant survives time-step refinement."""
    label: str
    c_coarse: float
    c_fine: float
    relative_change: float
    stable: bool
