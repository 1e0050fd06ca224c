"""
Solver
======
Time integration of the eps-regularized primitive equations on the extended
domain (v Even, T Odd in z):

    dv/dt = -(v.grad_H)v - w dv/dz - f0 k x v - grad_H(p_s + p_hydro) + Lap_H v + eps d2v/dz2
    dT/dt = -v.grad_H T - w (dT/dz + 1/h) + Lap_H T + eps d2T/dz2
    w = -int_{-h}^z div_H v,  p_hydro = -int_{-h}^z T

eps = 0 is the target system with horizontal dissipation only.

Integrator: Heun's third-order Runge-Kutta (nodes 0, 1/3, 2/3) in
integrating-factor form; the linear dissipation is integrated exactly and
only exponentials of nonnegative time are formed. Parity and barotropic
projections are applied after every stage.

A State's canonical data are its real-space values, so a run resumed from a
checkpoint repeats a straight run bit for bit.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from anisopede.config import settings
from anisopede.models import DiagnosticsRecord, Parity, RunStatus, RunTotals, SolverConfig, SweepRow
from anisopede.scheduler import WorkerPool
from anisopede.services.grid_transforms import (
    Grid,
    RealField,
    dealias,
    make_grid,
    parity_residual,
    project_parity,
    project_parity_hat,
    to_physical,
    to_spectral,
)
from anisopede.services.operators import (
    antiderivative_hat,
    barotropic_project_hat,
    barotropic_residual,
    diagnose_w,
    div_h_hat,
    hydrostatic_pressure,
    surface_pressure_hat,
    w_top,
)
from anisopede.services.norms import h1_norm

logger = logging.getLogger(__name__)

Hats = tuple[np.ndarray, np.ndarray, np.ndarray]


class SolverError(Exception):
    """Base class for integration failures."""

    def __init__(self, message: str):
        super().__init__(message)
        self.last_state: Optional["State"] = None
        self.totals: Optional[RunTotals] = None


class BlowUpError(SolverError):
    """Non-finite or runaway solution."""

    def __init__(self, time: float, norms: dict[str, float]):
        described = ", ".join(f"{k}={v:.3e}" for k, v in norms.items())
        super().__init__(f"Blow-up at t={time:.6g} ({described})")
        self.time = time
        self.norms = norms


class CFLViolationError(SolverError):
    """Fixed time step exceeds the advective stability limit."""
    pass


# =========================================
# State
# =========================================
@dataclass(frozen=True, eq=False)
class State:
    """Prognostic (v, T) at one time; w, p_s, p_hydro diagnosed on demand."""
    time: float
    v: tuple[RealField, RealField]
    T: RealField
    f0: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.T.grid

    @cached_property
    def w(self) -> RealField:
        return diagnose_w(self.v)

    @cached_property
    def p_hydro(self) -> RealField:
        return hydrostatic_pressure(self.T)

    @cached_property
    def p_s(self) -> RealField:
        kernel = _Kernel(self.grid, 0.0, self.f0)
        p_hat = kernel.explicit(*kernel.hats(self))[3]
        return RealField(self.grid, to_physical(p_hat), Parity.EVEN)


@dataclass(frozen=True, eq=False)
class RhsBundle:
    """Explicit tendencies f1, f2 (linear dissipation excluded) and p_s."""
    dv: tuple[RealField, RealField]
    dT: RealField
    p_s: RealField


@dataclass
class Trajectory:
    """Output-time states and diagnostics of one run."""
    config: SolverConfig
    states: list[State] = field(default_factory=list)
    records: list[DiagnosticsRecord] = field(default_factory=list)
    totals: RunTotals = field(default_factory=RunTotals)
    status: RunStatus = RunStatus.RUNNING
    last_state: Optional[State] = None

    @property
    def final_state(self) -> Optional[State]:
        return self.states[-1] if self.states else self.last_state


Observer = Callable[[State, DiagnosticsRecord, RunTotals], None]


# =========================================
# Spectral kernel
# =========================================
class _Kernel:
    """Coefficient-space right-hand side and integrator for one (grid, eps, f0)."""

    def __init__(self, grid: Grid, eps: float, f0: float):
        self.grid = grid
        self.eps = eps
        self.f0 = f0
        self.ik = grid.derivative_symbols()
        kx, ky, kz = grid.wavenumber_mesh()
        self.kh2 = kx**2 + ky**2
        self.kz2 = eps * kz**2
        self.decay = self.kh2 + self.kz2

    def hats(self, state: State) -> Hats:
        return (to_spectral(state.v[0].values), to_spectral(state.v[1].values), to_spectral(state.T.values))

    def factor(self, tau: float) -> np.ndarray:
        return np.exp(-self.decay * tau)

    def explicit(self, v1h: np.ndarray, v2h: np.ndarray, Th: np.ndarray):
        """(f1 - grad p_s, f2 - grad p_s, f_T, p_s) in coefficient space, dealiased."""
        g = self.grid
        ikx, iky, ikz = self.ik
        v1 = to_physical(v1h)
        v2 = to_physical(v2h)
        w = to_physical(-antiderivative_hat(div_h_hat(v1h, v2h, g), g))

        def advect(fh: np.ndarray, offset: float = 0.0) -> np.ndarray:
            transport = v1 * to_physical(ikx * fh) + v2 * to_physical(iky * fh)
            transport += w * (to_physical(ikz * fh) + offset)
            return dealias(to_spectral(transport), g)

        phi = antiderivative_hat(Th, g)
        f1 = -advect(v1h) + self.f0 * v2h + ikx * phi
        f2 = -advect(v2h) - self.f0 * v1h + iky * phi
        fT = -advect(Th, 1.0 / g.h)
        p_hat, _ = surface_pressure_hat(f1, f2, g)
        return f1 - ikx * p_hat, f2 - iky * p_hat, fT, p_hat

    def constrain(self, v1h: np.ndarray, v2h: np.ndarray, Th: np.ndarray) -> Hats:
        v1h = project_parity_hat(v1h, Parity.EVEN)
        v2h = project_parity_hat(v2h, Parity.EVEN)
        Th = project_parity_hat(Th, Parity.ODD)
        v1h, v2h = barotropic_project_hat(v1h, v2h, self.grid)
        return v1h, v2h, Th

    def advance(self, u0: Hats, dt: float) -> Hats:
        E1 = self.factor(dt / 3.0)
        E2 = self.factor(2.0 * dt / 3.0)
        E3 = self.factor(dt)
        k1 = self.explicit(*u0)[:3]
        U2 = self.constrain(*(E1 * (a + (dt / 3.0) * k) for a, k in zip(u0, k1)))
        k2 = self.explicit(*U2)[:3]
        U3 = self.constrain(*(E2 * a + (2.0 * dt / 3.0) * E1 * k for a, k in zip(u0, k2)))
        k3 = self.explicit(*U3)[:3]
        return self.constrain(
            *(E3 * a + dt * (0.25 * E3 * ka + 0.75 * E1 * kc) for a, ka, kc in zip(u0, k1, k3))
        )

    def dissipation(self, a_hat: np.ndarray, b_hat: np.ndarray, dt: float) -> tuple[float, float]:
        """Horizontal and vertical parts of int_t^{t+dt} sum lambda |u_k|^2 |Omega|.

        Uses sinh(lambda dt) |a_k| |b_k|, exact for modes decaying like exp(-lambda t).
        """
        growth = np.sinh(np.minimum(self.decay * dt, 700.0)) * np.abs(a_hat) * np.abs(b_hat)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac_h = np.where(self.decay > 0, self.kh2 / self.decay, 0.0)
        frac_z = np.where(self.decay > 0, 1.0 - frac_h, 0.0) if self.eps > 0 else 0.0
        volume = self.grid.volume
        return volume * float(np.sum(growth * frac_h)), volume * float(np.sum(growth * frac_z))


# =========================================
# Preprocessing and small helpers
# =========================================
def preprocess(v0: tuple[RealField, RealField], T0: RealField) -> tuple[tuple[RealField, RealField], RealField]:
    """Parity projection, dealiasing truncation and barotropic projection of initial data."""
    grid = T0.grid
    v1h = dealias(project_parity_hat(to_spectral(v0[0].values), Parity.EVEN), grid)
    v2h = dealias(project_parity_hat(to_spectral(v0[1].values), Parity.EVEN), grid)
    Th = dealias(project_parity_hat(to_spectral(T0.values), Parity.ODD), grid)
    v1h, v2h = barotropic_project_hat(v1h, v2h, grid)
    return _fields(grid, (v1h, v2h, Th))


def _fields(grid: Grid, u: Hats) -> tuple[tuple[RealField, RealField], RealField]:
    v1 = project_parity(to_physical(u[0]), Parity.EVEN)
    v2 = project_parity(to_physical(u[1]), Parity.EVEN)
    T = project_parity(to_physical(u[2]), Parity.ODD)
    return (RealField(grid, v1, Parity.EVEN), RealField(grid, v2, Parity.EVEN)), RealField(grid, T, Parity.ODD)


def _check_blowup(time: float, arrays: Sequence[np.ndarray]) -> None:
    peaks = {name: float(np.max(np.abs(a))) for name, a in zip(("v1", "v2", "T"), arrays)}
    if not all(math.isfinite(p) and p <= settings.BLOWUP_THRESHOLD for p in peaks.values()):
        raise BlowUpError(time, peaks)


def dissipation_between(prev_state: State, state: State, dt: float, eps: float) -> tuple[float, float, float]:
    """(int ||grad_H v||^2, eps int ||dv/dz||^2, int ||grad_H T||^2) over [t - dt, t]."""
    kernel = _Kernel(state.grid, eps, state.f0)
    a = kernel.hats(prev_state)
    b = kernel.hats(state)
    h1, z1 = kernel.dissipation(a[0], b[0], dt)
    h2, z2 = kernel.dissipation(a[1], b[1], dt)
    hT, _ = kernel.dissipation(a[2], b[2], dt)
    return h1 + h2, z1 + z2, hT


def kinetic_energy(state: State) -> float:
    v1, v2 = state.v
    return 0.5 * float(np.sum(v1.values**2 + v2.values**2)) * state.grid.cell_volume


def thermal_energy(state: State) -> float:
    return 0.5 * float(np.sum(state.T.values**2)) * state.grid.cell_volume


def coupling_rate(state: State) -> float:
    """int v . grad_H (int_{-h}^z T): the work done on v by the temperature."""
    grid = state.grid
    ikx, iky, _ = grid.derivative_symbols()
    phi = antiderivative_hat(to_spectral(state.T.values), grid)
    v1, v2 = state.v
    work = v1.values * to_physical(ikx * phi) + v2.values * to_physical(iky * phi)
    return float(np.sum(work)) * grid.cell_volume


def _speeds(state: State) -> tuple[float, float]:
    v1, v2 = state.v
    vmax = float(max(np.max(np.abs(v1.values)), np.max(np.abs(v2.values))))
    wmax = float(np.max(np.abs(state.w.values)))
    return vmax, wmax


def cfl_number(state: State, dt: float) -> float:
    grid = state.grid
    vmax, wmax = _speeds(state)
    return dt * max(vmax / min(grid.dx, grid.dy), wmax / grid.dz)


# =========================================
# Operations
# =========================================
def rhs(state: State) -> RhsBundle:
    kernel = _Kernel(state.grid, 0.0, state.f0)
    f1, f2, fT, p_hat = kernel.explicit(*kernel.hats(state))
    grid = state.grid
    return RhsBundle(
        dv=(RealField(grid, to_physical(f1), Parity.EVEN), RealField(grid, to_physical(f2), Parity.EVEN)),
        dT=RealField(grid, to_physical(fT), Parity.ODD),
        p_s=RealField(grid, to_physical(p_hat), Parity.EVEN),
    )


def rhs_momentum(state: State) -> tuple[RealField, RealField]:
    """-(v.grad_H)v - w dv/dz - f0 k x v - grad_H(p_s + p_hydro), dealiased."""
    return rhs(state).dv


def rhs_temperature(state: State) -> RealField:
    """-v.grad_H T - w (dT/dz + 1/h), dealiased."""
    return rhs(state).dT


def time_derivative(state: State, eps: float) -> tuple[tuple[RealField, RealField], RealField]:
    """(dv/dt, dT/dt) from the equations, linear dissipation included."""
    grid = state.grid
    kernel = _Kernel(grid, eps, state.f0)
    u = kernel.hats(state)
    f = kernel.explicit(*u)
    dv1, dv2, dT = (to_physical(fk - kernel.decay * uk) for fk, uk in zip(f[:3], u))
    return (RealField(grid, dv1, Parity.EVEN), RealField(grid, dv2, Parity.EVEN)), RealField(grid, dT, Parity.ODD)


def stable_dt(state: State, config: SolverConfig) -> float:
    """cfl * min(dx / |v|_inf, dz / |w|_inf), capped at config.dt."""
    grid = state.grid
    vmax, wmax = _speeds(state)
    limits = [config.dt]
    if vmax > 0:
        limits.append(config.cfl * min(grid.dx, grid.dy) / vmax)
    if wmax > 0:
        limits.append(config.cfl * grid.dz / wmax)
    return min(limits)


def _advance(state: State, dt: float, config: SolverConfig, new_time: float, totals: Optional[RunTotals] = None) -> State:
    kernel = _Kernel(state.grid, config.eps, config.f0)
    u0 = kernel.hats(state)
    u1 = kernel.advance(u0, dt)
    physical = [to_physical(h) for h in u1]
    _check_blowup(new_time, physical)
    v, T = _fields(state.grid, u1)
    new_state = State(new_time, v, T, config.f0)
    if totals is not None:
        before = coupling_rate(state)
        u1 = kernel.hats(new_state)
        dh1, dz1 = kernel.dissipation(u0[0], u1[0], dt)
        dh2, dz2 = kernel.dissipation(u0[1], u1[1], dt)
        dhT, dzT = kernel.dissipation(u0[2], u1[2], dt)
        totals.step += 1
        totals.dissipation_h_v += dh1 + dh2
        totals.dissipation_z_v += dz1 + dz2
        totals.dissipation_h_T += dhT
        totals.dissipation_z_T += dzT
        totals.coupling_work += 0.5 * dt * (before + coupling_rate(new_state))
    return new_state


def step(
    state: State,
    dt: float,
    config: SolverConfig,
    totals: Optional[RunTotals] = None,
    new_time: Optional[float] = None,
) -> State:
    """One IF-RK3 step of size dt; in fixed-dt mode the CFL limit is enforced.

    `new_time` pins the resulting time (used to land exactly on output times).
    """
    if not dt > 0:
        raise SolverError(f"Time step dt={dt} must be positive")
    if not config.adaptive:
        limit = stable_dt(state, config.model_copy(update={"dt": math.inf}))
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolationError(
                f"dt={dt:.3e} exceeds the CFL limit {limit:.3e} at t={state.time:.6g}"
            )
    return _advance(state, dt, config, state.time + dt if new_time is None else new_time, totals)


def output_times(config: SolverConfig) -> list[float]:
    count = max(1, math.ceil(config.t_end / config.output_interval - 1e-9))
    return [min(j * config.output_interval, config.t_end) for j in range(1, count + 1)]


def make_record(state: State, totals: RunTotals, dt: float, monitor: Optional[dict[str, float]] = None) -> DiagnosticsRecord:
    energy = kinetic_energy(state)
    v1, v2 = state.v
    return DiagnosticsRecord(
        step=totals.step,
        time=state.time,
        dt=dt,
        kinetic_energy=energy,
        thermal_energy=thermal_energy(state),
        dissipation_h_v=totals.dissipation_h_v,
        dissipation_z_v=totals.dissipation_z_v,
        dissipation_h_T=totals.dissipation_h_T,
        dissipation_z_T=totals.dissipation_z_T,
        coupling_work=totals.coupling_work,
        energy_residual=energy + totals.dissipation_h_v + totals.dissipation_z_v - totals.coupling_work - totals.initial_energy,
        barotropic_residual=barotropic_residual(state.v),
        parity_residual=max(parity_residual(v1), parity_residual(v2), parity_residual(state.T)),
        w_top_max=float(np.max(np.abs(w_top(state.v)))),
        max_v=_speeds(state)[0],
        cfl_number=cfl_number(state, dt),
        monitor=monitor or {},
    )


def initial_state(config: SolverConfig, v0: tuple[RealField, RealField], T0: RealField) -> State:
    grid = make_grid(config.nx, config.ny, config.nz, config.h)
    if T0.grid != grid or v0[0].grid != grid or v0[1].grid != grid:
        raise SolverError(f"Initial data grid does not match the configured grid {grid.describe()}")
    v, T = preprocess(v0, T0)
    return State(0.0, v, T, config.f0)


def run(
    config: SolverConfig,
    v0: tuple[RealField, RealField],
    T0: RealField,
    *,
    observer: Optional[Observer] = None,
    monitor=None,
    resume: Optional[tuple[State, RunTotals]] = None,
    keep_states: bool = True,
) -> Trajectory:
    """Integrate to t_end, emitting a DiagnosticsRecord at every output time.

    `monitor` is an estimate_monitors.MonitorState fed at every output time.
    On failure the raised SolverError carries the last valid state and totals.
    """
    if resume is not None:
        state, totals = resume[0], resume[1].model_copy()
        logger.info(f"Resuming at t={state.time:.6g} (step {totals.step})")
    else:
        state = initial_state(config, v0, T0)
        totals = RunTotals(initial_energy=kinetic_energy(state))

    trajectory = Trajectory(config=config, totals=totals)

    def emit(current: State, previous: Optional[State], dt: float) -> None:
        columns = None
        if monitor is not None:
            monitor.record(current, previous, current.time - previous.time if previous else 0.0)
            columns = monitor.latest_columns()
        record = make_record(current, totals, dt, columns)
        trajectory.records.append(record)
        if keep_states:
            trajectory.states.append(current)
        if observer is not None:
            observer(current, record, totals)

    if resume is None:
        emit(state, None, 0.0)
    elif keep_states:
        trajectory.states.append(state)

    t_prev = state.time
    dt = 0.0
    try:
        for t_out in output_times(config):
            if t_out <= state.time + 1e-12 * max(1.0, t_out):
                continue
            previous = state
            if config.adaptive:
                while state.time < t_out:
                    dt = min(stable_dt(state, config), t_out - state.time)
                    landing = t_out if t_out - (state.time + dt) <= 1e-12 * t_out else state.time + dt
                    state = _advance(state, dt, config, landing, totals)
            else:
                n = max(1, math.ceil((t_out - t_prev) / config.dt - 1e-9))
                dt = (t_out - t_prev) / n
                for i in range(1, n + 1):
                    landing = t_out if i == n else t_prev + i * dt
                    state = step(state, dt, config, totals, new_time=landing)
            emit(state, previous, dt)
            t_prev = t_out
    except SolverError as e:
        e.last_state = state
        e.totals = totals
        trajectory.status = RunStatus.FAILED
        logger.error(f"✗ Run stopped: {e}")
        raise

    trajectory.last_state = state
    trajectory.status = RunStatus.COMPLETED
    logger.info(f"✓ Run completed at t={state.time:.6g} after {totals.step} steps")
    return trajectory


def h1_distance(a: State, b: State) -> float:
    dv1 = a.v[0].with_values(a.v[0].values - b.v[0].values)
    dv2 = a.v[1].with_values(a.v[1].values - b.v[1].values)
    dT = a.T.with_values(a.T.values - b.T.values)
    return math.sqrt(h1_norm((dv1, dv2)) ** 2 + h1_norm(dT) ** 2)


def eps_sweep(
    config: SolverConfig,
    eps_values: Sequence[float],
    v0: tuple[RealField, RealField],
    T0: RealField,
    pool: Optional[WorkerPool] = None,
) -> list[SweepRow]:
    """Sup-in-time H1 distance between trajectories of consecutive eps values."""
    eps_values = list(eps_values)
    if any(e < 0 for e in eps_values):
        raise SolverError("eps values must be nonnegative")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise SolverError("eps values must be strictly decreasing")
    if len(eps_values) < 2:
        return []

    pool = pool or WorkerPool()
    tasks = {
        e: (lambda e=e: run(config.model_copy(update={"eps": e}), v0, T0))
        for e in eps_values
    }
    outcomes = pool.run(tasks)

    rows = []
    for a, b in zip(eps_values, eps_values[1:]):
        first, second = outcomes[a], outcomes[b]
        if not (first.ok and second.ok):
            failed = a if not first.ok else b
            message = (first if not first.ok else second).error
            rows.append(SweepRow(eps=a, eps_next=b, status=RunStatus.FAILED, message=f"eps={failed}: {message}"))
            continue
        distance = max(
            h1_distance(sa, sb) for sa, sb in zip(first.result.states, second.result.states)
        )
        rows.append(SweepRow(eps=a, eps_next=b, distance=distance))
        logger.info(f"eps {a:g} -> {b:g}: H1 distance {distance:.3e}")
    return rows


# =========================================
# Residual of the equation for u = dv/dz
# =========================================
def _u_terms(state: State, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of (v.grad_H)u + w du/dz - Lap_H u - eps d2u/dz2 + f0 k x u
    + (u.grad_H)v - (div_H v)u - grad_H T."""
    grid = state.grid
    kernel = _Kernel(grid, eps, state.f0)
    ikx, iky, ikz = kernel.ik
    v1h, v2h, Th = kernel.hats(state)
    u1h, u2h = ikz * v1h, ikz * v2h
    v1, v2 = to_physical(v1h), to_physical(v2h)
    u1, u2 = to_physical(u1h), to_physical(u2h)
    div = to_physical(div_h_hat(v1h, v2h, grid))
    w = to_physical(-antiderivative_hat(div_h_hat(v1h, v2h, grid), grid))

    def transport(uh: np.ndarray, u: np.ndarray, vh: np.ndarray) -> np.ndarray:
        product = v1 * to_physical(ikx * uh) + v2 * to_physical(iky * uh) + w * to_physical(ikz * uh)
        product += u1 * to_physical(ikx * vh) + u2 * to_physical(iky * vh) - div * u
        return dealias(to_spectral(product), grid)

    r1 = transport(u1h, u1, v1h) + kernel.decay * u1h - state.f0 * u2h - ikx * Th
    r2 = transport(u2h, u2, v2h) + kernel.decay * u2h + state.f0 * u1h - iky * Th
    return r1, r2


def dzv_residual(state: State, prev_state: State, dt: float, eps: float) -> float:
    """L2 norm of the discrete residual of the u = dv/dz equation between two states."""
    grid = state.grid
    _, _, ikz = grid.derivative_symbols()
    now = _u_terms(state, eps)
    before = _u_terms(prev_state, eps)
    total = 0.0
    for k in range(2):
        du = ikz * (to_spectral(state.v[k].values) - to_spectral(prev_state.v[k].values)) / dt
        residual = du + 0.5 * (now[k] + before[k])
        total += float(np.sum(np.abs(residual) ** 2))
    return math.sqrt(grid.volume * total)
