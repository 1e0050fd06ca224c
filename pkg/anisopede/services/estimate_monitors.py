"""
Estimate Monitors
=================
Tracks, along a trajectory, the quantities entering the a priori estimates
(energy, L^6 and L^q bounds, horizontal and vertical derivative norms, the
local energy of u = dv/dz) and checks the differential inequalities among
them with fitted constants.

A fitted constant is only declared divergent when it fails to settle under
time-step refinement (compare_refinement); single exceedances are expected
from discrete time derivatives.
"""

import logging
import math
from typing import Optional

import numpy as np

from anisopede.models import (
    BoundCheck,
    DiffIneqCheck,
    InequalityId,
    LocalEnergyCheck,
    MonitorSettings,
    RefinementVerdict,
)
from anisopede.services.grid_transforms import to_physical, to_spectral
from anisopede.services.norms import local_energy_profile, lq_norm, spectral_sq, weighted_lq_sup
from anisopede.services.operators import dz
from anisopede.services.solver import State, dissipation_between, time_derivative

logger = logging.getLogger(__name__)

CUMULATIVE = ("int_grad_h_v", "eps_int_dz_v", "int_grad_h_T")


class MonitorError(ValueError):
    """Requested quantity was not tracked."""
    pass


def _label(x: float) -> str:
    return f"{x:g}"


class MonitorState:
    """Time series of tracked quantities, one entry per recorded state."""

    def __init__(self, config: MonitorSettings, eps: float = 0.0):
        self.config = config
        self.eps = eps
        self.times: list[float] = []
        self.series: dict[str, list[float]] = {}

    def __len__(self) -> int:
        return len(self.times)

    def record(self, state: State, prev_state: Optional[State], dt: float) -> dict[str, float]:
        """
        Append every tracked quantity at `state`.

        Args:
            state: state at the current output time
            prev_state: state at the previous output time (None for the first record)
            dt: step size used to reach `state`, for the dissipation increments

        Returns:
            The new row, cumulative integrals and eps included
        """
        row = self._evaluate(state)
        if prev_state is None or not self.times:
            cumulative = (0.0, 0.0, 0.0)
        else:
            step = dissipation_between(prev_state, state, dt, self.eps)
            cumulative = tuple(self.series[name][-1] + inc for name, inc in zip(CUMULATIVE, step))
        row.update(zip(CUMULATIVE, cumulative))
        row["eps"] = self.eps

        self.times.append(state.time)
        for name, value in row.items():
            self.series.setdefault(name, []).append(float(value))
        return row

    def latest_columns(self) -> dict[str, float]:
        return {name: values[-1] for name, values in self.series.items()}

    def get(self, name: str) -> np.ndarray:
        if name not in self.series:
            raise MonitorError(f"Quantity '{name}' was not tracked")
        return np.asarray(self.series[name])

    def rate(self, name: str) -> np.ndarray:
        """d/dt of a tracked series (centered inside, one-sided at the ends)."""
        values = self.get(name)
        if len(values) < 2:
            return np.zeros_like(values)
        return np.gradient(values, np.asarray(self.times))

    @classmethod
    def from_columns(cls, table: dict[str, list[float]], config: MonitorSettings) -> "MonitorState":
        """
        Rebuild the series from diagnostics-table columns.

        Args:
            table: column name -> values, as read from diagnostics.csv
            config: monitor settings the run was made with

        Returns:
            A MonitorState holding only the tracked columns

        Raises:
            MonitorError: if the table has no time or eps column
        """
        if "time" not in table or "eps" not in table:
            raise MonitorError("Diagnostics table carries no monitor columns")
        eps = float(table["eps"][0]) if len(table["eps"]) else 0.0
        monitor = cls(config, eps)
        monitor.times = list(table["time"])
        known = set(_quantity_names(config)) | set(CUMULATIVE) | {"eps"}
        monitor.series = {name: list(values) for name, values in table.items() if name in known}
        return monitor

    def _evaluate(self, state: State) -> dict[str, float]:
        cfg = self.config
        eps = self.eps
        grid = state.grid
        kx, ky, kz = grid.wavenumber_mesh()
        K = kx**2 + ky**2
        Z = kz**2
        v, T = state.v, state.T
        u = (dz(v[0]), dz(v[1]))

        row = {
            "v_l2": lq_norm(v, 2),
            "v_l6": lq_norm(v, 6),
            "T_l6": lq_norm(T, 6),
            "v_inf": lq_norm(v, math.inf),
            "v_l2_sq": spectral_sq(v),
            "u_l2_sq": spectral_sq(v, Z),
            "grad_h_v_sq": spectral_sq(v, K),
            "grad_h_u_sq": spectral_sq(v, K * Z),
            "dz_u_sq": spectral_sq(v, Z * Z),
            "lap_h_v_sq": spectral_sq(v, K * K),
            "grad_v_sq": spectral_sq(v, K + Z),
            "grad_h_grad_v_sq": spectral_sq(v, K * (K + Z)),
            "T_l2_sq": spectral_sq(T),
            "grad_T_sq": spectral_sq(T, K + Z),
            "grad_h_T_sq": spectral_sq(T, K),
            "grad_h_grad_T_sq": spectral_sq(T, K * (K + Z)),
            "dz_grad_T_sq": spectral_sq(T, Z * (K + Z)),
            "dzz_T_sq": spectral_sq(T, Z * Z),
            "grad_h_v_h1_sq": spectral_sq(v, K * (1.0 + K + Z)),
            "grad_h_T_h1_sq": spectral_sq(T, K * (1.0 + K + Z)),
            "u_m_pow": lq_norm(u, cfg.m) ** cfg.m,
            "weighted_sup": weighted_lq_sup(v, cfg.qmax),
            "local_energy": local_energy_profile(u, cfg.r0, cfg.stride),
        }
        row["v_h1_sq"] = row["v_l2_sq"] + row["grad_v_sq"]
        row["T_h1_sq"] = row["T_l2_sq"] + row["grad_T_sq"]

        ikx, iky, ikz = grid.derivative_symbols()
        u_mag = np.sqrt(u[0].values ** 2 + u[1].values ** 2)
        gradient_sq = np.zeros(grid.shape)
        for uc in u:
            u_hat = to_spectral(uc.values)
            for sym, weight in ((ikx, 1.0), (iky, 1.0), (ikz, eps)):
                if weight:
                    gradient_sq += weight * to_physical(sym * u_hat) ** 2
        for q in cfg.q_values:
            row[f"u_q{_label(q)}_pow"] = lq_norm(u, q) ** q
            row[f"u_q{_label(q)}_diss"] = float(np.sum(u_mag ** (q - 2) * gradient_sq)) * grid.cell_volume
        for r in cfg.r_values:
            row[f"u_r{_label(r)}"] = lq_norm(u, r)

        dv, dT = time_derivative(state, eps)
        row["dt_v_sq"] = spectral_sq(dv)
        row["dt_T_sq"] = spectral_sq(dT)
        return row


def _quantity_names(config: MonitorSettings) -> list[str]:
    names = [
        "v_l2", "v_l6", "T_l6", "v_inf", "v_l2_sq", "u_l2_sq", "grad_h_v_sq", "grad_h_u_sq",
        "dz_u_sq", "lap_h_v_sq", "grad_v_sq", "grad_h_grad_v_sq", "T_l2_sq", "grad_T_sq",
        "grad_h_T_sq", "grad_h_grad_T_sq", "dz_grad_T_sq", "dzz_T_sq", "grad_h_v_h1_sq",
        "grad_h_T_h1_sq", "u_m_pow", "weighted_sup", "local_energy", "v_h1_sq", "T_h1_sq",
        "dt_v_sq", "dt_T_sq",
    ]
    for q in config.q_values:
        names += [f"u_q{_label(q)}_pow", f"u_q{_label(q)}_diss"]
    names += [f"u_r{_label(r)}" for r in config.r_values]
    return names


# =========================================
# Checks
# =========================================
def _diff_check(inequality: InequalityId, label: str, times, lhs, rhs) -> DiffIneqCheck:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, 0.0)
    c_star = max(0.0, float(np.max(ratio))) if ratio.size else 0.0
    return DiffIneqCheck(
        inequality=inequality,
        label=label,
        times=list(map(float, times)),
        lhs=lhs.tolist(),
        rhs=rhs.tolist(),
        ratio=ratio.tolist(),
        c_star=c_star,
    )


def check_prop51(monitor: MonitorState, qmax: Optional[int] = None) -> BoundCheck:
    """
    Time sup of the weighted Lebesgue sup sup_{2<=q<=qmax} ||v||_q / sqrt(q).

    Args:
        monitor: tracked series
        qmax: must equal the truncation the series was tracked with

    Returns:
        BoundCheck flagged when the sup grows past 10x its initial value
    """
    if qmax is not None and qmax != monitor.config.qmax:
        raise MonitorError(f"weighted L^q sup was tracked with qmax={monitor.config.qmax}, not {qmax}")
    return _bound_check("P51", monitor.get("weighted_sup"))


def _bound_check(label: str, values: np.ndarray) -> BoundCheck:
    value = float(np.max(values)) if values.size else 0.0
    initial = float(values[0]) if values.size else 0.0
    if initial > 0:
        growth = value / initial
    else:
        growth = 1.0 if value == 0 else math.inf
    return BoundCheck(label=label, value=value, initial=initial, growth_factor=growth, growth_flag=growth > 10.0)


def check_diff_inequality(monitor: MonitorState, inequality: InequalityId, param: Optional[float] = None) -> DiffIneqCheck:
    """LHS/RHS series (C = 1) of one differential inequality and its fitted C*.

    Args:
        monitor: tracked series; time derivatives come from MonitorState.rate
        inequality: which inequality to evaluate
        param: q for P52a, r for P52b (defaults to the first tracked value)

    Returns:
        DiffIneqCheck with C* = max(0, max LHS/RHS)

    Raises:
        MonitorError: if a needed quantity was not tracked

    P52a(q): d/dt||u||_q^q + int |u|^{q-2}(|grad_H u|^2 + eps|du/dz|^2) vs (1+||v||_inf^2)(1+||u||_q^q)
    P52b(r): d/dt||grad_H v||^2 + ||Lap_H v||^2 + eps||grad_H u||^2
             vs ||v||_inf^2 ||grad_H v||^2 + ||u||_r^{4r/(r-2)} + ||grad_H T||^2 + 1
    P33: same LHS as P52b vs (||v||^2+||u||^2+1)^2 (||grad_H v||^2+||grad_H u||^2+1) ||grad_H v||^2
    P34: d/dt||grad T||^2 + ||grad_H grad T||^2 + eps||dz grad T||^2
         vs (||v||^2+||grad v||^2+1)^2 (||grad_H v||^2+||grad_H grad v||^2+1)(||grad T||^2+1)
    """
    m = monitor
    eps = m.eps
    times = m.times
    s = m.get
    inequality = InequalityId(inequality)

    if inequality == InequalityId.P52A:
        q = param if param is not None else m.config.q_values[0]
        pow_, diss = s(f"u_q{_label(q)}_pow"), s(f"u_q{_label(q)}_diss")
        lhs = m.rate(f"u_q{_label(q)}_pow") + diss
        rhs = (1.0 + s("v_inf") ** 2) * (1.0 + pow_)
        return _diff_check(inequality, f"P52a(q={_label(q)})", times, lhs, rhs)

    horizontal_lhs = m.rate("grad_h_v_sq") + s("lap_h_v_sq") + eps * s("grad_h_u_sq")
    if inequality == InequalityId.P52B:
        r = param if param is not None else m.config.r_values[0]
        rhs = s("v_inf") ** 2 * s("grad_h_v_sq") + s(f"u_r{_label(r)}") ** (4 * r / (r - 2)) + s("grad_h_T_sq") + 1.0
        return _diff_check(inequality, f"P52b(r={_label(r)})", times, horizontal_lhs, rhs)

    if inequality == InequalityId.P33:
        rhs = (s("v_l2_sq") + s("u_l2_sq") + 1.0) ** 2 * (s("grad_h_v_sq") + s("grad_h_u_sq") + 1.0) * s("grad_h_v_sq")
        return _diff_check(inequality, "P33", times, horizontal_lhs, rhs)

    if inequality == InequalityId.P34:
        lhs = m.rate("grad_T_sq") + s("grad_h_grad_T_sq") + eps * s("dz_grad_T_sq")
        rhs = (
            (s("v_l2_sq") + s("grad_v_sq") + 1.0) ** 2
            * (s("grad_h_v_sq") + s("grad_h_grad_v_sq") + 1.0)
            * (s("grad_T_sq") + 1.0)
        )
        return _diff_check(inequality, "P34", times, lhs, rhs)

    if inequality == InequalityId.P35:
        return check_prop35(monitor)
    if inequality == InequalityId.P53:
        return check_prop53(monitor)[0]
    raise MonitorError(f"Unknown inequality {inequality}")


def check_prop35(monitor: MonitorState) -> DiffIneqCheck:
    """||dv/dt||^2 + ||dT/dt||^2 vs eps^2(||du/dz||^2 + ||d2T/dz2||^2)
    + (||v||_H1^2 + ||T||_H1^2 + 1)^2 (||grad_H v||_H1^2 + ||grad_H T||_H1^2 + 1)."""
    s = monitor.get
    eps = monitor.eps
    lhs = s("dt_v_sq") + s("dt_T_sq")
    rhs = eps**2 * (s("dz_u_sq") + s("dzz_T_sq")) + (s("v_h1_sq") + s("T_h1_sq") + 1.0) ** 2 * (
        s("grad_h_v_h1_sq") + s("grad_h_T_h1_sq") + 1.0
    )
    return _diff_check(InequalityId.P35, "P35", monitor.times, lhs, rhs)


def check_prop31(monitor: MonitorState) -> tuple[list[float], bool]:
    """Running sup(||v||_6^2 + ||T||_6^2) plus the dissipation integrals.

    Returns the series and whether it is finite and nondecreasing.
    """
    s = monitor.get
    running_sup = np.maximum.accumulate(s("v_l6") ** 2 + s("T_l6") ** 2)
    values = running_sup + s("int_grad_h_v") + s("eps_int_dz_v") + s("int_grad_h_T")
    ok = bool(np.all(np.isfinite(values)) and np.all(np.diff(values) >= 0))
    if not ok:
        logger.warning("Energy functional is not finite and nondecreasing along the run")
    return values.tolist(), ok


def check_prop53(monitor: MonitorState, m: Optional[float] = None) -> tuple[DiffIneqCheck, list[float]]:
    """A' + B vs A log(e + B) + ||grad_H T||^2 for the combined functional, plus
    the running sup of ||grad v||^2 + ||u||_m^m."""
    mm = monitor.config.m
    if m is not None and m != mm:
        raise MonitorError(f"||u||_m^m was tracked with m={mm}, not {m}")
    s = monitor.get
    eps = monitor.eps
    lam = 4.0 / (mm - 2.0)
    A1 = s("u_l2_sq") + s("u_m_pow") + math.e
    B1 = s("grad_h_u_sq") + eps * s("dz_u_sq") + math.e
    A2 = s("grad_h_v_sq") + math.e
    B2 = s("lap_h_v_sq") + eps * s("grad_h_u_sq") + math.e
    A = A1 + A1**lam + A2
    B = A1 + B1 + B2
    times = np.asarray(monitor.times)
    dA = np.gradient(A, times) if len(times) > 1 else np.zeros_like(A)
    check = _diff_check(InequalityId.P53, f"P53(m={_label(mm)})", monitor.times, dA + B, A * np.log(math.e + B) + s("grad_h_T_sq"))
    running = np.maximum.accumulate(s("grad_v_sq") + s("u_m_pow"))
    return check, running.tolist()


def check_local_energy(monitor: MonitorState, delta0: Optional[float] = None, r0: Optional[float] = None) -> LocalEnergyCheck:
    """
    First time the local energy of u at radius r0 exceeds 8 delta0^2.

    Args:
        monitor: tracked series
        delta0: threshold parameter (defaults to the monitor settings)
        r0: must equal the tracked radius if given

    Returns:
        LocalEnergyCheck whose t0 is the end time when the threshold is never crossed
    """
    cfg = monitor.config
    delta0 = cfg.delta0 if delta0 is None else delta0
    if r0 is not None and r0 != cfg.r0:
        raise MonitorError(f"Local energy was tracked at r0={cfg.r0}, not {r0}")
    profile = monitor.get("local_energy")
    threshold = 8.0 * delta0**2
    over = np.nonzero(profile > threshold)[0]
    horizon = monitor.times[-1] if monitor.times else 0.0
    t0 = monitor.times[int(over[0])] if over.size else horizon
    return LocalEnergyCheck(
        r0=cfg.r0,
        delta0=delta0,
        t0=t0,
        exceeded=bool(over.size),
        times=list(monitor.times),
        profile=profile.tolist(),
    )


def compare_refinement(coarse: DiffIneqCheck, fine: DiffIneqCheck, tolerance: float = 0.2) -> RefinementVerdict:
    """
    Compare fitted constants of one inequality at dt and dt/2.

    Args:
        coarse: check from the run at dt
        fine: check from the run at dt/2
        tolerance: largest relative change still called stable

    Returns:
        RefinementVerdict; the change is relative to the larger of the two constants
    """
    scale = max(abs(coarse.c_star), abs(fine.c_star))
    change = 0.0 if scale == 0 else abs(fine.c_star - coarse.c_star) / scale
    verdict = RefinementVerdict(
        label=fine.label,
        c_coarse=coarse.c_star,
        c_fine=fine.c_star,
        relative_change=change,
        stable=change <= tolerance,
    )
    if not verdict.stable:
        logger.warning(f"{fine.label}: C* moved by {change:.1%} under refinement")
    return verdict
