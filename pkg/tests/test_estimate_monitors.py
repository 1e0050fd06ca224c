"""
Tests for the estimate monitors.

Validates:
- Tracked quantities and cumulative dissipation along a run
- Rebuilding the series from diagnostics columns
- Differential-inequality checks, bounds and local energy
- Refinement verdicts, synthetic and from runs at dt and dt/2
"""

import numpy as np
import pytest

from anisopede.models import DiffIneqCheck, InequalityId
from anisopede.services.estimate_monitors import (
    CUMULATIVE,
    MonitorError,
    MonitorState,
    check_diff_inequality,
    check_local_energy,
    check_prop31,
    check_prop35,
    check_prop51,
    check_prop53,
    compare_refinement,
)
from anisopede.services.initial_data import taylor_solution
from anisopede.services.solver import State, run


@pytest.fixture
def monitored(shear_fields, solver_config, monitor_settings):
    config = solver_config.model_copy(update={"eps": 0.01, "output_interval": 0.005})
    monitor = MonitorState(monitor_settings, eps=config.eps)
    trajectory = run(config, *shear_fields, monitor=monitor)
    return monitor, trajectory


def _check(c_star: float) -> DiffIneqCheck:
    return DiffIneqCheck(
        inequality=InequalityId.P33, label="P33", times=[0.0], lhs=[c_star], rhs=[1.0], ratio=[c_star], c_star=c_star
    )


class TestTracking:
    """Quantities recorded at output times."""

    def test_one_entry_per_record(self, monitored):
        monitor, trajectory = monitored
        assert len(monitor) == len(trajectory.records) == 5
        assert monitor.times == [r.time for r in trajectory.records]

    def test_columns_reach_the_diagnostics_rows(self, monitored):
        monitor, trajectory = monitored
        columns = trajectory.records[-1].monitor
        for name in ("v_l2", "weighted_sup", "u_q4_pow", "u_q4_diss", "u_r4", *CUMULATIVE):
            assert name in columns
        assert columns == monitor.latest_columns()

    def test_cumulative_integrals_are_nondecreasing(self, monitored):
        monitor, _ = monitored
        for name in CUMULATIVE:
            values = monitor.get(name)
            assert values[0] == 0.0
            assert np.all(np.diff(values) >= 0)
        assert monitor.get("eps_int_dz_v")[-1] > 0

    def test_energy_functional(self, monitored):
        monitor, _ = monitored
        values, ok = check_prop31(monitor)
        assert ok
        assert len(values) == len(monitor)

    def test_z_independent_flow_has_no_shear(self, grid, monitor_settings):
        (v1, v2), T = taylor_solution(grid, 1.0, 0.0)
        monitor = MonitorState(monitor_settings)
        row = monitor.record(State(0.0, (v1, v2), T), None, 0.0)
        assert row["u_l2_sq"] < 1e-20
        assert row["local_energy"] < 1e-20
        assert row["v_l2_sq"] == pytest.approx(0.5)
        assert np.all(monitor.rate("v_l2_sq") == 0.0)

    def test_unknown_quantity(self, monitored):
        monitor, _ = monitored
        with pytest.raises(MonitorError):
            monitor.get("u_q6_pow")


class TestRebuild:
    """MonitorState.from_columns."""

    def test_round_trip(self, monitored, monitor_settings):
        monitor, _ = monitored
        table = {"time": list(monitor.times), **{k: list(v) for k, v in monitor.series.items()}, "E_kin": [1.0] * len(monitor)}
        rebuilt = MonitorState.from_columns(table, monitor_settings)
        assert rebuilt.eps == 0.01
        assert rebuilt.times == monitor.times
        assert "E_kin" not in rebuilt.series
        assert np.array_equal(rebuilt.get("u_q2_pow"), monitor.get("u_q2_pow"))

    def test_needs_monitor_columns(self, monitor_settings):
        with pytest.raises(MonitorError):
            MonitorState.from_columns({"time": [0.0]}, monitor_settings)


class TestChecks:
    """Differential inequalities and bounds."""

    @pytest.mark.parametrize(
        "inequality, param",
        [
            (InequalityId.P52A, 4.0),
            (InequalityId.P52B, 4.0),
            (InequalityId.P33, None),
            (InequalityId.P34, None),
            (InequalityId.P35, None),
            (InequalityId.P53, None),
        ],
    )
    def test_series_have_one_entry_per_time(self, monitored, inequality, param):
        monitor, _ = monitored
        check = check_diff_inequality(monitor, inequality, param)
        assert check.inequality == inequality
        assert len(check.lhs) == len(check.rhs) == len(check.ratio) == len(monitor)
        assert check.c_star == max(0.0, max(check.ratio))

    def test_untracked_exponent(self, monitored):
        monitor, _ = monitored
        with pytest.raises(MonitorError):
            check_diff_inequality(monitor, InequalityId.P52A, 6.0)

    def test_prop35_rhs_dominates_energy_level(self, monitored):
        monitor, _ = monitored
        check = check_prop35(monitor)
        assert all(r >= 1.0 for r in check.rhs)

    def test_prop53_running_sup(self, monitored):
        monitor, _ = monitored
        _, running = check_prop53(monitor)
        assert all(b >= a for a, b in zip(running, running[1:]))
        with pytest.raises(MonitorError):
            check_prop53(monitor, m=6.0)

    def test_weighted_sup_bound(self, monitored):
        monitor, _ = monitored
        bound = check_prop51(monitor)
        assert bound.value >= bound.initial > 0
        assert not bound.growth_flag
        with pytest.raises(MonitorError):
            check_prop51(monitor, qmax=64)


class TestLocalEnergy:
    """Threshold crossing of the local energy of u."""

    def test_never_exceeded(self, monitored):
        monitor, _ = monitored
        check = check_local_energy(monitor, delta0=1e3)
        assert not check.exceeded
        assert check.t0 == monitor.times[-1]

    def test_exceeded_at_start(self, monitored):
        monitor, _ = monitored
        check = check_local_energy(monitor, delta0=1e-6)
        assert check.exceeded
        assert check.t0 == 0.0

    def test_radius_must_match(self, monitored):
        monitor, _ = monitored
        with pytest.raises(MonitorError):
            check_local_energy(monitor, r0=0.5)


class TestRefinement:
    """C* under dt -> dt/2."""

    def test_stable(self):
        verdict = compare_refinement(_check(1.0), _check(1.1))
        assert verdict.stable
        assert verdict.relative_change == pytest.approx(0.1 / 1.1)

    def test_divergent(self):
        verdict = compare_refinement(_check(1.0), _check(2.0))
        assert not verdict.stable

    def test_zero_constants(self):
        assert compare_refinement(_check(0.0), _check(0.0)).relative_change == 0.0

    @pytest.mark.parametrize("inequality", [InequalityId.P52A, InequalityId.P33, InequalityId.P34])
    def test_fitted_constants_survive_halving_dt(self, shear_fields, solver_config, monitor_settings, inequality):
        checks = []
        monitors = []
        for dt in (1e-3, 5e-4):
            config = solver_config.model_copy(update={"eps": 0.01, "dt": dt, "output_interval": 0.005})
            monitor = MonitorState(monitor_settings, eps=config.eps)
            run(config, *shear_fields, monitor=monitor)
            checks.append(check_diff_inequality(monitor, inequality))
            monitors.append(monitor)

        assert monitors[0].times == monitors[1].times
        verdict = compare_refinement(*checks)
        assert verdict.stable
        assert verdict.relative_change <= 0.2

        for monitor in monitors:
            sixth = monitor.get("v_l6") ** 2 + monitor.get("T_l6") ** 2
            assert np.max(sixth) < 10.0 * sixth[0]
            assert not check_prop51(monitor).growth_flag
