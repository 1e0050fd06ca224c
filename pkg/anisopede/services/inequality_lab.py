"""
Inequality Lab
==============
Randomized checks of the anisotropic functional inequalities on the extended
domain, plus the logarithmic Gronwall comparison lemma.

Every check returns its two sides with the unknown constant set to 1; an
ensemble fits C* = max(LHS/RHS). The first sup-in-z embedding has explicit
constants and is checked absolutely.

Per-sample randomness comes from np.random.default_rng([seed, index]), so an
ensemble is reproducible and independent of how samples are scheduled.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import solve_ivp

from anisopede.models import (
    Disk,
    GronwallClosure,
    GronwallInstance,
    GronwallReport,
    InequalityReport,
    LabConfig,
    LemmaId,
    Parity,
    PiecewisePolynomial,
    SampleFamily,
    SampleSpec,
)
from anisopede.scheduler import WorkerPool
from anisopede.services.grid_transforms import (
    Grid,
    RealField,
    dealias,
    make_grid,
    project_parity,
    to_physical,
    to_spectral,
)
from anisopede.services.norms import disk_mask, grad_h_l2, lq_norm, sup_z_norm, weighted_lq_sup
from anisopede.services.operators import dz, grad_h

logger = logging.getLogger(__name__)

DIAMETER = math.sqrt(2.0)
ABSOLUTE_TOLERANCE = 1e-12
FAMILIES = (SampleFamily.TRIG_POLY, SampleFamily.GAUSSIAN_BUMP, SampleFamily.BOUNDARY_LAYER)


class LabError(ValueError):
    """Invalid lemma parameters or ensemble input."""
    pass


# =========================================
# Sample families
# =========================================
def _finish(grid: Grid, values: np.ndarray, parity: Parity) -> RealField:
    """Truncate to the dealiasing band and apply the parity constraint."""
    values = to_physical(dealias(to_spectral(values), grid))
    return RealField(grid, project_parity(values, parity), parity)


def _periodic_offset(coord: np.ndarray, center: float, period: float) -> np.ndarray:
    d = np.abs(coord - center) % period
    return np.minimum(d, period - d)


def generate_sample(spec: SampleSpec, grid: Grid, rng: np.random.Generator) -> RealField:
    """One random band-limited test function of the requested family."""
    amplitude = rng.uniform(*spec.amplitude)
    X, Y, Z = grid.mesh()
    h = grid.h

    if spec.family == SampleFamily.TRIG_POLY:
        cutoff = grid.cutoff
        degree = [min(spec.max_degree or c, c) for c in cutoff]
        coeffs = np.zeros(grid.shape, dtype=complex)
        jx, jy, jz = (np.arange(-d, d + 1) for d in degree)
        block = rng.standard_normal((len(jx), len(jy), len(jz))) + 1j * rng.standard_normal((len(jx), len(jy), len(jz)))
        coeffs[np.ix_(jx % grid.nx, jy % grid.ny, jz % grid.nz)] = block
        values = to_physical(coeffs)

    elif spec.family == SampleFamily.GAUSSIAN_BUMP:
        values = np.zeros(grid.shape)
        smallest = 2.0 * max(grid.dx, grid.dy, grid.dz / (2.0 * h))
        for _ in range(spec.bump_count):
            width = max(rng.uniform(*spec.width_range), smallest)
            cx, cy, cz = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-h, h)
            r2 = (
                _periodic_offset(X, cx, 1.0) ** 2
                + _periodic_offset(Y, cy, 1.0) ** 2
                + (_periodic_offset(Z, cz, 2.0 * h) / (2.0 * h)) ** 2
            )
            values = values + rng.choice([-1.0, 1.0]) * np.exp(-r2 / (2.0 * width**2))

    else:
        # concentrated near z = -h (and its mirror image z = h)
        layer = np.exp(-spec.sharpness * (1.0 + np.cos(np.pi * Z / h)))
        kx, ky = rng.integers(0, 3, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        horizontal = np.cos(2 * np.pi * kx * X + phase[0]) + np.cos(2 * np.pi * ky * Y + phase[1])
        values = layer * horizontal

    field = _finish(grid, np.broadcast_to(values, grid.shape), spec.parity)
    peak = float(np.max(np.abs(field.values)))
    return field.scaled(amplitude / peak) if peak > 0 else field


# =========================================
# Inequality instances
# =========================================
def _column_integral(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.sum(values, axis=-1) * grid.dz


def _l2(f: RealField, mask: Optional[np.ndarray] = None) -> float:
    if mask is None:
        return lq_norm(f, 2)
    return math.sqrt(float(np.sum(f.values[mask] ** 2)) * f.grid.cell_volume)


def _grad_h_l2(f: RealField, mask: Optional[np.ndarray] = None) -> float:
    if mask is None:
        return grad_h_l2(f)
    fx, fy = grad_h(f)
    return math.sqrt(float(np.sum(fx.values[mask] ** 2 + fy.values[mask] ** 2)) * f.grid.cell_volume)


def _lq(f: RealField, q: float, mask: Optional[np.ndarray] = None) -> float:
    if mask is None:
        return lq_norm(f, q)
    return float(np.sum(np.abs(f.values[mask]) ** q) * f.grid.cell_volume) ** (1.0 / q)


def _ladyzhenskaya_sides(phi, varphi, psi, variant: LemmaId, length: float, mask: Optional[np.ndarray]) -> tuple[float, float]:
    grid = phi.grid
    columns = np.ones((grid.nx, grid.ny), dtype=bool) if mask is None else mask

    def factor(f: RealField) -> float:
        return _l2(f, mask) / length + _grad_h_l2(f, mask)

    if variant == LemmaId.N23:
        inner = _column_integral(phi.values**2, grid) * _column_integral(varphi.values**2, grid)
        lhs = float(np.sum(inner[columns])) * grid.dx * grid.dy
        rhs = _l2(phi, mask) * factor(phi) * _l2(varphi, mask) * factor(varphi)
        return lhs, rhs

    inner = _column_integral(np.abs(phi.values), grid) * _column_integral(np.abs(varphi.values * psi.values), grid)
    lhs = float(np.sum(inner[columns])) * grid.dx * grid.dy
    h = grid.h
    if variant == LemmaId.N21:
        first = _l2(phi, mask) * math.sqrt(_l2(varphi, mask) * factor(varphi)) * math.sqrt(_l2(psi, mask) * factor(psi))
        second = math.sqrt(_l2(phi, mask) * factor(phi)) * math.sqrt(_l2(varphi, mask) * factor(varphi)) * _l2(psi, mask)
        return lhs, math.sqrt(h) * min(first, second)
    if variant == LemmaId.N22:
        rhs = h ** (5.0 / 6.0) * _lq(phi, 6, mask) * _l2(varphi, mask) ** (2.0 / 3.0) * factor(varphi) ** (1.0 / 3.0) * _l2(psi, mask)
        return lhs, rhs
    raise LabError(f"Unknown Ladyzhenskaya variant {variant}")


def check_ladyzhenskaya(
    phi: RealField, varphi: RealField, psi: Optional[RealField] = None, variant: LemmaId = LemmaId.N21
) -> tuple[float, float]:
    """Both sides of the anisotropic Ladyzhenskaya inequality on M (L = sqrt 2).

    n2.3 uses only phi and varphi.
    """
    variant = LemmaId(variant)
    if variant != LemmaId.N23 and psi is None:
        raise LabError(f"{variant.value} needs three fields")
    return _ladyzhenskaya_sides(phi, varphi, psi, variant, DIAMETER, None)


def check_disk_ladyzhenskaya(
    phi: RealField,
    varphi: RealField,
    psi: RealField,
    r: float,
    center: tuple[float, float] = (0.5, 0.5),
    variant: LemmaId = LemmaId.DISK,
) -> tuple[float, float]:
    """Disk version on D_r(center) x (-h, h): the min-form or the h^{5/6} form, with L = r."""
    if not 0 < r <= 0.5:
        raise LabError(f"Disk radius r={r} must lie in (0, 0.5] on the unit torus")
    variant = LemmaId(variant)
    mapped = {LemmaId.DISK: LemmaId.N21, LemmaId.N21: LemmaId.N21, LemmaId.DISK_N22: LemmaId.N22, LemmaId.N22: LemmaId.N22}
    if variant not in mapped:
        raise LabError(f"Unknown disk variant {variant}")
    mask = disk_mask(phi.grid, Disk(center=center, radius=r))
    if not mask.any():
        raise LabError(f"Disk of radius {r} contains no collocation points")
    return _ladyzhenskaya_sides(phi, varphi, psi, mapped[variant], r, mask)


def check_sup_z_embedding(
    f: RealField, variant: LemmaId = LemmaId.SUP_Z_L2, r: float = 0.25, center: tuple[float, float] = (0.5, 0.5)
) -> tuple[float, float]:
    """sup over z of horizontal norms against the mixed-derivative bound.

    sup-z-l2 carries explicit constants: ||f||_2^{1/2} (||f||_2/2h + 2||f_z||_2)^{1/2}.
    """
    variant = LemmaId(variant)
    grid = f.grid
    h = grid.h
    fz = dz(f)
    if variant == LemmaId.SUP_Z_L2:
        norm = lq_norm(f, 2)
        return sup_z_norm(f, 2.0), math.sqrt(norm * (norm / (2.0 * h) + 2.0 * lq_norm(fz, 2)))
    if variant == LemmaId.SUP_Z_L4:
        norm = lq_norm(f, 2)
        rhs = math.sqrt((norm / h + lq_norm(fz, 2)) * (norm / DIAMETER + grad_h_l2(f)))
        return sup_z_norm(f, 4.0), rhs
    if variant == LemmaId.SUP_Z_DISK:
        if not 0 < r <= 0.5:
            raise LabError(f"Disk radius r={r} must lie in (0, 0.5] on the unit torus")
        disk = Disk(center=center, radius=r)
        mask = disk_mask(grid, disk)
        norm = _l2(f, mask)
        rhs = math.sqrt((norm / r + _grad_h_l2(f, mask)) * (norm / h + _l2(fz, mask)))
        return sup_z_norm(f, 4.0, disk), rhs
    raise LabError(f"Unknown sup-in-z variant {variant}")


def _check_exponents(p: Sequence[float], lam: float) -> None:
    if len(p) != 3 or any(not 1 < pi < math.inf for pi in p):
        raise LabError(f"Exponents {tuple(p)} must be three values in (1, inf)")
    if sum(1.0 / pi for pi in p) >= 1:
        raise LabError(f"Exponents {tuple(p)} violate sum 1/p_i < 1")
    if not lam > 0:
        raise LabError(f"lambda={lam} must be positive")


def _log_sobolev_sides(
    F: RealField, derivatives: Sequence[RealField], p: Sequence[float], lam: float, qmax: int
) -> tuple[float, float, float]:
    lhs = lq_norm(F, math.inf)
    total = sum(lq_norm(F, pi) + lq_norm(d, pi) for pi, d in zip(p, derivatives)) + math.e
    sup_full = weighted_lq_sup(F, qmax, lam)
    sup_half = weighted_lq_sup(F, max(2, qmax // 2), lam)
    gap = 0.0 if sup_full == 0 else (sup_full - sup_half) / sup_full
    rhs = max(1.0, sup_full) * math.log(total) ** lam
    return lhs, rhs, gap


def check_log_sobolev(
    F: RealField, p: Sequence[float] = (4.0, 4.0, 4.0), lam: float = 0.5, qmax: int = 128
) -> tuple[float, float, float]:
    """(||F||_inf, max{1, sup_r ||F||_r / r^lam} log^lam(sum_i ||F||_p_i + ||d_i F||_p_i + e), truncation gap).

    The sup over r >= 2 is truncated at qmax; the gap compares qmax with qmax/2.
    """
    _check_exponents(p, lam)
    fx, fy = grad_h(F)
    return _log_sobolev_sides(F, (fx, fy, dz(F)), p, lam, qmax)


def _bump(s: np.ndarray, center: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """C-infinity bump exp(1 - 1/(1 - rho^2)) and its derivative in s."""
    rho = (s - center) / radius
    inside = np.abs(rho) < 1.0
    denom = np.where(inside, 1.0 - rho**2, 1.0)
    value = np.where(inside, np.exp(1.0 - 1.0 / denom), 0.0)
    derivative = np.where(inside, value * (-2.0 * rho / denom**2) / radius, 0.0)
    return value, derivative


def check_log_sobolev_whole(
    F: RealField, p: Sequence[float] = (4.0, 4.0, 4.0), lam: float = 0.5, qmax: int = 128
) -> tuple[float, float, float]:
    """Whole-space form: F is localized by a compactly supported window inside the box,
    so its norms over the box equal its norms over R^3."""
    _check_exponents(p, lam)
    grid = F.grid
    x, y, z = grid.coordinates()
    wx, dwx = _bump(x, 0.5, 0.4)
    wy, dwy = _bump(y, 0.5, 0.4)
    wz, dwz = _bump(z, 0.0, 0.8 * grid.h)
    window = wx[:, None, None] * wy[None, :, None] * wz[None, None, :]
    fx, fy = grad_h(F)
    fz = dz(F)
    f = F.values * window
    df = (
        fx.values * window + F.values * dwx[:, None, None] * wy[None, :, None] * wz[None, None, :],
        fy.values * window + F.values * wx[:, None, None] * dwy[None, :, None] * wz[None, None, :],
        fz.values * window + F.values * wx[:, None, None] * wy[None, :, None] * dwz[None, None, :],
    )
    localized = RealField(grid, f)
    derivatives = tuple(RealField(grid, d) for d in df)
    return _log_sobolev_sides(localized, derivatives, p, lam, qmax)


# =========================================
# Logarithmic Gronwall lemma
# =========================================
def evaluate_piecewise(f: PiecewisePolynomial, t: float) -> float:
    idx = max(0, int(np.searchsorted(f.breakpoints, t, side="right")) - 1)
    return float(P.polyval(t, f.coefficients[idx]))


def integrate_piecewise(f: PiecewisePolynomial, t: float) -> float:
    """int_0^t f(s) ds."""
    total = 0.0
    edges = list(f.breakpoints) + [math.inf]
    for k, coeffs in enumerate(f.coefficients):
        a, b = edges[k], min(edges[k + 1], t)
        if b <= a:
            break
        antiderivative = P.polyint(coeffs)
        total += float(P.polyval(b, antiderivative) - P.polyval(a, antiderivative))
    return total


def gronwall_bound(instance: GronwallInstance, t: float) -> tuple[float, float]:
    """(Q(t), e^Q (1 + 2Q)); the bound is +inf when it overflows."""
    K = instance.K
    try:
        Q = math.exp(K * t) * (math.log(instance.A0 + 1.0) + (2.0 * K**2 + 1.0) * t + integrate_piecewise(instance.f, t))
        bound = math.exp(Q) * (1.0 + 2.0 * Q)
    except OverflowError:
        return math.inf, math.inf
    return Q, bound


def closure_B(instance: GronwallInstance, A: float) -> float:
    if instance.closure == GronwallClosure.CONSTANT:
        return instance.closure_param
    return max(math.e, instance.closure_param * (A + 1.0))


def _drift(instance: GronwallInstance, t: float, A: float) -> tuple[float, float]:
    """(A', B) with A' + B = K A log B + f, clamped so that A stays nonnegative."""
    A = max(A, 0.0)
    B = closure_B(instance, A)
    dA = instance.K * A * math.log(B) + evaluate_piecewise(instance.f, t) - B
    if A <= 0.0 and dA < 0.0:
        dA = 0.0
    return dA, B


def check_gronwall(instance: GronwallInstance, times: Sequence[float]) -> GronwallReport:
    """Integrate A' = K A log B + f - B (RK45, tol 1e-10) and compare A + int B with the bound."""
    times = np.asarray(sorted(set(float(t) for t in times)))
    if times.size == 0 or times[0] < 0 or times[-1] > instance.horizon:
        raise LabError(f"Check times must lie in [0, {instance.horizon}]")
    for t in np.linspace(0.0, instance.horizon, 65):
        if evaluate_piecewise(instance.f, t) < 0:
            raise LabError("f must be nonnegative on the horizon")

    def rhs(t, y):
        dA, B = _drift(instance, t, y[0])
        return [dA, B]

    def runaway(t, y):
        return 1e200 - y[0]

    runaway.terminal = True

    # integrate piece by piece so that f is smooth on every segment
    edges = sorted({0.0, instance.horizon} | {b for b in instance.f.breakpoints if 0 < b < instance.horizon})
    y = np.array([instance.A0, 0.0])
    A_values, int_B, reached = [], [], []
    if times[0] == 0.0:
        A_values.append(instance.A0)
        int_B.append(0.0)
        reached.append(0.0)
    horizon_reached = instance.horizon
    for a, b in zip(edges, edges[1:]):
        inside = times[(times > a) & (times <= b)]
        sol = solve_ivp(
            rhs, (a, b), y, method="RK45", rtol=1e-10, atol=1e-12, t_eval=np.union1d(inside, [b]), events=runaway
        )
        keep = np.isin(sol.t, inside)
        A_values.extend(sol.y[0][keep].tolist())
        int_B.extend(sol.y[1][keep].tolist())
        reached.extend(sol.t[keep].tolist())
        if sol.status == 1 or not sol.success:
            horizon_reached = float(sol.t_events[0][0]) if sol.status == 1 else float(sol.t[-1]) if sol.t.size else a
            logger.warning(f"Gronwall ODE stopped at t={horizon_reached:.6g} before the horizon")
            break
        y = sol.y[:, -1]

    Q, bound, ratio, slack = [], [], [], []
    for t, A, IB in zip(reached, A_values, int_B):
        q, bd = gronwall_bound(instance, t)
        Q.append(q)
        bound.append(bd)
        ratio.append((A + IB) / bd if math.isfinite(bd) else 0.0)
        dA, B = _drift(instance, t, A)
        slack.append(instance.K * max(A, 0.0) * math.log(B) + evaluate_piecewise(instance.f, t) - dA - B)

    violations = sum(1 for r in ratio if r > 1.0 + ABSOLUTE_TOLERANCE)
    return GronwallReport(
        times=reached,
        A=A_values,
        int_B=int_B,
        Q=Q,
        bound=bound,
        ratio=ratio,
        slack=slack,
        max_ratio=max(ratio) if ratio else 0.0,
        violations=violations,
        hypothesis_holds=all(s >= -1e-9 * max(1.0, abs(a)) for s, a in zip(slack, A_values)),
        horizon_reached=horizon_reached,
    )


def random_gronwall_instance(rng: np.random.Generator, horizon: float = 1.0) -> GronwallInstance:
    """An instance whose ODE keeps A > 0, so the hypothesis holds with equality."""
    K = rng.uniform(1.0, 3.0)
    pieces = int(rng.integers(1, 3))
    breakpoints = [0.0] + sorted(rng.uniform(0.1, 0.9, size=pieces - 1) * horizon)
    coefficients = [rng.uniform(0.0, 2.0, size=int(rng.integers(1, 4))).tolist() for _ in range(pieces)]
    f = PiecewisePolynomial(breakpoints=breakpoints, coefficients=coefficients)
    if rng.uniform() < 0.5:
        b = rng.uniform(math.e, 3 * math.e)
        A0 = b / (K * math.log(b)) * (1.0 + rng.uniform(0.0, 2.0))
        return GronwallInstance(K=K, A0=A0, f=f, closure=GronwallClosure.CONSTANT, closure_param=b, horizon=horizon)
    # c <= 1 keeps K A log B - B increasing in A, so a nonnegative start stays nonnegative
    c = rng.uniform(0.5, 1.0)
    A0 = rng.uniform(1.0, 4.0)
    while K * A0 * math.log(max(math.e, c * (A0 + 1.0))) < max(math.e, c * (A0 + 1.0)):
        A0 *= 2.0
    return GronwallInstance(K=K, A0=A0, f=f, closure=GronwallClosure.PROPORTIONAL, closure_param=c, horizon=horizon)


# =========================================
# Ensembles
# =========================================
def fit_constant(ratios: Sequence[float], bins: int = 20) -> tuple[float, list[int], list[float]]:
    """C* = max ratio plus a log-spaced histogram of the positive ratios."""
    r = np.asarray(list(ratios), dtype=float)
    if r.size == 0:
        raise LabError("No ratios to fit")
    if not np.all(np.isfinite(r)):
        raise LabError("Ratios must be finite")
    c_star = float(np.max(r))
    positive = r[r > 0]
    if positive.size == 0:
        return c_star, [int(r.size)], [0.0, 0.0]
    lo, hi = float(positive.min()), float(positive.max())
    if lo == hi:
        return c_star, [int(positive.size)], [lo, hi]
    counts, edges = np.histogram(positive, bins=np.geomspace(lo, hi, bins + 1))
    return c_star, counts.tolist(), edges.tolist()


def _sample_spec(config: LabConfig, index: int, parity: Parity = Parity.NONE) -> SampleSpec:
    family = config.family or FAMILIES[index % len(FAMILIES)]
    return SampleSpec(family=family, seed=config.seed, parity=parity)


def _evaluate_sample(config: LabConfig, grid: Grid, index: int) -> tuple[float, float, float]:
    rng = np.random.default_rng([config.seed, index])
    spec = _sample_spec(config, index)
    lemma = config.lemma

    if lemma in (LemmaId.N21, LemmaId.N22, LemmaId.N23, LemmaId.DISK, LemmaId.DISK_N22):
        phi, varphi, psi = (generate_sample(spec, grid, rng) for _ in range(3))
        if lemma in (LemmaId.DISK, LemmaId.DISK_N22):
            center = tuple(rng.uniform(0.0, 1.0, size=2))
            lhs, rhs = check_disk_ladyzhenskaya(phi, varphi, psi, config.radius, center, lemma)
        else:
            lhs, rhs = check_ladyzhenskaya(phi, varphi, psi, lemma)
        return lhs, rhs, 0.0
    if lemma in (LemmaId.SUP_Z_L2, LemmaId.SUP_Z_L4, LemmaId.SUP_Z_DISK):
        f = generate_sample(spec, grid, rng)
        center = tuple(rng.uniform(0.0, 1.0, size=2))
        lhs, rhs = check_sup_z_embedding(f, lemma, config.radius, center)
        return lhs, rhs, 0.0
    if lemma == LemmaId.LOG_SOBOLEV:
        return check_log_sobolev(generate_sample(spec, grid, rng), config.p, config.lam, config.qmax)
    if lemma == LemmaId.LOG_SOBOLEV_WHOLE:
        return check_log_sobolev_whole(generate_sample(spec, grid, rng), config.p, config.lam, config.qmax)
    if lemma == LemmaId.GRONWALL:
        report = check_gronwall(random_gronwall_instance(rng, config.horizon), np.linspace(0.0, config.horizon, 11))
        worst = int(np.argmax(report.ratio))
        return report.A[worst] + report.int_B[worst], report.bound[worst], float(report.violations)
    raise LabError(f"Unknown lemma {lemma}")


def run_ensemble(config: LabConfig, grid: Optional[Grid] = None, pool: Optional[WorkerPool] = None) -> InequalityReport:
    """Evaluate `config.samples` seeded samples of one lemma and fit C*."""
    grid = grid or make_grid(*config.grid)
    pool = pool or WorkerPool()
    logger.info(f"Lemma {config.lemma.value}: {config.samples} samples on {grid.describe()}")
    results = pool.map(lambda i: _evaluate_sample(config, grid, i), range(config.samples))

    lhs = [r[0] for r in results]
    rhs = [r[1] for r in results]
    ratio = [a / b if b > 0 and a > 0 else 0.0 for a, b in zip(lhs, rhs)]
    c_star, counts, edges = fit_constant(ratio)
    margin = 1e-9
    report = InequalityReport(
        lemma=config.lemma,
        grid=(grid.nx, grid.ny, grid.nz, grid.h),
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        c_star=c_star,
        margin=margin,
        violations_at_c_star=sum(1 for r in ratio if r > c_star * (1.0 + margin)),
        histogram_counts=counts,
        histogram_edges=edges,
    )
    if config.lemma == LemmaId.SUP_Z_L2:
        report.absolute_violations = sum(1 for r in ratio if r > 1.0 + ABSOLUTE_TOLERANCE)
    elif config.lemma == LemmaId.GRONWALL:
        report.absolute_violations = int(sum(r[2] for r in results))
    elif config.lemma in (LemmaId.LOG_SOBOLEV, LemmaId.LOG_SOBOLEV_WHOLE):
        report.truncation_gap = max(r[2] for r in results)
    logger.info(f"✓ {config.lemma.value}: C* = {c_star:.6g}")
    return report


def resolution_audit(config: LabConfig, coarse: Grid, fine: Grid, pool: Optional[WorkerPool] = None) -> tuple[InequalityReport, InequalityReport, float]:
    """Fit C* on two grids with the same seeds; returns both reports and |C*_c - C*_f| / C*_f."""
    first = run_ensemble(config, coarse, pool)
    second = run_ensemble(config, fine, pool)
    change = 0.0 if second.c_star == 0 else abs(first.c_star - second.c_star) / second.c_star
    logger.info(f"Resolution audit {config.lemma.value}: relative change {change:.2%}")
    return first, second, change
