"""
Model Operators
===============
Horizontal gradient/Laplacian, vertical derivative and integral, diagnosed
vertical velocity, hydrostatic and surface pressure, barotropic projection.

Each operator comes in two layers: a `*_hat` kernel acting on coefficient
arrays (used by the time stepper) and a RealField wrapper carrying parity.

The FFT basis in z is exp(i kz (z + h)), so antiderivatives from the bottom
z = -h need no phase factor. Conventions: k x v = (-v2, v1).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft

from anisopede.config import settings
from anisopede.models import Parity
from anisopede.services.grid_transforms import (
    Grid,
    GridError,
    ParityError,
    RealField,
    require_band_limited,
    to_physical,
    to_spectral,
)

logger = logging.getLogger(__name__)

_FLIP = {Parity.EVEN: Parity.ODD, Parity.ODD: Parity.EVEN, Parity.NONE: Parity.NONE}


@dataclass(frozen=True)
class PressureDecomposition:
    """p = p_s(x, y) + p_hydro(x, y, z), p_hydro = -int_{-h}^z T."""
    p_s: RealField
    p_hydro: RealField


# =========================================
# Coefficient kernels
# =========================================
def horizontal_laplacian_symbol(grid: Grid) -> np.ndarray:
    kx, ky, _ = grid.wavenumber_mesh()
    return -(kx**2 + ky**2)


def div_h_hat(v1_hat: np.ndarray, v2_hat: np.ndarray, grid: Grid) -> np.ndarray:
    ikx, iky, _ = grid.derivative_symbols()
    return ikx * v1_hat + iky * v2_hat


def antiderivative_hat(f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Periodic part of z -> int_{-h}^z f, vanishing at z = -h.

    The vertical-mean plane (kz = 0) is ignored here; its contribution
    (z + h) * mean is not a trigonometric polynomial.
    """
    _, _, ikz = grid.derivative_symbols()
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(ikz != 0, 1.0 / ikz, 0.0)
    g_hat = f_hat * inv
    g_hat[..., 0] = -np.sum(g_hat, axis=-1)
    return g_hat


def vertical_mean_plane(f_hat: np.ndarray) -> np.ndarray:
    """Coefficients of the vertical mean (1/2h) int f dz on M."""
    return f_hat[..., 0]


def barotropic_project_hat(v1_hat: np.ndarray, v2_hat: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Remove the gradient part of the vertical mean of v."""
    kx, ky, _ = grid.wavenumber_mesh()
    kx2 = kx[:, :, 0]
    ky2 = ky[:, :, 0]
    k2 = kx2**2 + ky2**2
    safe = np.where(k2 == 0, 1.0, k2)
    m1 = v1_hat[..., 0]
    m2 = v2_hat[..., 0]
    along = (kx2 * m1 + ky2 * m2) / safe
    along = np.where(k2 == 0, 0.0, along)
    out1 = v1_hat.copy()
    out2 = v2_hat.copy()
    out1[..., 0] = m1 - kx2 * along
    out2[..., 0] = m2 - ky2 * along
    return out1, out2


def surface_pressure_hat(f1_hat: np.ndarray, f2_hat: np.ndarray, grid: Grid) -> tuple[np.ndarray, complex]:
    """Solve Delta_H p_s = (1/2h) int div_H f dz; returns (p_s coefficients, discarded zero mode)."""
    lap = horizontal_laplacian_symbol(grid)[:, :, 0]
    rhs = vertical_mean_plane(div_h_hat(f1_hat, f2_hat, grid))
    zero_mode = complex(rhs[0, 0])
    safe = np.where(lap == 0, 1.0, lap)
    plane = np.where(lap == 0, 0.0, rhs / safe)
    p_hat = np.zeros(grid.shape, dtype=complex)
    p_hat[..., 0] = plane
    return p_hat, zero_mode


# =========================================
# Field operators
# =========================================
def grad_h(f: RealField) -> tuple[RealField, RealField]:
    """
    Horizontal gradient (df/dx, df/dy).

    Args:
        f: scalar field; parity is carried over to both components

    Returns:
        (df/dx, df/dy) on the same grid
    """
    ikx, iky, _ = f.grid.derivative_symbols()
    f_hat = to_spectral(f.values)
    return (
        f.with_values(to_physical(ikx * f_hat)),
        f.with_values(to_physical(iky * f_hat)),
    )


def laplacian_h(f: RealField) -> RealField:
    """Delta_H f = d2f/dx2 + d2f/dy2, same parity as f."""
    f_hat = to_spectral(f.values)
    return f.with_values(to_physical(horizontal_laplacian_symbol(f.grid) * f_hat))


def dz(f: RealField) -> RealField:
    """Vertical derivative; Even and Odd swap."""
    _, _, ikz = f.grid.derivative_symbols()
    return f.with_values(to_physical(ikz * to_spectral(f.values)), _FLIP[f.parity])


def div_h(v: tuple[RealField, RealField]) -> RealField:
    """
    Horizontal divergence dv1/dx + dv2/dy.

    Args:
        v: horizontal vector field; both components on one grid

    Returns:
        Scalar field with the parity of v1

    Raises:
        GridError: if the components live on different grids
    """
    v1, v2 = v
    _check_pair(v1, v2)
    div = div_h_hat(to_spectral(v1.values), to_spectral(v2.values), v1.grid)
    return v1.with_values(to_physical(div))


def coriolis(v: tuple[RealField, RealField], f0: float) -> tuple[RealField, RealField]:
    """f0 k x v = f0 (-v2, v1)."""
    v1, v2 = v
    return v2.scaled(-f0), v1.scaled(f0)


def integral_from_bottom(f: RealField) -> RealField:
    """Exact antiderivative of the trigonometric interpolant, zero at z = -h."""
    grid = f.grid
    f_hat = to_spectral(f.values)
    periodic = to_physical(antiderivative_hat(f_hat, grid))
    mean = scipy.fft.ifft2(vertical_mean_plane(f_hat), norm="forward", workers=settings.workers()).real
    _, _, z = grid.coordinates()
    values = periodic + (z + grid.h)[None, None, :] * mean[:, :, None]
    return RealField(grid, values, Parity.NONE)


def diagnose_w(v: tuple[RealField, RealField]) -> RealField:
    """
    Vertical velocity diagnosed from continuity and w(-h) = 0.

    Args:
        v: Even horizontal velocity

    Returns:
        w = -int_{-h}^z div_H v, tagged Odd; w(h) vanishes only when the
        barotropic constraint holds (violations are logged at debug level)

    Raises:
        ParityError: if a component of v is not Even
    """
    v1, v2 = v
    _check_pair(v1, v2)
    if v1.parity != Parity.EVEN or v2.parity != Parity.EVEN:
        raise ParityError("diagnose_w expects Even velocity components")
    w = integral_from_bottom(div_h(v))
    top = float(np.max(np.abs(w_top(v))))
    if top > 1e-10:
        logger.debug(f"Barotropic constraint violated: max |w(h)| = {top:.3e}")
    return RealField(v1.grid, -w.values, Parity.ODD)


def w_top(v: tuple[RealField, RealField]) -> np.ndarray:
    """w(x, y, h) = -int_{-h}^{h} div_H v dz, exact from the vertical mean."""
    v1, v2 = v
    grid = v1.grid
    div = div_h_hat(to_spectral(v1.values), to_spectral(v2.values), grid)
    mean = scipy.fft.ifft2(vertical_mean_plane(div), norm="forward", workers=settings.workers()).real
    return -2.0 * grid.h * mean


def barotropic_residual(v: tuple[RealField, RealField]) -> float:
    """max over M of |int_{-h}^{h} div_H v dz|."""
    return float(np.max(np.abs(w_top(v))))


def barotropic_project(v: tuple[RealField, RealField]) -> tuple[RealField, RealField]:
    """
    Remove the gradient part of the vertical mean of v.

    Args:
        v: horizontal velocity

    Returns:
        Velocity whose vertical mean is divergence-free; the z-dependent
        part of v is untouched
    """
    v1, v2 = v
    _check_pair(v1, v2)
    p1, p2 = barotropic_project_hat(to_spectral(v1.values), to_spectral(v2.values), v1.grid)
    return v1.with_values(to_physical(p1)), v2.with_values(to_physical(p2))


def hydrostatic_pressure(T: RealField) -> RealField:
    """
    Hydrostatic pressure p_hydro = -int_{-h}^z T.

    Args:
        T: Odd, band-limited temperature

    Returns:
        p_hydro at the collocation points (no parity tag)

    Raises:
        ParityError: if T is not Odd
        BandLimitError: if T has content beyond the dealiasing cutoff
    """
    if T.parity != Parity.ODD:
        raise ParityError("hydrostatic_pressure expects an Odd temperature field")
    require_band_limited(T)
    p = integral_from_bottom(T)
    return RealField(T.grid, -p.values, Parity.NONE)


def solve_surface_pressure(f1: tuple[RealField, RealField]) -> RealField:
    """
    Surface pressure from Delta_H p_s = (1/2h) int div_H f dz.

    Args:
        f1: horizontal forcing, typically the explicit momentum tendency

    Returns:
        p_s with zero horizontal mean, constant along z and tagged Even
    """
    a, b = f1
    _check_pair(a, b)
    p_hat, zero_mode = surface_pressure_hat(to_spectral(a.values), to_spectral(b.values), a.grid)
    if abs(zero_mode) > 1e-10:
        logger.warning(f"Surface pressure: discarded nonzero mean forcing {abs(zero_mode):.3e}")
    return RealField(a.grid, to_physical(p_hat), Parity.EVEN)


def pressure_decomposition(T: RealField, f1: tuple[RealField, RealField]) -> PressureDecomposition:
    return PressureDecomposition(p_s=solve_surface_pressure(f1), p_hydro=hydrostatic_pressure(T))


def poisson_residual(p_s: RealField, f1: tuple[RealField, RealField]) -> float:
    """max |Delta_H p_s - (1/2h) int div_H f1 dz| on M."""
    a, b = f1
    grid = p_s.grid
    lhs = horizontal_laplacian_symbol(grid)[:, :, 0] * vertical_mean_plane(to_spectral(p_s.values))
    rhs = vertical_mean_plane(div_h_hat(to_spectral(a.values), to_spectral(b.values), grid))
    rhs = rhs.copy()
    rhs[0, 0] = 0.0
    diff = scipy.fft.ifft2(lhs - rhs, norm="forward", workers=settings.workers()).real
    return float(np.max(np.abs(diff)))


def _check_pair(a: RealField, b: RealField) -> None:
    if a.grid != b.grid:
        raise GridError("Vector components live on different grids")
