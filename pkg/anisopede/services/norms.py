"""
Norms
=====
Lebesgue, Sobolev and mixed norms used by the lab and the monitors.

Quadrature is the uniform grid sum times the cell volume. Vector arguments
(tuples of fields) use the pointwise Euclidean magnitude. Finite-q norms are
evaluated in log-space so that q in the hundreds does not overflow.
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from anisopede.models import Disk, NormKind, NormRequest
from anisopede.services.grid_transforms import Grid, GridError, RealField, to_spectral
from anisopede.services.operators import dz

logger = logging.getLogger(__name__)

FieldLike = Union[RealField, tuple[RealField, ...]]


class NormError(ValueError):
    """Invalid exponent, radius or region."""
    pass


# =========================================
# Helpers
# =========================================
def _components(f: FieldLike) -> tuple[RealField, ...]:
    comps = f if isinstance(f, tuple) else (f,)
    if not comps:
        raise NormError("No field given")
    grid = comps[0].grid
    if any(c.grid != grid for c in comps[1:]):
        raise GridError("Vector components live on different grids")
    return comps


def magnitude(f: FieldLike) -> np.ndarray:
    comps = _components(f)
    if len(comps) == 1:
        return np.abs(comps[0].values)
    return np.sqrt(sum(c.values**2 for c in comps))


def _grid(f: FieldLike) -> Grid:
    return _components(f)[0].grid


def disk_mask(grid: Grid, disk: Disk) -> np.ndarray:
    """Collocation points of M within periodic distance r of the center."""
    x, y, _ = grid.coordinates()
    cx, cy = disk.center
    ddx = np.abs(x - cx) % 1.0
    ddy = np.abs(y - cy) % 1.0
    ddx = np.minimum(ddx, 1.0 - ddx)
    ddy = np.minimum(ddy, 1.0 - ddy)
    return ddx[:, None] ** 2 + ddy[None, :] ** 2 <= disk.radius**2 * (1.0 + 1e-12)


def spectral_sq(f: FieldLike, symbol: Optional[np.ndarray] = None) -> float:
    """|Omega| * sum symbol |f_hat|^2 (Parseval); symbol defaults to 1."""
    grid = _grid(f)
    total = 0.0
    for c in _components(f):
        power = np.abs(to_spectral(c.values)) ** 2
        total += float(np.sum(power if symbol is None else symbol * power))
    return grid.volume * total


def _log_lq(values: np.ndarray, q: float, log_weight: float) -> float:
    a = np.abs(values).ravel()
    if not np.any(a > 0):
        return -math.inf
    with np.errstate(divide="ignore"):
        terms = q * np.log(a) + log_weight
    return float(logsumexp(terms)) / q


# =========================================
# Operations
# =========================================
def lq_norm(f: FieldLike, q: float) -> float:
    """
    Lebesgue norm over Omega = M x (-h, h).

    Args:
        f: scalar field or tuple of components (pointwise Euclidean magnitude)
        q: exponent >= 1; math.inf gives the collocation max

    Returns:
        (sum |f|^q dV)^(1/q), accumulated in log space

    Raises:
        NormError: if q < 1
    """
    if not q >= 1:
        raise NormError(f"Exponent q={q} must be >= 1")
    mag = magnitude(f)
    if math.isinf(q):
        return float(np.max(mag))
    return math.exp(_log_lq(mag, q, math.log(_grid(f).cell_volume)))


def sup_z_norm(f: FieldLike, q: float = 2.0, disk: Optional[Disk] = None) -> float:
    """
    Largest horizontal L^q norm over the z-planes of the grid.

    Args:
        f: scalar field or tuple of components
        q: horizontal exponent >= 1
        disk: restrict each plane to a periodic disk of M

    Returns:
        max_z ||f(., ., z)||_{L^q(M or disk)}

    Raises:
        NormError: if q < 1 or the disk holds no collocation points
    """
    if not q >= 1:
        raise NormError(f"Exponent q={q} must be >= 1")
    grid = _grid(f)
    mag = magnitude(f)
    if disk is not None:
        mask = disk_mask(grid, disk)
        if not mask.any():
            raise NormError(f"Disk of radius {disk.radius} contains no collocation points")
        planes = mag[mask]
    else:
        planes = mag.reshape(-1, grid.nz)
    log_area = math.log(grid.dx * grid.dy)
    best = max(_log_lq(planes[:, k], q, log_area) for k in range(grid.nz))
    return math.exp(best)


def column_energy(f: FieldLike) -> np.ndarray:
    """int_{-h}^h |f|^2 dz times the horizontal cell area, per column."""
    grid = _grid(f)
    return np.sum(magnitude(f) ** 2, axis=-1) * grid.cell_volume


def local_energy_profile(f: FieldLike, r: float, stride: int = 1) -> float:
    """Lattice max of int_{D_r(c) x (-h,h)} |f|^2 over disk centers c.

    Args:
        f: scalar field or tuple of components
        r: disk radius > 0
        stride: only every stride-th lattice point is tried as a center

    Offsets are summed in order of increasing distance, so the result is
    nondecreasing in r in floating point as well.
    """
    if not r > 0:
        raise NormError(f"Radius r={r} must be positive")
    grid = _grid(f)
    energy = column_energy(f)
    ix = np.arange(grid.nx)
    iy = np.arange(grid.ny)
    ox = np.minimum(ix, grid.nx - ix) * grid.dx
    oy = np.minimum(iy, grid.ny - iy) * grid.dy
    dist2 = ox[:, None] ** 2 + oy[None, :] ** 2
    inside = np.argwhere(dist2 <= r**2 * (1.0 + 1e-12))
    order = np.argsort(dist2[inside[:, 0], inside[:, 1]], kind="stable")
    total = np.zeros_like(energy)
    for i, j in inside[order]:
        total += np.roll(energy, (int(i), int(j)), axis=(0, 1))
    return float(np.max(total[::stride, ::stride]))


def weighted_lq_sup(v: FieldLike, qmax: int, lam: float = 0.5) -> float:
    """
    Weighted sup of Lebesgue norms.

    Args:
        v: scalar field or tuple of components
        qmax: largest integer exponent tried (>= 2)
        lam: weight exponent; 1/2 gives ||v||_q / sqrt(q)

    Returns:
        max over integer q in [2, qmax] of ||v||_q / q^lam
    """
    if qmax < 2:
        raise NormError(f"qmax={qmax} must be >= 2")
    mag = magnitude(v)
    log_dv = math.log(_grid(v).cell_volume)
    best = -math.inf
    for q in range(2, int(qmax) + 1):
        best = max(best, _log_lq(mag, q, log_dv) - lam * math.log(q))
    return math.exp(best)


def grad_h_l2(f: FieldLike) -> float:
    kx, ky, _ = _grid(f).wavenumber_mesh()
    return math.sqrt(spectral_sq(f, kx**2 + ky**2))


def grad_l2(f: FieldLike) -> float:
    kx, ky, kz = _grid(f).wavenumber_mesh()
    return math.sqrt(spectral_sq(f, kx**2 + ky**2 + kz**2))


def h1_norm(f: FieldLike) -> float:
    """(||f||^2 + ||grad f||^2)^(1/2), spectrally."""
    kx, ky, kz = _grid(f).wavenumber_mesh()
    return math.sqrt(spectral_sq(f, 1.0 + kx**2 + ky**2 + kz**2))


def dz_lq(f: FieldLike, q: float) -> float:
    comps = _components(f)
    return lq_norm(tuple(dz(c) for c in comps) if len(comps) > 1 else dz(comps[0]), q)


def evaluate(request: NormRequest, f: FieldLike) -> float:
    """Dispatch a NormRequest to the matching norm."""
    kind = request.kind
    if kind == NormKind.LQ:
        return lq_norm(f, request.q)
    if kind == NormKind.H1:
        return h1_norm(f)
    if kind == NormKind.SUP_Z_L2_S:
        return sup_z_norm(f, 2.0, request.disk)
    if kind == NormKind.SUP_Z_L4_S:
        return sup_z_norm(f, 4.0, request.disk)
    if kind == NormKind.LOCAL_DISK_L2:
        return local_energy_profile(f, request.disk.radius)
    if kind == NormKind.GRAD_H_L2:
        return grad_h_l2(f)
    if kind == NormKind.DZ_LQ:
        return dz_lq(f, request.q)
    raise NormError(f"Unknown norm kind: {kind}")
