"""
Grid and Spectral Transforms
============================
Periodic domain M x (-h, h) with periods 1, 1 and 2h, discrete fields with a
z-parity tag, forward/inverse Fourier transforms and two-thirds dealiasing.

Coefficient convention: scipy.fft with norm="forward", standard FFT ordering
(0, 1, ..., n/2-1, -n/2, ..., -1) per axis. A constant field c has a single
zero-mode coefficient c; the inverse transform is unscaled.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from anisopede.config import settings
from anisopede.models import Parity

logger = logging.getLogger(__name__)


class GridError(ValueError):
    """Invalid resolution, extent or array shape."""
    pass


class FieldError(ValueError):
    """Non-finite or otherwise unusable field values."""
    pass


class ParityError(ValueError):
    """Field values do not carry the declared z-symmetry."""
    pass


class BandLimitError(ValueError):
    """Field has content above the dealiasing cutoff."""
    pass


# =========================================
# Wavenumber tables (cached per resolution)
# =========================================
@lru_cache(maxsize=None)
def _mode_indices(n: int) -> np.ndarray:
    j = np.fft.fftfreq(n, d=1.0 / n).round().astype(int)
    j.setflags(write=False)
    return j


@lru_cache(maxsize=None)
def _wavenumbers(n: int, period: float) -> np.ndarray:
    k = (2.0 * np.pi / period) * _mode_indices(n).astype(float)
    k.setflags(write=False)
    return k


@lru_cache(maxsize=None)
def _derivative_symbol(n: int, period: float) -> np.ndarray:
    # Nyquist mode has no well-defined odd derivative
    ik = 1j * _wavenumbers(n, period)
    ik[n // 2] = 0.0
    ik.setflags(write=False)
    return ik


@lru_cache(maxsize=None)
def _keep(n: int) -> np.ndarray:
    keep = np.abs(_mode_indices(n)) <= (n - 1) // 3
    keep.setflags(write=False)
    return keep


# =========================================
# Grid
# =========================================
class Grid(BaseModel):
    """Collocation grid on M x (-h, h)."""
    model_config = ConfigDict(frozen=True)

    nx: int
    ny: int
    nz: int
    h: float

    @field_validator("nx", "ny", "nz")
    @classmethod
    def _even_resolution(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise ValueError("resolution must be an even integer >= 4")
        return v

    @field_validator("h")
    @classmethod
    def _positive_depth(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("h must be positive")
        return v

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def kx(self) -> np.ndarray:
        return _wavenumbers(self.nx, 1.0)

    @property
    def ky(self) -> np.ndarray:
        return _wavenumbers(self.ny, 1.0)

    @property
    def kz(self) -> np.ndarray:
        return _wavenumbers(self.nz, 2.0 * self.h)

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def dz(self) -> float:
        return 2.0 * self.h / self.nz

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def volume(self) -> float:
        return 2.0 * self.h

    @property
    def cutoff(self) -> tuple[int, int, int]:
        """Largest retained mode index per direction."""
        return ((self.nx - 1) // 3, (self.ny - 1) // 3, (self.nz - 1) // 3)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        z = -self.h + np.arange(self.nz) * self.dz
        return x, y, z

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (sparse) coordinate arrays, x first."""
        x, y, z = self.coordinates()
        return np.meshgrid(x, y, z, indexing="ij", sparse=True)

    def wavenumber_mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.kx[:, None, None], self.ky[None, :, None], self.kz[None, None, :])

    def derivative_symbols(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """i*k per direction with Nyquist zeroed, shaped for broadcasting."""
        return (
            _derivative_symbol(self.nx, 1.0)[:, None, None],
            _derivative_symbol(self.ny, 1.0)[None, :, None],
            _derivative_symbol(self.nz, 2.0 * self.h)[None, None, :],
        )

    def dealias_mask(self) -> np.ndarray:
        return (
            _keep(self.nx)[:, None, None]
            & _keep(self.ny)[None, :, None]
            & _keep(self.nz)[None, None, :]
        )

    def describe(self) -> str:
        return f"{self.nx}x{self.ny}x{self.nz}, h={self.h:g}"


def make_grid(nx: int, ny: int, nz: int, h: float) -> Grid:
    """Validated grid; odd/small resolutions and h <= 0 are rejected."""
    try:
        return Grid(nx=nx, ny=ny, nz=nz, h=h)
    except ValidationError as e:
        problems = "; ".join(f"{err['loc'][0]}: {err['msg']}" for err in e.errors())
        raise GridError(f"Invalid grid ({problems})") from e


# =========================================
# Fields
# =========================================
@dataclass(frozen=True, eq=False)
class RealField:
    """Values at collocation points plus a z-parity tag."""
    grid: Grid
    values: np.ndarray
    parity: Parity = Parity.NONE

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"Field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise FieldError("Field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "parity", Parity(self.parity))

    def with_values(self, values: np.ndarray, parity: Optional[Parity] = None) -> "RealField":
        return RealField(self.grid, values, self.parity if parity is None else parity)

    def __neg__(self) -> "RealField":
        return self.with_values(-self.values)

    def scaled(self, factor: float) -> "RealField":
        return self.with_values(factor * self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a RealField (norm="forward")."""
    grid: Grid
    coeffs: np.ndarray
    parity: Parity = Parity.NONE

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise GridError(f"Coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}")

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        mirrored = np.conj(reflect_modes(self.coeffs))
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return bool(np.max(np.abs(self.coeffs - mirrored)) <= tol * scale)


# =========================================
# Array-level transforms
# =========================================
def to_spectral(values: np.ndarray) -> np.ndarray:
    return scipy.fft.fftn(values, norm="forward", workers=settings.workers())


def to_physical(coeffs: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(coeffs, norm="forward", workers=settings.workers()).real


def reflect_modes(coeffs: np.ndarray) -> np.ndarray:
    """Coefficient array indexed at -k (FFT ordering)."""
    out = coeffs
    for axis in range(coeffs.ndim):
        out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return out


def mirror_z(values: np.ndarray) -> np.ndarray:
    """values(x, y, -z) at collocation points (index j -> (nz - j) mod nz)."""
    return np.roll(values[..., ::-1], 1, axis=-1)


def project_parity(values: np.ndarray, parity: Parity) -> np.ndarray:
    if parity == Parity.EVEN:
        return 0.5 * (values + mirror_z(values))
    if parity == Parity.ODD:
        out = 0.5 * (values - mirror_z(values))
        nz = values.shape[-1]
        out[..., 0] = 0.0
        out[..., nz // 2] = 0.0
        return out
    return values


def project_parity_hat(coeffs: np.ndarray, parity: Parity) -> np.ndarray:
    """project_parity in coefficient space: z -> -z maps jz to -jz."""
    if parity == Parity.NONE:
        return coeffs
    mirrored = np.roll(np.flip(coeffs, axis=-1), 1, axis=-1)
    if parity == Parity.EVEN:
        return 0.5 * (coeffs + mirrored)
    return 0.5 * (coeffs - mirrored)


def dealias(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return np.where(grid.dealias_mask(), coeffs, 0.0)


# =========================================
# Operations
# =========================================
def forward(field: RealField) -> SpectralField:
    return SpectralField(field.grid, to_spectral(field.values), field.parity)


def inverse(spec: SpectralField) -> RealField:
    return RealField(spec.grid, to_physical(spec.coeffs), spec.parity)


def enforce_parity(field: RealField) -> RealField:
    """Symmetric (Even) or antisymmetric (Odd) part in z; identity for None."""
    if field.parity == Parity.NONE:
        return field
    return field.with_values(project_parity(field.values, field.parity))


def parity_residual(field: RealField) -> float:
    """Max deviation from the declared symmetry (0 for parity None)."""
    if field.parity == Parity.NONE:
        return 0.0
    return float(np.max(np.abs(field.values - project_parity(field.values, field.parity))))


def sample(
    grid: Grid,
    initializer: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    parity: Parity = Parity.NONE,
    tol: float = 1e-10,
) -> RealField:
    """Evaluate a pointwise initializer at the collocation points."""
    X, Y, Z = grid.mesh()
    values = np.broadcast_to(np.asarray(initializer(X, Y, Z), dtype=float), grid.shape)
    if not np.all(np.isfinite(values)):
        raise FieldError("Initializer produced non-finite values")
    field = RealField(grid, values, parity)
    if parity != Parity.NONE:
        scale = max(1.0, float(np.max(np.abs(values))))
        if parity_residual(field) > tol * scale:
            raise ParityError(f"Initializer is not {parity.value} in z")
    return field


def truncate(field: RealField) -> RealField:
    """Zero every mode outside the two-thirds cutoff."""
    return field.with_values(to_physical(dealias(to_spectral(field.values), field.grid)))


def is_band_limited(field: RealField, tol: float = 1e-12) -> bool:
    coeffs = to_spectral(field.values)
    outside = np.where(field.grid.dealias_mask(), 0.0, coeffs)
    scale = max(1e-300, float(np.max(np.abs(coeffs))))
    return bool(np.max(np.abs(outside)) <= tol * scale)


def require_band_limited(field: RealField, tol: float = 1e-10) -> None:
    if not is_band_limited(field, tol):
        raise BandLimitError("Field has content beyond the dealiasing cutoff")


def dealiased_product(a: RealField, b: RealField) -> RealField:
    """Pointwise product with the two-thirds rule applied."""
    if a.grid != b.grid:
        raise GridError("Fields live on different grids")
    product = to_physical(dealias(to_spectral(a.values * b.values), a.grid))
    return RealField(a.grid, product, _product_parity(a.parity, b.parity))


def _product_parity(p: Parity, q: Parity) -> Parity:
    if Parity.NONE in (p, q):
        return Parity.NONE
    return Parity.EVEN if p == q else Parity.ODD
