"""
Tests for the grid, fields and spectral transforms.

Validates:
- Grid validation and geometry
- Forward/inverse transforms and the coefficient convention
- z-mirror and parity projection
- Two-thirds dealiasing and band-limit checks
"""

import itertools

import numpy as np
import pytest

from anisopede.models import Parity
from anisopede.services.grid_transforms import (
    BandLimitError,
    FieldError,
    GridError,
    ParityError,
    RealField,
    dealiased_product,
    enforce_parity,
    forward,
    inverse,
    is_band_limited,
    make_grid,
    mirror_z,
    parity_residual,
    project_parity,
    project_parity_hat,
    require_band_limited,
    sample,
    to_physical,
    to_spectral,
    truncate,
)


class TestGrid:
    """Grid construction and geometry."""

    def test_geometry(self):
        grid = make_grid(32, 16, 8, 0.25)
        assert grid.shape == (32, 16, 8)
        assert grid.dz == pytest.approx(0.0625)
        assert grid.volume == pytest.approx(0.5)
        assert grid.cutoff == (10, 5, 2)

    def test_z_coordinates_start_at_bottom(self):
        x, y, z = make_grid(8, 8, 8, 0.5).coordinates()
        assert z[0] == pytest.approx(-0.5)
        assert z[-1] == pytest.approx(0.5 - 0.125)
        assert x[0] == 0.0

    @pytest.mark.parametrize("shape", [(15, 16, 8), (16, 16, 2), (16, 0, 8)])
    def test_rejects_bad_resolution(self, shape):
        with pytest.raises(GridError):
            make_grid(*shape, 0.5)

    def test_rejects_nonpositive_depth(self):
        with pytest.raises(GridError, match="h"):
            make_grid(16, 16, 8, 0.0)

    def test_grid_is_frozen(self, grid):
        with pytest.raises(Exception):
            grid.nx = 32


class TestFields:
    """RealField validation."""

    def test_shape_mismatch(self, grid):
        with pytest.raises(GridError):
            RealField(grid, np.zeros((4, 4, 4)))

    def test_non_finite_values(self, grid):
        values = np.zeros(grid.shape)
        values[0, 0, 0] = np.nan
        with pytest.raises(FieldError):
            RealField(grid, values)

    def test_values_are_read_only(self, grid):
        field = RealField(grid, np.ones(grid.shape))
        with pytest.raises(ValueError):
            field.values[0, 0, 0] = 2.0


class TestTransforms:
    """Forward/inverse FFT with norm='forward'."""

    def test_constant_has_single_zero_mode(self, grid):
        coeffs = to_spectral(np.full(grid.shape, 3.0))
        assert coeffs[0, 0, 0] == pytest.approx(3.0)
        coeffs[0, 0, 0] = 0.0
        assert np.max(np.abs(coeffs)) < 1e-14

    def test_round_trip(self, grid):
        rng = np.random.default_rng(0)
        values = rng.standard_normal(grid.shape)
        assert np.max(np.abs(to_physical(to_spectral(values)) - values)) < 1e-13

    def test_field_round_trip_keeps_parity(self, grid):
        field = sample(grid, lambda x, y, z: np.cos(2 * np.pi * x) * np.sin(np.pi * z / grid.h), Parity.ODD)
        spec = forward(field)
        assert spec.is_hermitian()
        back = inverse(spec)
        assert back.parity == Parity.ODD
        assert np.max(np.abs(back.values - field.values)) < 1e-14

    def test_derivative_symbol(self, grid):
        ikx, _, _ = grid.derivative_symbols()
        field = sample(grid, lambda x, y, z: np.sin(2 * np.pi * x))
        dx = to_physical(ikx * to_spectral(field.values))
        X, _, _ = grid.mesh()
        expected = np.broadcast_to(2 * np.pi * np.cos(2 * np.pi * X), grid.shape)
        assert np.max(np.abs(dx - expected)) < 1e-12


class TestParity:
    """z-mirror and Even/Odd projections."""

    def test_mirror_maps_z_to_minus_z(self, grid):
        field = sample(grid, lambda x, y, z: z + 0 * x)
        mirrored = mirror_z(field.values)
        # z = -h maps onto itself (periodic image of +h)
        assert np.allclose(mirrored[..., 1:], -field.values[..., 1:])

    def test_even_projection_kills_odd_part(self, grid):
        odd = sample(grid, lambda x, y, z: np.sin(np.pi * z / grid.h) + 0 * x)
        assert np.max(np.abs(project_parity(odd.values, Parity.EVEN))) < 1e-14

    def test_odd_projection_zeroes_fixed_planes(self, grid):
        rng = np.random.default_rng(1)
        out = project_parity(rng.standard_normal(grid.shape), Parity.ODD)
        assert np.all(out[..., 0] == 0.0)
        assert np.all(out[..., grid.nz // 2] == 0.0)

    def test_coefficient_projection_matches_real_space(self, grid):
        rng = np.random.default_rng(2)
        values = rng.standard_normal(grid.shape)
        for parity in (Parity.EVEN, Parity.ODD):
            via_hat = to_physical(project_parity_hat(to_spectral(values), parity))
            direct = project_parity(values, parity)
            # Odd real-space projection also zeroes the z = -h and z = 0 planes
            inner = [k for k in range(grid.nz) if k not in (0, grid.nz // 2)]
            assert np.max(np.abs(via_hat[..., inner] - direct[..., inner])) < 1e-13

    def test_sample_rejects_wrong_parity(self, grid):
        with pytest.raises(ParityError):
            sample(grid, lambda x, y, z: np.sin(np.pi * z / grid.h) + 0 * x, Parity.EVEN)

    def test_parity_residual(self, grid):
        rng = np.random.default_rng(3)
        field = RealField(grid, rng.standard_normal(grid.shape), Parity.EVEN)
        assert parity_residual(field) > 0.1
        assert parity_residual(enforce_parity(field)) < 1e-15
        assert parity_residual(RealField(grid, field.values, Parity.NONE)) == 0.0


class TestDealiasing:
    """Two-thirds rule."""

    def test_truncate_removes_high_modes(self, grid):
        field = sample(grid, lambda x, y, z: np.cos(2 * np.pi * 7 * x) + 0 * z)
        assert not is_band_limited(field)
        assert np.max(np.abs(truncate(field).values)) < 1e-14
        with pytest.raises(BandLimitError):
            require_band_limited(field)

    def test_low_modes_survive(self, grid):
        field = sample(grid, lambda x, y, z: np.cos(2 * np.pi * 3 * x) * np.cos(np.pi * z / grid.h))
        assert is_band_limited(field)
        assert np.max(np.abs(truncate(field).values - field.values)) < 1e-14

    def test_product_parity(self, grid):
        even = sample(grid, lambda x, y, z: np.cos(2 * np.pi * x) * np.cos(np.pi * z / grid.h), Parity.EVEN)
        odd = sample(grid, lambda x, y, z: np.sin(np.pi * z / grid.h) + 0 * x, Parity.ODD)
        assert dealiased_product(even, odd).parity == Parity.ODD
        assert dealiased_product(odd, odd).parity == Parity.EVEN

    def test_product_on_different_grids(self, grid, grid16):
        with pytest.raises(GridError):
            dealiased_product(RealField(grid, np.ones(grid.shape)), RealField(grid16, np.ones(grid16.shape)))

    def test_product_matches_truncated_convolution(self):
        grid = make_grid(8, 8, 8, 0.5)
        rng = np.random.default_rng(21)
        a = truncate(RealField(grid, rng.standard_normal(grid.shape)))
        b = truncate(RealField(grid, rng.standard_normal(grid.shape)))
        a_hat, b_hat = to_spectral(a.values), to_spectral(b.values)

        retained = [j for j in range(-4, 4) if abs(j) <= grid.cutoff[0]]
        expected = np.zeros(grid.shape, dtype=complex)
        for p in itertools.product(retained, repeat=3):
            for q in itertools.product(retained, repeat=3):
                k = tuple(pi + qi for pi, qi in zip(p, q))
                if all(abs(ki) <= grid.cutoff[0] for ki in k):
                    expected[tuple(ki % 8 for ki in k)] += a_hat[tuple(pi % 8 for pi in p)] * b_hat[tuple(qi % 8 for qi in q)]

        product = dealiased_product(a, b)
        assert np.max(np.abs(to_spectral(product.values) - expected)) < 1e-12
        assert np.max(np.abs(product.values - to_physical(expected))) < 1e-12
