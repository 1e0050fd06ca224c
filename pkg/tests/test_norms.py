"""
Tests for Lebesgue, Sobolev and mixed norms.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from anisopede.models import Disk, NormKind, NormRequest
from anisopede.services.grid_transforms import RealField, make_grid, sample
from anisopede.services.norms import (
    NormError,
    column_energy,
    disk_mask,
    dz_lq,
    evaluate,
    grad_h_l2,
    grad_l2,
    h1_norm,
    local_energy_profile,
    lq_norm,
    spectral_sq,
    sup_z_norm,
    weighted_lq_sup,
)


@pytest.fixture
def shallow():
    return make_grid(16, 16, 8, 0.25)


class TestLebesgue:
    """||f||_q by quadrature."""

    @pytest.mark.parametrize("q", [1, 2, 3.5, 6, 128])
    def test_constant(self, shallow, q):
        f = RealField(shallow, np.ones(shallow.shape))
        assert lq_norm(f, q) == pytest.approx(0.5 ** (1.0 / q), rel=1e-12)

    def test_sup_norm(self, grid):
        f = sample(grid, lambda x, y, z: 3 * np.sin(2 * np.pi * x) + 0 * z)
        assert lq_norm(f, math.inf) == pytest.approx(3.0)

    def test_large_exponent_does_not_overflow(self, grid):
        f = RealField(grid, np.full(grid.shape, 1e3))
        assert lq_norm(f, 400) == pytest.approx(1e3, rel=1e-12)

    def test_vector_uses_euclidean_magnitude(self, grid):
        v = (RealField(grid, np.full(grid.shape, 3.0)), RealField(grid, np.full(grid.shape, 4.0)))
        assert lq_norm(v, 2) == pytest.approx(5.0)

    def test_rejects_q_below_one(self, grid):
        with pytest.raises(NormError):
            lq_norm(RealField(grid, np.ones(grid.shape)), 0.5)

    def test_zero_field(self, grid):
        assert lq_norm(RealField(grid, np.zeros(grid.shape)), 4) == 0.0

    def test_parseval(self, grid):
        h = grid.h
        f = sample(grid, lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(np.pi * z / h))
        assert spectral_sq(f) == pytest.approx(lq_norm(f, 2) ** 2, rel=1e-12)
        assert spectral_sq(f) == pytest.approx(2 * h / 4)


class TestSobolev:
    """Derivative norms via Parseval."""

    def test_grad_h(self, grid):
        f = sample(grid, lambda x, y, z: np.sin(2 * np.pi * x) + 0 * z)
        assert grad_h_l2(f) == pytest.approx(math.pi * math.sqrt(2.0), rel=1e-12)

    def test_full_gradient_and_h1(self, grid):
        h = grid.h
        f = sample(grid, lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(np.pi * z / h))
        base = spectral_sq(f)
        expected = base * (4 * np.pi**2 + (np.pi / h) ** 2)
        assert grad_l2(f) ** 2 == pytest.approx(expected, rel=1e-12)
        assert h1_norm(f) ** 2 == pytest.approx(base + expected, rel=1e-12)

    def test_dz_lq_of_z_independent_field(self, grid):
        f = sample(grid, lambda x, y, z: np.cos(2 * np.pi * y) + 0 * z)
        assert dz_lq(f, 2) < 1e-12


class TestMixed:
    """sup over z, disks and local energy."""

    def test_sup_z_of_z_independent_field(self, grid):
        f = RealField(grid, np.full(grid.shape, 2.0))
        assert sup_z_norm(f, 2.0) == pytest.approx(2.0)
        assert sup_z_norm(f, 4.0) == pytest.approx(2.0)

    def test_sup_z_picks_largest_plane(self, grid):
        h = grid.h
        f = sample(grid, lambda x, y, z: np.sin(np.pi * z / h) + 0 * x)
        # z = -h/2 is a collocation plane when nz is divisible by 4
        assert sup_z_norm(f, 2.0) == pytest.approx(1.0)

    def test_disk_mask(self, grid):
        mask = disk_mask(grid, Disk(center=(0.0, 0.0), radius=0.1))
        assert mask[0, 0]
        assert mask[1, 0] and mask[-1, 0]
        assert not mask[8, 8]
        assert disk_mask(grid, Disk(radius=0.75)).all()

    def test_sup_z_on_disk_with_no_points(self, grid):
        f = RealField(grid, np.ones(grid.shape))
        with pytest.raises(NormError):
            sup_z_norm(f, 2.0, Disk(center=(0.03, 0.03), radius=0.01))

    def test_column_energy(self, grid):
        f = RealField(grid, np.ones(grid.shape))
        assert column_energy(f).sum() == pytest.approx(2 * grid.h)

    def test_local_energy_is_monotone_in_radius(self, grid):
        rng = np.random.default_rng(4)
        f = RealField(grid, rng.standard_normal(grid.shape))
        radii = [0.05, 0.1, 0.2, 0.3, 0.5]
        values = [local_energy_profile(f, r) for r in radii]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_local_energy_rejects_bad_radius(self, grid):
        with pytest.raises(NormError):
            local_energy_profile(RealField(grid, np.ones(grid.shape)), 0.0)

    def test_weighted_sup_of_constant(self, grid):
        f = RealField(grid, np.ones(grid.shape))
        assert weighted_lq_sup(f, 128) == pytest.approx(2 ** -0.5)
        assert weighted_lq_sup(f, 8, lam=1.0) == pytest.approx(0.5)

    def test_weighted_sup_rejects_small_qmax(self, grid):
        with pytest.raises(NormError):
            weighted_lq_sup(RealField(grid, np.ones(grid.shape)), 1)


class TestDispatch:
    """NormRequest dispatcher."""

    def test_evaluate_matches_direct_calls(self, grid):
        f = sample(grid, lambda x, y, z: np.sin(2 * np.pi * x) + 0 * z)
        assert evaluate(NormRequest(kind=NormKind.LQ, q=4), f) == lq_norm(f, 4)
        assert evaluate(NormRequest(kind=NormKind.H1), f) == h1_norm(f)
        assert evaluate(NormRequest(kind=NormKind.GRAD_H_L2), f) == grad_h_l2(f)
        disk = Disk(radius=0.2)
        assert evaluate(NormRequest(kind=NormKind.LOCAL_DISK_L2, disk=disk), f) == local_energy_profile(f, 0.2)

    def test_local_disk_request_needs_disk(self):
        with pytest.raises(ValidationError):
            NormRequest(kind=NormKind.LOCAL_DISK_L2)
