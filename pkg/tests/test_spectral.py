"""
Tests for the collocation grid and the Fourier differentiation operators.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zrsolver.spectral import (
    apply_d1,
    apply_d1_real,
    apply_d2,
    build_grid,
    d2_quadratic_form,
    grid_from_spacing,
    inner,
    norm_h,
    spectral_energy,
    to_real,
)


class TestSpectralGrid:
    """Grid construction and multipliers."""

    def test_points_and_spacing(self):
        grid = build_grid(-32.0, 32.0, 1024)
        assert grid.h == pytest.approx(1.0 / 16.0)
        assert grid.x[0] == -32.0
        assert grid.x[-1] == pytest.approx(32.0 - grid.h)
        assert grid.mu == pytest.approx(2 * np.pi / 64.0)

    def test_nyquist_multipliers(self):
        grid = build_grid(0.0, 2 * np.pi, 16)
        assert grid.lambda1[8] == 0.0
        assert grid.lambda2[8] == pytest.approx(-64.0)
        assert grid.lambda1[1] == pytest.approx(1j)
        assert grid.lambda2[0] == 0.0

    @pytest.mark.parametrize("N", [3, 7, 2, 0])
    def test_rejects_bad_sizes(self, N):
        with pytest.raises(ValueError, match="N must be an even integer"):
            build_grid(0.0, 1.0, N)

    def test_rejects_empty_domain(self):
        with pytest.raises(ValueError, match="b > a"):
            build_grid(1.0, 1.0, 8)

    def test_grid_from_spacing(self):
        assert grid_from_spacing(-32.0, 32.0, 0.125).N == 512
        with pytest.raises(ValueError, match="not an integer"):
            grid_from_spacing(0.0, 1.0, 0.3)


class TestDerivatives:
    """Spectral derivatives of resolved trigonometric data."""

    def test_first_derivative_of_sine(self):
        grid = build_grid(-32.0, 32.0, 128)
        v = np.sin(3 * grid.mu * grid.x)
        assert_allclose(apply_d1_real(grid, v), 3 * grid.mu * np.cos(3 * grid.mu * grid.x), atol=1e-12)

    def test_second_derivative_of_sine(self):
        grid = build_grid(-32.0, 32.0, 128)
        v = np.sin(5 * grid.mu * grid.x)
        expected = -((5 * grid.mu) ** 2) * v
        assert_allclose(apply_d2(grid, v).real, expected, atol=1e-12)

    def test_constants_are_annihilated(self):
        grid = build_grid(-1.0, 1.0, 32)
        assert np.max(np.abs(apply_d1(grid, np.ones(32)))) < 1e-14
        assert np.max(np.abs(apply_d2(grid, np.ones(32)))) < 1e-13

    def test_nyquist_mode(self):
        grid = build_grid(0.0, 2 * np.pi, 16)
        v = np.cos(np.pi * np.arange(16))
        assert np.max(np.abs(apply_d1(grid, v))) < 1e-13
        assert_allclose(apply_d2(grid, v).real, -64.0 * v, atol=1e-11)

    def test_length_mismatch(self):
        grid = build_grid(0.0, 1.0, 8)
        with pytest.raises(ValueError, match="does not match grid size"):
            apply_d1(grid, np.ones(10))


class TestInnerProducts:
    """Discrete inner product, norms and the frequency-space quadratic form."""

    def test_ones(self):
        grid = build_grid(-32.0, 32.0, 64)
        assert inner(grid, np.ones(64), np.ones(64)) == pytest.approx(64.0)
        assert norm_h(grid, np.ones(64)) == pytest.approx(8.0)

    def test_parseval(self, rng):
        grid = build_grid(-5.0, 7.0, 96)
        v = rng.standard_normal(96) + 1j * rng.standard_normal(96)
        assert spectral_energy(grid, v) == pytest.approx(norm_h(grid, v) ** 2, rel=1e-12)

    def test_d2_quadratic_form_single_mode(self):
        grid = build_grid(-32.0, 32.0, 64)
        B = np.exp(1j * grid.mu * grid.x)
        assert d2_quadratic_form(grid, B) == pytest.approx(-(grid.mu**2) * 64.0, rel=1e-12)

    def test_d2_quadratic_form_matches_physical_space(self, rng):
        grid = build_grid(-3.0, 3.0, 32)
        B = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        physical = inner(grid, apply_d2(grid, B), B)
        assert d2_quadratic_form(grid, B) == pytest.approx(physical.real, rel=1e-12)
        assert abs(physical.imag) < 1e-10


class TestToReal:
    def test_accepts_roundoff(self):
        assert_allclose(to_real(np.array([1.0 + 1e-15j, 2.0])), [1.0, 2.0])

    def test_rejects_genuine_imaginary_part(self):
        with pytest.raises(ValueError, match="imaginary residue"):
            to_real(np.array([1.0 + 1e-3j]), "rho")
