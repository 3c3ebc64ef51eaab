"""
Tests for the dense reference operators and solvers used to cross-check the FFT path.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zrsolver.field_structures import FieldState
from zrsolver.model import Params, initial_single
from zrsolver.oracle import (
    OracleError,
    d2_minus_d1_squared,
    dense_diff_matrix,
    dense_linear_stage_solve,
    interpolation_error,
    newton_stage_solve,
    quadrature,
)
from zrsolver.rk_stepper import build_stage_solver
from zrsolver.spectral import build_grid
from zrsolver.tableau import gauss_tableau


@pytest.fixture
def small_grid():
    return build_grid(-32.0, 32.0, 16)


class TestDenseOperators:
    @pytest.mark.parametrize("N", [16, 32])
    def test_structure(self, N):
        grid = build_grid(-32.0, 32.0, N)
        assert dense_diff_matrix(grid, 1).asymmetry() <= 1e-13
        assert dense_diff_matrix(grid, 2).asymmetry() <= 1e-13

    def test_constants(self, small_grid):
        for m in (1, 2):
            assert np.max(np.abs(dense_diff_matrix(small_grid, m) @ np.ones(16))) <= 1e-13

    @pytest.mark.parametrize("N", [16, 32])
    def test_matches_fft_operators(self, N, rng):
        grid = build_grid(-32.0, 32.0, N)
        D1 = dense_diff_matrix(grid, 1)
        D2 = dense_diff_matrix(grid, 2)
        for _ in range(20):
            v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            assert interpolation_error(grid, D1, v) <= 1e-12
            assert interpolation_error(grid, D2, v) <= 1e-12

    def test_second_derivative_off_the_nyquist_mode(self, small_grid, rng):
        D2, D1D1 = d2_minus_d1_squared(small_grid)
        v_hat = np.fft.fft(rng.standard_normal(16))
        v_hat[8] = 0.0
        v = np.fft.ifft(v_hat).real
        assert_allclose(D2 @ v, D1D1 @ v, atol=1e-12)
        # the Nyquist mode separates them
        nyquist = np.cos(np.pi * np.arange(16))
        assert np.max(np.abs(D2 @ nyquist - D1D1 @ nyquist)) > 1e-3

    def test_size_limit(self):
        with pytest.raises(ValueError, match="at most 128"):
            dense_diff_matrix(build_grid(0.0, 1.0, 256), 1)

    def test_order(self, small_grid):
        with pytest.raises(ValueError, match="m must be 1 or 2"):
            dense_diff_matrix(small_grid, 3)


class TestReferenceStageSolves:
    """Newton and direct solves against the fixed-point iteration."""

    def test_newton_zero_state(self, params, small_grid):
        slopes = newton_stage_solve(small_grid, params, gauss_tableau(2), 0.02, FieldState.zeros(16))
        assert np.max(np.abs(slopes.k1)) == 0.0
        assert np.max(np.abs(slopes.k2)) == 0.0

    @pytest.mark.parametrize("s", [1, 2])
    def test_newton_matches_fixed_point(self, params, spec, small_grid, s):
        state = initial_single(params, spec, small_grid)
        tableau = gauss_tableau(s)
        reference = newton_stage_solve(small_grid, params, tableau, 0.02, state)
        solver = build_stage_solver(small_grid, params, tableau, 0.02)
        slopes, report = solver.fixed_point_stage_solve(state)
        assert report.converged
        assert slopes.max_difference(reference) <= 1e-10

    def test_linear_solve_matches_fixed_point(self, small_grid):
        params = Params(1.0, 0.0, 1.0, 7.0)
        x = small_grid.x
        state = FieldState.consistent(
            0.0, np.exp(-0.01 * x**2) * (1 + 0.5j), 0.2 * np.cos(small_grid.mu * x), np.sin(small_grid.mu * x)
        )
        tableau = gauss_tableau(2)
        reference = dense_linear_stage_solve(small_grid, params, tableau, 0.1, state)
        slopes, _ = build_stage_solver(small_grid, params, tableau, 0.1).fixed_point_stage_solve(state)
        assert slopes.max_difference(reference) <= 1e-12

    def test_linear_solve_requires_decoupling(self, params, small_grid):
        with pytest.raises(ValueError, match="kappa = 0"):
            dense_linear_stage_solve(small_grid, params, gauss_tableau(1), 0.1, FieldState.zeros(16))

    def test_newton_size_limit(self, params):
        grid = build_grid(-32.0, 32.0, 64)
        with pytest.raises(ValueError, match="at most 32"):
            newton_stage_solve(grid, params, gauss_tableau(1), 0.02, FieldState.zeros(64))


class TestQuadrature:
    def test_sech_squared(self):
        assert quadrature(lambda x: 1.0 / np.cosh(x) ** 2, -40.0, 40.0) == pytest.approx(2.0, rel=1e-12)

    def test_constant(self):
        assert quadrature(lambda x: 1.0, -32.0, 32.0) == pytest.approx(64.0, rel=1e-14)

    def test_unreachable_tolerance(self):
        with pytest.raises(OracleError, match="above tolerance"):
            quadrature(np.exp, 0.0, 3.0, tolerance=1e-300)
