"""
Tests for the per-mode stage solver, the fixed-point iteration and the time loop.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zrsolver.cn_stepper import CNFPStepper, cn_fp_step
from zrsolver.field_structures import FieldState
from zrsolver.invariants import linear_invariants, mass
from zrsolver.model import Params, initial_single
from zrsolver.Observers import InvariantRecorder
from zrsolver.rk_stepper import (
    FPRKStepper,
    RKStepperConfig,
    SingularStageMatrixError,
    build_stage_solver,
    step,
)
from zrsolver.spectral import build_grid
from zrsolver.stepper import StageSolveError


def smooth_state(grid, t=0.0):
    x = grid.x
    B = np.exp(-0.1 * x**2) * np.exp(0.5j * x)
    rho = 0.3 * np.exp(-0.05 * (x - 1.0) ** 2)
    u = -0.2 * np.exp(-0.05 * (x + 2.0) ** 2)
    return FieldState.consistent(t, B, rho, u)


class TestPerModeBlocks:
    """Factorized B-slope and acoustic blocks."""

    def test_one_stage_b_block_is_scalar(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.1)
        expected = 1.0 / (1.0 - 0.05j * params.omega * coarse_grid.lambda2)
        assert_allclose(solver.b_factors[:, 0, 0], expected, rtol=1e-14)

    def test_acoustic_block_is_identity_where_lambda1_vanishes(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss2", 0.1)
        for j in (0, coarse_grid.N // 2):
            assert_allclose(solver.acoustic_factors[j], np.eye(4), atol=1e-15)

    def test_block_solves_match_dense_solve(self, params, rng):
        grid = build_grid(-32.0, 32.0, 64)
        tau = 0.1
        solver = build_stage_solver(grid, params, "gauss2", tau)
        A = solver.tableau.A
        rhs = rng.standard_normal((4, 64)) + 1j * rng.standard_normal((4, 64))
        out = solver.solve_acoustic_block(rhs)
        for j in (1, 7, 31, 40):
            lam = grid.lambda1[j]
            M = np.block(
                [
                    [np.eye(2) - params.nu * tau * lam * A, tau * lam * A],
                    [params.beta * tau * lam * A, np.eye(2) - params.nu * tau * lam * A],
                ]
            )
            assert_allclose(M @ out[:, j], rhs[:, j], atol=1e-13)

        rhs_b = rhs[:2]
        out_b = solver.solve_b_block(rhs_b)
        for j in (1, 16, 32):
            M = np.eye(2) - 1j * tau * params.omega * grid.lambda2[j] * A
            assert_allclose(M @ out_b[:, j], rhs_b[:, j], atol=1e-13)

    def test_singular_acoustic_block(self):
        # 1 - beta tau^2 lambda1^2 / 4 vanishes at l = 1
        params = Params(1.0, 1.0, 0.0, -4.0)
        grid = build_grid(-np.pi, np.pi, 16)
        with pytest.raises(SingularStageMatrixError, match="mode 1"):
            build_stage_solver(grid, params, "gauss1", 1.0)

    def test_config_rejects_unknown_tableau(self):
        with pytest.raises(ValueError, match="tableau must be one of"):
            RKStepperConfig(tableau="radau5")


class TestFixedPointStageSolve:
    def test_zero_state_converges_immediately(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss2", 0.02)
        slopes, report = solver.fixed_point_stage_solve(FieldState.zeros(coarse_grid.N))
        assert report.converged
        assert report.iterations == 1
        assert np.max(np.abs(slopes.k1)) == 0.0

    def test_linear_problem_needs_one_correction(self, coarse_grid):
        params = Params(1.0, 0.0, 1.0, 7.0)
        solver = build_stage_solver(coarse_grid, params, "gauss2", 0.02)
        _, report = solver.fixed_point_stage_solve(smooth_state(coarse_grid))
        assert report.converged
        assert report.iterations == 2

    def test_soliton_converges(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "gauss2", 0.01)
        _, report = solver.fixed_point_stage_solve(soliton_state)
        assert report.converged
        assert report.final_residual <= solver.roundoff_floor
        assert report.iterations <= 30

    def test_stall_at_roundoff_counts_as_converged(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "gauss2", 0.02, tol=1e-30, max_iter=60)
        _, report = solver.fixed_point_stage_solve(soliton_state)
        assert report.converged
        assert 0.0 < report.final_residual <= solver.roundoff_floor

    def test_rejects_bad_roundoff_floor(self):
        with pytest.raises(ValueError, match="roundoff_floor"):
            RKStepperConfig(tableau="gauss1", roundoff_floor=0.0)

    def test_fine_mesh_steps_converge(self, params, spec):
        # N = 1024: slopes of order one leave a residual floor near 1e-14
        fine = build_grid(-32.0, 32.0, 1024)
        solver = build_stage_solver(fine, params, "gauss2", 1.0 / 50.0)
        state = initial_single(params, spec, fine)
        for _ in range(30):
            state, report = solver.step(state)
            assert report.converged, report
            assert report.iterations <= 30
        _, summary = solver.integrate(initial_single(params, spec, fine), 0.6)
        assert summary.as_dict()["nonconverged_steps"] == 0

    @pytest.mark.parametrize("guess", ["zero", "euler"])
    def test_initial_guesses_agree(self, params, grid, soliton_state, guess):
        reference = build_stage_solver(grid, params, "gauss2", 0.01)
        other = build_stage_solver(grid, params, "gauss2", 0.01, initial_guess=guess)
        a, _ = reference.step(soliton_state)
        b, _ = other.step(soliton_state)
        assert a.max_difference(b) <= 1e-12

    def test_non_finite_state(self, params, coarse_grid):
        state = smooth_state(coarse_grid)
        state.B[3] = np.nan
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.02)
        with pytest.raises(StageSolveError, match="non-finite"):
            solver.fixed_point_stage_solve(state)

    def test_grid_mismatch(self, params, grid, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.02)
        with pytest.raises(ValueError, match="state has 256 points"):
            solver.fixed_point_stage_solve(FieldState.zeros(grid.N))


class TestStep:
    """Single steps and their structural properties."""

    def test_midpoint_matches_crank_nicolson(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "gauss1", 0.02)
        fprk, _ = step(solver, soliton_state)
        cn = cn_fp_step(grid, params, 0.02, soliton_state)
        assert fprk.max_difference(cn) <= 1e-11

    def test_crank_nicolson_resets_auxiliary(self, params, grid, soliton_state):
        cn = cn_fp_step(grid, params, 0.02, soliton_state)
        assert np.max(np.abs(cn.phi - np.abs(cn.B) ** 2)) == 0.0

    def test_crank_nicolson_forces_midpoint(self, params, coarse_grid):
        config = RKStepperConfig(tableau="gauss3", tau=0.02)
        stepper = CNFPStepper(coarse_grid, params, config)
        assert stepper.tableau.name == "gauss1"
        assert config.tableau.name == "gauss3"

    def test_mass_is_conserved(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "gauss2", 0.01)
        m0 = mass(grid, soliton_state)
        state = soliton_state
        for _ in range(5):
            state, _ = solver.step(state)
            assert abs(mass(grid, state) - m0) <= 1e-12 * m0

    def test_implicit_euler_keeps_linear_invariants(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "euler-implicit", 0.02)
        i1, i2 = linear_invariants(grid, soliton_state)
        state = soliton_state
        for _ in range(3):
            state, _ = solver.step(state)
        j1, j2 = linear_invariants(grid, state)
        assert abs(j1 - i1) <= 1e-13
        assert abs(j2 - i2) <= 1e-13

    def test_gauss_step_is_time_symmetric(self, params, grid, soliton_state):
        forward = build_stage_solver(grid, params, "gauss2", 0.02)
        backward = build_stage_solver(grid, params, "gauss2", -0.02)
        there, _ = forward.step(soliton_state)
        back, _ = backward.step(there)
        assert back.max_difference(soliton_state) <= 1e-10
        assert back.t == pytest.approx(0.0, abs=1e-15)

    def test_deterministic(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "gauss3", 0.02)
        a, _ = solver.step(soliton_state)
        b, _ = solver.step(soliton_state)
        assert a.max_difference(b) == 0.0


class TestIntegrate:
    def test_zero_length_interval(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss2", 0.02)
        recorder = InvariantRecorder(coarse_grid, params)
        state0 = smooth_state(coarse_grid)
        state, summary = solver.integrate(state0, 0.0, [recorder])
        assert state is state0
        assert summary.as_dict()["steps"] == 0
        assert len(recorder.records) == 1

    def test_time_is_exact_multiple(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.1)
        state, _ = solver.integrate(smooth_state(coarse_grid), 1.0)
        assert state.t == pytest.approx(1.0, abs=1e-15)

    def test_non_multiple_interval(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.02)
        with pytest.raises(ValueError, match="not an integer multiple"):
            solver.integrate(smooth_state(coarse_grid), 0.015)

    def test_observer_cadence(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.02)
        recorder = InvariantRecorder(coarse_grid, params)
        solver.integrate(smooth_state(coarse_grid), 0.2, [recorder], cadence=4)
        times = [r.t for r in recorder.records]
        # start, steps 4 and 8, and the final step 10
        assert_allclose(times, [0.0, 0.08, 0.16, 0.2], atol=1e-15)

    def test_abort_policy(self, params, grid, soliton_state):
        solver = build_stage_solver(grid, params, "gauss2", 0.02, max_iter=1)
        with pytest.raises(StageSolveError, match="did not converge"):
            solver.integrate(soliton_state, 0.02)

    def test_warn_policy(self, params, grid, soliton_state, caplog):
        solver = build_stage_solver(grid, params, "gauss2", 0.02, max_iter=1, policy="warn")
        state, summary = solver.integrate(soliton_state, 0.04)
        assert state.t == pytest.approx(0.04)
        assert summary.as_dict()["nonconverged_steps"] == 2
        assert "did not converge" in caplog.text

    def test_rejects_bad_cadence(self, params, coarse_grid):
        solver = build_stage_solver(coarse_grid, params, "gauss1", 0.02)
        with pytest.raises(ValueError, match="cadence"):
            solver.integrate(smooth_state(coarse_grid), 0.02, cadence=0)

    def test_stepper_class(self, params, coarse_grid):
        assert isinstance(build_stage_solver(coarse_grid, params, "gauss1", 0.02), FPRKStepper)
