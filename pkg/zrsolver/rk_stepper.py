import logging
from typing import Tuple

import numpy as np

from .field_structures import FieldState, IterationReport, StageSlopes
from .model import Params
from .spectral import SpectralGrid, to_real
from .stepper import StageSolveError, StepperConfig, TimeStepper
from .tableau import Tableau, get_tableau

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

# Reciprocal condition number below which a per-mode block is treated as singular.
_RCOND_LIMIT = 1e-13


class SingularStageMatrixError(ValueError):
    pass


class RKStepperConfig(StepperConfig):
    def __init__(self, tableau=None, *args, **kwargs):
        super().__init__(*args, **kwargs)

        if tableau is None:
            tableau = "gauss2"
        if isinstance(tableau, str):
            tableau = get_tableau(tableau)
        if not isinstance(tableau, Tableau):
            raise ValueError("tableau must be a Tableau instance or a tableau name")
        self.tableau = tableau

    def log_config(self):
        base_summary = super().log_config()
        rk_summary = f"""
        Tableau: {self.tableau}
        Symplectic Defect: {self.tableau.symplectic_defect():.3e}
        """
        return base_summary + rk_summary


def _batched_inverse(blocks: np.ndarray, label: str, tau: float) -> Tuple[np.ndarray, float]:
    cond = np.linalg.cond(blocks)
    bad = np.where(~np.isfinite(cond) | (cond * _RCOND_LIMIT > 1.0))[0]
    if bad.size:
        j = int(bad[0])
        raise SingularStageMatrixError(
            f"{label} block is singular at mode {j} for tau = {tau} (condition {cond[j]:.3e})"
        )
    return np.linalg.inv(blocks), float(np.max(cond))


class FPRKStepper(TimeStepper):
    """
    Fourier pseudo-spectral Runge-Kutta stepper for the reformulated ZR system.

    The linear parts of the stage equations are diagonal in Fourier space, so each
    mode j carries an s x s block for the B-slopes and a 2s x 2s block for the
    (rho, u)-slopes. Both are inverted once at construction; the nonlinear terms are
    lagged and the stage equations solved by fixed-point iteration.
    """

    def __init__(self, grid: SpectralGrid, params: Params, config: RKStepperConfig) -> None:
        super().__init__(grid, params, config)
        if not isinstance(config, RKStepperConfig):
            raise ValueError("config must be an instance of RKStepperConfig")

        self.tableau = config.tableau
        A = self.tableau.A
        s = self.tableau.s
        tau = self.tau
        eye = np.eye(s)

        lam2 = grid.lambda2[:, None, None]
        b_blocks = eye[None] - 1j * tau * params.omega * lam2 * A[None]
        self.b_factors, b_cond = _batched_inverse(b_blocks, "B-slope", tau)

        lam1 = grid.lambda1[:, None, None]
        diag = eye[None] - params.nu * tau * lam1 * A[None]
        upper = tau * lam1 * A[None]
        lower = params.beta * tau * lam1 * A[None]
        acoustic_blocks = np.concatenate(
            [np.concatenate([diag, upper], axis=2), np.concatenate([lower, diag], axis=2)],
            axis=1,
        )
        self.acoustic_factors, a_cond = _batched_inverse(acoustic_blocks, "acoustic", tau)

        logging.info(
            f"Successfully initialized {type(self).__name__} with Config {config.log_config()}"
            f"        Max Condition Numbers: B-slope {b_cond:.3e}, acoustic {a_cond:.3e}"
        )

    @property
    def s(self) -> int:
        return self.tableau.s

    def solve_b_block(self, rhs_hat: np.ndarray) -> np.ndarray:
        """Solves M_j k_hat_j = rhs_hat_j for every mode; rhs_hat has shape (s, N)."""
        return np.einsum("jab,bj->aj", self.b_factors, rhs_hat)

    def solve_acoustic_block(self, rhs_hat: np.ndarray) -> np.ndarray:
        """Solves the 2s x 2s acoustic system for every mode; rhs_hat has shape (2s, N)."""
        return np.einsum("jab,bj->aj", self.acoustic_factors, rhs_hat)

    def _stage_values(self, state: FieldState, slopes: StageSlopes):
        A = self.tableau.A
        tau = self.tau
        B_s = state.B[None, :] + tau * (A @ slopes.k1)
        rho_s = state.rho[None, :] + tau * (A @ slopes.k2)
        u_s = state.u[None, :] + tau * (A @ slopes.k3)
        return B_s, rho_s, u_s

    def _auxiliary_stages(self, state: FieldState, B_s, slopes: StageSlopes, k4) -> np.ndarray:
        return state.phi[None, :] + self.tau * (self.tableau.A @ k4)

    def _advance_auxiliary(self, state: FieldState, B_new, slopes: StageSlopes) -> np.ndarray:
        return state.phi + self.tau * (self.tableau.b @ slopes.k4)

    def _explicit_slopes(self, state: FieldState) -> StageSlopes:
        p = self.params
        grid = self.grid
        B, rho, u, phi = state.B, state.rho, state.u, state.phi
        k1 = 1j * (
            p.omega * grid.backward(grid.lambda2 * grid.forward(B))
            - p.kappa * (u - 0.5 * p.nu * rho + p.q * phi) * B
        )
        k2 = to_real(grid.backward(grid.lambda1 * grid.forward(-u + p.nu * rho - p.kappa * phi)), "rho slope")
        k3 = to_real(
            grid.backward(grid.lambda1 * grid.forward(-p.beta * rho + p.nu * u + 0.5 * p.kappa * p.nu * phi)),
            "u slope",
        )
        k4 = 2.0 * np.real(np.conj(B) * k1)
        tile = lambda v: np.repeat(v[None, :], self.s, axis=0)
        return StageSlopes(tile(k1), tile(k2), tile(k3), tile(k4))

    def initial_slopes(self, state: FieldState) -> StageSlopes:
        s = self.s
        N = self.grid.N
        if self.initial_guess == "zero":
            return StageSlopes(
                np.zeros((s, N), complex), np.zeros((s, N)), np.zeros((s, N)), np.zeros((s, N))
            )
        if self.initial_guess == "euler":
            return self._explicit_slopes(state)
        k1 = np.repeat(state.B[None, :], s, axis=0)
        k2 = np.repeat(state.rho[None, :], s, axis=0)
        k3 = np.repeat(state.u[None, :], s, axis=0)
        k4 = 2.0 * np.real(np.conj(state.B)[None, :] * k1)
        return StageSlopes(k1, k2, k3, k4)

    def fixed_point_stage_solve(self, state: FieldState) -> Tuple[StageSlopes, IterationReport]:
        """
        Solves the stage equations of one step by fixed-point iteration.

        Each sweep forms the stage values from the current slopes, lags the nonlinear
        products into the right-hand sides and solves the per-mode linear systems for
        new B-, rho- and u-slopes. The phi-slopes follow as 2 Re(conj(B_ni) k1_i).

        Args:
            state (FieldState): State at the start of the step.

        Returns:
            Tuple[StageSlopes, IterationReport]: Converged (or last) slopes and the report.

        Raises:
            StageSolveError: If a slope becomes NaN or infinite.
        """
        if state.N != self.grid.N:
            raise ValueError(f"state has {state.N} points, grid has {self.grid.N}")
        if not np.isfinite(state.t):
            raise ValueError("state.t must be finite")

        p = self.params
        grid = self.grid
        s = self.s
        tau = self.tau

        lin_b_hat = 1j * p.omega * grid.lambda2 * grid.forward(state.B)
        chi1_hat = grid.forward(-state.u + p.nu * state.rho)
        chi3_hat = grid.forward(-p.beta * state.rho + p.nu * state.u)

        slopes = self.initial_slopes(state)
        residual = np.inf
        converged = False
        iterations = 0

        for iterations in range(1, self.max_iter + 1):
            B_s, rho_s, u_s = self._stage_values(state, slopes)
            k4 = 2.0 * np.real(np.conj(B_s) * slopes.k1)
            phi_s = self._auxiliary_stages(state, B_s, slopes, k4)

            nonlinear = (u_s - 0.5 * p.nu * rho_s + p.q * phi_s) * B_s
            f_hat = lin_b_hat[None, :] - 1j * p.kappa * grid.forward(nonlinear, axis=-1)
            k1 = grid.backward(self.solve_b_block(f_hat), axis=-1)

            phi_hat = grid.forward(phi_s, axis=-1)
            rhs = np.concatenate(
                [
                    grid.lambda1 * (chi1_hat[None, :] - p.kappa * phi_hat),
                    grid.lambda1 * (chi3_hat[None, :] + 0.5 * p.kappa * p.nu * phi_hat),
                ],
                axis=0,
            )
            k23 = grid.backward(self.solve_acoustic_block(rhs), axis=-1)
            if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k23))):
                raise StageSolveError(
                    f"non-finite stage slopes at t = {state.t:.6g}, iteration {iterations}"
                )
            k2 = to_real(k23[:s], "rho slopes")
            k3 = to_real(k23[s:], "u slopes")

            B_new_s = state.B[None, :] + tau * (self.tableau.A @ k1)
            new_slopes = StageSlopes(k1, k2, k3, 2.0 * np.real(np.conj(B_new_s) * k1))

            previous = residual
            residual = new_slopes.max_difference(slopes) / max(1.0, new_slopes.max_abs())
            slopes = new_slopes
            if residual < self.tol:
                converged = True
                break
            # Stalled at round-off: the iterate cannot improve any further.
            if residual <= self.roundoff_floor and residual >= previous:
                converged = True
                break

        return slopes, IterationReport(iterations, float(residual), converged)

    def step(self, state: FieldState) -> Tuple[FieldState, IterationReport]:
        slopes, report = self.fixed_point_stage_solve(state)
        b = self.tableau.b
        tau = self.tau

        B_new = state.B + tau * (b @ slopes.k1)
        rho_new = state.rho + tau * (b @ slopes.k2)
        u_new = state.u + tau * (b @ slopes.k3)
        phi_new = self._advance_auxiliary(state, B_new, slopes)
        return FieldState(state.t + tau, B_new, rho_new, u_new, phi_new), report


# Same object under the name used for the per-mode stage solver.
StageSolver = FPRKStepper


def build_stage_solver(
    grid: SpectralGrid,
    params: Params,
    tableau,
    tau: float,
    tol: float = 1e-14,
    max_iter: int = 30,
    **kwargs,
) -> FPRKStepper:
    """
    Factorizes the per-mode stage blocks for a fixed (grid, tableau, tau).

    Raises:
        SingularStageMatrixError: If some mode's block is singular.
    """
    config = RKStepperConfig(tableau=tableau, tau=tau, tol=tol, max_iter=max_iter, **kwargs)
    return FPRKStepper(grid, params, config)


def fixed_point_stage_solve(solver: FPRKStepper, state: FieldState) -> Tuple[StageSlopes, IterationReport]:
    return solver.fixed_point_stage_solve(state)


def step(solver: FPRKStepper, state: FieldState) -> Tuple[FieldState, IterationReport]:
    return solver.step(state)


def integrate(solver: FPRKStepper, state0: FieldState, T: float, observers=None, cadence: int = 1):
    return solver.integrate(state0, T, observers, cadence)
