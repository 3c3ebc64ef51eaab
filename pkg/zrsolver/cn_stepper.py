import copy
import logging

import numpy as np

from .field_structures import FieldState, StageSlopes
from .model import Params
from .rk_stepper import FPRKStepper, RKStepperConfig
from .spectral import SpectralGrid
from .tableau import gauss_tableau

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)


class CNFPStepper(FPRKStepper):
    """
    Crank-Nicolson Fourier pseudo-spectral scheme on the three fields (B, rho, u).

    The midpoint machinery of the one-stage Gauss method is reused; the nonlinearity
    is (|B^{n+1}|^2 + |B^n|^2) / 2 and phi is not evolved, only reset to |B^{n+1}|^2.
    """

    def __init__(self, grid: SpectralGrid, params: Params, config: RKStepperConfig) -> None:
        if config.tableau.name != "gauss1":
            logging.info(f"CNFPStepper replaces tableau {config.tableau.name} with gauss1")
            config = copy.copy(config)
            config.tableau = gauss_tableau(1)
        super().__init__(grid, params, config)

    def _auxiliary_stages(self, state: FieldState, B_s, slopes: StageSlopes, k4) -> np.ndarray:
        B_next = state.B + self.tau * slopes.k1[0]
        return (0.5 * (np.abs(B_next) ** 2 + np.abs(state.B) ** 2))[None, :]

    def _advance_auxiliary(self, state: FieldState, B_new, slopes: StageSlopes) -> np.ndarray:
        return np.abs(B_new) ** 2


def cn_fp_step(grid: SpectralGrid, params: Params, tau: float, state: FieldState, **kwargs) -> FieldState:
    """
    One Crank-Nicolson step from a consistent state (phi = |B|^2).

    Args:
        grid (SpectralGrid): Collocation grid.
        params (Params): Physical constants.
        tau (float): Time step.
        state (FieldState): State at t.
        **kwargs: Passed to RKStepperConfig (tol, max_iter, policy, initial_guess).

    Returns:
        FieldState: State at t + tau.
    """
    config = RKStepperConfig(tableau="gauss1", tau=tau, **kwargs)
    stepper = CNFPStepper(grid, params, config)
    new_state, _ = stepper.step(state)
    return new_state
