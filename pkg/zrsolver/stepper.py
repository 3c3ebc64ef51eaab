import logging
from abc import abstractmethod
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .field_structures import FieldState, IntegrationSummary, IterationReport
from .model import Params
from .spectral import SpectralGrid

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

POLICIES = ["abort", "warn"]
INITIAL_GUESSES = ["state", "zero", "euler"]


class StageSolveError(RuntimeError):
    pass


class StepperConfig:
    def __init__(
        self,
        tau=None,
        tol=None,
        max_iter=None,
        policy=None,
        initial_guess=None,
        progress=None,
        roundoff_floor=None,
    ):
        if tau is None:
            tau = 1.0 / 50.0
        if not isinstance(tau, (int, float)) or not np.isfinite(tau) or tau == 0:
            raise ValueError("tau must be a finite nonzero number")
        self.tau = float(tau)

        if tol is None:
            tol = 1e-14
        if not isinstance(tol, (int, float)) or not tol > 0:
            raise ValueError("tol must be a positive number")
        self.tol = float(tol)

        if roundoff_floor is None:
            roundoff_floor = 256 * np.finfo(np.float64).eps
        if not isinstance(roundoff_floor, (int, float)) or not roundoff_floor > 0:
            raise ValueError("roundoff_floor must be a positive number")
        self.roundoff_floor = float(roundoff_floor)

        if max_iter is None:
            max_iter = 30
        if not isinstance(max_iter, int) or max_iter < 1:
            raise ValueError("max_iter must be an integer and at least 1")
        self.max_iter = max_iter

        if policy is None:
            policy = "abort"
        if policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        self.policy = policy

        if initial_guess is None:
            initial_guess = "state"
        if initial_guess not in INITIAL_GUESSES:
            raise ValueError(f"initial_guess must be one of {INITIAL_GUESSES}")
        self.initial_guess = initial_guess

        if progress is None:
            progress = False
        self.progress = bool(progress)

    def log_config(self):
        config_log = """
        StepperConfig:
            Tau: {tau}
            Tolerance: {tol}
            Round-off Floor: {roundoff_floor}
            Max Iterations: {max_iter}
            Nonconvergence Policy: {policy}
            Initial Guess: {initial_guess}
        """.format(
            tau=self.tau,
            tol=self.tol,
            roundoff_floor=self.roundoff_floor,
            max_iter=self.max_iter,
            policy=self.policy,
            initial_guess=self.initial_guess,
        )
        return config_log


class TimeStepper:
    """
    Base class of the one-step schemes. Subclasses implement `step`; the time loop,
    observer cadence and nonconvergence policy live here.
    """

    def __init__(self, grid: SpectralGrid, params: Params, config: StepperConfig) -> None:
        if not isinstance(grid, SpectralGrid):
            raise ValueError("grid must be an instance of SpectralGrid")
        if not isinstance(params, Params):
            raise ValueError("params must be an instance of Params")
        if not isinstance(config, StepperConfig):
            raise ValueError("config must be an instance of StepperConfig")

        self.grid = grid
        self.params = params
        self.tau = config.tau
        self.tol = config.tol
        self.roundoff_floor = config.roundoff_floor
        self.max_iter = config.max_iter
        self.policy = config.policy
        self.initial_guess = config.initial_guess
        self.progress = config.progress

    @abstractmethod
    def step(self, state: FieldState) -> Tuple[FieldState, IterationReport]:
        """
        Advances `state` by one time step tau.

        Returns:
            Tuple[FieldState, IterationReport]: The new state and the stage-solve report.
        """
        pass

    def steps_for(self, T: float) -> int:
        """Number of steps reaching T; T must be an integer multiple of tau."""
        if not np.isfinite(T) or T < 0:
            raise ValueError("T must be finite and nonnegative")
        n = T / abs(self.tau)
        n_steps = int(round(n))
        if abs(n_steps * abs(self.tau) - T) > 1e-12 * max(1.0, T):
            raise ValueError(f"T = {T} is not an integer multiple of tau = {self.tau}")
        return n_steps

    def integrate(
        self,
        state0: FieldState,
        T: float,
        observers: Optional[Sequence] = None,
        cadence: int = 1,
    ) -> Tuple[FieldState, IntegrationSummary]:
        """
        Repeats `step` until time state0.t + T, calling every observer at the start,
        every `cadence` steps and at the final step.

        Args:
            state0 (FieldState): Initial state.
            T (float): Length of the time interval, an integer multiple of tau.
            observers: BaseObserver instances, called as `observe(state, step_index, final)`.
            cadence (int): Steps between observer calls.

        Returns:
            Tuple[FieldState, IntegrationSummary]: Final state and iteration statistics.
        """
        if not isinstance(cadence, int) or cadence < 1:
            raise ValueError("cadence must be an integer and at least 1")
        observers: List = list(observers or [])
        n_steps = self.steps_for(T)
        summary = IntegrationSummary()

        state = state0
        for observer in observers:
            observer.observe(state, 0, final=(n_steps == 0))

        for n in tqdm(range(1, n_steps + 1), disable=not self.progress, desc="steps"):
            state, report = self.step(state)
            # t from the step count, not accumulated increments
            state.t = state0.t + n * self.tau
            summary.add(report)

            if not report.converged:
                message = (
                    f"Stage solve did not converge at t = {state.t:.6g} "
                    f"(iterations {report.iterations}, residual {report.final_residual:.3e})"
                )
                if self.policy == "abort":
                    raise StageSolveError(message)
                logging.warning(message)

            if n % cadence == 0 or n == n_steps:
                logging.info(
                    f"t = {state.t:.6g}: {report.iterations} iterations, "
                    f"residual {report.final_residual:.3e}"
                )
                for observer in observers:
                    observer.observe(state, n, final=(n == n_steps))

        logging.info(
            f"Integrated {n_steps} steps to t = {state.t:.6g}: {summary.as_dict()}"
        )
        return state, summary
