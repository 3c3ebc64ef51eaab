import logging
from abc import ABC, abstractmethod
from typing import Callable, List, Optional

import numpy as np

from .field_structures import FieldState, InvariantRecord
from .invariants import drift, drift_header, drift_rows, error_norms, invariant_record
from .model import DEFAULT_CONVENTION, Params, SolitonSpec
from .spectral import SpectralGrid

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

SNAPSHOT_HEADER = ["t", "x", "re_B", "im_B", "abs_B", "rho", "u", "phi"]


class BaseObserver(ABC):
    @abstractmethod
    def observe(self, state: FieldState, step_index: int, final: bool = False) -> None:
        pass


class InvariantRecorder(BaseObserver):
    """
    Records the discrete conserved quantities at every call.
    """

    def __init__(self, grid: SpectralGrid, params: Params) -> None:
        self.grid = grid
        self.params = params
        self.records: List[InvariantRecord] = []

    def observe(self, state: FieldState, step_index: int, final: bool = False) -> None:
        self.records.append(invariant_record(self.grid, self.params, state))

    def drift(self):
        return drift(self.records)

    def header(self) -> List[str]:
        return drift_header()

    def rows(self) -> List[List[float]]:
        return drift_rows(self.records)


class SnapshotRecorder(BaseObserver):
    """
    Stores full field profiles every `every` steps and at the final step.
    """

    def __init__(self, grid: SpectralGrid, every: int = 1) -> None:
        if not isinstance(every, int) or every < 1:
            raise ValueError("every must be an integer and at least 1")
        self.grid = grid
        self.every = every
        self.snapshots: List[FieldState] = []

    def observe(self, state: FieldState, step_index: int, final: bool = False) -> None:
        if step_index % self.every == 0 or final:
            self.snapshots.append(state.copy())

    def header(self) -> List[str]:
        return list(SNAPSHOT_HEADER)

    def rows(self) -> np.ndarray:
        blocks = []
        for snap in self.snapshots:
            blocks.append(
                np.column_stack(
                    [
                        np.full(self.grid.N, snap.t),
                        self.grid.x,
                        snap.B.real,
                        snap.B.imag,
                        np.abs(snap.B),
                        snap.rho,
                        snap.u,
                        snap.phi,
                    ]
                )
            )
        if not blocks:
            return np.empty((0, len(SNAPSHOT_HEADER)))
        return np.vstack(blocks)


class ErrorRecorder(BaseObserver):
    """
    Records infinity-norm errors against an exact solution, either a solitary wave
    or any callable (x, t) -> (B, rho, u).
    """

    def __init__(
        self,
        grid: SpectralGrid,
        params: Params,
        spec: Optional[SolitonSpec] = None,
        convention: str = DEFAULT_CONVENTION,
        exact: Optional[Callable] = None,
    ) -> None:
        if spec is None and exact is None:
            raise ValueError("ErrorRecorder needs either a soliton spec or an exact callable")
        self.grid = grid
        self.params = params
        self.spec = spec
        self.convention = convention
        self.exact = exact
        self.errors: List[List[float]] = []

    def observe(self, state: FieldState, step_index: int, final: bool = False) -> None:
        if self.exact is None:
            e = error_norms(self.grid, state, self.params, self.spec, self.convention)
        else:
            B, rho, u = self.exact(self.grid.x, state.t)
            e = (
                float(np.max(np.abs(state.B - B))),
                float(np.max(np.abs(state.rho - rho))),
                float(np.max(np.abs(state.u - u))),
            )
        self.errors.append([state.t, *e])

    def header(self) -> List[str]:
        return ["t", "e_B", "e_rho", "e_u"]

    def final(self) -> Optional[dict]:
        if not self.errors:
            return None
        t, e_B, e_rho, e_u = self.errors[-1]
        return {"t": t, "e_B": e_B, "e_rho": e_rho, "e_u": e_u}
