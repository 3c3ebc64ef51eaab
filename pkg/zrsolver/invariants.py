import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .field_structures import FieldState, InvariantRecord
from .model import DEFAULT_CONVENTION, Params, SolitonSpec, solitary_wave
from .spectral import SpectralGrid, d2_quadratic_form, norm_inf

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

DRIFT_FLOOR = 1e-300
CONSERVED = ("mass", "energyQ", "hamiltonian", "i1", "i2")


def _h_dot(grid: SpectralGrid, u, v) -> float:
    return float(grid.h * np.sum(u * v))


def mass(grid: SpectralGrid, state: FieldState) -> float:
    """M_h = h * sum |B_j|^2."""
    return float(grid.h * np.sum(np.abs(state.B) ** 2))


def _energy(grid: SpectralGrid, params: Params, state: FieldState, phi) -> float:
    rho, u = state.rho, state.u
    return (
        params.omega * d2_quadratic_form(grid, state.B)
        - params.kappa * _h_dot(grid, u - 0.5 * params.nu * rho + 0.5 * params.q * phi, phi)
        - 0.5 * params.beta * _h_dot(grid, rho, rho)
        - 0.5 * _h_dot(grid, u, u)
        + params.nu * _h_dot(grid, u, rho)
    )


def energy_quadratic(grid: SpectralGrid, params: Params, state: FieldState) -> float:
    """
    Quadratic energy of the reformulated system, with the carried auxiliary field phi.
    """
    return _energy(grid, params, state, state.phi)


def hamiltonian(grid: SpectralGrid, params: Params, state: FieldState) -> float:
    """
    Hamiltonian of the original system: the quadratic energy with phi replaced by |B|^2.
    """
    return _energy(grid, params, state, np.abs(state.B) ** 2)


def linear_invariants(grid: SpectralGrid, state: FieldState) -> Tuple[float, float]:
    return float(grid.h * np.sum(state.rho)), float(grid.h * np.sum(state.u))


def qav_residual(state: FieldState) -> float:
    return norm_inf(state.phi - np.abs(state.B) ** 2)


def invariant_record(grid: SpectralGrid, params: Params, state: FieldState) -> InvariantRecord:
    i1, i2 = linear_invariants(grid, state)
    return InvariantRecord(
        t=state.t,
        mass=mass(grid, state),
        energyQ=energy_quadratic(grid, params, state),
        hamiltonian=hamiltonian(grid, params, state),
        i1=i1,
        i2=i2,
        qav_residual=qav_residual(state),
    )


def error_norms(
    grid: SpectralGrid,
    state: FieldState,
    params: Params,
    spec: SolitonSpec,
    convention: str = DEFAULT_CONVENTION,
) -> Tuple[float, float, float]:
    """
    Grid infinity norms of B, rho and u minus the solitary wave at state.t.

    Raises:
        InvalidSolitonError: If the wave is not defined under `convention`.
    """
    B, rho, u = solitary_wave(params, spec, grid.x, state.t, convention)
    return norm_inf(state.B - B), norm_inf(state.rho - rho), norm_inf(state.u - u)


def state_difference(reference: FieldState, state: FieldState) -> Tuple[float, float, float]:
    """Field-wise infinity norms against a reference state on the same grid."""
    return (
        norm_inf(state.B - reference.B),
        norm_inf(state.rho - reference.rho),
        norm_inf(state.u - reference.u),
    )


def relative_drift(value: float, initial: float) -> float:
    return abs(value - initial) / max(abs(initial), DRIFT_FLOOR)


def drift(records: Sequence[InvariantRecord]) -> Dict[str, Dict[str, float]]:
    """
    Largest absolute and relative deviation of each conserved quantity from its first
    record, plus the largest QAV residual seen.
    """
    if not records:
        raise ValueError("drift needs at least one invariant record")
    first = records[0]
    summary: Dict[str, Dict[str, float]] = {}
    for name in CONSERVED:
        q0 = getattr(first, name)
        values = np.array([getattr(r, name) for r in records])
        abs_drift = float(np.max(np.abs(values - q0)))
        summary[name] = {
            "initial": float(q0),
            "abs": abs_drift,
            "rel": abs_drift / max(abs(q0), DRIFT_FLOOR),
        }
    summary["qav_residual"] = {"max": float(max(r.qav_residual for r in records))}
    return summary


def drift_rows(records: Sequence[InvariantRecord]) -> List[List[float]]:
    """Rows of the invariants table: the record fields followed by rel_drift_* per quantity."""
    if not records:
        return []
    first = records[0]
    rows = []
    for record in records:
        rows.append(
            record.as_row()
            + [relative_drift(getattr(record, name), getattr(first, name)) for name in CONSERVED]
        )
    return rows


def drift_header() -> List[str]:
    return list(InvariantRecord.FIELDS) + [f"rel_drift_{name}" for name in CONSERVED]
