from typing import Optional

import numpy as np


class FieldState:
    """
    Represents the fields (B, rho, u, phi) of the reformulated system at one time level.
    """

    def __init__(self, t: float, B, rho, u, phi) -> None:
        B = np.asarray(B, dtype=np.complex128)
        rho = np.asarray(rho, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)

        n = B.shape[0]
        for name, arr in (("rho", rho), ("u", u), ("phi", phi)):
            if arr.shape != (n,):
                raise ValueError(
                    f"{name} must have the same length as B ({n}), got shape {arr.shape}"
                )
        if not np.isfinite(t):
            raise ValueError("t must be finite")

        self.t = float(t)
        self.B = B
        self.rho = rho
        self.u = u
        self.phi = phi

    @classmethod
    def consistent(cls, t: float, B, rho, u) -> "FieldState":
        """Builds a state whose auxiliary field is exactly |B|^2."""
        B = np.asarray(B, dtype=np.complex128)
        return cls(t, B, rho, u, np.abs(B) ** 2)

    @classmethod
    def zeros(cls, N: int, t: float = 0.0) -> "FieldState":
        return cls(t, np.zeros(N, complex), np.zeros(N), np.zeros(N), np.zeros(N))

    @property
    def N(self) -> int:
        return self.B.shape[0]

    def copy(self) -> "FieldState":
        return FieldState(
            self.t, self.B.copy(), self.rho.copy(), self.u.copy(), self.phi.copy()
        )

    def roll(self, shift: int) -> "FieldState":
        """Circularly shifts every field by `shift` grid points."""
        return FieldState(
            self.t,
            np.roll(self.B, shift),
            np.roll(self.rho, shift),
            np.roll(self.u, shift),
            np.roll(self.phi, shift),
        )

    def max_difference(self, other: "FieldState") -> float:
        return max(
            np.max(np.abs(self.B - other.B)),
            np.max(np.abs(self.rho - other.rho)),
            np.max(np.abs(self.u - other.u)),
            np.max(np.abs(self.phi - other.phi)),
        )


class StageSlopes:
    """
    Holds the stage slopes of one implicit Runge-Kutta step, one row per stage.
    """

    def __init__(self, k1, k2, k3, k4) -> None:
        self.k1 = np.asarray(k1, dtype=np.complex128)
        self.k2 = np.asarray(k2, dtype=np.float64)
        self.k3 = np.asarray(k3, dtype=np.float64)
        self.k4 = np.asarray(k4, dtype=np.float64)

    @property
    def s(self) -> int:
        return self.k1.shape[0]

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.k1)), np.max(np.abs(self.k2)), np.max(np.abs(self.k3))))

    def max_difference(self, other: "StageSlopes", include_phi: bool = False) -> float:
        diffs = [
            np.max(np.abs(self.k1 - other.k1)),
            np.max(np.abs(self.k2 - other.k2)),
            np.max(np.abs(self.k3 - other.k3)),
        ]
        if include_phi:
            diffs.append(np.max(np.abs(self.k4 - other.k4)))
        return float(max(diffs))


class IterationReport:
    """
    Outcome of one fixed-point stage solve. `final_residual` is the last slope change
    divided by max(1, max|k|).
    """

    def __init__(self, iterations: int, final_residual: float, converged: bool) -> None:
        self.iterations = iterations
        self.final_residual = final_residual
        self.converged = converged

    def __repr__(self) -> str:
        return (
            f"IterationReport(iterations={self.iterations}, "
            f"final_residual={self.final_residual:.3e}, converged={self.converged})"
        )


class InvariantRecord:
    """
    Discrete conserved quantities of a state at time t.
    """

    FIELDS = ("t", "mass", "energyQ", "hamiltonian", "i1", "i2", "qav_residual")

    def __init__(
        self,
        t: float,
        mass: float,
        energyQ: float,
        hamiltonian: float,
        i1: float,
        i2: float,
        qav_residual: float,
    ) -> None:
        self.t = t
        self.mass = mass
        self.energyQ = energyQ
        self.hamiltonian = hamiltonian
        self.i1 = i1
        self.i2 = i2
        self.qav_residual = qav_residual

    def as_row(self):
        return [getattr(self, name) for name in self.FIELDS]


class IntegrationSummary:
    """
    Aggregated iteration statistics of a time integration.
    """

    def __init__(self) -> None:
        self.steps = 0
        self.total_iterations = 0
        self.max_iterations = 0
        self.nonconverged = 0
        self.max_residual = 0.0
        self.last_report: Optional[IterationReport] = None

    def add(self, report: IterationReport) -> None:
        self.steps += 1
        self.total_iterations += report.iterations
        self.max_iterations = max(self.max_iterations, report.iterations)
        self.max_residual = max(self.max_residual, report.final_residual)
        if not report.converged:
            self.nonconverged += 1
        self.last_report = report

    def as_dict(self) -> dict:
        mean = self.total_iterations / self.steps if self.steps else 0.0
        return {
            "steps": self.steps,
            "total_iterations": self.total_iterations,
            "mean_iterations": mean,
            "max_iterations": self.max_iterations,
            "nonconverged_steps": self.nonconverged,
            "max_final_residual": self.max_residual,
        }
