import logging
from typing import Dict, List, Optional

import numpy as np

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)


class Tableau:
    """
    Butcher tableau (A, b, c) of an s-stage Runge-Kutta method.
    """

    def __init__(self, A, b, c=None, name: str = "custom", order: Optional[int] = None) -> None:
        A = np.array(A, dtype=np.float64)
        b = np.array(b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        s = A.shape[0]
        if b.shape != (s,):
            raise ValueError(f"b must have length {s}")
        c = A.sum(axis=1) if c is None else np.array(c, dtype=np.float64)
        if c.shape != (s,):
            raise ValueError(f"c must have length {s}")

        self.s = s
        self.A = A
        self.b = b
        self.c = c
        self.name = name
        self.order = order

        for arr in (self.A, self.b, self.c):
            arr.setflags(write=False)

    def symplectic_defect(self) -> float:
        return symplectic_defect(self)

    def is_symplectic(self, tol: float = 1e-14) -> bool:
        return self.symplectic_defect() <= tol

    def is_explicit(self) -> bool:
        return bool(np.all(np.triu(self.A) == 0.0))

    def perturbed(self, i: int, j: int, delta: float) -> "Tableau":
        """Returns a copy with a_ij shifted by delta (c kept as given)."""
        A = self.A.copy()
        A[i, j] += delta
        return Tableau(A, self.b.copy(), self.c.copy(), name=f"{self.name}+perturbed", order=None)

    def __repr__(self) -> str:
        return f"Tableau({self.name}, s={self.s}, order={self.order})"


def gauss_tableau(s: int) -> Tableau:
    """
    Gauss-Legendre collocation tableau with s stages (order 2s), from closed-form radicals.

    Args:
        s (int): Number of stages, 1, 2 or 3.

    Returns:
        Tableau: The coefficients.
    """
    if s == 1:
        return Tableau([[0.5]], [1.0], [0.5], name="gauss1", order=2)
    if s == 2:
        r3 = np.sqrt(3.0)
        A = [
            [0.25, 0.25 - r3 / 6.0],
            [0.25 + r3 / 6.0, 0.25],
        ]
        return Tableau(A, [0.5, 0.5], [0.5 - r3 / 6.0, 0.5 + r3 / 6.0], name="gauss2", order=4)
    if s == 3:
        r15 = np.sqrt(15.0)
        A = [
            [5.0 / 36.0, 2.0 / 9.0 - r15 / 15.0, 5.0 / 36.0 - r15 / 30.0],
            [5.0 / 36.0 + r15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r15 / 24.0],
            [5.0 / 36.0 + r15 / 30.0, 2.0 / 9.0 + r15 / 15.0, 5.0 / 36.0],
        ]
        b = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0]
        c = [0.5 - r15 / 10.0, 0.5, 0.5 + r15 / 10.0]
        return Tableau(A, b, c, name="gauss3", order=6)
    raise ValueError("gauss_tableau supports s = 1, 2 or 3")


def explicit_euler_tableau() -> Tableau:
    return Tableau([[0.0]], [1.0], [0.0], name="euler-explicit", order=1)


def implicit_euler_tableau() -> Tableau:
    return Tableau([[1.0]], [1.0], [1.0], name="euler-implicit", order=1)


def rk4_tableau() -> Tableau:
    A = [
        [0.0, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
    return Tableau(A, [1 / 6, 1 / 3, 1 / 3, 1 / 6], [0.0, 0.5, 0.5, 1.0], name="rk4", order=4)


supported_tableaus = {
    "gauss1": lambda: gauss_tableau(1),
    "gauss2": lambda: gauss_tableau(2),
    "gauss3": lambda: gauss_tableau(3),
    "euler-explicit": explicit_euler_tableau,
    "euler-implicit": implicit_euler_tableau,
    "rk4": rk4_tableau,
}


def get_tableau(name: str) -> Tableau:
    if name not in supported_tableaus:
        raise ValueError(f"tableau must be one of {list(supported_tableaus.keys())}")
    return supported_tableaus[name]()


def symplectic_defect(tableau: Tableau) -> float:
    """
    Largest violation of b_i a_ij + b_j a_ji = b_i b_j over all stage pairs.
    """
    b = tableau.b
    BA = b[:, None] * tableau.A
    return float(np.max(np.abs(BA + BA.T - np.outer(b, b))))


def defect_table(names: Optional[List[str]] = None) -> Dict[str, float]:
    names = list(supported_tableaus.keys()) if names is None else names
    return {name: symplectic_defect(get_tableau(name)) for name in names}
