import logging
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, linalg

from .field_structures import FieldState, StageSlopes
from .model import Params
from .spectral import SpectralGrid, apply_d1, apply_d2
from .tableau import Tableau

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

MAX_DENSE_N = 128
MAX_NEWTON_N = 32
FD_STEP = 1e-7


class OracleError(RuntimeError):
    pass


class DenseOperator:
    """
    Dense differentiation matrix (D_m)_{jk} = d^m X_k(x_j) / dx^m of the trigonometric
    interpolation basis on a grid.
    """

    def __init__(self, m: int, M: np.ndarray) -> None:
        self.m = m
        self.M = M

    @property
    def N(self) -> int:
        return self.M.shape[0]

    def __matmul__(self, v):
        return self.M @ v

    def asymmetry(self) -> float:
        """max |M - M^T| for m = 2, max |M + M^T| for m = 1."""
        sign = 1.0 if self.m == 1 else -1.0
        return float(np.max(np.abs(self.M + sign * self.M.T)))


def dense_diff_matrix(grid: SpectralGrid, m: int) -> DenseOperator:
    """
    Differentiates the interpolation basis X_k(x) = (1/N) sum_l (1/a_l) exp(i l mu (x - x_k)),
    l = -N/2, ..., N/2, with a_l = 2 on the two Nyquist terms and 1 otherwise.

    Args:
        grid (SpectralGrid): Grid with N <= 128.
        m (int): Derivative order, 1 or 2.

    Returns:
        DenseOperator: The real N x N matrix.
    """
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")
    N = grid.N
    if N > MAX_DENSE_N:
        raise ValueError(f"N must be at most {MAX_DENSE_N} for dense operators")

    l = np.arange(-N // 2, N // 2 + 1)
    weights = np.where(np.abs(l) == N // 2, 0.5, 1.0)
    symbol = weights * (1j * l * grid.mu) ** m
    offsets = grid.x[:, None] - grid.x[None, :]
    M = np.einsum("l,jkl->jk", symbol, np.exp(1j * grid.mu * offsets[:, :, None] * l)) / N
    if np.max(np.abs(M.imag)) > 1e-10 * max(1.0, np.max(np.abs(M.real))):
        raise OracleError(f"dense D_{m} has a non-negligible imaginary part")
    return DenseOperator(m, np.ascontiguousarray(M.real))


class _StageResidual:
    """Stage equations of one Runge-Kutta step on the reformulated system, with dense operators."""

    def __init__(self, grid, params: Params, tableau: Tableau, tau: float, state: FieldState):
        self.D1 = dense_diff_matrix(grid, 1).M
        self.D2 = dense_diff_matrix(grid, 2).M
        self.params = params
        self.A = tableau.A
        self.s = tableau.s
        self.N = grid.N
        self.tau = tau
        self.state = state

    def unpack(self, z: np.ndarray):
        s, N = self.s, self.N
        parts = z.reshape(4, s, N)
        return parts[0] + 1j * parts[1], parts[2], parts[3]

    def pack(self, k1, k2, k3) -> np.ndarray:
        return np.concatenate([k1.real.ravel(), k1.imag.ravel(), k2.ravel(), k3.ravel()])

    def stages(self, k1, k2, k3):
        st, tau, A = self.state, self.tau, self.A
        B_s = st.B[None, :] + tau * (A @ k1)
        rho_s = st.rho[None, :] + tau * (A @ k2)
        u_s = st.u[None, :] + tau * (A @ k3)
        k4 = 2.0 * np.real(np.conj(B_s) * k1)
        phi_s = st.phi[None, :] + tau * (A @ k4)
        return B_s, rho_s, u_s, phi_s, k4

    def __call__(self, z: np.ndarray) -> np.ndarray:
        p = self.params
        k1, k2, k3 = self.unpack(z)
        B_s, rho_s, u_s, phi_s, _ = self.stages(k1, k2, k3)
        g1 = k1 - (
            1j * p.omega * B_s @ self.D2.T
            - 1j * p.kappa * (u_s - 0.5 * p.nu * rho_s + p.q * phi_s) * B_s
        )
        g2 = k2 - (-u_s + p.nu * rho_s - p.kappa * phi_s) @ self.D1.T
        g3 = k3 - (-p.beta * rho_s + p.nu * u_s + 0.5 * p.kappa * p.nu * phi_s) @ self.D1.T
        return self.pack(g1, g2, g3)


def _fd_jacobian(residual: Callable, z: np.ndarray, g0: np.ndarray) -> np.ndarray:
    J = np.empty((g0.size, z.size))
    for i in range(z.size):
        dz = FD_STEP * max(1.0, abs(z[i]))
        zp = z.copy()
        zp[i] += dz
        J[:, i] = (residual(zp) - g0) / dz
    return J


def newton_stage_solve(
    grid: SpectralGrid,
    params: Params,
    tableau: Tableau,
    tau: float,
    state: FieldState,
    tol: float = 1e-13,
    max_iter: int = 50,
) -> StageSlopes:
    """
    Solves the coupled stage equations by damped Newton iteration with a dense
    finite-difference Jacobian in the 4sN real unknowns (Re k1, Im k1, k2, k3).

    Raises:
        ValueError: If N exceeds the dense size cap.
        OracleError: If the residual does not reach `tol` within `max_iter` iterations.
    """
    if grid.N > MAX_NEWTON_N:
        raise ValueError(f"N must be at most {MAX_NEWTON_N} for the Newton oracle")

    residual = _StageResidual(grid, params, tableau, tau, state)
    s, N = tableau.s, grid.N
    z = residual.pack(
        np.zeros((s, N), complex), np.zeros((s, N)), np.zeros((s, N))
    )
    g = residual(z)
    res = float(np.max(np.abs(g)))

    for iteration in range(1, max_iter + 1):
        if res <= tol:
            break
        J = _fd_jacobian(residual, z, g)
        try:
            dz = linalg.solve(J, -g)
        except linalg.LinAlgError as e:
            raise OracleError(f"singular Newton Jacobian at iteration {iteration}: {e}")

        damping = 1.0
        while True:
            z_try = z + damping * dz
            g_try = residual(z_try)
            res_try = float(np.max(np.abs(g_try)))
            if res_try < res or damping < 1e-4:
                break
            damping *= 0.5

        step = float(np.max(np.abs(damping * dz)))
        z, g, res = z_try, g_try, res_try
        if step <= 1e-15 * max(1.0, float(np.max(np.abs(z)))):
            # round-off stagnation
            break

    if not res <= tol:
        raise OracleError(f"Newton stage solve stopped at residual {res:.3e} > {tol:.0e}")

    k1, k2, k3 = residual.unpack(z)
    k1, k2, k3 = k1.copy(), k2.copy(), k3.copy()
    k4 = residual.stages(k1, k2, k3)[4]
    logging.info(f"Newton stage solve reached residual {res:.3e}")
    return StageSlopes(k1, k2, k3, k4)


def dense_linear_stage_solve(
    grid: SpectralGrid,
    params: Params,
    tableau: Tableau,
    tau: float,
    state: FieldState,
) -> StageSlopes:
    """
    Direct dense solve of the stage equations with the nonlinear coupling switched off
    (kappa = 0), where they are linear and decouple into a B-system and a (rho, u)-system.
    """
    if params.kappa != 0.0:
        raise ValueError("dense_linear_stage_solve requires kappa = 0")
    D1 = dense_diff_matrix(grid, 1).M
    D2 = dense_diff_matrix(grid, 2).M
    A = tableau.A
    s, N = tableau.s, grid.N
    eye_sN = np.eye(s * N)
    ones = np.ones(s)

    # Unknowns stacked stage-major: vec(k)[i*N + j] = k[i, j].
    lhs_b = eye_sN - 1j * tau * params.omega * np.kron(A, D2)
    rhs_b = 1j * params.omega * np.kron(ones, D2 @ state.B)
    k1 = linalg.solve(lhs_b, rhs_b).reshape(s, N)

    AD1 = tau * np.kron(A, D1)
    lhs_a = np.block(
        [
            [eye_sN - params.nu * AD1, AD1],
            [params.beta * AD1, eye_sN - params.nu * AD1],
        ]
    )
    rhs_a = np.concatenate(
        [
            np.kron(ones, D1 @ (-state.u + params.nu * state.rho)),
            np.kron(ones, D1 @ (-params.beta * state.rho + params.nu * state.u)),
        ]
    )
    k23 = linalg.solve(lhs_a, rhs_a)
    k2 = k23[: s * N].reshape(s, N)
    k3 = k23[s * N :].reshape(s, N)

    B_s = state.B[None, :] + tau * (A @ k1)
    return StageSlopes(k1, k2, k3, 2.0 * np.real(np.conj(B_s) * k1))


def quadrature(f: Callable[[float], float], a: float, b: float, tolerance: float = 1e-12) -> float:
    """
    Adaptive Gauss-Kronrod estimate of the integral of f over [a, b].

    Raises:
        OracleError: If the estimated error exceeds the tolerance.
    """
    value, err, info, *rest = integrate.quad(
        f, a, b, epsabs=tolerance, epsrel=tolerance, limit=500, full_output=1
    )
    if rest:
        logging.warning(f"quadrature on [{a}, {b}]: {rest[0]}")
    if not err <= tolerance * max(1.0, abs(value)):
        raise OracleError(
            f"quadrature on [{a}, {b}] reached error {err:.3e}, above tolerance {tolerance:.0e}"
        )
    return float(value)


def mass_integral(B: Callable, a: float, b: float, tolerance: float = 1e-12) -> float:
    """Continuous mass, the integral of |B(x)|^2 over [a, b]."""
    return quadrature(lambda x: float(np.abs(B(x)) ** 2), a, b, tolerance)


def interpolation_error(grid: SpectralGrid, op: DenseOperator, v) -> float:
    """max |M v - spectral D_m v| for one vector."""
    spectral = apply_d1(grid, v) if op.m == 1 else apply_d2(grid, v)
    return float(np.max(np.abs(op @ np.asarray(v) - spectral)))


def d2_minus_d1_squared(grid: SpectralGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Dense D_2 and D_1 @ D_1, for comparison on the zero-Nyquist subspace."""
    D1 = dense_diff_matrix(grid, 1).M
    D2 = dense_diff_matrix(grid, 2).M
    return D2, D1 @ D1
