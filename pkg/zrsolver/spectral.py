import logging

import numpy as np
from scipy import fft as sp_fft

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

# Unitary transform, matching the DFT matrix F_N with entries exp(-i j k 2 pi / N) / sqrt(N).
# With this choice ||v||_h^2 = (b - a) / N * sum |fft(v)|^2.
FFT_NORM = "ortho"

IMAG_TOLERANCE = 1e-11


class SpectralGrid:
    """
    Uniform periodic grid on [a, b) with the Fourier multipliers of the
    pseudo-spectral first and second derivative operators.
    """

    def __init__(self, a: float, b: float, N: int) -> None:
        if not isinstance(N, (int, np.integer)) or N < 4 or N % 2 != 0:
            raise ValueError("N must be an even integer and at least 4")
        if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
            raise ValueError("the domain must satisfy b > a with finite endpoints")

        self.a = float(a)
        self.b = float(b)
        self.N = int(N)
        self.length = self.b - self.a
        self.h = self.length / self.N
        self.mu = 2.0 * np.pi / self.length
        self.x = self.a + self.h * np.arange(self.N)

        # FFT frequency layout 0, 1, ..., N/2-1, -N/2, ..., -1
        freqs = np.fft.fftfreq(self.N, d=1.0 / self.N)
        self.frequencies = freqs

        l1 = freqs.copy()
        l1[self.N // 2] = 0.0
        self.lambda1 = 1j * self.mu * l1
        self.lambda2 = -((self.mu * freqs) ** 2)

    def __repr__(self) -> str:
        return f"SpectralGrid(a={self.a}, b={self.b}, N={self.N}, h={self.h})"

    def forward(self, v, axis: int = -1) -> np.ndarray:
        return sp_fft.fft(v, axis=axis, norm=FFT_NORM)

    def backward(self, v_hat, axis: int = -1) -> np.ndarray:
        return sp_fft.ifft(v_hat, axis=axis, norm=FFT_NORM)


def build_grid(a: float, b: float, N: int) -> SpectralGrid:
    """
    Builds the collocation grid x_j = a + j h, j = 0, ..., N-1.

    Args:
        a (float): Left endpoint.
        b (float): Right endpoint, b > a.
        N (int): Even number of collocation points, N >= 4.

    Returns:
        SpectralGrid: The grid with its derivative multipliers.
    """
    return SpectralGrid(a, b, N)


def grid_from_spacing(a: float, b: float, h: float) -> SpectralGrid:
    """Builds the grid whose mesh size is h; (b - a) / h must be an even integer."""
    n = (b - a) / h
    N = int(round(n))
    if abs(n - N) > 1e-9 * max(1.0, n):
        raise ValueError(f"(b - a) / h = {n} is not an integer")
    return SpectralGrid(a, b, N)


def _check_length(grid: SpectralGrid, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[-1] != grid.N:
        raise ValueError(f"vector length {v.shape[-1]} does not match grid size {grid.N}")
    return v


def apply_d1(grid: SpectralGrid, v) -> np.ndarray:
    """Applies D_1 = F^H Lambda^1 F along the last axis."""
    v = _check_length(grid, v)
    return grid.backward(grid.lambda1 * grid.forward(v))


def apply_d2(grid: SpectralGrid, v) -> np.ndarray:
    """Applies D_2 = F^H Lambda^2 F along the last axis."""
    v = _check_length(grid, v)
    return grid.backward(grid.lambda2 * grid.forward(v))


def to_real(v, what: str = "field", tolerance: float = IMAG_TOLERANCE) -> np.ndarray:
    """
    Drops the imaginary part of a spectrally computed real quantity after checking
    it is round-off only (relative to max(1, max|v|)).
    """
    v = np.asarray(v)
    if not np.iscomplexobj(v):
        return v.astype(np.float64)
    scale = max(1.0, float(np.max(np.abs(v.real))) if v.size else 1.0)
    imag = float(np.max(np.abs(v.imag))) if v.size else 0.0
    if imag > tolerance * scale:
        raise ValueError(
            f"{what} has an imaginary residue {imag:.3e} above {tolerance:.0e} * {scale:.3e}"
        )
    return np.ascontiguousarray(v.real)


def apply_d1_real(grid: SpectralGrid, v, what: str = "D1 v") -> np.ndarray:
    return to_real(apply_d1(grid, v), what)


def apply_d2_real(grid: SpectralGrid, v, what: str = "D2 v") -> np.ndarray:
    return to_real(apply_d2(grid, v), what)


def inner(grid: SpectralGrid, u, v) -> complex:
    """
    Discrete inner product <u, v>_h = h * sum_j u_j * conj(v_j).
    """
    u = _check_length(grid, u)
    v = _check_length(grid, v)
    if u.shape != v.shape:
        raise ValueError(f"inner product needs equal shapes, got {u.shape} and {v.shape}")
    return complex(grid.h * np.sum(u * np.conj(v)))


def norm_h(grid: SpectralGrid, v) -> float:
    v = _check_length(grid, v)
    return float(np.sqrt(grid.h * np.sum(np.abs(v) ** 2)))


def norm_inf(v) -> float:
    return float(np.max(np.abs(v)))


def spectral_energy(grid: SpectralGrid, v) -> float:
    """Returns (b - a) / N * sum |fft(v)|^2, which equals ||v||_h^2 for the unitary transform."""
    v = _check_length(grid, v)
    return float(grid.h * np.sum(np.abs(grid.forward(v)) ** 2))


def d2_quadratic_form(grid: SpectralGrid, B) -> float:
    """<D_2 B, B>_h evaluated in frequency space as h * sum lambda2_l |B_hat_l|^2."""
    B = _check_length(grid, B)
    return float(grid.h * np.sum(grid.lambda2 * np.abs(grid.forward(B)) ** 2))
