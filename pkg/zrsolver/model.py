import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .field_structures import FieldState
from .spectral import SpectralGrid, apply_d1, apply_d2, build_grid, norm_h

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

# Squared soliton amplitude +2 omega eta / (kappa zeta) ("as_printed") or its negative ("negated").
AMPLITUDE_CONVENTIONS = ("as_printed", "negated")
DEFAULT_CONVENTION = "negated"

# Sixth-order central difference weights for d/dt at offsets -3..3.
_FD6_WEIGHTS = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


class SingularParameterError(ValueError):
    pass


class InvalidSolitonError(ValueError):
    pass


class Params:
    """
    Physical constants of the Zakharov-Rubenchik system. The coupling q is
    always recomputed from the other four constants.
    """

    def __init__(self, omega: float, kappa: float, nu: float, beta: float) -> None:
        for name, value in (("omega", omega), ("kappa", kappa), ("nu", nu), ("beta", beta)):
            if not isinstance(value, (int, float, np.floating, np.integer)) or not np.isfinite(value):
                raise ValueError(f"{name} must be a finite real number")
        if beta == nu**2:
            raise SingularParameterError(
                f"beta = nu^2 = {beta} makes q undefined (division by 4(beta - nu^2))"
            )
        self.omega = float(omega)
        self.kappa = float(kappa)
        self.nu = float(nu)
        self.beta = float(beta)
        self.q = self.kappa + self.nu * (self.kappa * self.nu - 1.0) / (
            4.0 * (self.beta - self.nu**2)
        )

    def as_dict(self) -> Dict[str, float]:
        return {
            "omega": self.omega,
            "kappa": self.kappa,
            "nu": self.nu,
            "beta": self.beta,
            "q": self.q,
        }

    def __repr__(self) -> str:
        return (
            f"Params(omega={self.omega}, kappa={self.kappa}, nu={self.nu}, "
            f"beta={self.beta}, q={self.q})"
        )


def derive_q(omega: float, kappa: float, nu: float, beta: float) -> Params:
    """
    Builds Params with q = kappa + nu (kappa nu - 1) / (4 (beta - nu^2)).

    Raises:
        SingularParameterError: If beta = nu^2.
    """
    return Params(omega, kappa, nu, beta)


class SolitonSpec:
    """
    Velocity, width parameter and shifts of one solitary wave.
    """

    def __init__(self, c: float = 1.0, eta: float = 1.0, x0: float = 0.0, d0: float = 0.0) -> None:
        if not eta > 0:
            raise InvalidSolitonError(f"eta must be positive, got {eta}")
        self.c = float(c)
        self.eta = float(eta)
        self.x0 = float(x0)
        self.d0 = float(d0)

    def as_dict(self) -> Dict[str, float]:
        return {"c": self.c, "eta": self.eta, "x0": self.x0, "d0": self.d0}

    def __repr__(self) -> str:
        return f"SolitonSpec(c={self.c}, eta={self.eta}, x0={self.x0}, d0={self.d0})"


def _acoustic_denominator(params: Params, spec: SolitonSpec) -> float:
    den = 2.0 * params.beta - 2.0 * (spec.c + params.nu) ** 2
    if den == 0.0:
        raise SingularParameterError(
            f"beta = (c + nu)^2 = {params.beta} makes the soliton coefficients singular"
        )
    return den


def soliton_coefficients(params: Params, spec: SolitonSpec) -> Dict[str, float]:
    """
    Returns lambda, zeta and the R^2 coefficients of rho and u for one solitary wave.
    """
    den = _acoustic_denominator(params, spec)
    c, k, nu, beta = spec.c, params.kappa, params.nu, params.beta
    return {
        "lam": (4.0 * params.omega**2 * spec.eta + c**2) / (4.0 * params.omega),
        "zeta": params.q + (4.0 * c * nu * k + 3.0 * k * nu**2 - 4.0 * k * beta) / (2.0 * den),
        "rho_coeff": -(2.0 * c * k + k * nu) / den,
        "u_coeff": (c * nu * k + k * nu**2 - 2.0 * k * beta) / den,
    }


def soliton_amplitude_squared(
    params: Params, spec: SolitonSpec, convention: str = DEFAULT_CONVENTION
) -> float:
    """
    Squared peak modulus of the solitary wave under the given sign convention.

    Raises:
        InvalidSolitonError: If the squared amplitude is not positive.
    """
    if convention not in AMPLITUDE_CONVENTIONS:
        raise ValueError(f"convention must be one of {AMPLITUDE_CONVENTIONS}")
    if params.omega == 0.0:
        raise InvalidSolitonError("omega must be nonzero for a solitary wave")
    zeta = soliton_coefficients(params, spec)["zeta"]
    kz = params.kappa * zeta
    if kz == 0.0:
        raise InvalidSolitonError("kappa * zeta = 0, the soliton amplitude is unbounded")
    sign = 1.0 if convention == "as_printed" else -1.0
    amp2 = sign * 2.0 * params.omega * spec.eta / kz
    if amp2 <= 0.0:
        raise InvalidSolitonError(
            f"squared amplitude {amp2:.6g} is not positive under convention "
            f"'{convention}' (kappa * zeta = {kz:.6g})"
        )
    return amp2


def _sech(z):
    az = np.abs(z)
    e = np.exp(-az)
    return 2.0 * e / (1.0 + e * e)


def solitary_wave(
    params: Params,
    spec: SolitonSpec,
    x,
    t: float,
    convention: str = DEFAULT_CONVENTION,
    lam_shift: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluates the travelling solitary wave (B, rho, u) at points x and time t.

    Args:
        params (Params): Physical constants.
        spec (SolitonSpec): Velocity, width and shifts.
        x: Scalar or array of positions.
        t (float): Time.
        convention (str): Amplitude sign convention, see AMPLITUDE_CONVENTIONS.
        lam_shift (float): Added to the phase rate lambda; nonzero values detune the wave.

    Returns:
        Tuple of arrays (B, rho, u).
    """
    coeffs = soliton_coefficients(params, spec)
    amp = np.sqrt(soliton_amplitude_squared(params, spec, convention))
    x = np.asarray(x, dtype=np.float64)

    xi = x - spec.c * t + spec.x0
    R = amp * _sech(np.sqrt(spec.eta) * xi)
    phase = (
        (coeffs["lam"] + lam_shift) * t
        + spec.c * (x - spec.c * t) / (2.0 * params.omega)
        + spec.d0
    )
    B = np.exp(1j * phase) * R
    R2 = R * R
    return B, coeffs["rho_coeff"] * R2, coeffs["u_coeff"] * R2


def pde_residual(
    params: Params,
    spec: Optional[SolitonSpec],
    grid: SpectralGrid,
    t: float,
    convention: str = DEFAULT_CONVENTION,
    candidate: Optional[Callable] = None,
    dt: float = 1e-3,
) -> Tuple[float, float, float]:
    """
    Infinity norms of the three residuals of the ZR system for a candidate solution,
    with d/dt by sixth-order central differences and d/dx, d^2/dx^2 spectrally.

    Args:
        candidate: Callable (x, t) -> (B, rho, u). Defaults to the solitary wave of `spec`.

    Returns:
        Tuple (r_B, r_rho, r_u).
    """
    if candidate is None:
        def candidate(x, tt):
            return solitary_wave(params, spec, x, tt, convention)

    samples = [candidate(grid.x, t + k * dt) for k in range(-3, 4)]
    B_t = sum(w * s[0] for w, s in zip(_FD6_WEIGHTS, samples)) / dt
    rho_t = sum(w * s[1] for w, s in zip(_FD6_WEIGHTS, samples)) / dt
    u_t = sum(w * s[2] for w, s in zip(_FD6_WEIGHTS, samples)) / dt

    B, rho, u = (np.asarray(f) for f in samples[3])
    B = B.astype(np.complex128)
    mod2 = np.abs(B) ** 2

    r_B = (
        1j * B_t
        + params.omega * apply_d2(grid, B)
        - params.kappa * (u - 0.5 * params.nu * rho + params.q * mod2) * B
    )
    r_rho = rho_t + apply_d1(grid, u - params.nu * rho) + params.kappa * apply_d1(grid, mod2)
    r_u = (
        u_t
        + apply_d1(grid, params.beta * rho - params.nu * u)
        - 0.5 * params.kappa * params.nu * apply_d1(grid, mod2)
    )
    return (
        float(np.max(np.abs(r_B))),
        float(np.max(np.abs(r_rho))),
        float(np.max(np.abs(r_u))),
    )


def validation_grid(spec: SolitonSpec, t: float = 0.0, half_width: float = 32.0, N: int = 1024) -> SpectralGrid:
    """A grid centred on the wave at time t, wide enough for the sech tails to vanish."""
    centre = spec.c * t - spec.x0
    w = half_width / np.sqrt(spec.eta)
    return build_grid(centre - w, centre + w, N)


def resolve_amplitude_convention(
    params: Params,
    spec: SolitonSpec,
    grid: Optional[SpectralGrid] = None,
    t: float = 0.5,
    threshold: float = 1e-6,
) -> Optional[str]:
    """
    Tries each amplitude convention against the ZR system and returns the first one
    whose residuals are all below `threshold`, or None when none validates.
    """
    if grid is None:
        grid = validation_grid(spec, t)

    for convention in AMPLITUDE_CONVENTIONS:
        try:
            soliton_amplitude_squared(params, spec, convention)
        except InvalidSolitonError as e:
            logging.info(f"Amplitude convention '{convention}' rejected: {e}")
            continue
        residuals = pde_residual(params, spec, grid, t, convention)
        logging.info(
            f"Amplitude convention '{convention}': residuals "
            f"r_B={residuals[0]:.3e}, r_rho={residuals[1]:.3e}, r_u={residuals[2]:.3e}"
        )
        if max(residuals) <= threshold:
            logging.info(f"Adopted amplitude convention '{convention}'")
            return convention

    logging.warning(
        "No amplitude convention validates the solitary wave; "
        "falling back to self-convergence against a reference run"
    )
    return None


def initial_single(
    params: Params,
    spec: SolitonSpec,
    grid: SpectralGrid,
    convention: str = DEFAULT_CONVENTION,
) -> FieldState:
    """Samples the solitary wave at t = 0 with phi = |B|^2."""
    B, rho, u = solitary_wave(params, spec, grid.x, 0.0, convention)
    return FieldState.consistent(0.0, B, rho, u)


class CollisionCase:
    """
    Parameters, wave pair, domain and run length of one two-soliton collision setup.
    """

    def __init__(
        self,
        name: str,
        params: Params,
        waves: Tuple[SolitonSpec, SolitonSpec],
        a: float,
        b: float,
        T: float,
        h: float = 1.0 / 8.0,
        tau: float = 1.0 / 200.0,
    ) -> None:
        self.name = name
        self.params = params
        self.waves = waves
        self.a = a
        self.b = b
        self.T = T
        self.h = h
        self.tau = tau

    def __repr__(self) -> str:
        return f"CollisionCase({self.name}, [{self.a}, {self.b}], T={self.T})"


_COLLISION_CASES = {
    "I": dict(
        kappa=2.0, nu=0.2, beta=75.0, c=(8.0, -8.0), x0=(8.0, -8.0), a=-20.0, b=20.0, T=2.0
    ),
    "II": dict(
        kappa=3.0, nu=0.2, beta=12.0, c=(1.5, -1.5), x0=(9.0, -9.0), a=-24.0, b=24.0, T=12.0
    ),
    "III": dict(
        kappa=1.0, nu=0.5, beta=3.0, c=(0.0, -0.5), x0=(-8.0, -26.0), a=-70.0, b=70.0, T=60.0
    ),
}


def collision_case(case_id: str) -> CollisionCase:
    """Returns collision setup I (high velocity), II (intermediate) or III (small velocity)."""
    key = str(case_id).upper()
    if key not in _COLLISION_CASES:
        raise ValueError(f"case must be one of {list(_COLLISION_CASES.keys())}")
    cfg = _COLLISION_CASES[key]
    params = Params(1.0, cfg["kappa"], cfg["nu"], cfg["beta"])
    waves = tuple(
        SolitonSpec(c=c, eta=1.0, x0=x0, d0=0.0) for c, x0 in zip(cfg["c"], cfg["x0"])
    )
    return CollisionCase(key, params, waves, cfg["a"], cfg["b"], cfg["T"])


def free_superposition(
    params: Params,
    case: CollisionCase,
    x,
    t: float,
    convention: str = DEFAULT_CONVENTION,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sum of the two solitary waves of a case, each moving as if alone."""
    B = 0.0
    rho = 0.0
    u = 0.0
    for spec in case.waves:
        b_i, rho_i, u_i = solitary_wave(params, spec, x, t, convention)
        B = B + b_i
        rho = rho + rho_i
        u = u + u_i
    return B, rho, u


def initial_collision(
    params: Optional[Params],
    case,
    grid: SpectralGrid,
    convention: str = DEFAULT_CONVENTION,
) -> FieldState:
    """
    Two-soliton initial data of a collision case with phi = |B_0|^2.

    Args:
        params: Physical constants; None uses the case's own.
        case: A CollisionCase or its id ("I", "II", "III").
    """
    if not isinstance(case, CollisionCase):
        case = collision_case(case)
    if params is None:
        params = case.params
    B, rho, u = free_superposition(params, case, grid.x, 0.0, convention)
    return FieldState.consistent(0.0, B, rho, u)


def collision_discrepancy(
    grid: SpectralGrid,
    state: FieldState,
    params: Params,
    case: CollisionCase,
    convention: str = DEFAULT_CONVENTION,
) -> float:
    """
    Relative L2 distance between |B| of a state and |B| of the free superposition
    at the same time; nonzero values after the waves meet mark an inelastic collision.
    """
    B_free, _, _ = free_superposition(params, case, grid.x, state.t, convention)
    ref = norm_h(grid, B_free)
    return norm_h(grid, np.abs(state.B) - np.abs(B_free)) / max(ref, 1e-300)
