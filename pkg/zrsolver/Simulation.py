import logging
import os
import time
from typing import Dict, List, Optional

import numpy as np

from .cn_stepper import CNFPStepper
from .field_structures import FieldState
from .invariants import error_norms
from .model import (
    AMPLITUDE_CONVENTIONS,
    DEFAULT_CONVENTION,
    CollisionCase,
    InvalidSolitonError,
    Params,
    SolitonSpec,
    collision_case,
    collision_discrepancy,
    initial_collision,
    initial_single,
    resolve_amplitude_convention,
    soliton_amplitude_squared,
)
from .Observers import ErrorRecorder, InvariantRecorder, SnapshotRecorder
from .rk_stepper import FPRKStepper, RKStepperConfig
from .spectral import SpectralGrid, build_grid, grid_from_spacing
from .stepper import INITIAL_GUESSES, POLICIES
from .utils import emit_plot_scripts, ensure_dir, write_csv, write_json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Scheme name -> (stepper class, tableau name)
supported_schemes = {
    "fprk1": (FPRKStepper, "gauss1"),
    "fprk2": (FPRKStepper, "gauss2"),
    "fprk3": (FPRKStepper, "gauss3"),
    "cnfp": (CNFPStepper, "gauss1"),
    "euler-implicit": (FPRKStepper, "euler-implicit"),
    "euler-explicit": (FPRKStepper, "euler-explicit"),
    "rk4": (FPRKStepper, "rk4"),
}

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

# Solitary-wave test of the conservation and accuracy studies.
_DEFAULTS = {
    "omega": 1.0,
    "kappa": 1.0,
    "nu": 1.0,
    "beta": 7.0,
    "c": 1.0,
    "eta": 1.0,
    "x0": 2.0,
    "d0": 0.0,
    "a": -32.0,
    "b": 32.0,
    "h": 1.0 / 16.0,
    "tau": 1.0 / 50.0,
    "T": 4.0,
}

_FLOAT_FIELDS = ("omega", "kappa", "nu", "beta", "c", "eta", "x0", "d0", "a", "b", "h", "tau", "T", "tol")


class RunConfig:
    def __init__(
        self,
        omega=None,
        kappa=None,
        nu=None,
        beta=None,
        c=None,
        eta=None,
        x0=None,
        d0=None,
        case=None,
        a=None,
        b=None,
        N=None,
        h=None,
        tau=None,
        T=None,
        scheme=None,
        tol=None,
        max_iter=None,
        policy=None,
        cadence=None,
        snapshot_cadence=None,
        out_dir=None,
        emit_plots=None,
        convention=None,
        initial_guess=None,
        taus=None,
        hs=None,
        use_multithreading=None,
        progress=None,
        allow_reference=None,
    ):
        given = dict(locals())
        given.pop("self")
        # Keys the caller set; experiment drivers only apply their own defaults elsewhere.
        self.explicit = {k for k, v in given.items() if v is not None}

        if case is not None:
            case = str(case).upper()
            collision = collision_case(case)
            case_values = {
                "omega": collision.params.omega,
                "kappa": collision.params.kappa,
                "nu": collision.params.nu,
                "beta": collision.params.beta,
                "a": collision.a,
                "b": collision.b,
                "T": collision.T,
                "h": collision.h,
                "tau": collision.tau,
            }
            for key, value in case_values.items():
                if given[key] is None:
                    given[key] = value
        self.case = case

        for key, default in _DEFAULTS.items():
            if given[key] is None:
                given[key] = default
        for key in _FLOAT_FIELDS:
            value = given[key]
            if value is None:
                continue
            if not isinstance(value, (int, float)) or not np.isfinite(value):
                raise ValueError(f"{key} must be a finite number")
            given[key] = float(value)

        self.omega = given["omega"]
        self.kappa = given["kappa"]
        self.nu = given["nu"]
        self.beta = given["beta"]
        self.c = given["c"]
        self.eta = given["eta"]
        self.x0 = given["x0"]
        self.d0 = given["d0"]

        self.a = given["a"]
        self.b = given["b"]
        if self.b <= self.a:
            raise ValueError("b must be greater than a")

        if N is not None:
            if not isinstance(N, int) or N < 4 or N % 2 != 0:
                raise ValueError("N must be an even integer and at least 4")
            self.N = N
            self.h = (self.b - self.a) / N
        else:
            self.h = given["h"]
            if not self.h > 0:
                raise ValueError("h must be positive")
            self.N = grid_from_spacing(self.a, self.b, self.h).N

        self.tau = given["tau"]
        if not self.tau > 0:
            raise ValueError("tau must be positive")

        self.T = given["T"]
        if self.T < 0:
            raise ValueError("T must be nonnegative")

        if scheme is None:
            scheme = "fprk2"
        if scheme not in supported_schemes:
            raise ValueError(f"scheme must be one of {list(supported_schemes.keys())}")
        self.scheme = scheme

        if tol is None:
            tol = 1e-14
        self.tol = float(tol)
        if not self.tol > 0:
            raise ValueError("tol must be a positive number")

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

        if cadence is None:
            cadence = 1
        if not isinstance(cadence, int) or cadence < 1:
            raise ValueError("cadence must be an integer and at least 1")
        self.cadence = cadence

        if snapshot_cadence is None:
            snapshot_cadence = cadence
        if not isinstance(snapshot_cadence, int) or snapshot_cadence < 1:
            raise ValueError("snapshot_cadence must be an integer and at least 1")
        if snapshot_cadence % cadence != 0:
            raise ValueError("snapshot_cadence must be a multiple of cadence")
        self.snapshot_cadence = snapshot_cadence

        self.out_dir = out_dir if out_dir is not None else "out"
        self.emit_plots = bool(emit_plots) if emit_plots is not None else False

        if convention is not None and convention not in AMPLITUDE_CONVENTIONS:
            raise ValueError(f"convention must be one of {AMPLITUDE_CONVENTIONS}")
        self.convention = convention

        if initial_guess is None:
            initial_guess = "state"
        if initial_guess not in INITIAL_GUESSES:
            raise ValueError(f"initial_guess must be one of {INITIAL_GUESSES}")
        self.initial_guess = initial_guess

        self.taus = self._ladder("taus", taus)
        self.hs = self._ladder("hs", hs)

        self.use_multithreading = True if use_multithreading is None else bool(use_multithreading)
        self.progress = bool(progress) if progress is not None else False
        self.allow_reference = True if allow_reference is None else bool(allow_reference)

    @staticmethod
    def _ladder(name, values) -> Optional[List[float]]:
        if values is None:
            return None
        values = [float(v) for v in values]
        if not values or not all(np.isfinite(v) and v > 0 for v in values):
            raise ValueError(f"{name} must be a nonempty list of positive numbers")
        return values

    @classmethod
    def from_toml(cls, path: str, **overrides) -> "RunConfig":
        """Reads a flat TOML file; keyword overrides win over file values."""
        with open(path, "rb") as f:
            values = tomllib.load(f)
        unknown = set(values) - set(cls.__init__.__code__.co_varnames[1 : cls.__init__.__code__.co_argcount])
        if unknown:
            raise ValueError(f"unknown keys in {path}: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def from_args(cls, args, base: Optional[Dict] = None) -> "RunConfig":
        """Builds a config from parsed CLI arguments on top of an optional file config."""
        values = dict(base or {})
        mapping = {
            "scheme": "scheme",
            "N": "N",
            "tau": "tau",
            "T": "T",
            "tol": "tol",
            "max_iter": "max_iter",
            "policy": "policy",
            "out": "out_dir",
            "cadence": "cadence",
            "case": "case",
        }
        for arg_name, key in mapping.items():
            value = getattr(args, arg_name, None)
            if value is not None:
                values[key] = value
        if getattr(args, "emit_plots", False):
            values["emit_plots"] = True
        if getattr(args, "progress", False):
            values["progress"] = True
        if getattr(args, "no_reference", False):
            values["allow_reference"] = False
        if "N" in values and "h" in values and getattr(args, "N", None) is not None:
            values.pop("h")
        return cls(**values)

    def to_dict(self) -> Dict:
        return {
            "omega": self.omega,
            "kappa": self.kappa,
            "nu": self.nu,
            "beta": self.beta,
            "c": self.c,
            "eta": self.eta,
            "x0": self.x0,
            "d0": self.d0,
            "case": self.case,
            "a": self.a,
            "b": self.b,
            "N": self.N,
            "h": self.h,
            "tau": self.tau,
            "T": self.T,
            "scheme": self.scheme,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "policy": self.policy,
            "cadence": self.cadence,
            "snapshot_cadence": self.snapshot_cadence,
            "out_dir": self.out_dir,
            "emit_plots": self.emit_plots,
            "convention": self.convention,
            "initial_guess": self.initial_guess,
            "taus": self.taus,
            "hs": self.hs,
            "allow_reference": self.allow_reference,
        }

    def to_explicit_dict(self) -> Dict:
        """Only the fields the caller set, as constructor keywords."""
        values = {k: v for k, v in self.to_dict().items() if k in self.explicit}
        values["use_multithreading"] = self.use_multithreading
        values["progress"] = self.progress
        return values

    def replace(self, **changes) -> "RunConfig":
        """A copy with some fields changed; N is dropped when h changes and vice versa."""
        values = self.to_explicit_dict()
        if "h" in changes:
            values.pop("N", None)
        if "N" in changes:
            values.pop("h", None)
        values.update(changes)
        return RunConfig(**values)

    def log_config(self):
        config_log = """
        RunConfig:
            Scheme: {scheme}
            Params: omega={omega}, kappa={kappa}, nu={nu}, beta={beta}
            Initial Data: {initial}
            Domain: [{a}, {b}], N={N}, h={h}
            Tau: {tau}, T: {T}
            Tolerance: {tol}, Max Iterations: {max_iter}, Policy: {policy}
            Cadence: {cadence}, Snapshot Cadence: {snapshot_cadence}
            Output Directory: {out_dir}
        """.format(
            scheme=self.scheme,
            omega=self.omega,
            kappa=self.kappa,
            nu=self.nu,
            beta=self.beta,
            initial=(
                f"collision case {self.case}"
                if self.case
                else f"soliton c={self.c}, eta={self.eta}, x0={self.x0}, d0={self.d0}"
            ),
            a=self.a,
            b=self.b,
            N=self.N,
            h=self.h,
            tau=self.tau,
            T=self.T,
            tol=self.tol,
            max_iter=self.max_iter,
            policy=self.policy,
            cadence=self.cadence,
            snapshot_cadence=self.snapshot_cadence,
            out_dir=self.out_dir,
        )
        return config_log


def build_stepper(
    scheme: str,
    grid: SpectralGrid,
    params: Params,
    tau: float,
    tol: float = 1e-14,
    max_iter: int = 30,
    policy: str = "abort",
    initial_guess: str = "state",
    progress: bool = False,
):
    if scheme not in supported_schemes:
        raise ValueError(f"scheme must be one of {list(supported_schemes.keys())}")
    stepper_class, tableau_name = supported_schemes[scheme]
    config = RKStepperConfig(
        tableau=tableau_name,
        tau=tau,
        tol=tol,
        max_iter=max_iter,
        policy=policy,
        initial_guess=initial_guess,
        progress=progress,
    )
    return stepper_class(grid, params, config)


class Simulation:
    """
    Sets up grid, parameters, initial data and stepper for one RunConfig and
    writes the run artifacts (invariants, snapshots, summary).
    """

    def __init__(self, config: Optional[RunConfig] = None) -> None:
        if config is None:
            config = RunConfig()
        if not isinstance(config, RunConfig):
            raise ValueError("config must be an instance of RunConfig")

        self.config = config
        self.params = Params(config.omega, config.kappa, config.nu, config.beta)
        self.grid = build_grid(config.a, config.b, config.N)
        self.case: Optional[CollisionCase] = collision_case(config.case) if config.case else None
        self.spec = (
            None if self.case else SolitonSpec(config.c, config.eta, config.x0, config.d0)
        )
        self.convention, self.oracle_validated = self._choose_convention()

        self.stepper = build_stepper(
            config.scheme,
            self.grid,
            self.params,
            config.tau,
            config.tol,
            config.max_iter,
            config.policy,
            config.initial_guess,
            config.progress,
        )

        logging.info(
            f"Successfully initialized Simulation with Config {config.log_config()}"
        )

    def _choose_convention(self):
        cfg = self.config
        waves = self.case.waves if self.case else [self.spec]
        adopted = [resolve_amplitude_convention(self.params, w) for w in waves]
        if cfg.convention is not None:
            return cfg.convention, all(a == cfg.convention for a in adopted)

        if all(a is not None and a == adopted[0] for a in adopted):
            return adopted[0], True

        # No validated convention: keep one that at least gives real initial data.
        for convention in (DEFAULT_CONVENTION,) + AMPLITUDE_CONVENTIONS:
            try:
                for w in waves:
                    soliton_amplitude_squared(self.params, w, convention)
                return convention, False
            except InvalidSolitonError:
                continue
        raise InvalidSolitonError("no amplitude convention gives real initial data")

    @property
    def has_exact_solution(self) -> bool:
        return self.spec is not None and self.oracle_validated

    def initial_state(self) -> FieldState:
        if self.case is not None:
            return initial_collision(self.params, self.case, self.grid, self.convention)
        return initial_single(self.params, self.spec, self.grid, self.convention)

    def oracle_record(self) -> Dict:
        return {
            "convention": self.convention,
            "validated": self.oracle_validated,
            "kind": "exact" if self.has_exact_solution else "none",
        }

    def integrate(self, T: Optional[float] = None, snapshots: bool = True):
        """
        Runs the configured scheme from the initial data over [0, T].

        Returns:
            dict with the final state, summary, recorders and wall time.
        """
        cfg = self.config
        T = cfg.T if T is None else T
        state0 = self.initial_state()

        invariants = InvariantRecorder(self.grid, self.params)
        observers = [invariants]
        snapshot_recorder = None
        if snapshots:
            snapshot_recorder = SnapshotRecorder(self.grid, every=cfg.snapshot_cadence)
            observers.append(snapshot_recorder)
        errors = None
        if self.has_exact_solution:
            errors = ErrorRecorder(self.grid, self.params, self.spec, self.convention)
            observers.append(errors)

        start = time.perf_counter()
        final_state, summary = self.stepper.integrate(state0, T, observers, cfg.cadence)
        wall_time = time.perf_counter() - start

        return {
            "state": final_state,
            "summary": summary,
            "invariants": invariants,
            "snapshots": snapshot_recorder,
            "errors": errors,
            "wall_time_s": wall_time,
        }

    def final_errors(self, state: FieldState) -> Optional[Dict]:
        if not self.has_exact_solution:
            return None
        e_B, e_rho, e_u = error_norms(self.grid, state, self.params, self.spec, self.convention)
        return {"e_B": e_B, "e_rho": e_rho, "e_u": e_u}

    def run(self) -> Dict:
        """
        Integrates and writes invariants.csv, snapshots.csv, errors.csv (when an exact
        solution is available) and run.json into the output directory.
        """
        cfg = self.config
        out_dir = ensure_dir(cfg.out_dir)
        result = self.integrate()

        invariants = result["invariants"]
        write_csv(os.path.join(out_dir, "invariants.csv"), invariants.header(), invariants.rows())
        snapshots = result["snapshots"]
        write_csv(os.path.join(out_dir, "snapshots.csv"), snapshots.header(), snapshots.rows())
        if result["errors"] is not None:
            errors = result["errors"]
            write_csv(os.path.join(out_dir, "errors.csv"), errors.header(), errors.errors)

        payload = {
            "command": "run",
            "config": cfg.to_dict(),
            "params": self.params.as_dict(),
            "oracle": self.oracle_record(),
            "final_errors": self.final_errors(result["state"]),
            "iterations": result["summary"].as_dict(),
            "drift": invariants.drift(),
            "wall_time_s": result["wall_time_s"],
        }
        if self.case is not None:
            payload["collision_discrepancy"] = collision_discrepancy(
                self.grid, result["state"], self.params, self.case, self.convention
            )
        write_json(os.path.join(out_dir, "run.json"), payload)

        if cfg.emit_plots:
            emit_plot_scripts(out_dir, "run")

        logging.info(f"Run finished in {result['wall_time_s']:.2f} s, artifacts in {out_dir}")
        result["payload"] = payload
        return result
