import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .field_structures import FieldState
from .invariants import drift, invariant_record, state_difference
from .model import Params, SolitonSpec, collision_discrepancy, initial_single
from .oracle import OracleError, dense_diff_matrix, interpolation_error, newton_stage_solve
from .cn_stepper import CNFPStepper
from .rk_stepper import RKStepperConfig, build_stage_solver
from .Simulation import RunConfig, Simulation, supported_schemes
from .spectral import build_grid
from .tableau import Tableau, get_tableau, symplectic_defect
from .utils import convergence_rates, emit_plot_scripts, ensure_dir, write_json, write_table

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

SPACE_LADDER = [1.0, 0.5, 0.25, 0.125]
SPACE_TAU = 1e-3
TIME_H = 1.0 / 16.0
CONVERGENCE_T = 4.0
COMPARE_SCHEMES = ["cnfp", "fprk1", "fprk2", "fprk3"]
COMPARE_H = 1.0 / 8.0
REFERENCE_REFINEMENT = 8
# Large ladder steps may exhaust max_iter; the step is kept and counted.
LADDER_POLICY = "warn"

# Ladder observers are only needed at the endpoints.
_ENDPOINTS_ONLY = 10**9


def time_ladder(scheme: str) -> List[float]:
    """Default step ladder: 2/5 halved five times for three stages, 1/10 halved five times otherwise."""
    tau0 = 0.4 if supported_schemes[scheme][1] == "gauss3" else 0.1
    return [tau0 / 2**k for k in range(6)]


def compare_ladder() -> List[float]:
    return [0.2 / 2**k for k in range(5)]


def _final_state(config: RunConfig) -> Tuple[Simulation, FieldState, float]:
    sim = Simulation(config.replace(cadence=_ENDPOINTS_ONLY))
    result = sim.integrate(snapshots=False)
    return sim, result["state"], result["wall_time_s"]


def _map(fn: Callable, items: List, use_multithreading: bool) -> List:
    if not use_multithreading or len(items) < 2:
        return [fn(item) for item in items]
    results = [None] * len(items)
    with ThreadPoolExecutor(max_workers=min(len(items), os.cpu_count() or 1)) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def _require_reference(config: RunConfig, first_sim: Simulation) -> None:
    if not config.allow_reference:
        raise OracleError(
            f"exact solution did not validate (convention {first_sim.convention}) "
            "and the reference fallback is disabled"
        )


def _errors_against(sim: Simulation, state: FieldState, reference: Optional[FieldState]):
    if reference is None:
        return sim.final_errors(state)
    stride = reference.N // state.N
    sampled = FieldState(
        reference.t,
        reference.B[::stride],
        reference.rho[::stride],
        reference.u[::stride],
        reference.phi[::stride],
    )
    e_B, e_rho, e_u = state_difference(sampled, state)
    return {"e_B": e_B, "e_rho": e_rho, "e_u": e_u}


def cmd_converge_space(config: RunConfig) -> Dict:
    """
    Errors at T of the configured scheme on the mesh ladder hs (default 1, 1/2, 1/4, 1/8)
    with a fixed small tau. Writes converge_space.csv.
    """
    hs = config.hs or SPACE_LADDER
    tau = config.tau if "tau" in config.explicit else SPACE_TAU
    T = config.T if "T" in config.explicit else CONVERGENCE_T
    base = config.replace(tau=tau, T=T)
    out_dir = ensure_dir(config.out_dir)

    first_sim = Simulation(base.replace(h=hs[0]))
    reference = None
    oracle = "exact"
    if not first_sim.has_exact_solution:
        _require_reference(config, first_sim)
        oracle = "reference"
        h_ref = min(hs) / 2.0
        logging.warning(f"No validated exact solution; using a reference run with h = {h_ref}")
        _, reference, _ = _final_state(base.replace(h=h_ref))

    def solve(h):
        sim, state, wall = _final_state(base.replace(h=h))
        return _errors_against(sim, state, reference)

    errors = _map(solve, hs, config.use_multithreading)

    rows = [
        [config.scheme, h, e["e_B"], e["e_rho"], e["e_u"], oracle] for h, e in zip(hs, errors)
    ]
    path = os.path.join(out_dir, "converge_space.csv")
    write_table(path, ["scheme", "h", "e_B", "e_rho", "e_u", "oracle"], rows)
    if config.emit_plots:
        emit_plot_scripts(out_dir, "convergence", "converge_space.csv", step="h")

    payload = {
        "command": "converge-space",
        "config": base.to_dict(),
        "oracle": {**first_sim.oracle_record(), "kind": oracle},
        "hs": hs,
        "errors": errors,
    }
    write_json(os.path.join(out_dir, "run.json"), payload)
    return {"path": path, "rows": rows, "oracle": oracle}


def cmd_converge_time(config: RunConfig) -> Dict:
    """
    Errors at T on the step ladder taus at fixed h (default 1/16), with observed orders
    log2(e(tau) / e(tau/2)). Writes converge_time_<scheme>.csv.
    """
    taus = config.taus or time_ladder(config.scheme)
    T = config.T if "T" in config.explicit else CONVERGENCE_T
    changes = {"T": T}
    if "policy" not in config.explicit:
        changes["policy"] = LADDER_POLICY
    if "h" not in config.explicit and "N" not in config.explicit:
        changes["h"] = TIME_H
    base = config.replace(**changes)
    out_dir = ensure_dir(config.out_dir)

    first_sim = Simulation(base.replace(tau=taus[0]))
    reference = None
    oracle = "exact"
    if not first_sim.has_exact_solution:
        _require_reference(config, first_sim)
        oracle = "reference"
        tau_ref = min(taus) / REFERENCE_REFINEMENT
        logging.warning(f"No validated exact solution; using a reference run with tau = {tau_ref}")
        _, reference, _ = _final_state(base.replace(tau=tau_ref))

    def solve(tau):
        sim, state, wall = _final_state(base.replace(tau=tau))
        return _errors_against(sim, state, reference)

    errors = _map(solve, taus, config.use_multithreading)

    rates = {
        key: convergence_rates([e[key] for e in errors]) for key in ("e_B", "e_rho", "e_u")
    }
    rows = []
    for i, (tau, e) in enumerate(zip(taus, errors)):
        rows.append(
            [
                tau,
                e["e_B"],
                rates["e_B"][i],
                e["e_rho"],
                rates["e_rho"][i],
                e["e_u"],
                rates["e_u"][i],
                oracle,
            ]
        )
    name = f"converge_time_{config.scheme}.csv"
    path = os.path.join(out_dir, name)
    write_table(
        path, ["tau", "e_B", "rate_B", "e_rho", "rate_rho", "e_u", "rate_u", "oracle"], rows
    )
    if config.emit_plots:
        emit_plot_scripts(out_dir, "convergence", name, step="tau")

    payload = {
        "command": "converge-time",
        "config": base.to_dict(),
        "oracle": {**first_sim.oracle_record(), "kind": oracle},
        "taus": taus,
        "errors": errors,
        "rates": rates,
    }
    write_json(os.path.join(out_dir, "run.json"), payload)
    return {"path": path, "rows": rows, "rates": rates, "oracle": oracle}


def cmd_collide(config: RunConfig, case: Optional[str] = None) -> Dict:
    """
    Two-soliton collision run for case I, II or III; on top of the run artifacts,
    writes collision.csv with the distance from the free superposition per snapshot.
    """
    case = case or config.case
    if case is None:
        raise ValueError("case must be one of ['I', 'II', 'III'] for a collision run")
    sim = Simulation(config.replace(case=case))
    result = sim.run()

    series = [
        [snap.t, collision_discrepancy(sim.grid, snap, sim.params, sim.case, sim.convention)]
        for snap in result["snapshots"].snapshots
    ]
    path = os.path.join(sim.config.out_dir, "collision.csv")
    write_table(path, ["t", "discrepancy"], series)
    result["discrepancy"] = series
    return result


def cmd_compare(config: RunConfig) -> Dict:
    """
    Errors and wall-clock times of CN-FP and FPRK-1/2/3 on a common step ladder.
    Writes compare.csv; times are reported only.
    """
    taus = config.taus or compare_ladder()
    T = config.T if "T" in config.explicit else CONVERGENCE_T
    changes = {"T": T}
    if "policy" not in config.explicit:
        changes["policy"] = LADDER_POLICY
    if "h" not in config.explicit and "N" not in config.explicit:
        changes["h"] = COMPARE_H
    base = config.replace(**changes)
    out_dir = ensure_dir(config.out_dir)

    first_sim = Simulation(base.replace(tau=taus[0]))
    reference = None
    oracle = "exact"
    if not first_sim.has_exact_solution:
        _require_reference(config, first_sim)
        oracle = "reference"
        tau_ref = min(taus) / REFERENCE_REFINEMENT
        _, reference, _ = _final_state(base.replace(scheme="fprk3", tau=tau_ref))

    rows = []
    for scheme in COMPARE_SCHEMES:
        for tau in taus:
            sim, state, wall = _final_state(base.replace(scheme=scheme, tau=tau))
            e = _errors_against(sim, state, reference)
            rows.append([scheme, tau, e["e_B"], e["e_rho"], e["e_u"], wall])
            logging.info(f"{scheme} tau={tau}: e_B={e['e_B']:.3e}, {wall:.2f} s")

    path = os.path.join(out_dir, "compare.csv")
    write_table(path, ["scheme", "tau", "e_B", "e_rho", "e_u", "time_s"], rows)
    write_json(
        os.path.join(out_dir, "run.json"),
        {
            "command": "compare",
            "config": base.to_dict(),
            "oracle": {**first_sim.oracle_record(), "kind": oracle},
            "taus": taus,
        },
    )
    return {"path": path, "rows": rows, "oracle": oracle}


def _selftest_setup(N: int):
    params = Params(1.0, 1.0, 1.0, 7.0)
    spec = SolitonSpec(1.0, 1.0, 2.0, 0.0)
    grid = build_grid(-32.0, 32.0, N)
    return params, grid, initial_single(params, spec, grid)


def _suite_symplectic(tableaus: Dict[str, Tableau]) -> Tuple[bool, str]:
    defects = {name: symplectic_defect(tableaus[name]) for name in ("gauss1", "gauss2", "gauss3")}
    euler = [symplectic_defect(get_tableau(n)) for n in ("euler-explicit", "euler-implicit")]
    ok = all(d <= 1e-14 for d in defects.values()) and all(d == 1.0 for d in euler)
    return ok, f"max Gauss defect {max(defects.values()):.2e}, Euler defects {euler}"


def _suite_oracle(tableaus: Dict[str, Tableau]) -> Tuple[bool, str]:
    rng = np.random.default_rng(0)
    op_err = 0.0
    for N in (16, 32):
        grid = build_grid(-32.0, 32.0, N)
        for m in (1, 2):
            op = dense_diff_matrix(grid, m)
            for _ in range(100):
                op_err = max(op_err, interpolation_error(grid, op, rng.standard_normal(N)))

    params, grid, state = _selftest_setup(16)
    slope_err = 0.0
    for name in ("gauss1", "gauss2"):
        solver = build_stage_solver(grid, params, tableaus[name], 1.0 / 50.0)
        fixed, _ = solver.fixed_point_stage_solve(state)
        newton = newton_stage_solve(grid, params, tableaus[name], 1.0 / 50.0, state)
        slope_err = max(
            slope_err,
            float(np.max(np.abs(fixed.k1 - newton.k1))),
            float(np.max(np.abs(fixed.k2 - newton.k2))),
            float(np.max(np.abs(fixed.k3 - newton.k3))),
        )
    ok = op_err <= 1e-12 and slope_err <= 1e-12
    return ok, f"operator error {op_err:.2e}, slope difference {slope_err:.2e}"


def _suite_drift(tableaus: Dict[str, Tableau]) -> Tuple[bool, str]:
    params, grid, state = _selftest_setup(64)
    solver = build_stage_solver(grid, params, tableaus["gauss2"], 1.0 / 50.0)
    records = [invariant_record(grid, params, state)]
    qav = 0.0
    for _ in range(100):
        state, _ = solver.step(state)
        records.append(invariant_record(grid, params, state))
        qav = max(qav, records[-1].qav_residual)
    d = drift(records)
    ok = (
        d["mass"]["rel"] <= 1e-10
        and d["energyQ"]["rel"] <= 1e-10
        and d["hamiltonian"]["rel"] <= 1e-10
        and d["i1"]["abs"] <= 1e-10 * (1 + abs(d["i1"]["initial"]))
        and d["i2"]["abs"] <= 1e-10 * (1 + abs(d["i2"]["initial"]))
        and qav <= 1e-11
    )
    return ok, (
        f"mass {d['mass']['rel']:.2e}, energyQ {d['energyQ']['rel']:.2e}, "
        f"H {d['hamiltonian']['rel']:.2e}, qav {qav:.2e}"
    )


def _suite_cnfp(tableaus: Dict[str, Tableau]) -> Tuple[bool, str]:
    params, grid, state = _selftest_setup(64)
    fprk = build_stage_solver(grid, params, tableaus["gauss1"], 1.0 / 50.0)
    cn = CNFPStepper(grid, params, RKStepperConfig(tableau="gauss1", tau=1.0 / 50.0))
    a, b = state, state
    for _ in range(20):
        a, _ = fprk.step(a)
        b, _ = cn.step(b)
    diff = max(state_difference(a, b))
    return diff <= 1e-11, f"max field difference {diff:.2e}"


def _suite_symmetry(tableaus: Dict[str, Tableau]) -> Tuple[bool, str]:
    params, grid, state = _selftest_setup(64)
    forward = build_stage_solver(grid, params, tableaus["gauss2"], 1.0 / 50.0)
    backward = build_stage_solver(grid, params, tableaus["gauss2"], -1.0 / 50.0)
    mid, _ = forward.step(state)
    back, _ = backward.step(mid)
    diff = max(state_difference(state, back))
    return diff <= 1e-10, f"round trip difference {diff:.2e}"


SELFTEST_SUITES = {
    "symplectic-defect": _suite_symplectic,
    "oracle-equivalence": _suite_oracle,
    "invariant-drift": _suite_drift,
    "cnfp-equivalence": _suite_cnfp,
    "time-symmetry": _suite_symmetry,
}


def cmd_selftest(tableau_overrides: Optional[Dict[str, Tableau]] = None, verbose: bool = True):
    """
    Runs the desk-scale verification suites and prints a pass/fail table.

    Args:
        tableau_overrides: Replacement tableaux by name ("gauss1", ...), for checking
            that a corrupted coefficient is caught.

    Returns:
        Tuple[bool, List]: Overall result and rows (suite, passed, detail, seconds).
    """
    tableaus = {name: get_tableau(name) for name in ("gauss1", "gauss2", "gauss3")}
    tableaus.update(tableau_overrides or {})

    rows = []
    for name, suite in SELFTEST_SUITES.items():
        start = time.perf_counter()
        try:
            ok, detail = suite(tableaus)
        except (ValueError, RuntimeError, OracleError) as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        rows.append((name, ok, detail, time.perf_counter() - start))

    if verbose:
        print("=" * 80)
        print(f"{'suite':<22}{'result':<8}{'seconds':>8}  detail")
        print("-" * 80)
        for name, ok, detail, seconds in rows:
            print(f"{name:<22}{'PASS' if ok else 'FAIL':<8}{seconds:>8.2f}  {detail}")
        print("=" * 80)

    return all(r[1] for r in rows), rows
