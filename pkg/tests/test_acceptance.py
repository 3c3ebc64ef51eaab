"""
End-to-end accuracy and conservation studies on the solitary-wave and collision setups.
These take minutes; run with `pytest -m slow`.
"""

import os

import pytest

from zrsolver.cn_stepper import CNFPStepper
from zrsolver.experiments import cmd_collide, cmd_compare, cmd_converge_space, cmd_converge_time
from zrsolver.invariants import linear_invariants, mass, state_difference
from zrsolver.model import initial_single
from zrsolver.oracle import dense_diff_matrix, interpolation_error, newton_stage_solve
from zrsolver.rk_stepper import RKStepperConfig, build_stage_solver
from zrsolver.Simulation import RunConfig, Simulation
from zrsolver.spectral import build_grid, grid_from_spacing
from zrsolver.tableau import gauss_tableau

pytestmark = pytest.mark.slow

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@pytest.fixture
def fine_grid():
    return grid_from_spacing(-32.0, 32.0, 1.0 / 16.0)


def _rates_above_floor(rows, floor):
    # rows: tau, e_B, rate_B, e_rho, rate_rho, e_u, rate_u, oracle
    rates = []
    for row in rows[1:]:
        for e_col, r_col in ((1, 2), (3, 4), (5, 6)):
            if row[e_col] > floor:
                rates.append(row[r_col])
    return rates


def test_fourth_order_in_time(tmp_path):
    config = RunConfig(
        scheme="fprk2", taus=[0.1 / 2**k for k in range(6)], out_dir=str(tmp_path)
    )
    result = cmd_converge_time(config)
    rows = result["rows"]
    assert result["oracle"] == "exact"
    rates = _rates_above_floor(rows, 1e-11)
    assert rates
    assert all(3.85 <= r <= 4.15 for r in rates), rates
    assert 1.05e-5 / 3 <= rows[0][1] <= 1.05e-5 * 3


def test_sixth_order_in_time(tmp_path):
    config = RunConfig(
        scheme="fprk3", taus=[0.4 / 2**k for k in range(6)], out_dir=str(tmp_path)
    )
    rows = cmd_converge_time(config)["rows"]
    rates = _rates_above_floor(rows, 1e-11)
    assert rates
    assert all(5.5 <= r <= 6.5 for r in rates), rates


def test_spectral_convergence_in_space(tmp_path):
    config = RunConfig(hs=[1.0, 0.5, 0.25], tau=1e-3, T=4.0, out_dir=str(tmp_path))
    rows = cmd_converge_space(config)["rows"]
    e_B = [row[2] for row in rows]
    assert e_B[0] / e_B[1] >= 1e2
    assert e_B[1] / e_B[2] >= 1e2
    assert e_B[2] <= 1e-7


def test_conservation_smoke(tmp_path):
    config = RunConfig(h=1.0 / 16.0, tau=1.0 / 50.0, T=20.0, cadence=50, out_dir=str(tmp_path))
    d = Simulation(config).run()["invariants"].drift()
    for name in ("mass", "energyQ", "hamiltonian"):
        assert d[name]["rel"] <= 1e-10, (name, d[name])
    for name in ("i1", "i2"):
        assert d[name]["abs"] <= 1e-10 * (1 + abs(d[name]["initial"]))
    assert d["qav_residual"]["max"] <= 1e-11


def test_linear_invariants_without_symplecticity(params, spec, fine_grid):
    solver = build_stage_solver(fine_grid, params, "euler-implicit", 1.0 / 20.0)
    state0 = initial_single(params, spec, fine_grid)
    state, _ = solver.integrate(state0, 50.0, cadence=100)
    i1, i2 = linear_invariants(fine_grid, state0)
    j1, j2 = linear_invariants(fine_grid, state)
    assert abs(j1 - i1) <= 1e-12
    assert abs(j2 - i2) <= 1e-12
    m0 = mass(fine_grid, state0)
    assert abs(mass(fine_grid, state) - m0) / m0 > 1e-6


def test_midpoint_is_crank_nicolson_over_many_steps(params, spec, fine_grid):
    fprk = build_stage_solver(fine_grid, params, "gauss1", 1.0 / 50.0)
    cn = CNFPStepper(fine_grid, params, RKStepperConfig(tableau="gauss1", tau=1.0 / 50.0))
    a = b = initial_single(params, spec, fine_grid)
    for _ in range(100):
        a, _ = fprk.step(a)
        b, _ = cn.step(b)
    assert max(state_difference(a, b)) <= 1e-11


@pytest.mark.parametrize("s", [1, 2])
def test_newton_oracle_equivalence(params, spec, s):
    grid = build_grid(-32.0, 32.0, 16)
    state = initial_single(params, spec, grid)
    reference = newton_stage_solve(grid, params, gauss_tableau(s), 1.0 / 50.0, state)
    slopes, _ = build_stage_solver(grid, params, gauss_tableau(s), 1.0 / 50.0).fixed_point_stage_solve(state)
    assert slopes.max_difference(reference) <= 1e-12


@pytest.mark.parametrize("N", [16, 32])
def test_dense_operator_equivalence(N, rng):
    grid = build_grid(-32.0, 32.0, N)
    for m in (1, 2):
        op = dense_diff_matrix(grid, m)
        worst = max(interpolation_error(grid, op, rng.standard_normal(N)) for _ in range(100))
        assert worst <= 1e-12


def test_time_symmetry(params, spec, fine_grid):
    state = initial_single(params, spec, fine_grid)
    there, _ = build_stage_solver(fine_grid, params, "gauss2", 1.0 / 50.0).step(state)
    back, _ = build_stage_solver(fine_grid, params, "gauss2", -1.0 / 50.0).step(there)
    assert max(state_difference(state, back)) <= 1e-10


def test_collision_is_inelastic(tmp_path):
    config = RunConfig(case="II", cadence=400, out_dir=str(tmp_path))
    payload = Simulation(config).run()["payload"]
    assert payload["collision_discrepancy"] > 1e-2
    assert payload["drift"]["mass"]["rel"] <= 1e-10


def test_long_conservation_run(tmp_path):
    config = RunConfig.from_toml(os.path.join(CONFIG_DIR, "conservation.toml"), out_dir=str(tmp_path))
    result = Simulation(config).run()
    assert result["state"].t == pytest.approx(200.0)
    assert result["payload"]["iterations"]["nonconverged_steps"] == 0
    d = result["invariants"].drift()
    for name in ("mass", "energyQ", "hamiltonian"):
        assert d[name]["rel"] <= 1e-10, (name, d[name])
    for name in ("i1", "i2"):
        assert d[name]["abs"] <= 1e-10 * (1 + abs(d[name]["initial"]))
    assert d["qav_residual"]["max"] <= 1e-11
    snapshot_times = [snap.t for snap in result["snapshots"].snapshots]
    assert snapshot_times == pytest.approx([10.0 * k for k in range(21)])


def test_scheme_comparison(tmp_path):
    rows = cmd_compare(RunConfig(out_dir=str(tmp_path)))["rows"]
    e_B = {(row[0], row[1]): row[2] for row in rows}
    assert 3.22e-3 / 3 <= e_B[("cnfp", 0.05)] <= 3.22e-3 * 3
    assert 1.05e-5 / 3 <= e_B[("fprk2", 0.1)] <= 1.05e-5 * 3
    for tau in (0.2, 0.1, 0.05, 0.025, 0.0125):
        assert e_B[("cnfp", tau)] == pytest.approx(e_B[("fprk1", tau)], rel=1e-6)
        assert e_B[("fprk3", tau)] < e_B[("fprk2", tau)] < e_B[("fprk1", tau)]


@pytest.mark.parametrize(
    "case, cadence, snapshot_cadence, before",
    [("I", 25, 50, 0.25), ("III", 200, 1000, 5.0)],
)
def test_collision_runs_to_final_time(tmp_path, case, cadence, snapshot_cadence, before):
    config = RunConfig(case=case, cadence=cadence, snapshot_cadence=snapshot_cadence, out_dir=str(tmp_path))
    result = cmd_collide(config)
    payload = result["payload"]
    assert result["state"].t == pytest.approx(config.T)
    assert payload["iterations"]["nonconverged_steps"] == 0
    assert payload["drift"]["mass"]["rel"] <= 1e-10
    assert payload["drift"]["energyQ"]["rel"] <= 1e-10

    series = dict((round(t, 9), value) for t, value in result["discrepancy"])
    assert series[0.0] == 0.0
    assert series[round(config.T, 9)] > 10.0 * series[before]
    assert (tmp_path / "collision.csv").exists()
