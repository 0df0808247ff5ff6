"""Interface scheme: gates, fixed points, entropy and one-sided audits."""

import numpy as np
import pytest

from junctionflow import (Grid1D, LimitedCoupling, SCLProblem, check_cfl_scl,
                          discrete_gradient_ode_check, entropy_residual,
                          extract_traces, germ_distance, godunov_coupling,
                          inverse_branch, make_quadratic_flux, oleinik_check,
                          sample_germ, scl_solve, scl_step, tv_check)
from junctionflow.errors import CflError
from junctionflow.scl import SCLState, cell_averages

from conftest import rng

SQ2 = 1.0 / np.sqrt(2.0)


def const_pair(kL, kR):
    return lambda x: kL if x < 0 else kR


def junction_inert_step(H, step_at, lo, hi, side):
    """Riemann step inside one branch with the junction held at a matching
    stationary pair, so audits see a single clean wave."""
    lam = float(H(lo if side == "right" else hi))
    if side == "right":
        other = float(inverse_branch(H, lam, "decreasing"))
        rho = lambda x: other if x < 0 else (lo if x < step_at else hi)
    else:
        other = float(inverse_branch(H, lam, "increasing"))
        rho = lambda x: (lo if x < step_at else hi) if x < 0 else other
    return rho, lam


def test_cfl_examples(quad_box, limited_half):
    rep = check_cfl_scl(Grid1D.from_domain(1.0, 0.01, 0.002), quad_box, limited_half)
    assert rep.ok and rep.gamma == pytest.approx(0.2)
    rep = check_cfl_scl(Grid1D.from_domain(1.0, 0.01, 0.02), quad_box, limited_half)
    assert rep.gamma_ok is False and rep.gamma == pytest.approx(2.0)
    # gamma = 1 exactly is accepted (the monotonicity gate still binds)
    rep = check_cfl_scl(Grid1D.from_domain(1.0, 0.01, 0.01), quad_box, limited_half)
    assert rep.gamma == pytest.approx(1.0) and rep.gamma_ok


def test_solver_refuses_bad_grid(quad_box, limited_half):
    problem = SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2))
    with pytest.raises(CflError):
        scl_solve(problem, Grid1D.from_domain(1.0, 0.01, 0.004), T=0.1)


def test_cell_averages_exact_for_affine():
    grid = Grid1D.from_domain(1.0, 0.05, 0.01)
    vals = cell_averages(lambda x: 0.3 * x + 0.1, grid)
    mids = grid.cell_midpoints
    assert np.max(np.abs(vals - (0.3 * mids + 0.1))) <= 1e-14


def test_zero_steps_returns_cell_averages(quad_box, limited_half):
    grid = Grid1D.from_domain(1.0, 0.05, 0.01)
    problem = SCLProblem(quad_box, limited_half, const_pair(-1.0, 1.0))
    traj = scl_solve(problem, grid, T=0.0)
    assert traj.states.shape[0] == 1


def test_germ_points_are_fixed_points(quad_box, limited_half):
    grid = Grid1D.from_domain(0.5, 0.01, 0.002)
    kL, kR = sample_germ(-0.5, quad_box, 12, rng("scl"), polish=True)
    for i in range(12):
        problem = SCLProblem(quad_box, limited_half, const_pair(kL[i], kR[i]))
        traj = scl_solve(problem, grid, T=1000 * grid.dt,
                         stride=grid.steps_for(1000 * grid.dt))
        assert np.max(np.abs(traj.final - traj.states[0])) <= 1e-13


def test_interior_constant_unchanged(quad_box, limited_half):
    grid = Grid1D.from_domain(1.0, 0.05, 0.01)
    problem = SCLProblem(quad_box, limited_half, const_pair(-1.0, 0.3))
    n = grid.steps_for(0.1)
    traj = scl_solve(problem, grid, T=0.1)
    # junction waves widen one cell per step; beyond that nothing moves
    i0 = grid.junction_cell
    assert np.array_equal(traj.final[i0 + n + 1:], traj.states[0][i0 + n + 1:])
    assert not np.array_equal(traj.final[i0], traj.states[0][i0])


def test_endpoint_pair_fixed_for_general_coupling(quad_box):
    grid = Grid1D.from_domain(1.0, 0.05, 0.01)
    problem = SCLProblem(quad_box, godunov_coupling(quad_box), const_pair(-1.0, -1.0))
    traj = scl_solve(problem, grid, T=0.2)
    assert np.array_equal(traj.final, traj.states[0])


def test_update_monotone_in_each_argument(quad_box, limited_half):
    grid = Grid1D.from_domain(0.5, 0.05, 0.01)
    problem = SCLProblem(quad_box, limited_half, None)
    r = rng("scl")
    for _ in range(25):
        p = r.uniform(-1, 1, grid.n_cells)
        ghosts = (float(p[0]), float(p[-1]))
        base = scl_step(SCLState(p.copy(), 0), problem, grid, ghosts).p
        j = int(r.integers(0, grid.n_cells))
        bump = p.copy()
        bump[j] = min(1.0, bump[j] + 1e-3)
        after = scl_step(SCLState(bump, 0), problem, grid, ghosts).p
        assert np.all(after >= base - 1e-15)


def test_stability_box_holds_on_random_data(quad_box):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    r = rng("scl")
    for coupling in (LimitedCoupling(-0.3, quad_box), godunov_coupling(quad_box)):
        xs = np.linspace(-1, 1, 9)
        vals = r.uniform(-1, 1, 9)
        rho = lambda x: float(np.interp(x, xs, vals))
        problem = SCLProblem(quad_box, coupling, rho)
        traj = scl_solve(problem, grid, T=0.3)
        assert np.all(traj.states >= -1.0 - 1e-12)
        assert np.all(traj.states <= 1.0 + 1e-12)


def test_l1_contraction_against_steady_state(quad_box, limited_half):
    # data matching the stationary pair near the ends, arbitrary inside
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    r = rng("scl")
    xs = np.linspace(-0.5, 0.5, 7)
    vals = r.uniform(-0.9, 0.9, 7)

    def rho(x):
        if x < -0.5:
            return -SQ2
        if x > 0.5:
            return SQ2
        return float(np.interp(x, xs, vals))

    traj = scl_solve(SCLProblem(quad_box, limited_half, rho), grid, T=0.4)
    steady = scl_solve(SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2)),
                       grid, T=0.4)
    dist = np.sum(np.abs(traj.states - steady.states), axis=1) * grid.dx
    assert np.all(np.diff(dist) <= 1e-13)


# ---------------------------------------------------------------------------
# entropy audits
# ---------------------------------------------------------------------------

def test_entropy_audit_constant_in_germ_is_exact(quad_box, limited_half):
    grid = Grid1D.from_domain(0.5, 0.02, 0.004)
    problem = SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2))
    traj = scl_solve(problem, grid, T=0.2)
    audit = entropy_residual(traj, (-SQ2, SQ2))
    assert audit.worst_violation == 0.0
    assert audit.junction_remainder <= 1e-15


def test_entropy_audit_riemann_run(quad_box, limited_half):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    problem = SCLProblem(quad_box, limited_half, const_pair(-1.0, 1.0))
    traj = scl_solve(problem, grid, T=0.4)
    audit = entropy_residual(traj, (-1.0, -1.0))
    assert audit.junction_remainder == 0.0  # zero-flux constants
    assert audit.worst_violation <= 1e-12
    # nonzero remainder constants still satisfy the allowance
    audit = entropy_residual(traj, (0.5, 0.5))
    assert audit.worst_violation <= 1e-12


def test_entropy_audit_general_coupling(quad_box):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    problem = SCLProblem(quad_box, godunov_coupling(quad_box), const_pair(-1.0, 1.0))
    traj = scl_solve(problem, grid, T=0.4)
    audit = entropy_residual(traj, (0.5, 0.5))
    # the coupling agrees with the branch flux at equal constants
    assert audit.junction_remainder == 0.0
    assert audit.worst_violation <= 1e-12


def test_entropy_audit_random_constants(quad_box, limited_half):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    problem = SCLProblem(quad_box, limited_half, const_pair(-1.0, 1.0))
    traj = scl_solve(problem, grid, T=0.3)
    r = rng("scl")
    for _ in range(20):
        k = (float(r.uniform(-1, 1)), float(r.uniform(-1, 1)))
        assert entropy_residual(traj, k).worst_violation <= 1e-12


def test_entropy_audit_rejects_bad_inputs(quad_box, limited_half):
    grid = Grid1D.from_domain(0.5, 0.05, 0.01)
    problem = SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2))
    traj = scl_solve(problem, grid, T=0.1, stride=5)
    with pytest.raises(ValueError):
        entropy_residual(traj, (-SQ2, SQ2))  # strided storage
    full = scl_solve(problem, grid, T=0.1)
    with pytest.raises(ValueError):
        entropy_residual(full, (-3.0, 0.0))  # constants outside the box


# ---------------------------------------------------------------------------
# one-sided estimates and total variation
# ---------------------------------------------------------------------------

@pytest.fixture
def quad_flux_only():
    return make_quadratic_flux(-1.0, 1.0, 1.0)


def run_wave(quad_box, rho, lam, T=400 * 0.002):
    grid = Grid1D.from_domain(2.0, 0.01, 0.002)
    coupling = LimitedCoupling(lam, quad_box)
    return scl_solve(SCLProblem(quad_box, coupling, rho), grid, T)


def test_gradient_decay_constant_state(quad_box, limited_half):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    traj = scl_solve(SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2)),
                     grid, T=0.2)
    assert discrete_gradient_ode_check(traj, "right") == 0.0
    assert discrete_gradient_ode_check(traj, "left") == 0.0


def test_gradient_decay_shock_and_rarefaction(quad_box, quad_flux_only):
    H = quad_flux_only
    # right-branch rarefaction moving right
    rho, lam = junction_inert_step(H, 0.5, 0.2, 0.8, "right")
    traj = run_wave(quad_box, rho, lam)
    assert discrete_gradient_ode_check(traj, "right") <= 1e-10
    # right-branch shock moving right (decreasing data: trivially satisfied)
    rho, lam = junction_inert_step(H, 0.5, 0.8, 0.3, "right")
    traj = run_wave(quad_box, rho, lam)
    assert discrete_gradient_ode_check(traj, "right") == 0.0
    # left-branch rarefaction moving left
    rho, lam = junction_inert_step(H, -0.5, -0.8, -0.2, "left")
    traj = run_wave(quad_box, rho, lam)
    assert discrete_gradient_ode_check(traj, "left") <= 1e-10
    # left-branch shock moving left
    rho, lam = junction_inert_step(H, -0.5, -0.3, -0.8, "left")
    traj = run_wave(quad_box, rho, lam)
    assert discrete_gradient_ode_check(traj, "left") <= 1e-10


def test_oleinik_estimate(quad_box, quad_flux_only):
    H = quad_flux_only
    rho, lam = junction_inert_step(H, 0.5, 0.2, 0.8, "right")
    traj = run_wave(quad_box, rho, lam, T=300 * 0.002)
    assert oleinik_check(traj, 10, 190, "right") <= 1e-10
    rho, lam = junction_inert_step(H, -0.5, -0.3, -0.8, "left")
    traj = run_wave(quad_box, rho, lam, T=300 * 0.002)
    assert oleinik_check(traj, 10, 190, "left") <= 1e-10
    with pytest.raises(ValueError):
        oleinik_check(traj, 10, 5000, "left")


def test_oleinik_step_zero_is_gamma_bound(quad_box, quad_flux_only):
    # at the initial level the bound follows from w <= 2M/dx and gamma <= 1
    H = quad_flux_only
    rho, lam = junction_inert_step(H, 0.5, 0.2, 0.8, "right")
    grid = Grid1D.from_domain(2.0, 0.01, 0.002)
    traj = scl_solve(SCLProblem(quad_box, LimitedCoupling(lam, quad_box), rho),
                     grid, T=10 * grid.dt)
    z = traj.states[0][grid.junction_cell:]
    w0 = np.max(np.diff(z)) / grid.dx
    delta = H.delta
    assert (grid.dt * delta / 8.0) * w0 <= 0.5 + 1e-12


def test_tv_bounds(quad_box, limited_half, quad_flux_only):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    traj = scl_solve(SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2)),
                     grid, T=0.2)
    assert tv_check(traj, 5, 40, 0.0, "right")
    # monotone profile spanning the box stays within 2M
    H = quad_flux_only
    rho, lam = junction_inert_step(H, 0.5, 0.8, 0.3, "right")
    traj = run_wave(quad_box, rho, lam, T=300 * 0.002)
    B = 1.0 / ((1) * traj.grid.dt) * 8.0 / H.delta  # level-0 bound
    assert tv_check(traj, 10, 190, B, "right")


def test_trace_extraction(quad_box, limited_half):
    grid = Grid1D.from_domain(1.0, 0.02, 0.004)
    traj = scl_solve(SCLProblem(quad_box, limited_half, const_pair(-SQ2, SQ2)),
                     grid, T=0.4)
    gL, gR = extract_traces(traj)
    # quadrature of a constant datum is exact to one rounding unit
    assert gL == pytest.approx(-SQ2, abs=1e-15)
    assert gR == pytest.approx(SQ2, abs=1e-15)
    traj = scl_solve(SCLProblem(quad_box, limited_half, const_pair(-1.0, -1.0)),
                     grid, T=0.4)
    assert extract_traces(traj) == (-1.0, -1.0)
    with pytest.raises(ValueError):
        extract_traces(traj, (9.0, 10.0))


def test_riemann_traces_approach_germ_point(quad_box, limited_half):
    grid = Grid1D.from_domain(2.0, 0.01, 0.002)
    traj = scl_solve(SCLProblem(quad_box, limited_half, const_pair(-1.0, 1.0)),
                     grid, T=0.5)
    gL, gR = extract_traces(traj)
    assert abs(gL - (-SQ2)) <= np.sqrt(grid.dx)
    assert abs(gR - SQ2) <= np.sqrt(grid.dx)


def test_germ_distance_values(quad_box):
    A = -0.5
    assert germ_distance(A, (-1.0, -1.0), quad_box) <= 1e-12
    assert germ_distance(A, (-SQ2, SQ2), quad_box) <= 1e-10
    d = germ_distance(A, (0.5, -0.5), quad_box)
    assert d > 0.1
    assert d == pytest.approx(np.sqrt(2) * (SQ2 - 0.5), abs=1e-3)
