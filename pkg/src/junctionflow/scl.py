"""Interface finite-volume scheme for the junction conservation law.

Cell j owns the interface value p at j + 1/2; edge fluxes are branch Godunov
fluxes except at the junction edge j = 0, which carries the coupling rule.
Alongside the solver live the stored-trajectory audits: Kruzhkov entropy
residuals, the one-sided discrete-gradient decay, the localized one-sided
Lipschitz (Oleinik) bound, total-variation bounds, trace extraction and the
distance of a trace pair to the stationary germ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InternalError
from .fluxes import Box, godunov_flux, inverse_branch
from .germs import eval_coupling
from .grid import Grid1D, check_cfl_scl, require

_GAUSS5_X, _GAUSS5_W = np.polynomial.legendre.leggauss(5)
BOX_TOL = 1e-12


@dataclass(frozen=True)
class SCLProblem:
    """Junction conservation law: branch fluxes, coupling rule, initial density."""

    box: Box
    coupling: object
    rho0: Callable | None

    @property
    def M(self) -> float:
        return self.box.M


@dataclass
class SCLState:
    p: np.ndarray
    n: int


@dataclass
class SCLTrajectory:
    problem: SCLProblem
    grid: Grid1D
    times: np.ndarray
    states: np.ndarray  # (n_stored, n_cells)
    stride: int
    ghosts: tuple[float, float]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def cell_averages(rho0: Callable, grid: Grid1D) -> np.ndarray:
    """Per-cell averages of the initial density by 5-point Gauss-Legendre.

    Exact for the piecewise-constant and affine data used throughout, up to
    cells containing a kink.
    """
    left_edges = np.arange(grid.j_min, grid.j_max) * grid.dx
    out = np.empty(grid.n_cells)
    half = 0.5 * grid.dx
    for i, xl in enumerate(left_edges):
        xs = xl + half * (_GAUSS5_X + 1.0)
        out[i] = 0.5 * float(np.dot(_GAUSS5_W, [rho0(x) for x in xs]))
    return out


def _edge_fluxes(p_ext: np.ndarray, problem: SCLProblem, grid: Grid1D) -> np.ndarray:
    """Fluxes at every edge node j_min..j_max from ghost-extended cell values."""
    i0 = grid.junction_cell  # edge array index of node j = 0
    pm = p_ext[:-1]
    pp = p_ext[1:]
    f = np.empty(grid.n_cells + 1)
    f[:i0] = godunov_flux(problem.box.left, pm[:i0], pp[:i0])
    f[i0] = eval_coupling(problem.coupling, pm[i0], pp[i0])
    f[i0 + 1:] = godunov_flux(problem.box.right, pm[i0 + 1:], pp[i0 + 1:])
    return f


def scl_step(state: SCLState, problem: SCLProblem, grid: Grid1D,
             ghosts: tuple[float, float]) -> SCLState:
    """One conservative update; aborts if any cell leaves its branch box."""
    p = state.p
    p_ext = np.empty(grid.n_cells + 2)
    p_ext[0] = ghosts[0]
    p_ext[1:-1] = p
    p_ext[-1] = ghosts[1]
    f = _edge_fluxes(p_ext, problem, grid)
    p_new = p - (grid.dt / grid.dx) * (f[1:] - f[:-1])

    i0 = grid.junction_cell
    HL, HR = problem.box.left, problem.box.right
    bad_left = (np.any(p_new[:i0] < HL.a - BOX_TOL)
                or np.any(p_new[:i0] > HL.c + BOX_TOL))
    bad_right = (np.any(p_new[i0:] < HR.a - BOX_TOL)
                 or np.any(p_new[i0:] > HR.c + BOX_TOL))
    if bad_left or bad_right:
        off = np.concatenate([
            np.maximum(HL.a - p_new[:i0], p_new[:i0] - HL.c),
            np.maximum(HR.a - p_new[i0:], p_new[i0:] - HR.c)])
        j = int(np.argmax(off)) + grid.j_min
        raise InternalError(
            f"stability box violated at cell {j} + 1/2 by {np.max(off):.3e}; "
            "the monotone scheme cannot do this under the step-size gates")
    return SCLState(p=p_new, n=state.n + 1)


def scl_solve(problem: SCLProblem, grid: Grid1D, T: float, stride: int = 1,
              initial: np.ndarray | None = None) -> SCLTrajectory:
    """March to time T under both step-size gates.

    ``initial`` overrides the Gauss-Legendre cell averages of rho0 (used by
    the paired runs, which initialize from discrete slopes of the node
    datum).  Ghost cells freeze the initial end values.
    """
    require(check_cfl_scl(grid, problem.box, problem.coupling), "interface scheme")
    if initial is not None:
        p = np.asarray(initial, dtype=float).copy()
        if p.shape != (grid.n_cells,):
            raise ValueError(f"initial override has shape {p.shape}, "
                             f"expected ({grid.n_cells},)")
    else:
        if problem.rho0 is None:
            raise ValueError("problem has no initial density and no override was given")
        p = cell_averages(problem.rho0, grid)

    i0 = grid.junction_cell
    HL, HR = problem.box.left, problem.box.right
    if (np.any(p[:i0] < HL.a - 1e-8) or np.any(p[:i0] > HL.c + 1e-8)
            or np.any(p[i0:] < HR.a - 1e-8) or np.any(p[i0:] > HR.c + 1e-8)):
        raise ValueError("initial density leaves the branch boxes")
    np.clip(p[:i0], HL.a, HL.c, out=p[:i0])
    np.clip(p[i0:], HR.a, HR.c, out=p[i0:])

    ghosts = (float(p[0]), float(p[-1]))
    state = SCLState(p=p, n=0)
    n_steps = grid.steps_for(T)
    stored = [state.p.copy()]
    times = [0.0]
    for _ in range(n_steps):
        state = scl_step(state, problem, grid, ghosts)
        if state.n % stride == 0 or state.n == n_steps:
            stored.append(state.p.copy())
            times.append(state.n * grid.dt)
    return SCLTrajectory(problem=problem, grid=grid, times=np.asarray(times),
                         states=np.asarray(stored), stride=stride, ghosts=ghosts)


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

@dataclass
class EntropyAudit:
    k: tuple[float, float]
    worst_violation: float
    junction_remainder: float
    worst_index: tuple[int, int] | None = None
    cell_flags: np.ndarray | None = field(default=None, repr=False)


def _entropy_numerical_flux(traj: SCLTrajectory, row: int, kL: float, kR: float):
    """Kruzhkov numerical entropy flux at every interior edge at one time level."""
    grid = traj.grid
    problem = traj.problem
    p = traj.states[row]
    i0 = grid.junction_cell
    HL, HR = problem.box.left, problem.box.right
    pm, pp = p[:-1], p[1:]  # edges between stored cells (nodes j_min+1..j_max-1)
    edge_node = np.arange(grid.j_min + 1, grid.j_max)
    phi = np.empty(pm.shape)
    left = edge_node <= -1
    right = edge_node >= 1
    phi[left] = (godunov_flux(HL, np.maximum(pm[left], kL), np.maximum(pp[left], kL))
                 - godunov_flux(HL, np.minimum(pm[left], kL), np.minimum(pp[left], kL)))
    phi[right] = (godunov_flux(HR, np.maximum(pm[right], kR), np.maximum(pp[right], kR))
                  - godunov_flux(HR, np.minimum(pm[right], kR), np.minimum(pp[right], kR)))
    jx = i0 - 1  # edge node 0 position within the interior-edge array
    phi[jx] = (eval_coupling(problem.coupling, max(pm[jx], kL), max(pp[jx], kR))
               - eval_coupling(problem.coupling, min(pm[jx], kL), min(pp[jx], kR)))
    return phi


def entropy_residual(traj: SCLTrajectory, k: tuple[float, float]) -> EntropyAudit:
    """Audit the per-cell Kruzhkov inequalities of a full-stride trajectory.

    For Kruzhkov constant pair k the inequality reads, cell by cell,

        (|p' - k| - |p - k|)/dt + (phi_right - phi_left)/dx <= allowance

    with allowance |H_alpha(k_alpha) - F(kL, kR)|/dx in the two junction
    cells and 0 elsewhere.  Returns the largest positive excess over the
    allowance across all steps and cells with a full interior stencil.
    """
    if traj.stride != 1:
        raise ValueError("entropy audit needs a full-stride trajectory")
    grid = traj.grid
    problem = traj.problem
    kL, kR = float(k[0]), float(k[1])
    box = problem.box
    if not box.contains(kL, kR):
        raise ValueError(f"constants {k} outside the state box")

    i0 = grid.junction_cell
    f_k = eval_coupling(problem.coupling, kL, kR)
    R_L = abs(box.left(kL) - f_k)
    R_R = abs(box.right(kR) - f_k)

    # cells with both their edges interior: j_min+1 .. j_max-2
    cells = np.arange(grid.j_min + 1, grid.j_max - 1)
    k_cell = np.where(cells <= -1, kL, kR)
    allowance = np.zeros(cells.shape)
    allowance[cells == -1] = R_L / grid.dx
    allowance[cells == 0] = R_R / grid.dx

    worst = 0.0
    worst_idx = None
    flags = np.zeros(cells.shape, dtype=bool)
    for row in range(traj.states.shape[0] - 1):
        p_now = traj.states[row][1:-1]
        p_next = traj.states[row + 1][1:-1]
        phi = _entropy_numerical_flux(traj, row, kL, kR)
        lhs = ((np.abs(p_next - k_cell) - np.abs(p_now - k_cell)) / grid.dt
               + (phi[1:] - phi[:-1]) / grid.dx)
        excess = lhs - allowance
        flags |= excess > 0.0
        m = float(np.max(excess))
        if m > worst:
            worst = m
            worst_idx = (row, int(np.argmax(excess)) + grid.j_min + 1)
    return EntropyAudit(k=(kL, kR), worst_violation=max(0.0, worst),
                        junction_remainder=R_L + R_R,
                        worst_index=worst_idx, cell_flags=flags)


def branch_profile(traj: SCLTrajectory, branch: str) -> np.ndarray:
    """One-branch cell sequence z[n, m], junction-adjacent cell first.

    The right branch is taken as is.  The left branch is mirrored AND
    negated: z_m = -p at cell (-m-1).  The sign flip turns the left flux
    into the convex flux s -> H_L(-s), so the one-branch scheme and its
    one-sided gradient estimates apply in their stated (convex) form; the
    resulting discrete gradient of z equals the original spatial gradient.
    """
    i0 = traj.grid.junction_cell
    if branch == "right":
        return traj.states[:, i0:]
    if branch == "left":
        return -traj.states[:, :i0][:, ::-1]
    raise ValueError(f"branch must be 'left' or 'right', got {branch!r}")


def _branch_delta(traj: SCLTrajectory, branch: str) -> float:
    flux = traj.problem.box.right if branch == "right" else traj.problem.box.left
    return flux.delta


def _branch_lipschitz(traj: SCLTrajectory, branch: str) -> float:
    flux = traj.problem.box.right if branch == "right" else traj.problem.box.left
    return flux.lipschitz


def discrete_gradient_ode_check(traj: SCLTrajectory, branch: str) -> float:
    """Largest violation of the one-sided gradient decay inequality.

    With w the branch discrete gradient and what its local running max with
    0, the scheme satisfies (max(0, w') - what)/dt <= -(delta/8) what^2 away
    from the junction and the outer boundary.  Returns the positive part of
    the worst excess (0 means the inequality held everywhere).
    """
    if traj.stride != 1:
        raise ValueError("gradient audit needs a full-stride trajectory")
    z = branch_profile(traj, branch)
    grid = traj.grid
    delta = _branch_delta(traj, branch)
    w = (z[:, 1:] - z[:, :-1]) / grid.dx  # w[:, m-1] is w_m, m >= 1
    if w.shape[1] < 4:
        raise ValueError("branch too short for the gradient audit")
    what = np.maximum(np.maximum(w[:, :-2], w[:, 1:-1]), np.maximum(w[:, 2:], 0.0))
    # what[:, m-2] is what_m for m >= 2; the inequality needs cells m-1 and m
    # updated by the pure one-branch scheme, so m runs over [2, m_hi] with
    # m_hi the last interior-updated cell
    m_hi = z.shape[1] - 2
    lhs = (np.maximum(0.0, w[1:, 1:m_hi]) - what[:-1, : m_hi - 1]) / grid.dt
    rhs = -(delta / 8.0) * what[:-1, : m_hi - 1] ** 2
    return float(max(0.0, np.max(lhs - rhs)))


def oleinik_check(traj: SCLTrajectory, J1: int, J2: int, branch: str) -> float:
    """Largest violation of the localized one-sided Lipschitz estimate.

    Checks (delta/8) sup over the shrinking window [J1+n, J2-n] of w^n
    against 1/((n+1) dt) for 0 <= n <= (J2 - J1)/2, in branch-local cell
    indices (the junction-adjacent cell is 0).  Returns the positive part
    of the worst excess.
    """
    if traj.stride != 1:
        raise ValueError("the estimate needs a full-stride trajectory")
    z = branch_profile(traj, branch)
    grid = traj.grid
    delta = _branch_delta(traj, branch)
    if not (2 <= J1 < J2 <= z.shape[1] - 2):
        raise ValueError(f"window [{J1}, {J2}] outside the branch interior")
    w = (z[:, 1:] - z[:, :-1]) / grid.dx  # w[:, m-1] = w_m
    n_max = min(traj.states.shape[0] - 1, (J2 - J1) // 2)
    worst = 0.0
    for n in range(n_max + 1):
        lo, hi = J1 + n, J2 - n
        sup_w = float(np.max(w[n, lo - 1:hi]))
        worst = max(worst, (delta / 8.0) * sup_w - 1.0 / ((n + 1) * grid.dt))
    return max(0.0, worst)


def tv_check(traj: SCLTrajectory, J1: int, J2: int, B: float, branch: str,
             n: int | None = None) -> bool:
    """Window total-variation bounds under a one-sided gradient bound B.

    Space: sum over [J1, J2-1] of |z_j - z_{j-1}| <= 2M + 2B (J2-J1) dx.
    Time: the one-step l1 change over [J1+1, J2-1] is at most 2 L dt/dx
    times that bound.  ``n`` selects one time level; None checks all.
    """
    z = branch_profile(traj, branch)
    grid = traj.grid
    if not (1 <= J1 < J2 <= z.shape[1] - 1):
        raise ValueError(f"window [{J1}, {J2}] outside the branch")
    M = traj.problem.M
    L = _branch_lipschitz(traj, branch)
    space_cap = 2.0 * M + 2.0 * max(B, 0.0) * (J2 - J1) * grid.dx
    time_cap = 2.0 * L * (grid.dt / grid.dx) * space_cap
    rows = range(traj.states.shape[0] - 1) if n is None else [n]
    for row in rows:
        tv = float(np.sum(np.abs(np.diff(z[row, J1 - 1:J2]))))
        if tv > space_cap + 1e-12:
            return False
        step = float(np.sum(np.abs(z[row + 1, J1:J2 - 1] - z[row, J1:J2 - 1])))
        if step > time_cap + 1e-12:
            return False
    return True


def extract_traces(traj: SCLTrajectory,
                   t_window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Time-averaged junction-adjacent cell values over a window.

    Defaults to the last quarter of the run, which suppresses the staircase
    oscillation of the scheme's junction boundary layer.
    """
    T = traj.times[-1]
    if t_window is None:
        t_window = (0.75 * T, T)
    t1, t2 = t_window
    rows = (traj.times >= t1 - 1e-12) & (traj.times <= t2 + 1e-12)
    if not np.any(rows):
        raise ValueError(f"window {t_window} selects no stored steps")
    i0 = traj.grid.junction_cell
    gL = float(np.mean(traj.states[rows, i0 - 1]))
    gR = float(np.mean(traj.states[rows, i0]))
    return gL, gR


_DIST_SIDES = (("decreasing", "decreasing"),
               ("increasing", "increasing"),
               ("increasing", "decreasing"))


def _germ_candidates(A: float, box: Box, n_lam: int,
                     lam_lo: float, lam_hi: float) -> np.ndarray:
    lam = np.linspace(lam_lo, lam_hi, n_lam)
    pts = []
    for sL, sR in _DIST_SIDES:
        kL = inverse_branch(box.left, lam, sL)
        kR = inverse_branch(box.right, lam, sR)
        pts.append(np.column_stack([kL, kR]))
    # the fourth side combination is admissible exactly at level A
    kL = inverse_branch(box.left, A, "decreasing")
    kR = inverse_branch(box.right, A, "increasing")
    pts.append(np.array([[kL, kR]]))
    return np.vstack(pts)


def germ_distance(A: float, traces: tuple[float, float], box: Box,
                  n_lam: int = 1000) -> float:
    """Euclidean distance from a trace pair to the stationary germ.

    The germ is parameterized by flux level on each admissible side
    combination; the minimum over a level grid is refined once tenfold
    around the incumbent.
    """
    if not (box.H0 - 1e-12 <= A <= 1e-12):
        raise ValueError(f"A={A} outside [{box.H0}, 0]")
    g = np.asarray(traces, dtype=float)
    if A >= -1e-15:
        cand = _germ_candidates(0.0, box, 1, 0.0, 0.0)
        return float(np.min(np.linalg.norm(cand - g, axis=1)))
    cand = _germ_candidates(A, box, n_lam, A, 0.0)
    d = np.linalg.norm(cand - g, axis=1)
    best = float(np.min(d))
    lam_grid = np.linspace(A, 0.0, n_lam)
    lam_best = lam_grid[int(np.argmin(d)) % n_lam] if int(np.argmin(d)) < 3 * n_lam else A
    width = (0.0 - A) / (n_lam - 1)
    lo = max(A, lam_best - 2 * width)
    hi = min(0.0, lam_best + 2 * width)
    cand = _germ_candidates(A, box, n_lam, lo, hi)
    best = min(best, float(np.min(np.linalg.norm(cand - g, axis=1))))
    return best
