"""Explicit Godunov scheme for the junction Hamilton-Jacobi problem.

Node values evolve by u_j^{n+1} = u_j^n - dt * G_j where G_j is the branch
Godunov numerical Hamiltonian of the two neighbouring discrete slopes, and
the junction node uses the coupling rule instead.  The domain is truncated
to [-W, W] with frozen-slope ghost nodes; probes are expected to stay out
of the boundary influence cones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InternalError
from .fluxes import Box, godunov_flux, legendre
from .germs import LimitedCoupling, eval_coupling
from .grid import Grid1D, check_cfl_hj, coupling_speed, require


@dataclass(frozen=True)
class HJProblem:
    """Junction Hamilton-Jacobi problem: branch fluxes, coupling rule, datum."""

    box: Box
    coupling: object
    u0: Callable
    half_width: float


@dataclass
class HJState:
    u: np.ndarray
    n: int


@dataclass
class HJTrajectory:
    problem: HJProblem
    grid: Grid1D
    times: np.ndarray          # stored time levels
    states: np.ndarray         # (n_stored, n_nodes)
    junction_values: np.ndarray  # u at the junction node for every step
    stride: int

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def slopes(self, row: int) -> np.ndarray:
        return np.diff(self.states[row]) / self.grid.dx


def initial_state(problem: HJProblem, grid: Grid1D) -> HJState:
    u = np.array([problem.u0(x) for x in grid.nodes], dtype=float)
    return HJState(u=u, n=0)


def ghost_slopes(problem: HJProblem, grid: Grid1D) -> tuple[float, float]:
    """Frozen end slopes, taken from the initial datum's end cells.

    Using the discrete end slopes (rather than a pointwise derivative of the
    datum) keeps the gradient identity with the interface scheme exact in
    the boundary cells as well.
    """
    nodes = grid.nodes
    gL = (problem.u0(nodes[1]) - problem.u0(nodes[0])) / grid.dx
    gR = (problem.u0(nodes[-1]) - problem.u0(nodes[-2])) / grid.dx
    return float(gL), float(gR)


def _node_fluxes(p_ext: np.ndarray, problem: HJProblem, grid: Grid1D) -> np.ndarray:
    """Numerical Hamiltonian per node from extended slopes (ghosts included)."""
    i0 = grid.junction_node
    pm = p_ext[:-1]
    pp = p_ext[1:]
    g = np.empty(grid.n_nodes)
    g[:i0] = godunov_flux(problem.box.left, pm[:i0], pp[:i0])
    g[i0] = eval_coupling(problem.coupling, pm[i0], pp[i0])
    g[i0 + 1:] = godunov_flux(problem.box.right, pm[i0 + 1:], pp[i0 + 1:])
    return g


def hj_step(state: HJState, problem: HJProblem, grid: Grid1D,
            ghosts: tuple[float, float] | None = None) -> HJState:
    """One explicit update of every node (interior, junction, and boundary)."""
    gL, gR = ghosts if ghosts is not None else ghost_slopes(problem, grid)
    u = state.u
    p_ext = np.empty(grid.n_nodes + 1)
    p_ext[0] = gL
    p_ext[1:-1] = np.diff(u) / grid.dx
    p_ext[-1] = gR
    g = _node_fluxes(p_ext, problem, grid)
    u_new = u - grid.dt * g
    if not np.all(np.isfinite(u_new)):
        bad = int(np.nonzero(~np.isfinite(u_new))[0][0])
        raise InternalError(f"non-finite node value at j = {bad + grid.j_min}")
    return HJState(u=u_new, n=state.n + 1)


def hj_solve(problem: HJProblem, grid: Grid1D, T: float,
             stride: int = 1) -> HJTrajectory:
    """March to time T under the monotonicity gate; stores every ``stride``-th state."""
    require(check_cfl_hj(grid, problem.box, problem.coupling), "node scheme")
    n_steps = grid.steps_for(T)
    state = initial_state(problem, grid)

    p0 = np.diff(state.u) / grid.dx
    i0 = grid.junction_cell
    HL, HR = problem.box.left, problem.box.right
    if (np.any(p0[:i0] < HL.a - 1e-8) or np.any(p0[:i0] > HL.c + 1e-8)
            or np.any(p0[i0:] < HR.a - 1e-8) or np.any(p0[i0:] > HR.c + 1e-8)):
        raise ValueError("initial datum has slopes outside the branch boxes")

    ghosts = ghost_slopes(problem, grid)
    stored = [state.u.copy()]
    times = [0.0]
    junction = np.empty(n_steps + 1)
    junction[0] = state.u[grid.junction_node]
    for _ in range(n_steps):
        state = hj_step(state, problem, grid, ghosts)
        junction[state.n] = state.u[grid.junction_node]
        if state.n % stride == 0 or state.n == n_steps:
            stored.append(state.u.copy())
            times.append(state.n * grid.dt)
    return HJTrajectory(problem=problem, grid=grid, times=np.asarray(times),
                        states=np.asarray(stored), junction_values=junction,
                        stride=stride)


def sample_u(traj: HJTrajectory, t: float, x: float) -> float:
    """Evaluate the numerical interpolant: constant in t over a step,
    linear in x over a cell with the discrete slope."""
    grid = traj.grid
    t_max = traj.times[-1]
    if t < -1e-12 or t > t_max + 1e-12:
        raise ValueError(f"time {t} outside the stored window [0, {t_max}]")
    row = int(np.searchsorted(traj.times, t + 1e-12) - 1)
    row = max(0, min(row, len(traj.times) - 1))
    if abs(traj.times[row] - t) > grid.dt * traj.stride + 1e-12:
        raise ValueError("requested time not covered by the stored stride")
    nodes = grid.nodes
    if x < nodes[0] - 1e-12 or x > nodes[-1] + 1e-12:
        raise ValueError(f"position {x} outside [{nodes[0]}, {nodes[-1]}]")
    j = int(math.floor(x / grid.dx)) - grid.j_min
    j = max(0, min(j, grid.n_nodes - 2))
    u_row = traj.states[row]
    slope = (u_row[j + 1] - u_row[j]) / grid.dx
    return float(u_row[j] + slope * (x - nodes[j]))


def _leg_cost(L_of, duration, displacement):
    """Cost of one straight trajectory leg; degenerate legs cost 0 or inf."""
    duration = np.asarray(duration, dtype=float)
    displacement = np.asarray(displacement, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(duration > 0.0, displacement / np.where(duration > 0, duration, 1.0), 0.0)
        cost = np.where(duration > 0.0, duration * L_of(v), 0.0)
    cost = np.where((duration <= 0.0) & (np.abs(displacement) > 0.0), np.inf, cost)
    return cost


def lax_oleinik_oracle(box: Box, A: float, u0: Callable, t0: float, x0: float,
                       T: float, target: float = 1e-3,
                       n_y: int = 400, n_tau: int = 200) -> float:
    """Variational value of the flux-limited problem at (elapsed time, x0).

    Works in the reversed-time convention: the returned value is the
    solution at elapsed time T - t0.  Trajectories either run straight to a
    final point on their own branch, or run to the junction, wait there at
    running cost -A, and leave for either branch.  Each class is minimized
    on a grid over (switch times, endpoint) with one tenfold local
    refinement; a warning is issued when the two passes disagree by more
    than ``target``.
    """
    if not (box.H0 - 1e-12 <= A <= 1e-12):
        raise ValueError(f"A={A} outside [{box.H0}, 0]")
    s = T - t0
    if s < 0:
        raise ValueError("t0 must not exceed the horizon T")
    if s == 0:
        return float(u0(x0))

    LL = lambda q: legendre(box.left, q)
    LR = lambda q: legendre(box.right, q)
    speed = coupling_speed(box, LimitedCoupling(A, box))
    span = speed * s + 1.0

    def u0_arr(y):
        return np.array([u0(v) for v in np.atleast_1d(y)], dtype=float)

    def evaluate(tau1, tau2, y_left, y_right):
        """Minimum over the three trajectory classes on the given grids."""
        # direct legs on the starting branch
        best_direct = np.inf
        if x0 <= 0.0:
            best_direct = float(np.min(_leg_cost(LL, s, y_left - x0) + u0_arr(y_left)))
        if x0 >= 0.0:
            direct_r = float(np.min(_leg_cost(LR, s, y_right - x0) + u0_arr(y_right)))
            best_direct = min(best_direct, direct_r)

        # first leg to the junction, indexed by tau1
        L_first = LL if x0 < 0.0 else LR
        first = _leg_cost(L_first, tau1 - t0, 0.0 - x0)

        # last legs leaving the junction at tau2, each minimized over y
        dur2 = T - tau2
        last_left = np.min(_leg_cost(LL, dur2[:, None], y_left[None, :])
                           + u0_arr(y_left)[None, :], axis=1)
        last_right = np.min(_leg_cost(LR, dur2[:, None], y_right[None, :])
                            + u0_arr(y_right)[None, :], axis=1)
        last = np.minimum(last_left, last_right)

        # combine over tau1 <= tau2 with waiting cost -A (tau2 - tau1)
        total = (first[:, None] - A * (tau2[None, :] - tau1[:, None]) + last[None, :])
        total = np.where(tau1[:, None] <= tau2[None, :] + 1e-15, total, np.inf)
        i, j = np.unravel_index(np.argmin(total), total.shape)
        iy_l = int(np.argmin(_leg_cost(LL, T - tau2[j], y_left) + u0_arr(y_left)))
        iy_r = int(np.argmin(_leg_cost(LR, T - tau2[j], y_right) + u0_arr(y_right)))
        best_via = float(total[i, j])
        value = min(best_direct, best_via)
        return value, (tau1[i], tau2[j], y_left[iy_l], y_right[iy_r])

    tau = np.linspace(t0, T, n_tau)
    y_left = np.linspace(min(x0 - span, -span), 0.0, n_y)
    y_right = np.linspace(0.0, max(x0 + span, span), n_y)
    v1, (t1, t2, yl, yr) = evaluate(tau, tau, y_left, y_right)

    def refine(grid_pts, center, lo_cap, hi_cap):
        width = (grid_pts[-1] - grid_pts[0]) / (len(grid_pts) - 1)
        lo = max(lo_cap, center - 2 * width)
        hi = min(hi_cap, center + 2 * width)
        return np.linspace(lo, hi, len(grid_pts))

    v2, _ = evaluate(refine(tau, t1, t0, T), refine(tau, t2, t0, T),
                     refine(y_left, yl, y_left[0], 0.0),
                     refine(y_right, yr, 0.0, y_right[-1]))
    value = min(v1, v2)
    if abs(v1 - v2) > target:
        warnings.warn(
            f"variational oracle refinement moved by {abs(v1 - v2):.3e} "
            f"(> {target:.1e}) at (t0={t0}, x0={x0})", stacklevel=2)
    return float(value)
