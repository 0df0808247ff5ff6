"""Uniform space-time grids and the two explicit time-step gates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CflError

# non-strict gate comparisons tolerate this much relative rounding
_GATE_RTOL = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Nodes x_j = j dx for j_min <= j <= j_max, junction at j = 0."""

    dx: float
    dt: float
    j_min: int
    j_max: int
    n_steps: int | None = None

    def __post_init__(self):
        if self.dx <= 0 or self.dt <= 0:
            raise ValueError("dx and dt must be positive")
        if not (self.j_min < 0 < self.j_max):
            raise ValueError("the junction node j = 0 must be interior")

    @classmethod
    def from_domain(cls, half_width: float, dx: float, dt: float,
                    n_steps: int | None = None) -> "Grid1D":
        j = max(1, round(half_width / dx))
        return cls(dx=dx, dt=dt, j_min=-j, j_max=j, n_steps=n_steps)

    @property
    def n_nodes(self) -> int:
        return self.j_max - self.j_min + 1

    @property
    def n_cells(self) -> int:
        return self.j_max - self.j_min

    @property
    def junction_node(self) -> int:
        """Array index of node j = 0."""
        return -self.j_min

    @property
    def junction_cell(self) -> int:
        """Array index of the cell owning the interface value at j + 1/2 = 1/2."""
        return -self.j_min

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1) * self.dx

    @property
    def cell_midpoints(self) -> np.ndarray:
        return (np.arange(self.j_min, self.j_max) + 0.5) * self.dx

    def steps_for(self, T: float) -> int:
        if self.n_steps is not None:
            return self.n_steps
        return max(0, math.ceil(T / self.dt - 1e-9))


@dataclass(frozen=True)
class CflReport:
    l_h: float
    ratio: float
    cfl_ok: bool
    max_dt: float
    gamma: float | None = None
    gamma_ok: bool | None = None

    @property
    def ok(self) -> bool:
        return self.cfl_ok and (self.gamma_ok is not False)

    def as_dict(self) -> dict:
        return {
            "l_h": self.l_h,
            "ratio_dx_over_dt": self.ratio,
            "cfl_ok": self.cfl_ok,
            "max_admissible_dt": self.max_dt,
            "gamma": self.gamma,
            "gamma_ok": self.gamma_ok,
        }


def coupling_speed(box, coupling) -> float:
    """Largest propagation speed seen by either scheme: branch Lipschitz
    constants and the declared partial slopes of the junction rule."""
    b1, b2 = coupling.lipschitz_bounds
    return max(box.left.lipschitz, box.right.lipschitz, b1, b2)


def check_cfl_hj(grid: Grid1D, box, coupling) -> CflReport:
    """Monotonicity gate dx/dt >= 2 L for the node scheme (non-strict)."""
    l_h = coupling_speed(box, coupling)
    ratio = grid.dx / grid.dt
    ok = ratio >= 2.0 * l_h * (1.0 - _GATE_RTOL)
    return CflReport(l_h=l_h, ratio=ratio, cfl_ok=ok, max_dt=grid.dx / (2.0 * l_h))


def check_cfl_scl(grid: Grid1D, box, coupling) -> CflReport:
    """Both interface-scheme gates: dx/dt >= 2 L and gamma = (dt/dx)(delta/2) M <= 1."""
    base = check_cfl_hj(grid, box, coupling)
    gamma = (grid.dt / grid.dx) * 0.5 * box.max_delta * box.M
    gamma_ok = gamma <= 1.0 + _GATE_RTOL
    return CflReport(l_h=base.l_h, ratio=base.ratio, cfl_ok=base.cfl_ok,
                     max_dt=base.max_dt, gamma=gamma, gamma_ok=gamma_ok)


def require(report: CflReport, what: str):
    if not report.ok:
        parts = []
        if not report.cfl_ok:
            parts.append(
                f"dx/dt = {report.ratio:.6g} below the monotonicity bound "
                f"2*L = {2 * report.l_h:.6g} (largest admissible dt = {report.max_dt:.6g})")
        if report.gamma_ok is False:
            parts.append(
                f"gamma = {report.gamma:.6g} exceeds the compactness bound 1")
        raise CflError(f"{what} refused: " + "; ".join(parts))


def auto_dt(box, coupling, dx: float, safety: float = 0.9) -> float:
    """Largest dt passing both gates, scaled by a safety factor in (0, 1]."""
    if not (0.0 < safety <= 1.0):
        raise ValueError("safety factor must be in (0, 1]")
    l_h = coupling_speed(box, coupling)
    cap_mono = dx / (2.0 * l_h)
    cap_gamma = dx / (0.5 * box.max_delta * box.M)
    return safety * min(cap_mono, cap_gamma)
