"""Figure rendering for the report path.

Every report-emitting subcommand can drop a PNG next to its delimited
output.  Figures are a convenience view of the same data; the CSV files
remain the contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def hj_figure(traj, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    nodes = traj.grid.nodes
    for row in np.linspace(0, len(traj.times) - 1, 5).astype(int):
        ax1.plot(nodes, traj.states[row], label=f"t = {traj.times[row]:.3g}")
    ax1.axvline(0.0, color="k", lw=0.6, alpha=0.5)
    ax1.set_xlabel("x")
    ax1.set_ylabel("u")
    ax1.legend(fontsize=7)
    steps = np.arange(len(traj.junction_values)) * traj.grid.dt
    ax2.plot(steps, traj.junction_values)
    ax2.set_xlabel("t")
    ax2.set_ylabel("u at junction")
    fig.tight_layout()
    return _save(fig, path)


def scl_figure(traj, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    mids = traj.grid.cell_midpoints
    for row in np.linspace(0, len(traj.times) - 1, 5).astype(int):
        ax1.plot(mids, traj.states[row], label=f"t = {traj.times[row]:.3g}")
    ax1.axvline(0.0, color="k", lw=0.6, alpha=0.5)
    ax1.set_xlabel("x")
    ax1.set_ylabel("p")
    ax1.legend(fontsize=7)
    i0 = traj.grid.junction_cell
    ax2.plot(traj.times, traj.states[:, i0 - 1], label="left trace cell")
    ax2.plot(traj.times, traj.states[:, i0], label="right trace cell")
    ax2.set_xlabel("t")
    ax2.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def pair_figure(hj_traj, scl_traj, path):
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    mids = scl_traj.grid.cell_midpoints
    slopes = np.diff(hj_traj.states[-1]) / hj_traj.grid.dx
    ax.plot(mids, scl_traj.states[-1], lw=2.2, alpha=0.6, label="interface scheme p")
    ax.plot(mids, slopes, "k--", lw=0.9, label="node scheme slope")
    ax.axvline(0.0, color="k", lw=0.6, alpha=0.5)
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def convergence_figure(table, path):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    dx = [r.dx for r in table.rows]
    err = [r.l1_error for r in table.rows]
    ax.loglog(dx, err, "o-", label="L1 error")
    if len(dx) > 1 and min(err) > 0:
        ref = err[0] * (np.asarray(dx) / dx[0]) ** 1.0
        ax.loglog(dx, ref, "k:", label="order 1")
    ax.set_xlabel("dx")
    ax.set_ylabel("L1 error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def limiter_figure(report, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 3.2))
    dx = [r.dx for r in report.rows]
    ax1.loglog(dx, [r.dist_to_effective for r in report.rows], "o-",
               label="to effective germ")
    ax1.loglog(dx, [r.dist_to_control for r in report.rows], "s--",
               label="to control germ")
    ax1.set_xlabel("dx")
    ax1.set_ylabel("trace distance")
    ax1.legend(fontsize=8)
    mismatch = [max(r.rh_mismatch, 1e-18) for r in report.rows]
    ax2.loglog(dx, mismatch, "o-")
    ax2.set_xlabel("dx")
    ax2.set_ylabel("trace flux mismatch")
    fig.tight_layout()
    return _save(fig, path)


def germ_figure(A, box, points, members, path):
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    lam = np.linspace(A, 0.0, 300)
    from .fluxes import inverse_branch
    for sL, sR, style in (("decreasing", "decreasing", "-"),
                          ("increasing", "increasing", "-"),
                          ("increasing", "decreasing", "-")):
        ax.plot(inverse_branch(box.left, lam, sL),
                inverse_branch(box.right, lam, sR), "C0" + style, lw=1.2)
    ax.plot(inverse_branch(box.left, A, "decreasing"),
            inverse_branch(box.right, A, "increasing"), "C0o", ms=4)
    if points:
        pts = np.asarray(points, dtype=float)
        ok = np.asarray(members, dtype=bool)
        ax.plot(pts[ok, 0], pts[ok, 1], "g^", label="member")
        if np.any(~ok):
            ax.plot(pts[~ok, 0], pts[~ok, 1], "rx", label="not member")
        ax.legend(fontsize=8)
    ax.set_xlabel("left state")
    ax.set_ylabel("right state")
    fig.tight_layout()
    return _save(fig, path)


def counterexample_figure(junction, p_prime, p, path):
    branches = junction.branches
    fig, axes = plt.subplots(1, len(branches), figsize=(3.0 * len(branches), 2.8),
                             squeeze=False)
    for i, (f, th) in enumerate(branches):
        ax = axes[0][i]
        q = np.linspace(f.a, f.c, 200)
        ax.plot(q, f(q), "C0-")
        ax.plot([p_prime[i]], [f(p_prime[i])], "g^", label="reference")
        ax.plot([p[i]], [f(p[i])], "rv", label="comparison")
        side = "in" if i < junction.n_in else "out"
        ax.set_title(f"{side} branch {i}, theta={th:g}", fontsize=8)
        if i == 0:
            ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)
