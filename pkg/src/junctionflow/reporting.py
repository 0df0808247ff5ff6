"""Deterministic delimited output and run manifests.

Floats are written with 17 significant digits so files round-trip the
binary values exactly and reruns with identical configuration are
byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return "nan"
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_manifest(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=fmt) + "\n")
    return path


def hj_trajectory_rows(traj):
    """`t,x,u` rows, time-major then space."""
    nodes = traj.grid.nodes
    for row, t in enumerate(traj.times):
        for j, x in enumerate(nodes):
            yield (float(t), float(x), float(traj.states[row, j]))


def scl_trajectory_rows(traj):
    """`t,x_mid,p` rows, time-major then space."""
    mids = traj.grid.cell_midpoints
    for row, t in enumerate(traj.times):
        for j, x in enumerate(mids):
            yield (float(t), float(x), float(traj.states[row, j]))


def trace_rows(traj, box, effective_limiter, germ_distance_fn):
    """`t,gammaL,gammaR,HL_of_gammaL,HR_of_gammaR,germ_distance` per stored step."""
    i0 = traj.grid.junction_cell
    for row, t in enumerate(traj.times):
        gL = float(traj.states[row, i0 - 1])
        gR = float(traj.states[row, i0])
        yield (float(t), gL, gR, float(box.left(gL)), float(box.right(gR)),
               float(germ_distance_fn(effective_limiter, (gL, gR), box)))
