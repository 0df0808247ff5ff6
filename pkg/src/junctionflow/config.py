"""Strict experiment-configuration ingestion for the batch front end.

Configurations are JSON.  Unknown keys anywhere are errors, missing
required keys are enumerated, and every violation found is reported in one
pass rather than one at a time.  Parsing resolves the file into live domain
objects plus an echo dictionary carrying every derived number (auto step
size, limiter range, ...) for the run manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError
from .fluxes import Box, ConvexFlux, inverse_branch, make_quadratic_flux, make_skewed_flux
from .germs import (GeneralCoupling, LimitedCoupling, MultiBranchJunction,
                    as_general, germ_contains, godunov_coupling,
                    make_concave_quadratic)
from .grid import Grid1D, auto_dt


@dataclass
class ExperimentConfig:
    box: Box
    coupling: object
    grid: Grid1D
    T: float
    u0: Callable | None
    rho0: Callable | None
    initial_kind: str
    stride: int
    seed: int
    junction: MultiBranchJunction | None
    junction_params: dict | None
    germ_query: dict | None
    audit_spec: dict | None
    levels: int
    echo: dict = field(default_factory=dict)


def _check_keys(block: dict, where: str, required: set, optional: set,
                errors: list):
    for key in block:
        if key not in required and key not in optional:
            errors.append(f"{where}: unknown key '{key}'")
    for key in required:
        if key not in block:
            errors.append(f"{where}: missing required key '{key}'")


def _number(block, key, where, errors, cond=None, what=""):
    v = block.get(key)
    if v is None:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        errors.append(f"{where}.{key}: expected a number, got {v!r}")
        return None
    v = float(v)
    if cond is not None and not cond(v):
        errors.append(f"{where}.{key}: {what}, got {v}")
        return None
    return v


def _build_flux(block: dict, where: str, errors: list) -> ConvexFlux | None:
    if not isinstance(block, dict):
        errors.append(f"{where}: expected an object")
        return None
    family = block.get("family")
    if family == "quadratic":
        _check_keys(block, where, {"family", "a", "c", "kappa"}, set(), errors)
        a = _number(block, "a", where, errors)
        c = _number(block, "c", where, errors)
        k = _number(block, "kappa", where, errors, lambda v: v > 0, "kappa must be positive")
        if None in (a, c, k):
            return None
        if a >= c:
            errors.append(f"{where}: need a < c, got a={a}, c={c}")
            return None
        return make_quadratic_flux(a, c, k)
    if family == "skewed":
        _check_keys(block, where, {"family", "a", "c", "kappa", "skew"}, set(), errors)
        a = _number(block, "a", where, errors)
        c = _number(block, "c", where, errors)
        k = _number(block, "kappa", where, errors, lambda v: v > 0, "kappa must be positive")
        sk = _number(block, "skew", where, errors)
        if None in (a, c, k, sk):
            return None
        try:
            return make_skewed_flux(a, c, k, sk)
        except ValueError as e:
            errors.append(f"{where}: {e}")
            return None
    errors.append(f"{where}.family: expected 'quadratic' or 'skewed', got {family!r}")
    return None


def _build_coupling(block: dict, box: Box | None, errors: list):
    where = "coupling"
    if not isinstance(block, dict):
        errors.append(f"{where}: expected an object")
        return None
    kind = block.get("type")
    if kind == "limited":
        _check_keys(block, where, {"type", "A"}, set(), errors)
        A = _number(block, "A", where, errors)
        if A is None or box is None:
            return None
        if not (box.H0 - 1e-12 <= A <= 1e-12):
            errors.append(f"{where}.A: must lie in [{box.H0}, 0], got {A}")
            return None
        return LimitedCoupling(A, box)
    if kind == "general":
        _check_keys(block, where, {"type", "family"}, {"A"}, errors)
        family = block.get("family")
        if box is None:
            return None
        if family == "godunov":
            if "A" in block:
                errors.append(f"{where}.A: not used by the godunov family")
            return godunov_coupling(box)
        if family == "limited":
            A = _number(block, "A", where, errors)
            if A is None:
                return None
            if not (box.H0 - 1e-12 <= A <= 1e-12):
                errors.append(f"{where}.A: must lie in [{box.H0}, 0], got {A}")
                return None
            return as_general(LimitedCoupling(A, box))
        errors.append(f"{where}.family: expected 'godunov' or 'limited', got {family!r}")
        return None
    errors.append(f"{where}.type: expected 'limited' or 'general', got {kind!r}")
    return None


def _build_initial(block: dict, box: Box | None, coupling, errors: list):
    where = "initial"
    if not isinstance(block, dict):
        errors.append(f"{where}: expected an object")
        return None, None, "invalid"
    kind = block.get("type")
    if kind == "riemann":
        _check_keys(block, where, {"type", "kL", "kR"}, set(), errors)
        kL = _number(block, "kL", where, errors)
        kR = _number(block, "kR", where, errors)
        if None in (kL, kR):
            return None, None, "riemann"
        if box is not None and not box.contains(kL, kR):
            errors.append(f"{where}: ({kL}, {kR}) outside the state box")
            return None, None, "riemann"
        u0 = lambda x: kL * x if x < 0 else kR * x
        rho0 = lambda x: kL if x < 0 else kR
        return u0, rho0, "riemann"
    if kind == "affine_germ":
        _check_keys(block, where, {"type"}, {"level", "sides"}, errors)
        if box is None or coupling is None:
            return None, None, "affine_germ"
        A = coupling.A if isinstance(coupling, LimitedCoupling) else None
        if A is None:
            errors.append(f"{where}: affine_germ data needs a limited coupling")
            return None, None, "affine_germ"
        level = block.get("level", A)
        level = _number({"level": level}, "level", where, errors)
        if level is None:
            return None, None, "affine_germ"
        sides = block.get("sides", ["decreasing", "increasing"])
        if (not isinstance(sides, list) or len(sides) != 2
                or any(s not in ("decreasing", "increasing") for s in sides)):
            errors.append(f"{where}.sides: expected two of 'decreasing'/'increasing'")
            return None, None, "affine_germ"
        try:
            kL = inverse_branch(box.left, level, sides[0])
            kR = inverse_branch(box.right, level, sides[1])
        except ValueError as e:
            errors.append(f"{where}.level: {e}")
            return None, None, "affine_germ"
        if not germ_contains(A, (kL, kR), box):
            errors.append(f"{where}: slopes ({kL:.6g}, {kR:.6g}) are not a "
                          f"stationary junction pair at limiter {A}")
            return None, None, "affine_germ"
        u0 = lambda x: kL * x if x < 0 else kR * x
        rho0 = lambda x: kL if x < 0 else kR
        return u0, rho0, "affine_germ"
    if kind == "piecewise_affine":
        _check_keys(block, where, {"type", "points"}, set(), errors)
        pts = block.get("points")
        if (not isinstance(pts, list) or len(pts) < 2
                or any(not isinstance(p, list) or len(p) != 2 for p in pts)):
            errors.append(f"{where}.points: expected [[x, u], ...] with 2+ entries")
            return None, None, "piecewise_affine"
        xs = np.array([p[0] for p in pts], dtype=float)
        us = np.array([p[1] for p in pts], dtype=float)
        if np.any(np.diff(xs) <= 0):
            errors.append(f"{where}.points: x values must be strictly increasing")
            return None, None, "piecewise_affine"

        def u0(x, xs=xs, us=us):
            if x <= xs[0]:
                return float(us[0] + (us[1] - us[0]) / (xs[1] - xs[0]) * (x - xs[0]))
            if x >= xs[-1]:
                return float(us[-1] + (us[-1] - us[-2]) / (xs[-1] - xs[-2]) * (x - xs[-1]))
            return float(np.interp(x, xs, us))

        def rho0(x, xs=xs, us=us):
            i = int(np.searchsorted(xs, x, side="right")) - 1
            i = max(0, min(i, len(xs) - 2))
            return float((us[i + 1] - us[i]) / (xs[i + 1] - xs[i]))

        return u0, rho0, "piecewise_affine"
    errors.append(f"{where}.type: expected 'riemann', 'affine_germ' or "
                  f"'piecewise_affine', got {kind!r}")
    return None, None, "invalid"


def _build_junction(block: dict, errors: list) -> tuple:
    where = "junction"
    if not isinstance(block, dict):
        errors.append(f"{where}: expected an object")
        return None, None
    _check_keys(block, where, {"incoming", "outgoing", "A", "alpha0"},
                {"lambda"}, errors)

    def side(name):
        entries = block.get(name)
        if not isinstance(entries, list) or not entries:
            errors.append(f"{where}.{name}: expected a non-empty list")
            return None
        out = []
        for i, e in enumerate(entries):
            w = f"{where}.{name}[{i}]"
            if not isinstance(e, dict):
                errors.append(f"{w}: expected an object")
                return None
            _check_keys(e, w, {"a", "c", "kappa", "theta"}, set(), errors)
            a = _number(e, "a", w, errors)
            c = _number(e, "c", w, errors)
            k = _number(e, "kappa", w, errors, lambda v: v > 0, "kappa must be positive")
            th = _number(e, "theta", w, errors, lambda v: 0 < v <= 1,
                         "theta must lie in (0, 1]")
            if None in (a, c, k, th):
                return None
            out.append((make_concave_quadratic(a, c, k), th))
        return out

    inc = side("incoming")
    out = side("outgoing")
    if inc is None or out is None or errors:
        return None, None
    try:
        junction = MultiBranchJunction(incoming=inc, outgoing=out)
    except ValueError as e:
        errors.append(f"{where}: {e}")
        return None, None
    A = _number(block, "A", where, errors)
    alpha0 = block.get("alpha0")
    if not isinstance(alpha0, int) or isinstance(alpha0, bool):
        errors.append(f"{where}.alpha0: expected a branch index")
        return None, None
    lam = _number(block, "lambda", where, errors) if "lambda" in block else None
    if errors:
        return None, None
    return junction, {"A": A, "alpha0": alpha0, "lambda": lam}


_TOP_REQUIRED = {"fluxes", "coupling", "grid", "T"}
_TOP_OPTIONAL = {"initial", "output", "seeds", "levels", "germ", "junction", "audit"}


def parse_config(path) -> ExperimentConfig:
    """Read, validate and resolve a JSON experiment configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError([f"invalid JSON: {e}"])
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected an object"])

    errors: list[str] = []
    _check_keys(raw, "top level", _TOP_REQUIRED, _TOP_OPTIONAL, errors)

    box = None
    if isinstance(raw.get("fluxes"), dict):
        _check_keys(raw["fluxes"], "fluxes", {"left", "right"}, set(), errors)
        left = _build_flux(raw["fluxes"].get("left", {}), "fluxes.left", errors)
        right = _build_flux(raw["fluxes"].get("right", {}), "fluxes.right", errors)
        if left is not None and right is not None:
            try:
                box = Box(left, right)
            except ValueError as e:
                errors.append(f"fluxes: {e}")
    elif "fluxes" in raw:
        errors.append("fluxes: expected an object")

    coupling = _build_coupling(raw.get("coupling", {}), box, errors) \
        if "coupling" in raw else None

    grid = None
    dt_source = "config"
    gb = raw.get("grid")
    if isinstance(gb, dict):
        _check_keys(gb, "grid", {"dx", "half_width"}, {"dt", "safety"}, errors)
        dx = _number(gb, "dx", "grid", errors, lambda v: v > 0, "dx must be positive")
        hw = _number(gb, "half_width", "grid", errors, lambda v: v > 0,
                     "half_width must be positive")
        dt = _number(gb, "dt", "grid", errors, lambda v: v > 0, "dt must be positive") \
            if "dt" in gb else None
        safety = _number(gb, "safety", "grid", errors,
                         lambda v: 0 < v <= 1, "safety must lie in (0, 1]") \
            if "safety" in gb else 0.9
        if dx is not None and hw is not None and box is not None and coupling is not None:
            if dt is None:
                dt = auto_dt(box, coupling, dx, safety if safety is not None else 0.9)
                dt_source = "auto"
            if dt is not None:
                grid = Grid1D.from_domain(hw, dx, dt)
    elif "grid" in raw:
        errors.append("grid: expected an object")

    T = _number(raw, "T", "top level", errors, lambda v: v > 0, "T must be positive") \
        if "T" in raw else None

    u0 = rho0 = None
    initial_kind = "none"
    if "initial" in raw:
        u0, rho0, initial_kind = _build_initial(raw["initial"], box, coupling, errors)

    stride = 1
    if isinstance(raw.get("output"), dict):
        _check_keys(raw["output"], "output", set(), {"stride"}, errors)
        sv = raw["output"].get("stride", 1)
        if not isinstance(sv, int) or isinstance(sv, bool) or sv < 1:
            errors.append("output.stride: expected a positive integer")
        else:
            stride = sv
    elif "output" in raw:
        errors.append("output: expected an object")

    seed = 0
    if isinstance(raw.get("seeds"), dict):
        _check_keys(raw["seeds"], "seeds", set(), {"master"}, errors)
        sv = raw["seeds"].get("master", 0)
        if not isinstance(sv, int) or isinstance(sv, bool):
            errors.append("seeds.master: expected an integer")
        else:
            seed = sv
    elif "seeds" in raw:
        errors.append("seeds: expected an object")

    levels = raw.get("levels", 4)
    if not isinstance(levels, int) or isinstance(levels, bool) or levels < 1:
        errors.append("levels: expected a positive integer")
        levels = 4

    germ_query = None
    if "germ" in raw:
        gq = raw["germ"]
        if not isinstance(gq, dict):
            errors.append("germ: expected an object")
        else:
            _check_keys(gq, "germ", {"points"}, {"A"}, errors)
            pts = gq.get("points")
            if (not isinstance(pts, list)
                    or any(not isinstance(p, list) or len(p) != 2 for p in pts)):
                errors.append("germ.points: expected [[kL, kR], ...]")
            else:
                germ_query = {"A": gq.get("A"), "points": pts}

    junction = junction_params = None
    if "junction" in raw:
        junction, junction_params = _build_junction(raw["junction"], errors)

    audit_spec = None
    if "audit" in raw:
        ab = raw["audit"]
        if not isinstance(ab, dict):
            errors.append("audit: expected an object")
        else:
            _check_keys(ab, "audit", set(),
                        {"k_points", "n_random_k", "entropy_tol", "estimate_tol"},
                        errors)
            audit_spec = {
                "k_points": ab.get("k_points"),
                "n_random_k": ab.get("n_random_k", 20),
                "entropy_tol": ab.get("entropy_tol", 1e-12),
                "estimate_tol": ab.get("estimate_tol", 1e-10),
            }

    if errors:
        raise ConfigError(errors)

    echo = {
        "raw": raw,
        "dt": grid.dt if grid else None,
        "dt_source": dt_source,
        "H0": box.H0 if box else None,
        "M": box.M if box else None,
        "j_min": grid.j_min if grid else None,
        "j_max": grid.j_max if grid else None,
    }
    return ExperimentConfig(
        box=box, coupling=coupling, grid=grid, T=T, u0=u0, rho0=rho0,
        initial_kind=initial_kind, stride=stride, seed=seed,
        junction=junction, junction_params=junction_params,
        germ_query=germ_query, audit_spec=audit_spec, levels=levels, echo=echo,
    )
