"""Batch front end: experiment orchestration and deterministic file output.

    junctionflow <subcommand> --config <path> [--out <dir>] [--no-figures]

Subcommands: solve-hj, solve-scl, pair, converge, limiter, germ,
counterexample, audit.  Exit codes: 0 success, 2 configuration error,
3 step-size gate failure, 4 audit violation beyond tolerance, 5 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, parse_config
from .errors import AuditError, CflError, ConfigError, InternalError
from .fluxes import godunov_flux
from .germs import (LimitedCoupling, dissipation_counterexample, flux_limiter,
                    germ_contains, multibranch_dissipation_gap,
                    validate_coupling)
from .grid import Grid1D, check_cfl_hj, check_cfl_scl
from .hj import HJProblem, hj_solve
from .pairing import convergence_study, effective_limiter_experiment, run_pair
from .reporting import (fmt, hj_trajectory_rows, scl_trajectory_rows,
                        trace_rows, write_csv, write_manifest)
from .scl import (SCLProblem, discrete_gradient_ode_check, entropy_residual,
                  extract_traces, germ_distance, oleinik_check, scl_solve,
                  tv_check)

SUBCOMMANDS = ("solve-hj", "solve-scl", "pair", "converge", "limiter",
               "germ", "counterexample", "audit")


def _effective_limiter(cfg: ExperimentConfig) -> float:
    if isinstance(cfg.coupling, LimitedCoupling):
        return cfg.coupling.A
    return flux_limiter(cfg.coupling)


def _manifest_base(cfg: ExperimentConfig, command: str, cfl) -> dict:
    return {
        "tool": "junctionflow",
        "version": __version__,
        "command": command,
        "config": cfg.echo["raw"],
        "resolved": {k: v for k, v in cfg.echo.items() if k != "raw"},
        "cfl": cfl.as_dict() if cfl is not None else None,
        "seed": cfg.seed,
        "stride": cfg.stride,
    }


def _require_initial(cfg: ExperimentConfig, what: str):
    if cfg.u0 is None or cfg.rho0 is None:
        raise ConfigError([f"initial: required by the {what} subcommand"])


def _require_grid(cfg: ExperimentConfig):
    if cfg.grid is None or cfg.T is None:
        raise ConfigError(["grid/T: required by this subcommand"])


def cmd_solve_hj(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    _require_grid(cfg)
    _require_initial(cfg, "solve-hj")
    cfl = check_cfl_hj(cfg.grid, cfg.box, cfg.coupling)
    problem = HJProblem(cfg.box, cfg.coupling, cfg.u0,
                        cfg.grid.j_max * cfg.grid.dx)
    traj = hj_solve(problem, cfg.grid, cfg.T, stride=cfg.stride)
    outputs = [write_csv(out / "hj_trajectory.csv", ["t", "x", "u"],
                         hj_trajectory_rows(traj))]
    if figures:
        from .figures import hj_figure
        outputs.append(hj_figure(traj, out / "hj_trajectory.png"))
    manifest = _manifest_base(cfg, "solve-hj", cfl)
    manifest["results"] = {"final_time": float(traj.times[-1]),
                           "junction_value": float(traj.final[cfg.grid.junction_node])}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"solve-hj: {traj.states.shape[0]} stored states, "
          f"junction value {traj.final[cfg.grid.junction_node]:.6g}")
    return manifest


def cmd_solve_scl(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    _require_grid(cfg)
    _require_initial(cfg, "solve-scl")
    cfl = check_cfl_scl(cfg.grid, cfg.box, cfg.coupling)
    problem = SCLProblem(cfg.box, cfg.coupling, cfg.rho0)
    traj = scl_solve(problem, cfg.grid, cfg.T, stride=cfg.stride)
    a_eff = _effective_limiter(cfg)
    outputs = [
        write_csv(out / "scl_trajectory.csv", ["t", "x_mid", "p"],
                  scl_trajectory_rows(traj)),
        write_csv(out / "traces.csv",
                  ["t", "gammaL", "gammaR", "HL_of_gammaL", "HR_of_gammaR",
                   "germ_distance"],
                  trace_rows(traj, cfg.box, a_eff, germ_distance)),
    ]
    if figures:
        from .figures import scl_figure
        outputs.append(scl_figure(traj, out / "scl_trajectory.png"))
    tr = extract_traces(traj)
    manifest = _manifest_base(cfg, "solve-scl", cfl)
    manifest["results"] = {"effective_limiter": a_eff,
                           "trace_left": tr[0], "trace_right": tr[1],
                           "germ_distance": germ_distance(a_eff, tr, cfg.box)}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"solve-scl: traces ({tr[0]:.6g}, {tr[1]:.6g}), "
          f"germ distance {manifest['results']['germ_distance']:.3e}")
    return manifest


def cmd_pair(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    _require_grid(cfg)
    _require_initial(cfg, "pair")
    cfl = check_cfl_scl(cfg.grid, cfg.box, cfg.coupling)
    report = run_pair(cfg.u0, cfg.box, cfg.coupling, cfg.grid, cfg.T)
    outputs = [write_csv(
        out / "pair_report.csv",
        ["max_identity_gap", "max_identity_gap_abs", "limiter",
         "trace_left", "trace_right", "germ_distance", "rh_mismatch", "n_steps"],
        [(report.max_identity_gap, report.max_identity_gap_abs, report.limiter,
          report.traces[0], report.traces[1], report.germ_dist,
          report.trace_rh_mismatch, report.n_steps)])]
    if figures:
        from .figures import pair_figure
        problem = HJProblem(cfg.box, cfg.coupling, cfg.u0,
                            cfg.grid.j_max * cfg.grid.dx)
        hj_traj = hj_solve(problem, cfg.grid, cfg.T)
        p0 = np.diff(hj_traj.states[0]) / cfg.grid.dx
        scl_traj = scl_solve(SCLProblem(cfg.box, cfg.coupling, None),
                             cfg.grid, cfg.T, initial=p0)
        outputs.append(pair_figure(hj_traj, scl_traj, out / "pair.png"))
    manifest = _manifest_base(cfg, "pair", cfl)
    manifest["results"] = {"max_identity_gap": report.max_identity_gap,
                           "limiter": report.limiter}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"pair: max_identity_gap = {report.max_identity_gap:.6e} "
          f"(limiter {report.limiter:.6g})")
    return manifest


def cmd_converge(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    _require_grid(cfg)
    if cfg.initial_kind != "riemann":
        raise ConfigError(["initial: converge needs riemann data"])
    raw = cfg.echo["raw"]["initial"]
    cfl = check_cfl_scl(cfg.grid, cfg.box, cfg.coupling)
    if not cfl.ok:
        from .grid import require
        require(cfl, "refinement study")
    table = convergence_study(
        cfg.box, cfg.coupling, (raw["kL"], raw["kR"]), cfg.T,
        levels=cfg.levels, dx0=cfg.grid.dx,
        dt_over_dx=cfg.grid.dt / cfg.grid.dx,
        half_width=cfg.grid.j_max * cfg.grid.dx)
    outputs = [write_csv(
        out / "convergence.csv",
        ["level", "dx", "dt", "l1_error", "observed_order"],
        [(r.level, r.dx, r.dt, r.l1_error,
          r.observed_order if r.observed_order is not None else float("nan"))
         for r in table.rows])]
    if figures:
        from .figures import convergence_figure
        outputs.append(convergence_figure(table, out / "convergence.png"))
    manifest = _manifest_base(cfg, "converge", cfl)
    manifest["results"] = {"errors": table.errors,
                           "probe_window": list(table.probe_window)}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print("converge: errors " + ", ".join(f"{e:.4e}" for e in table.errors))
    return manifest


def cmd_limiter(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    _require_grid(cfg)
    if cfg.initial_kind != "riemann":
        raise ConfigError(["initial: limiter needs riemann data"])
    if isinstance(cfg.coupling, LimitedCoupling):
        raise ConfigError(["coupling: limiter experiment needs a general coupling"])
    raw = cfg.echo["raw"]["initial"]
    cfl = check_cfl_scl(cfg.grid, cfg.box, cfg.coupling)
    ratio = cfg.grid.dt / cfg.grid.dx
    hw = cfg.grid.j_max * cfg.grid.dx
    grids = [Grid1D.from_domain(hw, cfg.grid.dx / 2 ** lev, ratio * cfg.grid.dx / 2 ** lev)
             for lev in range(cfg.levels)]
    report = effective_limiter_experiment(
        cfg.box, cfg.coupling, (raw["kL"], raw["kR"]), grids, cfg.T)
    outputs = [write_csv(
        out / "limiter.csv",
        ["dx", "dist_to_AF0", "dist_to_control", "rh_mismatch"],
        [(r.dx, r.dist_to_effective, r.dist_to_control, r.rh_mismatch)
         for r in report.rows])]
    if figures:
        from .figures import limiter_figure
        outputs.append(limiter_figure(report, out / "limiter.png"))
    manifest = _manifest_base(cfg, "limiter", cfl)
    manifest["results"] = {"effective_limiter": report.effective_limiter,
                           "control_limiter": report.control_limiter}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"limiter: effective {report.effective_limiter:.6g}, "
          f"control {report.control_limiter:.6g}")
    return manifest


def cmd_germ(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    if cfg.germ_query is None:
        raise ConfigError(["germ: block required by the germ subcommand"])
    A = cfg.germ_query["A"]
    if A is None:
        A = _effective_limiter(cfg)
    rows = []
    members = []
    for kL, kR in cfg.germ_query["points"]:
        lam = 0.5 * float(cfg.box.left(kL) + cfg.box.right(kR))
        try:
            member = germ_contains(A, (kL, kR), cfg.box)
        except ValueError:
            member = False
        members.append(member)
        rows.append((float(kL), float(kR), member, lam))
    outputs = [write_csv(out / "germ.csv", ["kL", "kR", "member", "lambda"], rows)]
    if figures:
        from .figures import germ_figure
        outputs.append(germ_figure(A, cfg.box, cfg.germ_query["points"],
                                   members, out / "germ.png"))
    manifest = _manifest_base(cfg, "germ", None)
    manifest["results"] = {"A": float(A),
                           "members": int(sum(members)),
                           "queried": len(members)}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"germ: limiter {A:.6g}, {sum(members)}/{len(members)} members")
    return manifest


def cmd_counterexample(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    if cfg.junction is None or cfg.junction_params is None:
        raise ConfigError(["junction: block required by the counterexample subcommand"])
    params = cfg.junction_params
    p_prime, p = dissipation_counterexample(
        cfg.junction, params["A"], params["alpha0"], params["lambda"])
    gap = multibranch_dissipation_gap(cfg.junction, p_prime, p)
    if gap >= 0:
        raise InternalError("constructed junction pair failed to violate "
                            "the entropy inequality")
    n_in = cfg.junction.n_in
    rows = []
    for i, (f, th) in enumerate(cfg.junction.branches):
        rows.append((i, "in" if i < n_in else "out", th,
                     float(p_prime[i]), float(p[i])))
    outputs = [write_csv(out / "counterexample.csv",
                         ["branch", "side", "theta", "p_prime", "p"], rows)]
    if figures:
        from .figures import counterexample_figure
        outputs.append(counterexample_figure(cfg.junction, p_prime, p,
                                             out / "counterexample.png"))
    manifest = _manifest_base(cfg, "counterexample", None)
    manifest["results"] = {"gap": float(gap), "A": params["A"],
                           "lambda": params["lambda"], "alpha0": params["alpha0"]}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"counterexample: dissipation gap {gap:.6g} (< 0)")
    return manifest


def cmd_audit(cfg: ExperimentConfig, out: Path, figures: bool) -> dict:
    _require_grid(cfg)
    _require_initial(cfg, "audit")
    spec = cfg.audit_spec or {"k_points": None, "n_random_k": 20,
                              "entropy_tol": 1e-12, "estimate_tol": 1e-10}
    cfl = check_cfl_scl(cfg.grid, cfg.box, cfg.coupling)
    problem = SCLProblem(cfg.box, cfg.coupling, cfg.rho0)
    traj = scl_solve(problem, cfg.grid, cfg.T, stride=1)

    rows = []
    worst_beyond = 0.0
    k_points = spec["k_points"]
    if k_points is None:
        rng = np.random.default_rng(cfg.seed)
        HL, HR = cfg.box.left, cfg.box.right
        k_points = np.column_stack([
            rng.uniform(HL.a, HL.c, spec["n_random_k"]),
            rng.uniform(HR.a, HR.c, spec["n_random_k"])]).tolist()
    for kL, kR in k_points:
        audit = entropy_residual(traj, (float(kL), float(kR)))
        rows.append(("entropy", float(kL), float(kR),
                     audit.worst_violation, audit.junction_remainder))
        worst_beyond = max(worst_beyond,
                           audit.worst_violation - spec["entropy_tol"])

    n_cells_half = cfg.grid.junction_cell
    J1, J2 = 2, max(4, n_cells_half - 2)
    for branch in ("left", "right"):
        v = discrete_gradient_ode_check(traj, branch)
        rows.append((f"gradient_decay_{branch}", float("nan"), float("nan"), v, 0.0))
        worst_beyond = max(worst_beyond, v - spec["estimate_tol"])
        v = oleinik_check(traj, J1, J2, branch)
        rows.append((f"one_sided_lipschitz_{branch}", float("nan"), float("nan"), v, 0.0))
        worst_beyond = max(worst_beyond, v - spec["estimate_tol"])
        B = 8.0 / cfg.box.max_delta / cfg.grid.dt  # level-0 one-sided bound
        ok = tv_check(traj, J1, J2, B, branch)
        rows.append((f"total_variation_{branch}", float("nan"), float("nan"),
                     0.0 if ok else 1.0, 0.0))
        if not ok:
            worst_beyond = max(worst_beyond, 1.0)

    outputs = [write_csv(out / "audit.csv",
                         ["audit", "kL", "kR", "worst_violation", "remainder"],
                         rows)]
    manifest = _manifest_base(cfg, "audit", cfl)
    manifest["results"] = {"audits": len(rows),
                           "worst_beyond_tolerance": worst_beyond}
    manifest["outputs"] = [str(p) for p in outputs]
    write_manifest(out / "manifest.json", manifest)
    print(f"audit: {len(rows)} checks, worst beyond tolerance "
          f"{max(0.0, worst_beyond):.3e}")
    if worst_beyond > 0:
        raise AuditError(
            "a discrete entropy inequality or one-sided estimate exceeded "
            f"its tolerance by {worst_beyond:.3e}")
    return manifest


_DISPATCH = {
    "solve-hj": cmd_solve_hj,
    "solve-scl": cmd_solve_scl,
    "pair": cmd_pair,
    "converge": cmd_converge,
    "limiter": cmd_limiter,
    "germ": cmd_germ,
    "counterexample": cmd_counterexample,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="junctionflow",
        description="Godunov solvers and verification harness for junction-"
                    "coupled Hamilton-Jacobi equations and conservation laws")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", default=".", help="output directory (created if absent)")
        p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                       default=True, help="render PNG figures next to the CSV output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _DISPATCH[args.command](cfg, out, args.figures)
        return 0
    except ConfigError as e:
        for v in e.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except CflError as e:
        print(f"step-size gate: {e}", file=sys.stderr)
        return 3
    except AuditError as e:
        print(f"audit violation: {e}", file=sys.stderr)
        return 4
    except InternalError as e:
        print(f"internal invariant breach: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
