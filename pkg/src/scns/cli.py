"""Batch front door: ``scns <subcommand> --config run.json [--out DIR] [--seed N]``.

Exit status: 0 when the subcommand's thresholds pass, 2 for configuration or
input-file errors, 3 for solver failures, 4 for threshold failures.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import scenarios as sc
from .adjoint import Targets
from .config import SUBCOMMANDS, ConfigError, RunConfig, load_config
from .control import ControlProblem, optimize
from .forward import SolverError, TimeSpec, energy_audit, forward_solve
from .grid import GridSpec
from .io import FieldFile, read_field, write_field, write_report, write_vtk
from .verify import (SPACETIME_CASE, SPATIAL_CASE, TEMPORAL_CASE, fd_gradient_oracle,
                     lipschitz_probe, run_mms)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_THRESHOLD = 0, 2, 3, 4
log = logging.getLogger("scns")

MMS_DEFAULTS = {
    # case: (ladder, t_final, refine, fields checked, min slope)
    "spatial": ([(16, 16, 4), (32, 32, 4), (64, 64, 4)], 0.2, "space", ("v", "p"), 1.9),
    "temporal": ([(8, 8, 10), (8, 8, 20), (8, 8, 40), (8, 8, 80)], 1.0, "time", ("p",), 0.9),
    "spacetime": ([(8, 8, 4), (16, 16, 16), (32, 32, 64)], 0.5, "both", ("v", "p"), 1.9),
}
MMS_CASES = {"spatial": SPATIAL_CASE, "temporal": TEMPORAL_CASE, "spacetime": SPACETIME_CASE}


class InputError(Exception):
    """Unreadable or inconsistent input file referenced by the config."""


# ---------------------------------------------------------------------------
# building inputs from the config

def _read_values(path, grid: GridSpec) -> np.ndarray:
    try:
        f = read_field(path)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: {e}") from None
    if f.grid.shape != grid.shape:
        raise InputError(f"{path}: grid {f.grid.shape} does not match {grid.shape}")
    return f.values


def initial_state(cfg: RunConfig):
    g, ini = cfg.grid, cfg.section("initial")
    if ini["velocity_files"]:
        v0 = np.array([_read_values(p, g) for p in ini["velocity_files"]])
    else:
        v0 = sc.VELOCITY[ini["velocity"]](g, ini["velocity_amplitude"])
    if ini["pressure_file"]:
        p0 = _read_values(ini["pressure_file"], g)
    else:
        p0 = sc.PRESSURE[ini["pressure"]](g, ini["pressure_amplitude"])
    return v0, p0


def initial_control(cfg: RunConfig, seed: int) -> np.ndarray:
    g, tm, c = cfg.grid, cfg.time, cfg.section("control")
    if c["init"] == "zero":
        return np.zeros((tm.n_steps, 2, *g.shape))
    if c["init"] == "generator":
        return sc.CONTROL[c["generator"]](g, tm, c["amplitude"])
    if c["init"] == "random":
        return c["amplitude"] * np.random.default_rng(seed).standard_normal((tm.n_steps, 2, *g.shape))
    base = Path(c["path"])
    return np.array([[_read_values(base / f"u_{k:05d}_{i}.csv", g) for i in range(2)]
                     for k in range(tm.n_steps)])


def targets(cfg: RunConfig, v0, p0) -> Targets:
    cost = cfg.section("cost")
    g = cfg.grid
    if cost["targets"] == "recoverable":
        u_star = sc.CONTROL[cost["target_control"]](g, cfg.time, cost["target_amplitude"])
        tg = Targets.from_trajectory(forward_solve(g, v0, p0, u_star, cfg.params, cfg.time))
    else:
        tg = Targets()
    files = cost["target_files"]
    if files:
        kw = dict(tg.__dict__)
        for name, spec in files.items():
            if name.startswith("v"):
                kw[name] = np.array([_read_values(p, g) for p in spec])
            else:
                kw[name] = _read_values(spec, g)
        tg = Targets(**kw)
    return tg


def problem(cfg: RunConfig) -> ControlProblem:
    v0, p0 = initial_state(cfg)
    return ControlProblem(cfg.grid, cfg.params, cfg.time, cfg.weights, targets(cfg, v0, p0), v0, p0)


def write_snapshots(out: Path, traj, cadence: int, vtk: bool) -> list[str]:
    snap = out / "snapshots"
    snap.mkdir(parents=True, exist_ok=True)
    names = []
    ks = sorted(set(range(0, traj.time.n_steps + 1, cadence)) | {traj.time.n_steps})
    for k in ks:
        t = float(traj.time.times[k])
        for name, a in (("v1", traj.v[k, 0]), ("v2", traj.v[k, 1]), ("p", traj.p[k])):
            path = write_field(snap / f"{name}_{k:05d}.csv", FieldFile(traj.grid, name, t, a))
            names.append(path.name)
        if vtk:
            write_vtk(snap / f"state_{k:05d}.vtk", traj.grid, {"p": traj.p[k]}, {"v": traj.v[k]})
    return names


def _energy_ok(rep, dt: float, C: float) -> tuple[bool, float]:
    scale = float(np.max(rep.kinetic + rep.elastic))
    res = float(np.max(np.abs(rep.residual)))
    rel = res / scale if scale > 0 else res
    return rel <= C * dt, rel


# ---------------------------------------------------------------------------
# subcommands: each returns (passed, report dict)

def cmd_simulate(cfg: RunConfig, out: Path, seed: int):
    v0, p0 = initial_state(cfg)
    u = initial_control(cfg, seed)
    traj = forward_solve(cfg.grid, v0, p0, u, cfg.params, cfg.time)
    files = write_snapshots(out, traj, cfg.cadence, cfg.section("output")["vtk"])
    rep = energy_audit(traj, u)
    ok, rel = _energy_ok(rep, cfg.time.dt, cfg.section("checks")["energy_C"])
    return ok, {"energy": rep.as_dict(), "relative_residual": rel, "snapshots": files}


def cmd_energy_audit(cfg: RunConfig, out: Path, seed: int):
    v0, p0 = initial_state(cfg)
    C = cfg.section("checks")["energy_C"]
    levels = []
    for m in (1, 2, 4):
        tm = TimeSpec(cfg.time.t_final, cfg.time.n_steps * m)
        u = initial_control(replace(cfg, time=tm), seed)
        rep = energy_audit(forward_solve(cfg.grid, v0, p0, u, cfg.params, tm), u)
        ok, rel = _energy_ok(rep, tm.dt, C)
        levels.append({"n_steps": tm.n_steps, "dt": tm.dt, "relative_residual": rel,
                       "within_C_dt": ok, "residual": rep.residual.tolist()})
    rel = [lv["relative_residual"] for lv in levels]
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(rel, rel[1:])]
    exact = max(rel) <= 1e-12
    ok = all(lv["within_C_dt"] for lv in levels) and (exact or all(1.6 <= r <= 2.4 for r in ratios))
    return ok, {"levels": levels, "halving_ratios": ratios}


def cmd_gradcheck(cfg: RunConfig, out: Path, seed: int):
    pb = problem(cfg)
    ch = cfg.section("checks")
    rep = fd_gradient_oracle(pb, initial_control(cfg, seed), ch["n_directions"], seed)
    return rep.max_min_error <= ch["gradcheck_tol"], rep.as_dict()


def cmd_optimize(cfg: RunConfig, out: Path, seed: int):
    pb = problem(cfg)
    ch = cfg.section("checks")
    u, rep = optimize(pb, initial_control(cfg, seed), cfg.optimizer)
    udir = out / "u_opt"
    udir.mkdir(parents=True, exist_ok=True)
    ts = cfg.time.times
    for k in range(cfg.time.n_steps):
        for i in range(2):
            write_field(udir / f"u_{k:05d}_{i}.csv", FieldFile(cfg.grid, f"u{i + 1}", float(ts[k]), u[k, i]))
    accepted = rep.accepted_J
    monotone = all(b < a for a, b in zip(accepted, accepted[1:]))
    stationary = rep.optimality_residual <= ch["stationarity_tol"] * (1 + rep.chi_norm)
    reduced = rep.J_final <= ch["reduction"] * rep.J0
    d = rep.as_dict()
    d.update(monotone=monotone, stationary=stationary, reduced=reduced)
    return monotone and stationary and reduced, d


def cmd_mms(cfg: RunConfig, out: Path, seed: int):
    ch = cfg.section("checks")
    ladder, t_final, refine, checked, bound = MMS_DEFAULTS[ch["mms_case"]]
    if ch["mms_ladder"]:
        ladder = [tuple(x) for x in ch["mms_ladder"]]
    if ch["mms_t_final"]:
        t_final = ch["mms_t_final"]
    rep = run_mms(MMS_CASES[ch["mms_case"]], ladder, cfg.params, t_final, refine)
    slopes = {"v": rep.slope_v, "p": rep.slope_p}
    d = rep.as_dict()
    d["min_slope"] = bound
    return all(slopes[f] >= bound for f in checked), d


def cmd_lipschitz(cfg: RunConfig, out: Path, seed: int):
    v0, p0 = initial_state(cfg)
    u = initial_control(cfg, seed)
    g, tm = cfg.grid, cfg.time
    rng = np.random.default_rng(seed)
    X, Y = g.cell_centers()
    x, y = np.pi * X / g.lx, np.pi * Y / g.ly
    du = np.zeros_like(u)
    for i in range(2):
        for a in range(3):
            for b in range(3):
                c = rng.standard_normal(2)
                du[:, i] += (c[0] + c[1] * tm.times[:-1, None, None] / tm.t_final) * np.cos(a * x) * np.cos(b * y)
    ch = cfg.section("checks")
    tab = lipschitz_probe(g, u, du, ch["lipschitz_epsilons"], cfg.params, tm, v0, p0)
    return tab.variation <= ch["lipschitz_max_variation"], tab.as_dict()


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize, "gradcheck": cmd_gradcheck,
            "mms": cmd_mms, "energy-audit": cmd_energy_audit, "lipschitz": cmd_lipschitz}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scns", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, default=None, help="seed (overrides the config's)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.subcommand)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    seed = cfg.seed if args.seed is None else args.seed
    if seed < 0:
        print("seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.section("output")["dir"])
    out.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg.raw, seed=seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            passed, body = COMMANDS[args.subcommand](cfg, out, seed)
        except InputError as e:
            print(f"input error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        except SolverError as e:
            write_report(out / "report.json", {"subcommand": args.subcommand, "config": resolved,
                                               "seed": seed, "error": str(e)})
            print(f"solver failure: {e}", file=sys.stderr)
            return EXIT_SOLVER
    report = {"subcommand": args.subcommand, "config": resolved, "seed": seed, "passed": passed,
              "warnings": sorted({str(w.message) for w in caught}), "result": body}
    write_report(out / "report.json", report)
    print(f"{args.subcommand}: {'PASS' if passed else 'FAIL'} (report: {out / 'report.json'})")
    return EXIT_OK if passed else EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
