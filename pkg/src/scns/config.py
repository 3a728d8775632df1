"""JSON run configuration: schema with defaults, fail-fast validation.

Every section except ``grid`` and ``time`` is optional.  Unknown keys are
errors.  All violations found are reported together in one ``ConfigError``.

Schema (defaults shown)::

    {
      "seed": 0,
      "grid":   {"nx": <int>, "ny": <int>, "lx": 1.0, "ly": 1.0},
      "time":   {"t_final": <float>, "n_steps": <int>},
      "phys":   {"rho": 1.0, "nu": 0.01, "beta": 1.0, "gamma": 0.001, "b": 0.0,
                 "quasi_incompressible": false},
      "initial": {"velocity": "zero", "velocity_amplitude": 0.5,
                  "pressure": "zero", "pressure_amplitude": 1.0,
                  "velocity_files": null, "pressure_file": null},
      "cost":   {"kappa1": 0, "kappa2": 0, "kappa3": 1, "varkappa1": 0, "varkappa2": 0,
                 "lambda1": 0, "lambda2": 0,
                 "targets": "zero", "target_control": "smooth", "target_amplitude": 1.0,
                 "target_files": {}},
      "control": {"init": "zero", "generator": "smooth", "amplitude": 1.0, "path": null},
      "optimizer": {"method": "lbfgs", "max_iter": 200, "gtol": 1e-6, "armijo": 1e-4,
                    "backtrack": 0.5, "max_backtracks": 40, "memory": 10},
      "output": {"dir": "out", "cadence": null, "vtk": false},
      "checks": {"energy_C": 10.0, "gradcheck_tol": 1e-6, "n_directions": 5,
                 "reduction": 0.1, "stationarity_tol": 1e-4,
                 "mms_case": "spatial", "mms_ladder": null, "mms_t_final": null,
                 "lipschitz_epsilons": [1e-2, 1e-3, 1e-4], "lipschitz_max_variation": 2.0}
    }

``initial.velocity`` is one of "zero", "shear", "vortex"; ``initial.pressure``
one of "zero", "constant", "pulse", "mode".  ``cost.targets`` is "zero" or
"recoverable" (the full state generated by ``target_control``);
``target_files`` maps "v_d"/"v_dT" to a pair of CSV field files and
"p_d"/"p_dT" to one, each held constant in time.  ``control.init`` is "zero",
"generator", "random" (seeded normal noise scaled by ``amplitude``) or "file"
(a directory of ``u_<k>_<c>.csv`` files as written by optimize).
``output.cadence`` defaults to max(1, n_steps // 10).
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any

from .adjoint import CostWeights
from .control import OptimizeOptions
from .forward import PhysParams, TimeSpec
from .grid import GridSpec

REQUIRED = object()

SCHEMA: dict[str, Any] = {
    "seed": 0,
    "grid": {"nx": REQUIRED, "ny": REQUIRED, "lx": 1.0, "ly": 1.0},
    "time": {"t_final": REQUIRED, "n_steps": REQUIRED},
    "phys": {"rho": 1.0, "nu": 1e-2, "beta": 1.0, "gamma": 1e-3, "b": 0.0,
             "quasi_incompressible": False},
    "initial": {"velocity": "zero", "velocity_amplitude": 0.5, "pressure": "zero",
                "pressure_amplitude": 1.0, "velocity_files": None, "pressure_file": None},
    "cost": {"kappa1": 0.0, "kappa2": 0.0, "kappa3": 1.0, "varkappa1": 0.0, "varkappa2": 0.0,
             "lambda1": 0.0, "lambda2": 0.0, "targets": "zero", "target_control": "smooth",
             "target_amplitude": 1.0, "target_files": {}},
    "control": {"init": "zero", "generator": "smooth", "amplitude": 1.0, "path": None},
    "optimizer": {"method": "lbfgs", "max_iter": 200, "gtol": 1e-6, "armijo": 1e-4,
                  "backtrack": 0.5, "max_backtracks": 40, "memory": 10},
    "output": {"dir": "out", "cadence": None, "vtk": False},
    "checks": {"energy_C": 10.0, "gradcheck_tol": 1e-6, "n_directions": 5, "reduction": 0.1,
               "stationarity_tol": 1e-4, "mms_case": "spatial", "mms_ladder": None,
               "mms_t_final": None, "lipschitz_epsilons": [1e-2, 1e-3, 1e-4],
               "lipschitz_max_variation": 2.0},
}

WEIGHT_KEYS = ("kappa1", "kappa2", "kappa3", "varkappa1", "varkappa2", "lambda1", "lambda2")
CHOICES = {
    ("initial", "velocity"): ("zero", "shear", "vortex"),
    ("initial", "pressure"): ("zero", "constant", "pulse", "mode"),
    ("cost", "targets"): ("zero", "recoverable"),
    ("cost", "target_control"): ("zero", "smooth"),
    ("control", "init"): ("zero", "generator", "random", "file"),
    ("control", "generator"): ("zero", "smooth"),
    ("optimizer", "method"): ("lbfgs", "steepest"),
    ("checks", "mms_case"): ("spatial", "temporal", "spacetime"),
}
SUBCOMMANDS = ("simulate", "optimize", "gradcheck", "mms", "energy-audit", "lipschitz")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class RunConfig:
    raw: dict  # fully resolved document (defaults filled)
    grid: GridSpec
    time: TimeSpec
    params: PhysParams
    weights: CostWeights
    optimizer: OptimizeOptions

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def section(self, name: str) -> dict:
        return self.raw[name]

    @property
    def cadence(self) -> int:
        c = self.raw["output"]["cadence"]
        return max(1, self.time.n_steps // 10) if c is None else int(c)


def _merge(doc: dict, schema: dict, path: str, problems: list[str]) -> dict:
    out = {}
    for k in doc:
        if k not in schema:
            problems.append(f"unknown key '{path}{k}'")
    for k, default in schema.items():
        if k in doc:
            v = doc[k]
            if isinstance(default, dict) and default:
                if not isinstance(v, dict):
                    problems.append(f"'{path}{k}' must be an object")
                    v = {}
                v = _merge(v, default, f"{path}{k}.", problems)
            out[k] = v
        elif default is REQUIRED:
            problems.append(f"missing required key '{path}{k}'")
            out[k] = None
        elif isinstance(default, dict) and default:
            out[k] = _merge({}, default, f"{path}{k}.", problems)
        else:
            out[k] = copy.deepcopy(default)
    return out


def _build(problems, label, fn):
    try:
        return fn()
    except (ValueError, TypeError) as e:
        problems.append(f"{label}: {e}")
        return None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(doc: dict, subcommand: str | None = None) -> RunConfig:
    """Fill defaults and check every module's parameter invariants."""
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a JSON object"])
    raw = _merge(doc, SCHEMA, "", problems)

    typed = set()  # sections with type errors: skip their invariant checks
    for section, keys in (("grid", ("lx", "ly")), ("time", ("t_final",)),
                          ("phys", ("rho", "nu", "beta", "gamma", "b")), ("cost", WEIGHT_KEYS)):
        for k in keys:
            v = raw[section][k]
            if v is None:
                typed.add(section)
            elif not _is_number(v):
                problems.append(f"'{section}.{k}' must be a number (got {v!r})")
                typed.add(section)
    for section, k in (("grid", "nx"), ("grid", "ny"), ("time", "n_steps")):
        v = raw[section][k]
        if v is None:
            typed.add(section)
        elif not isinstance(v, int) or isinstance(v, bool):
            problems.append(f"'{section}.{k}' must be an integer (got {v!r})")
            typed.add(section)
    for (section, k), allowed in CHOICES.items():
        if raw[section][k] not in allowed:
            problems.append(f"'{section}.{k}' must be one of {list(allowed)} (got {raw[section][k]!r})")
            typed.add(section)
    if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool) or raw["seed"] < 0:
        problems.append(f"'seed' must be a non-negative integer (got {raw['seed']!r})")

    grid = time = params = weights = optimizer = None
    if "grid" not in typed:
        grid = _build(problems, "grid", lambda: GridSpec(**raw["grid"]))
    if "time" not in typed:
        time = _build(problems, "time", lambda: TimeSpec(**raw["time"]))
    if "phys" not in typed:
        bad = PhysParams.violations(_Bare(**raw["phys"]))
        problems.extend(f"phys: {m}" for m in bad)
        if not bad:
            params = PhysParams(**raw["phys"])
    if "cost" not in typed:
        bad_w = [f"cost: {k} >= 0 required (got {raw['cost'][k]})" for k in WEIGHT_KEYS
                 if not raw["cost"][k] >= 0]
        problems.extend(bad_w)
        if not bad_w:
            weights = CostWeights(**{k: raw["cost"][k] for k in WEIGHT_KEYS})
    if "optimizer" not in typed:
        optimizer = _build(problems, "optimizer", lambda: OptimizeOptions(**raw["optimizer"]))

    if subcommand in ("optimize", "gradcheck") and weights is not None and not weights.kappa3 > 0:
        problems.append(f"cost: kappa3 > 0 required for {subcommand} (got {raw['cost']['kappa3']})")
    if subcommand == "mms" and params is not None and params.b != 0:
        problems.append("phys: manufactured solutions satisfy the free-slip condition; b = 0 required for mms")
    if raw["control"]["init"] == "file" and not raw["control"]["path"]:
        problems.append("control: init 'file' needs 'control.path'")
    tf = raw["cost"]["target_files"]
    if not isinstance(tf, dict) or set(tf) - {"v_d", "p_d", "v_dT", "p_dT"}:
        problems.append("cost.target_files: keys must be among v_d, p_d, v_dT, p_dT")
    cad = raw["output"]["cadence"]
    if cad is not None and (not isinstance(cad, int) or cad < 1):
        problems.append(f"output.cadence must be a positive integer or null (got {cad!r})")
    eps = raw["checks"]["lipschitz_epsilons"]
    if not (isinstance(eps, list) and eps and all(_is_number(e) and e > 0 for e in eps)
            and all(a > b for a, b in zip(eps, eps[1:]))):
        problems.append("checks.lipschitz_epsilons must be positive and decreasing")
    if problems:
        raise ConfigError(problems)
    return RunConfig(raw, grid, time, params, weights, optimizer)


class _Bare:
    """Attribute holder so PhysParams.violations can list every problem."""

    def __init__(self, **kw):
        self.__dict__.update(kw)


def parse_config(text: str, subcommand: str | None = None) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"JSON syntax error at line {e.lineno}, column {e.colno}: {e.msg}"]) from None
    return validate(doc, subcommand)


def load_config(path, subcommand: str | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), subcommand)
