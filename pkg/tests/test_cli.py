import json

import numpy as np
import pytest

from scns.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_THRESHOLD, main
from scns.io import read_field

ZERO = {"grid": {"nx": 8, "ny": 8}, "time": {"t_final": 0.1, "n_steps": 10}}


def run(tmp_path, sub, doc, *extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    code = main([sub, "--config", str(cfg), "--out", str(out), *extra])
    report = out / "report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None), out


def test_simulate_zero_config(tmp_path):
    code, rep, out = run(tmp_path, "simulate", ZERO)
    assert code == EXIT_OK
    files = sorted((out / "snapshots").glob("*.csv"))
    assert len(files) == 3 * 11  # default cadence n_steps / 10
    assert all(not np.any(read_field(f).values) for f in files)
    assert rep["result"]["relative_residual"] == 0.0
    assert rep["config"]["grid"]["nx"] == 8 and rep["seed"] == 0


def test_simulate_vtk_and_cadence(tmp_path):
    doc = dict(ZERO, output={"cadence": 5, "vtk": True}, initial={"velocity": "vortex"})
    code, rep, out = run(tmp_path, "simulate", doc)
    assert code == EXIT_OK
    assert len(list((out / "snapshots").glob("*.vtk"))) == 3


def test_deterministic_artifacts(tmp_path):
    doc = dict(ZERO, control={"init": "random", "amplitude": 0.5}, initial={"velocity": "shear"})
    a = run(tmp_path / "a", "simulate", doc, "--seed", "7")
    b = run(tmp_path / "b", "simulate", doc, "--seed", "7")
    for fa in sorted(a[2].rglob("*.*")):
        fb = b[2] / fa.relative_to(a[2])
        assert fa.read_bytes() == fb.read_bytes()
    assert a[1]["seed"] == 7


def test_config_error_exit(tmp_path):
    code, rep, _ = run(tmp_path, "optimize", dict(ZERO, cost={"kappa3": 0}))
    assert code == EXIT_CONFIG and rep is None
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_solver_failure_exit(tmp_path):
    doc = dict(ZERO, initial={"velocity": "vortex", "velocity_amplitude": 1e150})
    with np.errstate(all="ignore"):
        code, rep, _ = run(tmp_path, "simulate", doc)
    assert code == EXIT_SOLVER and "error" in rep


GRAD = {"seed": 1, "grid": {"nx": 8, "ny": 8}, "time": {"t_final": 0.1, "n_steps": 5},
        "phys": {"nu": 0.02, "beta": 0.5, "gamma": 0.01, "b": 0.3},
        "initial": {"velocity": "vortex", "pressure": "mode"},
        "cost": {"kappa1": 1, "kappa2": 0.7, "kappa3": 0.05, "varkappa1": 0.5, "varkappa2": 0.3,
                 "lambda1": 0.8, "lambda2": 0.6, "targets": "recoverable", "target_amplitude": 0.5},
        "control": {"init": "random"}}


def test_gradcheck_pass_and_threshold_failure(tmp_path):
    code, rep, _ = run(tmp_path / "ok", "gradcheck", GRAD)
    assert code == EXIT_OK and max(rep["result"]["min_errors"]) <= 1e-6
    strict = dict(GRAD, checks={"gradcheck_tol": 1e-300})
    code, rep, _ = run(tmp_path / "strict", "gradcheck", strict)
    assert code == EXIT_THRESHOLD and rep["passed"] is False


def test_optimize_writes_controls_and_restarts(tmp_path):
    doc = {"grid": {"nx": 8, "ny": 8}, "time": {"t_final": 0.2, "n_steps": 6},
           "phys": {"nu": 0.05, "gamma": 0.01, "b": 0.1},
           "cost": {"kappa1": 1, "kappa2": 1, "kappa3": 0.01, "lambda1": 1, "targets": "recoverable"},
           "optimizer": {"max_iter": 300}}
    code, rep, out = run(tmp_path / "a", "optimize", doc)
    assert code == EXIT_OK
    assert rep["result"]["J_final"] <= 0.1 * rep["result"]["J0"]
    assert len(list((out / "u_opt").glob("u_*.csv"))) == 12
    again = dict(doc, control={"init": "file", "path": str(out / "u_opt")})
    code, rep2, _ = run(tmp_path / "b", "optimize", again)
    # restarting at the optimum reproduces its cost; no further 10x reduction is possible
    assert rep2["result"]["J0"] == pytest.approx(rep["result"]["J_final"], rel=1e-12)
    assert rep2["result"]["stationary"] and code == EXIT_THRESHOLD


@pytest.mark.parametrize("case", ["spatial", "temporal"])
def test_mms_subcommand(tmp_path, case):
    doc = dict(ZERO, phys={"nu": 0.05, "gamma": 0.01},
               checks={"mms_case": case,
                       "mms_ladder": [[8, 8, 2], [16, 16, 2], [32, 32, 2]] if case == "spatial"
                       else [[6, 6, 10], [6, 6, 20], [6, 6, 40]]})
    code, rep, _ = run(tmp_path, "mms", doc)
    assert code == EXIT_OK, rep["result"]


def test_energy_audit_and_lipschitz(tmp_path):
    doc = {"grid": {"nx": 16, "ny": 16}, "time": {"t_final": 0.5, "n_steps": 20},
           "phys": {"b": 0.1}, "initial": {"velocity": "shear"}}
    code, rep, _ = run(tmp_path / "e", "energy-audit", doc)
    assert code == EXIT_OK and len(rep["result"]["levels"]) == 3
    doc = dict(doc, control={"init": "generator"}, time={"t_final": 0.2, "n_steps": 10})
    code, rep, _ = run(tmp_path / "l", "lipschitz", doc)
    assert code == EXIT_OK and rep["result"]["variation"] <= 2
