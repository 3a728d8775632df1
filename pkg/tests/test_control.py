import numpy as np
import pytest

from scns.adjoint import CostWeights, Targets
from scns.control import (ControlProblem, OptimizeOptions, evaluate_J, evaluate_J_and_gradient,
                          optimize, stationarity_residual)
from scns.forward import PhysParams, TimeSpec
from scns.grid import GridSpec
from scns.scenarios import gradcheck_problem
from scns.verify import fd_gradient_oracle

G = GridSpec(8, 8)
PRM = PhysParams(rho=1.0, nu=0.05, beta=1.0, gamma=0.01, b=0.1)
TM = TimeSpec(0.2, 8)


def small_problem(weights, targets=Targets()):
    X, Y = G.cell_centers()
    v0 = 0.3 * np.array([np.sin(np.pi * X) * np.cos(np.pi * Y), -np.cos(np.pi * X) * np.sin(np.pi * Y)])
    return ControlProblem(G, PRM, TM, weights, targets, v0, 0.2 * np.cos(np.pi * X))


def test_quadratic_only_cost():
    pb = small_problem(CostWeights(kappa3=0.5))
    u = np.random.default_rng(0).standard_normal(pb.control_shape)
    J, g = evaluate_J_and_gradient(pb, u)
    assert J == pytest.approx(0.25 * pb.norm(u) ** 2, rel=1e-14)
    np.testing.assert_allclose(g, 0.5 * u, rtol=1e-15)
    rep = fd_gradient_oracle(pb, u, n_directions=3, seed=1)
    assert rep.max_min_error <= 1e-10


def test_kappa3_required():
    pb = small_problem(CostWeights(kappa1=1.0, kappa3=0.0))
    with pytest.raises(ValueError, match="kappa3"):
        evaluate_J_and_gradient(pb, None)
    with pytest.raises(ValueError, match="kappa3"):
        optimize(pb)


def test_cost_nonnegative_and_zero_at_own_state():
    pb, u = gradcheck_problem(seed=0)
    assert evaluate_J(pb, u) >= 0
    tg = Targets.from_trajectory(pb.solve_state(None))
    pb0 = ControlProblem(pb.grid, pb.params, pb.time, pb.weights, tg, pb.v0, pb.p0)
    assert evaluate_J(pb0, pb0.zero_control()) == pytest.approx(0.0, abs=1e-28)


def test_scaling_weights_scales_J_and_gradient():
    pb, u = gradcheck_problem(seed=4)
    J, g = evaluate_J_and_gradient(pb, u)
    s = 3.5
    pbs = ControlProblem(pb.grid, pb.params, pb.time, pb.weights.scaled(s), pb.targets, pb.v0, pb.p0)
    Js, gs = evaluate_J_and_gradient(pbs, u)
    assert Js == pytest.approx(s * J, rel=1e-12)
    np.testing.assert_allclose(gs, s * g, rtol=1e-10, atol=1e-14 * np.max(np.abs(g)))


def test_scaling_leaves_directions_unchanged():
    w = CostWeights(kappa1=1.0, kappa2=0.5, kappa3=0.1, lambda1=1.0)
    tg = Targets(v_dT=0.2 * np.ones((2, *G.shape)), p_d=0.1 * np.ones(G.shape))
    pb = small_problem(w, tg)
    pbs = small_problem(w.scaled(4.0), tg)
    dirs = {}
    for name, prob in (("a", pb), ("b", pbs)):
        seen = []
        optimize(prob, None, OptimizeOptions(max_iter=4),
                 callback=lambda it, u, J, g: seen.append(g / prob.norm(g)))
        dirs[name] = seen
    assert len(dirs["a"]) == len(dirs["b"]) > 0
    for a, b in zip(dirs["a"], dirs["b"]):
        np.testing.assert_allclose(a, b, atol=1e-6)


@pytest.mark.parametrize("method,gtol", [("lbfgs", 1e-7), ("steepest", 1e-2)])
def test_optimizer_monotone_and_stationary(method, gtol):
    w = CostWeights(kappa1=1.0, kappa2=1.0, kappa3=0.1, lambda1=0.5)
    tg = Targets(v_d=0.1 * np.ones((2, *G.shape)), p_d=0.05 * np.ones(G.shape))
    pb = small_problem(w, tg)
    u, rep = optimize(pb, None, OptimizeOptions(method=method, max_iter=150, gtol=gtol))
    assert rep.converged, rep.message
    acc = rep.accepted_J
    assert all(b < a for a, b in zip(acc, acc[1:]))
    res, chi = stationarity_residual(pb, u)
    tol = gtol * max(1.0, rep.grad_norm0)
    assert res <= tol * (1 + pb.norm(u)) / w.kappa3 + 1e-15
    assert res == pytest.approx(rep.optimality_residual)


def test_pure_control_cost_converges_in_one_step():
    pb = small_problem(CostWeights(kappa3=2.0))
    u0 = np.random.default_rng(1).standard_normal(pb.control_shape)
    u, rep = optimize(pb, u0)
    assert rep.converged and len(rep.iterations) == 1
    assert np.max(np.abs(u)) < 1e-14


def test_gradient_fidelity_along_iterates():
    w = CostWeights(kappa1=1.0, kappa2=0.3, kappa3=0.2, varkappa1=0.2, lambda2=0.4)
    tg = Targets(v_d=0.1 * np.ones((2, *G.shape)), p_d1=0.1)
    pb = small_problem(w, tg)
    iterates = []
    optimize(pb, None, OptimizeOptions(max_iter=3), callback=lambda it, u, J, g: iterates.append(u.copy()))
    for u in iterates:
        assert fd_gradient_oracle(pb, u, n_directions=2, seed=5).max_min_error <= 1e-6


def test_options_validated():
    with pytest.raises(ValueError):
        OptimizeOptions(method="newton")
    with pytest.raises(ValueError):
        OptimizeOptions(armijo=1.5)
    with pytest.raises(ValueError):
        OptimizeOptions(gtol=0.0)


def test_line_search_failure_reports_instead_of_raising():
    pb = small_problem(CostWeights(kappa1=1.0, kappa3=1e-3), Targets(v_d=1.0))
    u, rep = optimize(pb, None, OptimizeOptions(max_backtracks=1, backtrack=1e-9))
    assert np.all(np.isfinite(u))
    assert rep.message
