"""Reduced cost J(u) = Phi(u, S(u)), its gradient, and descent minimisation."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adjoint import CostWeights, Targets, adjoint_solve, level_cost, reduced_gradient
from .forward import PhysParams, SolverError, TimeSpec, Trajectory, discretization, forward_solve
from .grid import GridSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlProblem:
    """Everything but the control: grid, physics, time, cost and initial state."""

    grid: GridSpec
    params: PhysParams
    time: TimeSpec
    weights: CostWeights
    targets: Targets = field(default_factory=Targets)
    v0: np.ndarray | None = None
    p0: np.ndarray | None = None

    @property
    def control_shape(self) -> tuple[int, ...]:
        return (self.time.n_steps, 2, *self.grid.shape)

    def zero_control(self) -> np.ndarray:
        return np.zeros(self.control_shape)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """L^2(I x Omega) inner product of two controls."""
        return float(np.vdot(a, b)) * self.time.dt * self.grid.cell_area

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    def solve_state(self, control) -> Trajectory:
        return forward_solve(self.grid, self.v0, self.p0, control, self.params, self.time)


def cost_evaluate(traj: Trajectory, control, w: CostWeights, tg: Targets) -> float:
    """Bulk + control energy, boundary trace and terminal tracking sums."""
    grid, time = traj.grid, traj.time
    disc = discretization(grid, traj.params, time.dt)
    tg = tg.resolved(grid, time.n_steps)
    total = 0.0
    for k in range(1, time.n_steps + 1):
        total += level_cost(disc, traj.state(k), k, time.n_steps, w, tg)[0]
    if control is not None:
        u = np.asarray(control, dtype=float)
        total += 0.5 * w.kappa3 * time.dt * grid.cell_area * float(np.vdot(u, u))
    return total


def evaluate_J_and_gradient(problem: ControlProblem, control) -> tuple[float, np.ndarray]:
    """One forward and one backward sweep: (J(u), L^2 gradient of J at u)."""
    if not problem.weights.kappa3 > 0:
        raise ValueError("kappa3 > 0 required for the reduced gradient")
    u = problem.zero_control() if control is None else np.asarray(control, dtype=float)
    traj = problem.solve_state(u)
    J = cost_evaluate(traj, u, problem.weights, problem.targets)
    adj = adjoint_solve(traj, problem.weights, problem.targets)
    return J, reduced_gradient(adj, u, problem.weights)


def evaluate_J(problem: ControlProblem, control) -> float:
    traj = problem.solve_state(control)
    return cost_evaluate(traj, control, problem.weights, problem.targets)


def stationarity_residual(problem: ControlProblem, control) -> tuple[float, float]:
    """(||kappa3 u - chi||, ||chi||) in L^2(I x Omega)."""
    traj = problem.solve_state(control)
    chi = adjoint_solve(traj, problem.weights, problem.targets).chi[1:]
    u = np.asarray(control, dtype=float)
    return problem.norm(problem.weights.kappa3 * u - chi), problem.norm(chi)


# ---------------------------------------------------------------------------
# optimiser

@dataclass(frozen=True)
class OptimizeOptions:
    method: str = "lbfgs"  # or "steepest"
    max_iter: int = 200
    gtol: float = 1e-6
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    memory: int = 10

    def __post_init__(self):
        if self.method not in ("lbfgs", "steepest"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (0 < self.armijo < 1 and 0 < self.backtrack < 1):
            raise ValueError("armijo and backtrack factors must lie in (0, 1)")
        if self.max_iter < 0 or self.max_backtracks < 1 or self.memory < 1:
            raise ValueError("max_iter >= 0, max_backtracks >= 1, memory >= 1 required")
        if not self.gtol > 0:
            raise ValueError("gtol must be positive")


@dataclass
class IterationRecord:
    iteration: int
    J: float
    grad_norm: float
    step: float
    trials: list[tuple[float, float]]  # (step, J) of every line-search trial
    accepted: bool


@dataclass
class OptimizeReport:
    J0: float
    grad_norm0: float
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    J_final: float = float("nan")
    grad_norm_final: float = float("nan")
    optimality_residual: float = float("nan")
    chi_norm: float = float("nan")

    @property
    def accepted_J(self) -> list[float]:
        return [self.J0] + [it.J for it in self.iterations if it.accepted]

    def as_dict(self) -> dict:
        return {
            "J0": self.J0, "grad_norm0": self.grad_norm0, "converged": self.converged,
            "message": self.message, "J_final": self.J_final,
            "grad_norm_final": self.grad_norm_final,
            "optimality_residual": self.optimality_residual, "chi_norm": self.chi_norm,
            "iterations": [it.__dict__ for it in self.iterations],
        }


def _lbfgs_direction(problem, g, pairs, h0):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * problem.inner(s, q)
        alphas.append(a)
        q -= a * y
    r = h0 * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * problem.inner(y, r)
        r += (a - b) * s
    return -r


def optimize(problem: ControlProblem, u0=None, opts: OptimizeOptions = OptimizeOptions(),
             callback=None) -> tuple[np.ndarray, OptimizeReport]:
    """Minimise J by steepest descent or L-BFGS with Armijo backtracking.

    Stops when ||g|| <= gtol * max(1, ||g0||).  The first trial step is
    1/kappa3 along -g (exact for the pure control-energy cost); L-BFGS then
    uses unit trial steps with the usual s.y / y.y initial scaling.
    Trials whose state solve diverges count as rejected.  A failed line search
    ends the run with a diagnostic message.
    """
    w = problem.weights
    if not w.kappa3 > 0:
        raise ValueError("kappa3 > 0 required")
    u = problem.zero_control() if u0 is None else np.array(u0, dtype=float)
    J, g = evaluate_J_and_gradient(problem, u)
    gn = problem.norm(g)
    report = OptimizeReport(J0=J, grad_norm0=gn)
    stop = opts.gtol * max(1.0, gn)
    pairs: deque = deque(maxlen=opts.memory)
    h0 = 1.0 / w.kappa3

    for it in range(opts.max_iter + 1):
        if gn <= stop:
            report.converged = True
            report.message = f"gradient norm {gn:.3e} <= {stop:.3e}"
            break
        if it == opts.max_iter:
            report.message = f"reached max_iter = {opts.max_iter}"
            break
        if opts.method == "lbfgs" and pairs:
            d = _lbfgs_direction(problem, g, list(pairs), h0)
            alpha = 1.0
        else:
            d, alpha = -g, 1.0 / w.kappa3
        slope = problem.inner(g, d)
        if not slope < 0:
            pairs.clear()
            d, alpha = -g, 1.0 / w.kappa3
            slope = -gn * gn
        trials = []
        accepted = False
        for _ in range(opts.max_backtracks):
            u_try = u + alpha * d
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    J_try = evaluate_J(problem, u_try)
            except SolverError:
                J_try = float("inf")  # trial step left the stable regime
            trials.append((alpha, J_try))
            if J_try <= J + opts.armijo * alpha * slope and J_try < J:
                accepted = True
                break
            alpha *= opts.backtrack
        if not accepted:
            report.iterations.append(IterationRecord(it, J, gn, 0.0, trials, False))
            report.message = f"line search failed after {opts.max_backtracks} trials"
            break
        J_new, g_new = evaluate_J_and_gradient(problem, u_try)
        s, y = u_try - u, g_new - g
        sy = problem.inner(s, y)
        if sy > 1e-12 * problem.norm(s) * problem.norm(y):
            pairs.append((s, y, 1.0 / sy))
            h0 = sy / problem.inner(y, y)
        u, J, g = u_try, J_new, g_new
        gn = problem.norm(g)
        report.iterations.append(IterationRecord(it, J, gn, alpha, trials, True))
        log.info("iter %d  J = %.6e  |g| = %.3e  step = %.3g", it, J, gn, alpha)
        if callback is not None:
            callback(it, u, J, g)

    report.J_final = J
    report.grad_norm_final = gn
    report.optimality_residual, report.chi_norm = stationarity_residual(problem, u)
    return u, report
