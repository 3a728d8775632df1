"""Discrete adjoint of the semi-implicit stepper and the reduced gradient.

The forward step is ``x_{k+1} = A^{-1}(M x_k - N(x_k) + B u_k)``.  With
``mu_k`` the total derivative of the cost with respect to ``x_k``, the sweep is

    xi_k  = A^{-T} mu_k,
    mu_k  = dJ_k/dx_k + (M - N'(x_k))^T xi_{k+1},

and ``dJ/du_k = dt |cell| kappa3 u_k + B^T xi_{k+1}``.  The reported adjoint
fields are scaled as ``(chi, lam) = -xi / (dt |cell|)`` so that the
L^2(I x Omega) gradient reads ``g_k = kappa3 u_k - chi_{k+1}`` and a stationary
control satisfies ``u = chi / kappa3``.  In the continuum limit ``(chi, lam)``
solve the backward linear parabolic system carrying the seven bilinear
coupling terms of the transposed explicit Jacobian, with tracking sources
entering with a negative sign and terminal data
``(rho chi(T), beta lam(T)) = -(lambda1 (v(T) - v_dT), lambda2 (p(T) - p_dT))``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import scipy.sparse as sp

from .forward import Discretization, Trajectory, discretization, pack, unpack
from .grid import GridSpec


@dataclass(frozen=True)
class CostWeights:
    kappa1: float = 0.0
    kappa2: float = 0.0
    kappa3: float = 1.0
    varkappa1: float = 0.0
    varkappa2: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        bad = [f"{f.name} >= 0 required (got {getattr(self, f.name)})"
               for f in fields(self) if not getattr(self, f.name) >= 0]
        if bad:
            raise ValueError("; ".join(bad))

    def scaled(self, s: float) -> CostWeights:
        return CostWeights(**{f.name: s * getattr(self, f.name) for f in fields(self)})

    @property
    def tracking_active(self) -> bool:
        return any(getattr(self, n) > 0 for n in
                   ("kappa1", "kappa2", "varkappa1", "varkappa2", "lambda1", "lambda2"))


@dataclass(frozen=True)
class Targets:
    """Tracking data; ``None`` means zero.

    Time-dependent targets are indexed by time level k = 0..n_steps (level 0
    is never tracked).  A target without the leading time axis is held
    constant in time.  Boundary traces follow the face order of
    :meth:`GridSpec.boundary_weights`.
    """

    v_d: np.ndarray | None = None   # (n+1, 2, nx, ny)
    p_d: np.ndarray | None = None   # (n+1, nx, ny)
    v_d1: np.ndarray | None = None  # (n+1, 2, nb)
    p_d1: np.ndarray | None = None  # (n+1, nb)
    v_dT: np.ndarray | None = None  # (2, nx, ny)
    p_dT: np.ndarray | None = None  # (nx, ny)

    def resolved(self, grid: GridSpec, n_steps: int) -> Targets:
        nt, nb = n_steps + 1, grid.n_boundary
        shapes = {
            "v_d": (nt, 2, *grid.shape), "p_d": (nt, *grid.shape),
            "v_d1": (nt, 2, nb), "p_d1": (nt, nb),
            "v_dT": (2, *grid.shape), "p_dT": grid.shape,
        }
        out = {}
        for name, shape in shapes.items():
            a = getattr(self, name)
            a = np.zeros(shape) if a is None else np.asarray(a, dtype=float)
            if a.shape != shape:
                try:
                    a = np.broadcast_to(a, shape)
                except ValueError:
                    raise ValueError(f"target {name} has shape {a.shape}, expected {shape}") from None
            if not np.all(np.isfinite(a)):
                raise ValueError(f"target {name} is not finite")
            out[name] = a
        return Targets(**out)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> Targets:
        """Targets reproduced exactly by ``traj`` (all traces included)."""
        disc = discretization(traj.grid, traj.params, traj.time.dt)
        v1 = traj.v[:, 0].reshape(len(traj), -1)
        v2 = traj.v[:, 1].reshape(len(traj), -1)
        pf = traj.p.reshape(len(traj), -1)
        v_d1 = np.stack([v1 @ disc.v1.trace.T, v2 @ disc.v2.trace.T], axis=1)
        return cls(v_d=traj.v.copy(), p_d=traj.p.copy(), v_d1=v_d1, p_d1=pf @ disc.p.trace.T,
                   v_dT=traj.v[-1].copy(), p_dT=traj.p[-1].copy())


@dataclass(frozen=True)
class AdjointTrajectory:
    grid: GridSpec
    dt: float
    chi: np.ndarray  # (n+1, 2, nx, ny)
    lam: np.ndarray  # (n+1, nx, ny)

    def __post_init__(self):
        for a in (self.chi, self.lam):
            a.setflags(write=False)


# ---------------------------------------------------------------------------
# cost derivative per time level

def _traces(disc: Discretization, x: np.ndarray):
    n = disc.n
    return (disc.v1.trace @ x[:n], disc.v2.trace @ x[n:2 * n], disc.p.trace @ x[2 * n:])


def level_cost(disc: Discretization, x: np.ndarray, k: int, n_steps: int,
               w: CostWeights, tg: Targets) -> tuple[float, np.ndarray]:
    """Cost contribution of state level k and its gradient w.r.t. x_k.

    Levels 1..n carry dt-weighted bulk and boundary tracking (right-endpoint
    rectangle rule); level n adds the terminal terms.  Level 0 carries none.
    """
    grid, dt = disc.grid, disc.dt
    n, wa = disc.n, grid.cell_area
    grad = np.zeros_like(x)
    if k == 0:
        return 0.0, grad
    val = 0.0
    ev = x[:2 * n] - tg.v_d[k].reshape(-1)
    ep = x[2 * n:] - tg.p_d[k].reshape(-1)
    val += dt * wa * 0.5 * (w.kappa1 * ev @ ev + w.kappa2 * ep @ ep)
    grad[:2 * n] += dt * wa * w.kappa1 * ev
    grad[2 * n:] += dt * wa * w.kappa2 * ep
    if w.varkappa1 or w.varkappa2:
        wb = grid.boundary_weights()
        t1, t2, tp = _traces(disc, x)
        e1, e2 = t1 - tg.v_d1[k, 0], t2 - tg.v_d1[k, 1]
        e3 = tp - tg.p_d1[k]
        val += dt * 0.5 * (w.varkappa1 * (wb @ (e1 * e1) + wb @ (e2 * e2))
                           + w.varkappa2 * wb @ (e3 * e3))
        grad[:n] += dt * w.varkappa1 * (disc.v1.trace.T @ (wb * e1))
        grad[n:2 * n] += dt * w.varkappa1 * (disc.v2.trace.T @ (wb * e2))
        grad[2 * n:] += dt * w.varkappa2 * (disc.p.trace.T @ (wb * e3))
    if k == n_steps:
        fv = x[:2 * n] - tg.v_dT.reshape(-1)
        fp = x[2 * n:] - tg.p_dT.reshape(-1)
        val += wa * 0.5 * (w.lambda1 * fv @ fv + w.lambda2 * fp @ fp)
        grad[:2 * n] += wa * w.lambda1 * fv
        grad[2 * n:] += wa * w.lambda2 * fp
    return val, grad


# ---------------------------------------------------------------------------
# linearised step and its transpose

def linearized_step(disc: Discretization, x: np.ndarray, dx: np.ndarray,
                    du: np.ndarray | None = None) -> np.ndarray:
    """Directional derivative of one forward step about x (Euclidean vectors)."""
    r = disc.mass * dx - disc.explicit_jacobian(x) @ dx
    if du is not None:
        r[:2 * disc.n] += du
    return disc.solve(r)


def linearized_step_transpose(disc: Discretization, x: np.ndarray, b: np.ndarray,
                              jac: sp.spmatrix | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Transpose of :func:`linearized_step`: returns (state part, control part)."""
    y = disc.solve(b, transpose=True)
    if jac is None:
        jac = disc.explicit_jacobian(x)
    return disc.mass * y - jac.T @ y, y[:2 * disc.n].copy()


# ---------------------------------------------------------------------------
# public adjoint operations

def _scale(disc: Discretization) -> float:
    return -1.0 / (disc.dt * disc.grid.cell_area)


def _to_fields(disc: Discretization, xi: np.ndarray):
    v, p = unpack(_scale(disc) * xi, disc.grid)
    return v.copy(), p.copy()


def _from_fields(disc: Discretization, chi, lam) -> np.ndarray:
    return pack(np.asarray(chi), np.asarray(lam)) / _scale(disc)


def terminal_conditions(traj: Trajectory, w: CostWeights, tg: Targets):
    """Adjoint fields at t_n: the transposed implicit solve of the level-n cost gradient."""
    disc = discretization(traj.grid, traj.params, traj.time.dt)
    tg = tg.resolved(traj.grid, traj.time.n_steps)
    n_steps = traj.time.n_steps
    _, mu = level_cost(disc, traj.state(n_steps), n_steps, n_steps, w, tg)
    return _to_fields(disc, disc.solve(mu, step=n_steps, transpose=True))


def _adjoint_step(disc, xi_next, x_k, k, n_steps, w, tg):
    _, mu = level_cost(disc, x_k, k, n_steps, w, tg)
    y = disc.mass * xi_next - disc.explicit_jacobian(x_k).T @ xi_next
    return disc.solve(mu + y, step=k, transpose=True)


def step_adjoint(chi_next, lam_next, traj: Trajectory, k: int, w: CostWeights, tg: Targets):
    """Map the adjoint fields at level k+1 to level k along ``traj``."""
    disc = discretization(traj.grid, traj.params, traj.time.dt)
    tg = tg.resolved(traj.grid, traj.time.n_steps)
    xi = _adjoint_step(disc, _from_fields(disc, chi_next, lam_next), traj.state(k), k,
                       traj.time.n_steps, w, tg)
    return _to_fields(disc, xi)


def adjoint_solve(traj: Trajectory, w: CostWeights, tg: Targets) -> AdjointTrajectory:
    """Backward sweep k = n..0 along the forward trajectory."""
    grid, time = traj.grid, traj.time
    disc = discretization(grid, traj.params, time.dt)
    tg = tg.resolved(grid, time.n_steps)
    n_steps = time.n_steps
    xis = np.zeros((n_steps + 1, 3 * grid.size))
    if w.tracking_active:
        _, mu = level_cost(disc, traj.state(n_steps), n_steps, n_steps, w, tg)
        xis[n_steps] = disc.solve(mu, step=n_steps, transpose=True)
        for k in range(n_steps - 1, -1, -1):
            xis[k] = _adjoint_step(disc, xis[k + 1], traj.state(k), k, n_steps, w, tg)
    xis *= _scale(disc)
    n = grid.size
    chi = xis[:, :2 * n].reshape(n_steps + 1, 2, *grid.shape)
    lam = xis[:, 2 * n:].reshape(n_steps + 1, *grid.shape)
    return AdjointTrajectory(grid, time.dt, chi, lam)


def reduced_gradient(adj: AdjointTrajectory, control, w: CostWeights) -> np.ndarray:
    """L^2(I x Omega) gradient g_k = kappa3 u_k - chi_{k+1}, k = 0..n-1."""
    chi = adj.chi[1:]
    if control is None:
        return -chi.copy()
    return w.kappa3 * np.asarray(control, dtype=float) - chi

