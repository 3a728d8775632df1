"""Semi-implicit time stepping of the semi-compressible Navier-Stokes system.

Per step, with x = (v, p) on interior cells::

    rho (v' - v)/dt - div(nu E(v')) + grad p'   = u - rho (v.grad)v
                                                  - rho/2 (div v) v - grad(beta/2 p^2)
    beta (p' - p)/dt + div v' - gamma lap p'    = - beta v.grad p

The left-hand side is one constant sparse matrix ``A`` (factorised once); the
bilinear terms are lagged.  ``div(nu E(v))`` is discretised as
``nu/2 (lap v + grad div v)``, which equals it for the slip walls of a
rectangle and makes the pressure/viscous pairs exact summation-by-parts.
"""
from __future__ import annotations

import functools
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (BoundarySpec, GridSpec, ScalarField, StencilMatrices, VectorField,
                   pressure_rule, velocity_rules)

log = logging.getLogger(__name__)

SOLVE_RTOL = 1e-10


class SolverError(RuntimeError):
    """Linear solve failure or non-finite state during time stepping."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class PhysParams:
    rho: float = 1.0
    nu: float = 1e-2
    beta: float = 1.0
    gamma: float = 1e-3
    b: float = 0.0
    quasi_incompressible: bool = False

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not self.rho > 0:
            out.append(f"rho > 0 required (got {self.rho})")
        if not self.nu > 0:
            out.append(f"nu > 0 required (got {self.nu})")
        if not self.beta >= 0:
            out.append(f"beta >= 0 required (got {self.beta})")
        if not self.gamma >= 0:
            out.append(f"gamma >= 0 required (got {self.gamma})")
        if not self.b >= 0:
            out.append(f"b >= 0 required (got {self.b})")
        return out

    @property
    def wave_speed(self) -> float:
        return float(np.inf) if self.beta == 0 else 1.0 / np.sqrt(self.rho * self.beta)

    @property
    def boundary(self) -> BoundarySpec:
        return BoundarySpec(b=self.b)


@dataclass(frozen=True)
class TimeSpec:
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final > 0 required (got {self.t_final})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer (got {self.n_steps})")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def cfl_limit(grid: GridSpec, params: PhysParams, vmax: float = 0.0) -> float:
    """Advisory step bound 0.5 min(dx, dy) / (|v|_inf + c)."""
    return 0.5 * min(grid.dx, grid.dy) / (vmax + params.wave_speed)


# ---------------------------------------------------------------------------
# discrete system

def pack(v: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ravel(v[0]), np.ravel(v[1]), np.ravel(p)])


def unpack(x: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    n = grid.size
    v = x[:2 * n].reshape(2, *grid.shape)
    p = x[2 * n:].reshape(grid.shape)
    return v, p


class Discretization:
    """Operators and the factorised implicit matrix for (grid, params, dt)."""

    def __init__(self, grid: GridSpec, params: PhysParams, dt: float):
        if params.beta == 0:
            raise ValueError("time stepping needs beta > 0: the pressure block is singular at beta = 0")
        self.grid, self.params, self.dt = grid, params, dt
        rule1, rule2 = velocity_rules(grid, params.nu, params.boundary)
        self.v1 = StencilMatrices(grid, rule1)
        self.v2 = StencilMatrices(grid, rule2)
        self.p = StencilMatrices(grid, pressure_rule())
        n = grid.size
        self.n = n
        self.div = sp.hstack([self.v1.dx, self.v2.dy], format="csr")
        self.grad = sp.vstack([self.p.dx, self.p.dy], format="csr")
        lap_v = sp.block_diag([self.v1.lap, self.v2.lap], format="csr")
        self.viscous = (0.5 * params.nu * (lap_v + self.grad @ self.div)).tocsr()
        i2, i1 = sp.identity(2 * n), sp.identity(n)
        self.A = sp.bmat([
            [params.rho / dt * i2 - self.viscous, self.grad],
            [self.div, params.beta / dt * i1 - params.gamma * self.p.lap],
        ], format="csc")
        self.mass = np.concatenate([np.full(2 * n, params.rho / dt), np.full(n, params.beta / dt)])
        self._lu = spla.splu(self.A)

    # -- explicit bilinear terms --------------------------------------------
    def explicit_terms(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Lagged terms as they appear on the left-hand side, per term."""
        prm, n = self.params, self.n
        v1, v2, p = x[:n], x[n:2 * n], x[2 * n:]
        d1x, d1y = self.v1.dx @ v1, self.v1.dy @ v1
        d2x, d2y = self.v2.dx @ v2, self.v2.dy @ v2
        dv = d1x + d2y
        zeros_v, zeros_p = np.zeros(2 * n), np.zeros(n)
        terms = {
            "convection": prm.rho * np.concatenate([v1 * d1x + v2 * d1y, v1 * d2x + v2 * d2y]),
            "temam": 0.5 * prm.rho * np.concatenate([dv * v1, dv * v2]),
            "pressure_quadratic": zeros_v,
            "pressure_convection": zeros_p,
        }
        if not prm.quasi_incompressible:
            terms["pressure_quadratic"] = self.grad @ (0.5 * prm.beta * p * p)
            terms["pressure_convection"] = prm.beta * (v1 * (self.p.dx @ p) + v2 * (self.p.dy @ p))
        return terms

    def explicit(self, x: np.ndarray) -> np.ndarray:
        t = self.explicit_terms(x)
        mom = t["convection"] + t["temam"] + t["pressure_quadratic"]
        return np.concatenate([mom, t["pressure_convection"]])

    def explicit_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        """Jacobian of :meth:`explicit` at ``x`` (3N x 3N)."""
        prm, n = self.params, self.n
        v1, v2, p = x[:n], x[n:2 * n], x[2 * n:]
        D = sp.diags
        ops = ((self.v1.dx, self.v1.dy), (self.v2.dx, self.v2.dy))
        vel = (v1, v2)
        dv = self.div @ x[:2 * n]
        blocks = [[None] * 3 for _ in range(3)]
        for i in range(2):
            ddx, ddy = ops[i]
            gx, gy = ddx @ vel[i], ddy @ vel[i]
            transport = D(v1) @ ddx + D(v2) @ ddy
            for j in range(2):
                blk = prm.rho * D(gx if j == 0 else gy)
                blk = blk + 0.5 * prm.rho * D(vel[i]) @ (self.v1.dx if j == 0 else self.v2.dy)
                if i == j:
                    blk = blk + prm.rho * transport + 0.5 * prm.rho * D(dv)
                blocks[i][j] = blk
        if prm.quasi_incompressible:
            blocks[2][2] = sp.csr_matrix((n, n))
        else:
            gp = self.grad @ D(prm.beta * p)
            blocks[0][2], blocks[1][2] = gp[:n], gp[n:]
            blocks[2][0] = prm.beta * D(self.p.dx @ p)
            blocks[2][1] = prm.beta * D(self.p.dy @ p)
            blocks[2][2] = prm.beta * (D(v1) @ self.p.dx + D(v2) @ self.p.dy)
        return sp.bmat(blocks, format="csr", dtype=float)

    # -- solves ---------------------------------------------------------------
    def solve(self, rhs: np.ndarray, step: int = -1, transpose: bool = False) -> np.ndarray:
        if not np.any(rhs):
            return np.zeros_like(rhs)
        sol = self._lu.solve(rhs, trans="T" if transpose else "N")
        op = self.A.T if transpose else self.A
        res = np.linalg.norm(op @ sol - rhs) / np.linalg.norm(rhs)
        if not res <= SOLVE_RTOL:
            raise SolverError(step, f"linear solve relative residual {res:.3e} > {SOLVE_RTOL:g}")
        return sol

    def rhs(self, x: np.ndarray, u: np.ndarray | None, source: np.ndarray | None) -> np.ndarray:
        r = self.mass * x - self.explicit(x)
        if u is not None:
            r[:2 * self.n] += u
        if source is not None:
            r += source
        return r

    def step(self, x: np.ndarray, u: np.ndarray | None = None,
             source: np.ndarray | None = None, step: int = -1) -> np.ndarray:
        return self.solve(self.rhs(x, u, source), step)


@functools.lru_cache(maxsize=16)
def discretization(grid: GridSpec, params: PhysParams, dt: float) -> Discretization:
    return Discretization(grid, params, dt)


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True)
class Trajectory:
    grid: GridSpec
    params: PhysParams
    time: TimeSpec
    v: np.ndarray  # (n_steps + 1, 2, nx, ny)
    p: np.ndarray  # (n_steps + 1, nx, ny)

    def __post_init__(self):
        for a in (self.v, self.p):
            a.setflags(write=False)

    def __len__(self):
        return self.v.shape[0]

    def state(self, k: int) -> np.ndarray:
        return pack(self.v[k], self.p[k])

    def velocity(self, k: int) -> VectorField:
        return VectorField.from_interior(self.grid, self.v[k])

    def pressure(self, k: int) -> ScalarField:
        return ScalarField.from_interior(self.grid, self.p[k])


def _interior(f, grid: GridSpec, vector: bool) -> np.ndarray:
    if isinstance(f, (ScalarField, VectorField)):
        return f.interior.copy()
    shape = (2, *grid.shape) if vector else grid.shape
    if f is None:
        return np.zeros(shape)
    a = np.array(f, dtype=float)
    if a.shape != shape:
        a = np.broadcast_to(a, shape).copy()
    return a


def _control_array(control, grid: GridSpec, time: TimeSpec) -> np.ndarray | None:
    if control is None:
        return None
    u = np.asarray(control, dtype=float)
    want = (time.n_steps, 2, *grid.shape)
    if u.shape != want:
        raise ValueError(f"control must have shape {want}, got {u.shape}")
    return u


def step_state(v, p, u, params: PhysParams, dt: float, grid: GridSpec | None = None,
               source=None) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit step; returns interior arrays (v', p')."""
    if grid is None:
        grid = v.grid
    if not dt > 0:
        raise ValueError("dt must be positive")
    disc = discretization(grid, params, float(dt))
    x = pack(_interior(v, grid, True), _interior(p, grid, False))
    uf = None if u is None else pack(_interior(u, grid, True), np.zeros(0))
    x1 = disc.step(x, uf, source, step=0)
    v1, p1 = unpack(x1, grid)
    return v1.copy(), p1.copy()


def forward_solve(grid: GridSpec, v0, p0, control, params: PhysParams, time: TimeSpec,
                  source: tuple[np.ndarray, np.ndarray] | None = None) -> Trajectory:
    """Integrate from (v0, p0) under the control ``u`` (shape (n_steps, 2, nx, ny)).

    ``source`` optionally adds (momentum, pressure) forcing per step, used by
    manufactured-solution runs; entry k is applied in the step k -> k+1.
    """
    if params.gamma == 0:
        warnings.warn("gamma = 0 lies outside the analysed regime (gamma > 0)", stacklevel=2)
    v0 = _interior(v0, grid, True)
    p0 = _interior(p0, grid, False)
    if not (np.all(np.isfinite(v0)) and np.all(np.isfinite(p0))):
        raise ValueError("initial data must be finite")
    u = _control_array(control, grid, time)
    disc = discretization(grid, params, time.dt)
    n = grid.size
    vmax = float(np.max(np.abs(v0))) if v0.size else 0.0
    if time.dt > cfl_limit(grid, params, vmax):
        warnings.warn(f"dt = {time.dt:.3g} exceeds the advisory CFL bound "
                      f"{cfl_limit(grid, params, vmax):.3g}", stacklevel=2)
    xs = np.empty((time.n_steps + 1, 3 * n))
    xs[0] = pack(v0, p0)
    for k in range(time.n_steps):
        uk = None if u is None else u[k].reshape(-1)
        sk = None
        if source is not None:
            sk = np.concatenate([source[0][k].reshape(-1), source[1][k].reshape(-1)])
        xs[k + 1] = disc.step(xs[k], uk, sk, step=k)
        if not np.all(np.isfinite(xs[k + 1])):
            raise SolverError(k, f"non-finite state (max |x_k| = {np.max(np.abs(xs[k])):.3e})")
    v = xs[:, :2 * n].reshape(time.n_steps + 1, 2, *grid.shape)
    p = xs[:, 2 * n:].reshape(time.n_steps + 1, *grid.shape)
    return Trajectory(grid, params, time, v, p)


# ---------------------------------------------------------------------------
# energy audit

@dataclass(frozen=True)
class EnergyReport:
    """Terms of the energy balance at t_k, k = 0..n_steps (cumulative where timed).

    ``pressure_work`` is the cumulative integral of beta p^2 div v, the power
    of the quadratic pressure and pressure-convection terms; for the full model
    it is not zero and belongs on the right-hand side of the balance.
    ``residual`` includes it, ``residual_without_pressure_work`` does not.
    """

    times: np.ndarray
    kinetic: np.ndarray
    elastic: np.ndarray
    bulk_dissipation: np.ndarray
    boundary_dissipation: np.ndarray
    control_power: np.ndarray
    pressure_work: np.ndarray
    residual: np.ndarray
    residual_without_pressure_work: np.ndarray

    @property
    def initial_energy(self) -> float:
        return float(self.kinetic[0] + self.elastic[0])

    def max_relative_residual(self) -> float:
        e0 = self.initial_energy
        return float(np.max(np.abs(self.residual)) / e0) if e0 > 0 else float(np.max(np.abs(self.residual)))

    def as_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in self.__dataclass_fields__}


def dissipation_rates(disc: Discretization, x: np.ndarray) -> tuple[float, float]:
    """(bulk, boundary) dissipation rates of the discrete operators at state x.

    Bulk: nu/2 (face gradients of v incl. wall-normal faces + (div v)^2) plus
    gamma |face gradient of p|^2.  Boundary: the tangential wall faces, equal
    to b v_t(wall) v_t(cell) per face length.  Together they equal
    -<div(nu E(v)), v> - <gamma lap p, p> exactly.
    """
    prm, n = disc.params, disc.n
    v1, v2, p = x[:n], x[n:2 * n], x[2 * n:]
    wa = disc.grid.cell_area
    n1, t1 = disc.v1.wall_face_energy(v1)  # v1 is normal on x-walls
    t2, n2 = disc.v2.wall_face_energy(v2)
    dv = disc.div @ x[:2 * n]
    bulk = 0.5 * prm.nu * (disc.v1.interior_face_energy(v1) + disc.v2.interior_face_energy(v2)
                           + n1 + n2 + wa * float(dv @ dv))
    bulk += prm.gamma * disc.p.interior_face_energy(p)
    boundary = 0.5 * prm.nu * (t1 + t2)
    return bulk, boundary


def energy_audit(traj: Trajectory, control=None) -> EnergyReport:
    grid, prm, time = traj.grid, traj.params, traj.time
    disc = discretization(grid, prm, time.dt)
    u = _control_array(control, grid, time)
    wa, dt = grid.cell_area, time.dt
    nt = time.n_steps + 1
    kinetic = 0.5 * prm.rho * wa * np.sum(traj.v ** 2, axis=(1, 2, 3))
    elastic = 0.5 * prm.beta * wa * np.sum(traj.p ** 2, axis=(1, 2))
    bulk, bdry, power, pwork = (np.zeros(nt) for _ in range(4))
    for k in range(1, nt):
        x = traj.state(k)
        rb, rs = dissipation_rates(disc, x)
        bulk[k] = bulk[k - 1] + dt * rb
        bdry[k] = bdry[k - 1] + dt * rs
        pw = 0.0
        if u is not None:
            pw = wa * float(np.sum(u[k - 1] * traj.v[k]))
        power[k] = power[k - 1] + dt * pw
        work = 0.0
        if not prm.quasi_incompressible:
            dv = (disc.div @ x[:2 * grid.size]).reshape(grid.shape)
            work = prm.beta * wa * float(np.sum(traj.p[k] ** 2 * dv))
        pwork[k] = pwork[k - 1] + dt * work
    lhs = kinetic + elastic + bulk + bdry - kinetic[0] - elastic[0]
    res_paper = lhs - power
    return EnergyReport(time.times, kinetic, elastic, bulk, bdry, power, pwork,
                        res_paper - pwork, res_paper)
