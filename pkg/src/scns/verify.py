"""Independent checks: finite-difference gradients, manufactured solutions,
discrete calculus identities and a perturbation-response (Lipschitz) probe."""
from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np
import sympy as sy

from .control import ControlProblem, evaluate_J, evaluate_J_and_gradient
from .forward import PhysParams, TimeSpec, discretization, forward_solve
from .grid import (BoundarySpec, GridSpec, ScalarField, VectorField, convect, div,
                   fill_ghosts_state, grad, integrate_volume)

DEFAULT_EPS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
EXACT = 1e-12  # errors at or below this are rounding: reported slope is inf


# ---------------------------------------------------------------------------
# finite-difference gradient oracle

@dataclass
class GradCheckReport:
    eps: list[float]
    analytic: list[float]
    fd: list[list[float]]       # [direction][eps]
    errors: list[list[float]]   # [direction][eps]
    seed: int

    @property
    def min_errors(self) -> list[float]:
        return [min(e) for e in self.errors]

    @property
    def max_min_error(self) -> float:
        return max(self.min_errors)

    def as_dict(self) -> dict:
        return {"eps": self.eps, "analytic": self.analytic, "fd": self.fd,
                "errors": self.errors, "min_errors": self.min_errors, "seed": self.seed}


def _rel_err(a: float, b: float, floor: float = 1e-300) -> float:
    if abs(a) <= floor and abs(b) <= floor:
        return 0.0
    return abs(a - b) / max(abs(b), abs(a) if b == 0 else 0.0, floor)


def fd_gradient_oracle(problem: ControlProblem, control, n_directions: int = 5, seed: int = 0,
                       eps: tuple[float, ...] = DEFAULT_EPS) -> GradCheckReport:
    """Compare <g, d> with central differences of J along seeded random directions.

    Step sizes are ``eps * max(1, ||u||) / ||d||``; the reported error per
    direction is the minimum over the sweep.
    """
    if n_directions < 1:
        raise ValueError("n_directions >= 1 required")
    rng = np.random.default_rng(seed)
    u = problem.zero_control() if control is None else np.asarray(control, dtype=float)
    _, g = evaluate_J_and_gradient(problem, u)
    scale = max(1.0, problem.norm(u))
    rep = GradCheckReport(list(eps), [], [], [], seed)
    for _ in range(n_directions):
        d = rng.standard_normal(u.shape)
        d /= problem.norm(d)
        an = problem.inner(g, d)
        fds, errs = [], []
        for e in eps:
            h = e * scale
            fd = (evaluate_J(problem, u + h * d) - evaluate_J(problem, u - h * d)) / (2 * h)
            fds.append(fd)
            errs.append(_rel_err(an, fd, floor=1e-14 * max(1.0, abs(an))))
        rep.analytic.append(an)
        rep.fd.append(fds)
        rep.errors.append(errs)
    return rep


# ---------------------------------------------------------------------------
# manufactured solutions

_x, _y, _t = sy.symbols("x y t", real=True)


@dataclass(frozen=True)
class MmsCase:
    """Closed-form (v*, p*) with sources making it an exact solution.

    Velocity components are built from sin/cos products with sine in the
    normal direction and cosine in the tangential one, so n.v = 0 and
    dv_t/dn = 0 (free slip, b = 0) hold exactly, as does dp/dn = 0.
    """

    name: str
    v1: str
    v2: str
    p: str
    lx: float = 1.0
    ly: float = 1.0

    def exprs(self):
        loc = {"x": _x, "y": _y, "t": _t, "Lx": sy.Float(self.lx), "Ly": sy.Float(self.ly)}
        return tuple(sy.sympify(e, locals=loc) for e in (self.v1, self.v2, self.p))


SPATIAL_CASE = MmsCase(
    "spatial",
    "0.5*sin(pi*x/Lx)*(cos(pi*y/Ly) + 0.5*cos(2*pi*y/Ly))",
    "0.4*cos(pi*x/Lx)*sin(2*pi*y/Ly) + 0.2*cos(2*pi*x/Lx)*sin(pi*y/Ly)",
    "0.3*cos(pi*x/Lx)*cos(2*pi*y/Ly) + 0.2*cos(2*pi*x/Lx)",
)
TEMPORAL_CASE = MmsCase("temporal", "0", "0", "0.5*sin(2*t) + 0.25*cos(3*t)")
SPACETIME_CASE = MmsCase(
    "spacetime",
    "0.5*(1 + 0.5*sin(2*t))*sin(pi*x/Lx)*cos(pi*y/Ly)",
    "0.4*cos(t)*cos(pi*x/Lx)*sin(2*pi*y/Ly)",
    "0.3*(1 + 0.5*cos(3*t))*cos(pi*x/Lx)*cos(2*pi*y/Ly)",
)


@functools.lru_cache(maxsize=32)
def mms_functions(case: MmsCase, params: PhysParams):
    """Numeric callables f(x, y, t) for (v1, v2, p, momentum source x/y, pressure source).

    Sources are the residuals of the state equations at (v*, p*):
      f_v = rho v_t + rho (v.grad)v - nu/2 (lap v + grad div v) + rho/2 (div v) v
            + grad(p + beta/2 p^2)
      f_p = beta (p_t + v.grad p) + div v - gamma lap p
    with the beta-convective and quadratic pressure terms dropped in the
    quasi-incompressible variant.
    """
    v1, v2, p = case.exprs()
    rho, nu, beta, gamma = (sy.Float(params.rho), sy.Float(params.nu),
                            sy.Float(params.beta), sy.Float(params.gamma))
    d = sy.diff
    dv = d(v1, _x) + d(v2, _y)
    lap = lambda f: d(f, _x, 2) + d(f, _y, 2)  # noqa: E731
    pq = 0 if params.quasi_incompressible else beta / 2 * p**2
    fv = []
    for vi, xi in ((v1, _x), (v2, _y)):
        fv.append(rho * d(vi, _t) + rho * (v1 * d(vi, _x) + v2 * d(vi, _y))
                  - nu / 2 * (lap(vi) + d(dv, xi)) + rho / 2 * dv * vi + d(p + pq, xi))
    conv = 0 if params.quasi_incompressible else beta * (v1 * d(p, _x) + v2 * d(p, _y))
    fp = beta * d(p, _t) + conv + dv - gamma * lap(p)
    out = []
    for e in (v1, v2, p, fv[0], fv[1], fp):
        f = sy.lambdify((_x, _y, _t), e, "numpy")
        out.append(lambda X, Y, t, f=f: np.broadcast_to(f(X, Y, t), X.shape).astype(float))
    return tuple(out)


def mms_solve(case: MmsCase, grid: GridSpec, params: PhysParams, time: TimeSpec):
    """Run the stepper with manufactured sources; return (errors, trajectory).

    Errors are discrete L^2(I x Omega) norms over levels 1..n for v and p.
    Source entry k is evaluated at t_{k+1}, matching the implicit levels.
    """
    fv1, fv2, fp, sv1, sv2, sp_ = mms_functions(case, params)
    X, Y = grid.cell_centers()
    ts = time.times
    v0 = np.array([fv1(X, Y, 0.0), fv2(X, Y, 0.0)])
    p0 = fp(X, Y, 0.0)
    src_v = np.array([[sv1(X, Y, t), sv2(X, Y, t)] for t in ts[1:]])
    src_p = np.array([sp_(X, Y, t) for t in ts[1:]])
    with warnings.catch_warnings():
        # the implicit stepper is run beyond the explicit CFL bound on purpose
        warnings.filterwarnings("ignore", message=".*CFL")
        traj = forward_solve(grid, v0, p0, None, params, time, source=(src_v, src_p))
    ev = ep = 0.0
    for k in range(1, time.n_steps + 1):
        ev += np.sum((traj.v[k, 0] - fv1(X, Y, ts[k])) ** 2 + (traj.v[k, 1] - fv2(X, Y, ts[k])) ** 2)
        ep += np.sum((traj.p[k] - fp(X, Y, ts[k])) ** 2)
    w = time.dt * grid.cell_area
    return (float(np.sqrt(w * ev)), float(np.sqrt(w * ep))), traj


def fit_slope(h, err) -> float:
    """Least-squares slope of log(err) against log(h)."""
    h, err = np.asarray(h, float), np.asarray(err, float)
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class MmsReport:
    case: str
    refine: str
    h: list[float]
    dt: list[float]
    err_v: list[float]
    err_p: list[float]
    slope_v: float = float("nan")
    slope_p: float = float("nan")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def run_mms(case: MmsCase, ladder, params: PhysParams, t_final: float,
            refine: str = "space") -> MmsReport:
    """Convergence study over ``ladder`` = [(nx, ny, n_steps), ...].

    Slopes are fitted against h = max(dx, dy) for ``refine`` in
    {"space", "both"} and against dt for "time".  A field whose error is
    identically zero on every level (e.g. v in the temporal case) gets slope
    ``inf``.
    """
    if len(ladder) < 3:
        raise ValueError("a refinement ladder needs at least 3 levels")
    rep = MmsReport(case.name, refine, [], [], [], [])
    for nx, ny, n in ladder:
        g = GridSpec(nx, ny, case.lx, case.ly)
        tm = TimeSpec(t_final, n)
        (ev, ep), _ = mms_solve(case, g, params, tm)
        rep.h.append(max(g.dx, g.dy))
        rep.dt.append(tm.dt)
        rep.err_v.append(ev)
        rep.err_p.append(ep)
    xs = rep.dt if refine == "time" else rep.h
    slopes = []
    for errs in (rep.err_v, rep.err_p):
        slopes.append(float("inf") if max(errs) <= EXACT else fit_slope(xs, errs))
    rep.slope_v, rep.slope_p = slopes
    return rep


# ---------------------------------------------------------------------------
# calculus identities

def synthetic_fields(grid: GridSpec, solenoidal: bool = False):
    """Smooth (v, p) with n.v = 0, dv_t/dn = 0 and dp/dn = 0 on the walls."""
    X, Y = grid.cell_centers()
    pi = np.pi
    x, y = X / grid.lx, Y / grid.ly
    if solenoidal:
        # v = (d psi/dy, -d psi/dx), psi = sin(pi x) sin(pi y) + 0.5 sin(2 pi x) sin(pi y)
        v1 = (np.sin(pi * x) + 0.5 * np.sin(2 * pi * x)) * np.cos(pi * y) * pi / grid.ly
        v2 = -(np.cos(pi * x) + np.cos(2 * pi * x)) * np.sin(pi * y) * pi / grid.lx
    else:
        v1 = np.sin(pi * x) * (np.cos(pi * y) + 0.4 * np.cos(2 * pi * y)) + 0.3 * np.sin(2 * pi * x)
        v2 = (0.7 * np.cos(pi * x) * np.sin(pi * y) + 0.5 * np.cos(2 * pi * x) * np.sin(2 * pi * y)
              + 0.2 * np.sin(pi * y))
    p = np.cos(pi * x) * np.cos(2 * pi * y) + 0.5 * np.cos(2 * pi * x) + 0.3
    return np.array([v1, v2]), p


@dataclass
class IdentityResiduals:
    """Residuals of the discrete analogues of

    green:    int p div v + int grad p . v                  (= 0)
    pressure: int p v.grad p + 1/2 int p^2 div v            (= 0)
    temam:    int rho (v.grad)v.v + 1/2 int rho |v|^2 div v  (= 0)
    each normalised by the size of its first integrand term.
    """

    n: int
    green: float
    pressure: float
    temam: float


def check_calculus_identities(v, p, grid: GridSpec, rho: float = 1.0) -> IdentityResiduals:
    vf = VectorField.from_interior(grid, v)
    pf = ScalarField.from_interior(grid, p)
    vf, pf = fill_ghosts_state(vf, pf, BoundarySpec(b=0.0), nu=1.0)
    dv = div(vf).interior
    gp = grad(pf).interior
    vi, pi_ = vf.interior, pf.interior
    vol = lambda a: integrate_volume(a, grid)  # noqa: E731
    c = convect(vf, vf).interior
    pc = convect(vf, pf).interior

    def norm(a, b):
        s = np.sqrt(vol(a * a) * vol(b * b))
        return s if s > 0 else 1.0

    green = abs(vol(pi_ * dv) + vol(np.sum(gp * vi, axis=0))) / norm(pi_, dv)
    pressure = abs(vol(pi_ * pc) + 0.5 * vol(pi_**2 * dv)) / norm(pi_, pc)
    kin = np.sum(c * vi, axis=0)
    temam = abs(rho * vol(kin) + 0.5 * rho * vol(np.sum(vi**2, axis=0) * dv)) / norm(np.sqrt(np.sum(c**2, 0)), np.sqrt(np.sum(vi**2, 0)))
    return IdentityResiduals(grid.nx, float(green), float(pressure), float(temam))


def identity_ladder(sizes=(32, 64, 128), solenoidal: bool = False, lx: float = 1.0, ly: float = 1.0):
    """Residuals over a grid ladder plus fitted slopes for each identity."""
    rows = []
    for n in sizes:
        g = GridSpec(n, n, lx, ly)
        v, p = synthetic_fields(g, solenoidal)
        rows.append(check_calculus_identities(v, p, g))
    h = [1.0 / n for n in sizes]
    slopes = {}
    for name in ("green", "pressure", "temam"):
        errs = [getattr(r, name) for r in rows]
        slopes[name] = float("inf") if max(errs) <= EXACT else fit_slope(h, errs)
    return rows, slopes


# ---------------------------------------------------------------------------
# Lipschitz probe

def h1_time_norm(traj_v: np.ndarray, traj_p: np.ndarray, grid: GridSpec, params: PhysParams,
                 dt: float) -> float:
    """Discrete L^2(I; H^1) norm of (v, p) over levels 1..n (face-difference gradients)."""
    ops = discretization(grid, params, dt)
    stencil = (ops.v1, ops.v2)
    total = 0.0
    for k in range(1, traj_v.shape[0]):
        for c in range(2):
            f = traj_v[k, c]
            total += grid.cell_area * np.sum(f * f) + stencil[c].interior_face_energy(f)
        q = traj_p[k]
        total += grid.cell_area * np.sum(q * q) + ops.p.interior_face_energy(q)
    return float(np.sqrt(dt * total))


@dataclass
class LipschitzTable:
    epsilons: list[float]
    ratios: list[float]
    delta_norm: float

    @property
    def variation(self) -> float:
        r = np.asarray(self.ratios)
        if np.all(r == 0):
            return 1.0
        return float(r.max() / r.min())

    def as_dict(self) -> dict:
        return {"epsilons": self.epsilons, "ratios": self.ratios,
                "delta_norm": self.delta_norm, "variation": self.variation}


def lipschitz_probe(grid: GridSpec, u, delta_u, epsilons, params: PhysParams, time: TimeSpec,
                    v0=None, p0=None) -> LipschitzTable:
    """Ratios ||S(u + eps du) - S(u)|| / (eps ||du||) in L^2(I; H^1) x L^2(I; H^1)."""
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be positive and decreasing")
    u = np.asarray(u, dtype=float)
    du = np.asarray(delta_u, dtype=float)
    dnorm = float(np.sqrt(np.sum(du * du) * time.dt * grid.cell_area))
    base = forward_solve(grid, v0, p0, u, params, time)
    ratios = []
    for e in eps:
        if dnorm == 0:
            ratios.append(0.0)
            continue
        pert = forward_solve(grid, v0, p0, u + e * du, params, time)
        diff = h1_time_norm(pert.v - base.v, pert.p - base.p, grid, params, time.dt)
        ratios.append(diff / (e * dnorm))
    return LipschitzTable(eps, ratios, dnorm)

