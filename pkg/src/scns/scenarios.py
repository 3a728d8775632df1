"""Named synthetic fields and the reference instances used by scripts, CLI and tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import CostWeights, Targets
from .control import ControlProblem
from .forward import PhysParams, TimeSpec, Trajectory, forward_solve
from .grid import GridSpec

# ---------------------------------------------------------------------------
# generators: (grid, amplitude) -> interior arrays


def _xy(grid: GridSpec):
    X, Y = grid.cell_centers()
    return np.pi * X / grid.lx, np.pi * Y / grid.ly


def velocity_zero(grid: GridSpec, amplitude: float = 0.0) -> np.ndarray:
    return np.zeros((2, *grid.shape))


def velocity_shear(grid: GridSpec, amplitude: float = 0.5) -> np.ndarray:
    """Decaying shear layer v = (A sin(pi x) cos(pi y), 0)."""
    x, y = _xy(grid)
    return np.array([amplitude * np.sin(x) * np.cos(y), np.zeros_like(x)])


def velocity_vortex(grid: GridSpec, amplitude: float = 0.5) -> np.ndarray:
    """Single cell vortex, solenoidal on the unit square."""
    x, y = _xy(grid)
    return amplitude * np.array([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])


def pressure_zero(grid: GridSpec, amplitude: float = 0.0) -> np.ndarray:
    return np.zeros(grid.shape)


def pressure_constant(grid: GridSpec, amplitude: float = 1.0) -> np.ndarray:
    return np.full(grid.shape, float(amplitude))


def pressure_pulse(grid: GridSpec, amplitude: float = 1e-2, center: float = 1.0,
                   width: float = 0.1) -> np.ndarray:
    """Gaussian pulse in x, uniform in y."""
    X, _ = grid.cell_centers()
    return amplitude * np.exp(-((X - center) / width) ** 2)


def pressure_mode(grid: GridSpec, amplitude: float = 0.4) -> np.ndarray:
    x, y = _xy(grid)
    return amplitude * np.cos(x) * np.cos(y)


def control_smooth(grid: GridSpec, time: TimeSpec, amplitude: float = 1.0) -> np.ndarray:
    """Smooth time-modulated body force, piecewise constant per step (midpoint times)."""
    x, y = _xy(grid)
    t = time.times[:-1] + 0.5 * time.dt
    s = np.sin(np.pi * t / time.t_final)[:, None, None]
    c = np.cos(np.pi * t / time.t_final)[:, None, None]
    u = np.empty((time.n_steps, 2, *grid.shape))
    u[:, 0] = amplitude * s * (np.sin(x) * np.cos(y))
    u[:, 1] = amplitude * c * (np.cos(x) * np.sin(2 * y))
    return u


VELOCITY = {"zero": velocity_zero, "shear": velocity_shear, "vortex": velocity_vortex}
PRESSURE = {"zero": pressure_zero, "constant": pressure_constant, "pulse": pressure_pulse,
            "mode": pressure_mode}
CONTROL = {"zero": lambda g, t, a=0.0: np.zeros((t.n_steps, 2, *g.shape)),
           "smooth": control_smooth}


# ---------------------------------------------------------------------------
# reference instances

def rest_state(n_steps: int = 100, pressure: float = 0.0):
    """32 x 32 at rest with uniform pressure and no forcing."""
    g = GridSpec(32, 32)
    return g, PhysParams(), TimeSpec(0.1 * n_steps / 100, n_steps), pressure_constant(g, pressure)


def shear_decay(n_steps: int, quasi: bool = False, amplitude: float = 0.5):
    """64 x 64 decaying shear flow, T = 0.5, no control: returns the trajectory."""
    g = GridSpec(64, 64)
    prm = PhysParams(rho=1.0, nu=0.01, beta=1.0, gamma=1e-3, b=0.1, quasi_incompressible=quasi)
    return forward_solve(g, velocity_shear(g, amplitude), None, None, prm, TimeSpec(0.5, n_steps))


@dataclass(frozen=True)
class WaveSetup:
    grid: GridSpec = GridSpec(256, 8, 4.0, 0.125)
    params: PhysParams = PhysParams(rho=1.0, nu=1e-3, beta=0.25, gamma=1e-4)
    time: TimeSpec = TimeSpec(1.25, 500)
    probes: tuple[float, float] = (2.0, 3.0)
    windows: tuple[float, float] = (1.0, 1.25)  # latest admissible arrival per probe


def arrival_time(traj: Trajectory, x_probe: float, t_max: float) -> float:
    """Peak time of the y-averaged pressure at ``x_probe`` (parabolic refinement)."""
    g, ts = traj.grid, traj.time.times
    i = int(round(x_probe / g.dx))  # x_probe sits on the face between cells i-1 and i
    sig = 0.5 * (traj.p[:, i - 1, :].mean(axis=1) + traj.p[:, i, :].mean(axis=1))
    m = int(np.sum(ts <= t_max))
    k = int(np.argmax(sig[:m]))
    k = min(max(k, 1), len(sig) - 2)
    a, b, c = sig[k - 1], sig[k], sig[k + 1]
    den = a - 2 * b + c
    off = 0.5 * (a - c) / den if den != 0 else 0.0
    return float(ts[k] + off * traj.time.dt)


def wave_speed(setup: WaveSetup = WaveSetup()) -> tuple[float, Trajectory]:
    """Front speed of a pressure pulse between two probes."""
    g = setup.grid
    traj = forward_solve(g, None, pressure_pulse(g), None, setup.params, setup.time)
    t1 = arrival_time(traj, setup.probes[0], setup.windows[0])
    t2 = arrival_time(traj, setup.probes[1], setup.windows[1])
    return (setup.probes[1] - setup.probes[0]) / (t2 - t1), traj


def gradcheck_problem(seed: int = 1, quasi: bool = False) -> tuple[ControlProblem, np.ndarray]:
    """16 x 16, 10 steps, every cost term active, random targets and control."""
    rng = np.random.default_rng(seed)
    g = GridSpec(16, 16)
    prm = PhysParams(rho=1.0, nu=0.02, beta=0.5, gamma=0.01, b=0.3, quasi_incompressible=quasi)
    tm = TimeSpec(0.2, 10)
    nt, nb = tm.n_steps + 1, g.n_boundary
    tg = Targets(v_d=0.1 * rng.standard_normal((nt, 2, *g.shape)),
                 p_d=0.1 * rng.standard_normal((nt, *g.shape)),
                 v_d1=0.1 * rng.standard_normal((nt, 2, nb)),
                 p_d1=0.1 * rng.standard_normal((nt, nb)),
                 v_dT=0.1 * rng.standard_normal((2, *g.shape)),
                 p_dT=0.1 * rng.standard_normal(g.shape))
    w = CostWeights(1.0, 0.7, 0.05, 0.5, 0.3, 0.8, 0.6)
    x, y = _xy(g)
    v0 = np.array([0.5 * np.sin(x) * np.cos(y), -0.3 * np.cos(x) * np.sin(2 * y)])
    pb = ControlProblem(g, prm, tm, w, tg, v0, pressure_mode(g))
    return pb, rng.standard_normal(pb.control_shape)


def recoverable_problem(kappa3: float = 1e-2) -> tuple[ControlProblem, np.ndarray]:
    """32 x 32, 50 steps: targets are the full state generated by a smooth control u*."""
    g = GridSpec(32, 32)
    prm = PhysParams(rho=1.0, nu=0.05, beta=1.0, gamma=0.01, b=0.1)
    tm = TimeSpec(1.0, 50)
    u_star = control_smooth(g, tm)
    tg = Targets.from_trajectory(forward_solve(g, None, None, u_star, prm, tm))
    w = CostWeights(1.0, 1.0, kappa3, 0.5, 0.5, 1.0, 1.0)
    return ControlProblem(g, prm, tm, w, tg), u_star


def lipschitz_setup():
    """32 x 32, 50 steps about a smooth forced vortex: (grid, u, du, params, time, v0, p0)."""
    g = GridSpec(32, 32)
    prm = PhysParams(rho=1.0, nu=0.02, beta=1.0, gamma=0.01, b=0.1)
    tm = TimeSpec(0.5, 50)
    x, y = _xy(g)
    t = tm.times[:-1] + 0.5 * tm.dt
    du = np.empty((tm.n_steps, 2, *g.shape))
    du[:, 0] = (1 + t)[:, None, None] * np.cos(2 * x) * np.sin(y)
    du[:, 1] = np.sin(2 * x) * np.cos(3 * y)
    return g, control_smooth(g, tm), du, prm, tm, velocity_vortex(g), pressure_zero(g)
