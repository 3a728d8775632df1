"""Structured cell-centred grid, ghost-layer fields and second-order stencils.

Fields live on the cells of ``(0, lx) x (0, ly)`` with one ghost layer per
side.  Arrays are indexed ``[ix, iy]``; flattened interior vectors use C
order, i.e. ``ix * ny + iy``.

Two views of the same discrete operators are provided:

* array stencils acting on ghost-padded :class:`ScalarField` /
  :class:`VectorField` objects (``grad``, ``div``, ``laplacian``, ...), and
* sparse matrices acting on flattened interior vectors
  (:class:`StencilMatrices`), with the boundary ghost rule folded in.

The time stepper and the adjoint use the matrices; the array stencils are the
readable reference and are cross-checked against the matrices in the tests.

A ghost rule is a single factor ``s`` with ``ghost = s * first_interior``:
``-1`` is odd reflection (zero trace), ``+1`` even reflection (zero normal
derivative), and ``(nu - b h) / (nu + b h)`` the Navier-slip Robin fill.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

EVEN = 1.0
ODD = -1.0


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx, ny must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx >= 4 and ny >= 4, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain extents lx, ly must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def n_boundary(self) -> int:
        """Number of boundary faces, ordered left, right, bottom, top."""
        return 2 * (self.nx + self.ny)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def boundary_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Face midpoints of the boundary, in trace order."""
        xc = (np.arange(self.nx) + 0.5) * self.dx
        yc = (np.arange(self.ny) + 0.5) * self.dy
        bx = np.concatenate([np.zeros(self.ny), np.full(self.ny, self.lx), xc, xc])
        by = np.concatenate([yc, yc, np.zeros(self.nx), np.full(self.nx, self.ly)])
        return bx, by

    def boundary_weights(self) -> np.ndarray:
        """Face lengths in trace order."""
        return np.concatenate([
            np.full(2 * self.ny, self.dy), np.full(2 * self.nx, self.dx)])


@dataclass(frozen=True)
class BoundarySpec:
    """Navier-slip boundary data.

    The flags switch individual conditions off for experimentation with the
    array stencils; the time stepper always applies all three.
    """

    b: float = 0.0
    normal_velocity_zero: bool = True
    tangential_robin: bool = True
    pressure_neumann: bool = True

    def __post_init__(self):
        if self.b < 0:
            raise ValueError(f"slip coefficient b must be >= 0, got {self.b}")


def robin_factor(nu: float, b: float, h: float) -> float:
    """Ghost factor enforcing (nu/2) dv_t/dn + b v_t = 0 at a face midway."""
    return (nu - b * h) / (nu + b * h)


@dataclass(frozen=True)
class GhostRule:
    """Ghost factors of one scalar component: (low, high) per axis."""

    x: tuple[float, float]
    y: tuple[float, float]


def velocity_rules(grid: GridSpec, nu: float, bc: BoundarySpec) -> tuple[GhostRule, GhostRule]:
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    normal = ODD if bc.normal_velocity_zero else EVEN
    if bc.tangential_robin:
        tx = robin_factor(nu, bc.b, grid.dx)
        ty = robin_factor(nu, bc.b, grid.dy)
    else:
        tx = ty = EVEN
    return (GhostRule(x=(normal, normal), y=(ty, ty)),
            GhostRule(x=(tx, tx), y=(normal, normal)))


def pressure_rule(bc: BoundarySpec | None = None) -> GhostRule:
    s = EVEN if bc is None or bc.pressure_neumann else ODD
    return GhostRule(x=(s, s), y=(s, s))


# ---------------------------------------------------------------------------
# ghost-padded fields

@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        want = (self.grid.nx + 2, self.grid.ny + 2)
        if self.values.shape != want:
            raise ValueError(f"expected padded shape {want}, got {self.values.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> ScalarField:
        return cls(grid, np.zeros((grid.nx + 2, grid.ny + 2)))

    @classmethod
    def from_interior(cls, grid: GridSpec, interior) -> ScalarField:
        f = cls.zeros(grid)
        f.values[1:-1, 1:-1] = interior
        return f

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def copy(self) -> ScalarField:
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    x: ScalarField
    y: ScalarField
    grid: GridSpec = field(init=False)

    def __post_init__(self):
        if self.x.grid != self.y.grid:
            raise ValueError("vector components must share a grid")
        self.grid = self.x.grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> VectorField:
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_interior(cls, grid: GridSpec, interior) -> VectorField:
        interior = np.asarray(interior, dtype=float)
        return cls(ScalarField.from_interior(grid, interior[0]),
                   ScalarField.from_interior(grid, interior[1]))

    @property
    def interior(self) -> np.ndarray:
        return np.stack([self.x.interior, self.y.interior])

    def copy(self) -> VectorField:
        return VectorField(self.x.copy(), self.y.copy())


def fill_ghosts(f: ScalarField, rule: GhostRule) -> ScalarField:
    """Return a copy of ``f`` with its ghost layer set by ``rule``.

    x-edges are filled first over the interior rows, then the y-edges over
    full columns, so each corner ghost is the product of both edge factors.
    """
    out = f.copy()
    a = out.values
    a[0, 1:-1] = rule.x[0] * a[1, 1:-1]
    a[-1, 1:-1] = rule.x[1] * a[-2, 1:-1]
    a[:, 0] = rule.y[0] * a[:, 1]
    a[:, -1] = rule.y[1] * a[:, -2]
    return out


def fill_ghosts_state(v: VectorField, p: ScalarField, bc: BoundarySpec,
                      nu: float) -> tuple[VectorField, ScalarField]:
    rx, ry = velocity_rules(v.grid, nu, bc)
    return (VectorField(fill_ghosts(v.x, rx), fill_ghosts(v.y, ry)),
            fill_ghosts(p, pressure_rule(bc)))


# ---------------------------------------------------------------------------
# array stencils (interior results, ghosts zero)

def _ddx(a: np.ndarray, h: float) -> np.ndarray:
    return (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * h)


def _ddy(a: np.ndarray, h: float) -> np.ndarray:
    return (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * h)


def grad(p: ScalarField) -> VectorField:
    g = p.grid
    return VectorField(ScalarField.from_interior(g, _ddx(p.values, g.dx)),
                       ScalarField.from_interior(g, _ddy(p.values, g.dy)))


def div(v: VectorField) -> ScalarField:
    g = v.grid
    return ScalarField.from_interior(g, _ddx(v.x.values, g.dx) + _ddy(v.y.values, g.dy))


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    a = f.values
    c = a[1:-1, 1:-1]
    lap = ((a[2:, 1:-1] - 2 * c + a[:-2, 1:-1]) / g.dx**2
           + (a[1:-1, 2:] - 2 * c + a[1:-1, :-2]) / g.dy**2)
    return ScalarField.from_interior(g, lap)


def strain(v: VectorField) -> np.ndarray:
    """Symmetric gradient, shape (2, 2, nx, ny)."""
    g = v.grid
    dxu, dyu = _ddx(v.x.values, g.dx), _ddy(v.x.values, g.dy)
    dxw, dyw = _ddx(v.y.values, g.dx), _ddy(v.y.values, g.dy)
    off = 0.5 * (dyu + dxw)
    return np.array([[dxu, off], [off, dyw]])


def convect(w: VectorField, f: ScalarField | VectorField):
    """(w . grad) f for a scalar or vector ``f``."""
    if isinstance(f, VectorField):
        return VectorField(convect(w, f.x), convect(w, f.y))
    g = f.grid
    out = (w.x.interior * _ddx(f.values, g.dx)
           + w.y.interior * _ddy(f.values, g.dy))
    return ScalarField.from_interior(g, out)


def boundary_trace(f: ScalarField) -> np.ndarray:
    """Face values (ghost + interior) / 2, ordered left, right, bottom, top."""
    a = f.values
    return np.concatenate([
        0.5 * (a[0, 1:-1] + a[1, 1:-1]),
        0.5 * (a[-1, 1:-1] + a[-2, 1:-1]),
        0.5 * (a[1:-1, 0] + a[1:-1, 1]),
        0.5 * (a[1:-1, -1] + a[1:-1, -2]),
    ])


def integrate_volume(f, grid: GridSpec | None = None) -> float:
    """Midpoint rule over the interior cells.

    Accepts a :class:`ScalarField` or an interior array (then ``grid`` is
    required).
    """
    if isinstance(f, ScalarField):
        grid, f = f.grid, f.interior
    return float(np.sum(f) * grid.cell_area)


def integrate_boundary(trace: np.ndarray, grid: GridSpec) -> float:
    """Midpoint rule over the boundary faces of a trace in standard order."""
    trace = np.asarray(trace, dtype=float)
    if trace.shape[-1] != grid.n_boundary:
        raise ValueError("trace length does not match the boundary face count")
    return float(np.sum(trace * grid.boundary_weights()))


# ---------------------------------------------------------------------------
# sparse matrices on flattened interior vectors

def central_1d(n: int, h: float, s_lo: float, s_hi: float) -> sp.csr_matrix:
    off = np.full(n - 1, 1.0 / (2 * h))
    m = sp.diags([-off, off], [-1, 1], shape=(n, n), format="lil")
    m[0, 0] -= s_lo / (2 * h)
    m[n - 1, n - 1] += s_hi / (2 * h)
    return m.tocsr()


def second_1d(n: int, h: float, s_lo: float, s_hi: float) -> sp.csr_matrix:
    main = np.full(n, -2.0 / h**2)
    main[0] += s_lo / h**2
    main[-1] += s_hi / h**2
    off = np.full(n - 1, 1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


class StencilMatrices:
    """Sparse derivative, Laplacian and trace operators for one ghost rule."""

    def __init__(self, grid: GridSpec, rule: GhostRule):
        self.grid = grid
        self.rule = rule
        ix, iy = sp.identity(grid.nx, format="csr"), sp.identity(grid.ny, format="csr")
        self.dx = sp.kron(central_1d(grid.nx, grid.dx, *rule.x), iy, format="csr")
        self.dy = sp.kron(ix, central_1d(grid.ny, grid.dy, *rule.y), format="csr")
        self.lap = (sp.kron(second_1d(grid.nx, grid.dx, *rule.x), iy)
                    + sp.kron(ix, second_1d(grid.ny, grid.dy, *rule.y))).tocsr()
        self.trace = self._trace_matrix()

    def _trace_matrix(self) -> sp.csr_matrix:
        g, r = self.grid, self.rule
        jy = np.arange(g.ny)
        ix = np.arange(g.nx)
        rows = np.arange(g.n_boundary)
        cols = np.concatenate([jy, (g.nx - 1) * g.ny + jy, ix * g.ny, ix * g.ny + g.ny - 1])
        vals = np.concatenate([
            np.full(g.ny, 0.5 * (1 + r.x[0])), np.full(g.ny, 0.5 * (1 + r.x[1])),
            np.full(g.nx, 0.5 * (1 + r.y[0])), np.full(g.nx, 0.5 * (1 + r.y[1]))])
        return sp.csr_matrix((vals, (rows, cols)), shape=(g.n_boundary, g.size))

    def wall_face_energy(self, f: np.ndarray) -> tuple[float, float]:
        """Wall-face part of -<lap f, f>, split by axis (x-walls, y-walls).

        Each wall face contributes f0 * (f0 - ghost) / h^2 times the cell area.
        """
        g, r = self.grid, self.rule
        f = f.reshape(g.shape)
        ex = ((1 - r.x[0]) * np.sum(f[0] ** 2) + (1 - r.x[1]) * np.sum(f[-1] ** 2)) / g.dx**2
        ey = ((1 - r.y[0]) * np.sum(f[:, 0] ** 2) + (1 - r.y[1]) * np.sum(f[:, -1] ** 2)) / g.dy**2
        return ex * g.cell_area, ey * g.cell_area

    def interior_face_energy(self, f: np.ndarray) -> float:
        """Sum of squared face differences over interior faces, times cell area."""
        g = self.grid
        f = f.reshape(g.shape)
        return float((np.sum(np.diff(f, axis=0) ** 2) / g.dx**2
                      + np.sum(np.diff(f, axis=1) ** 2) / g.dy**2) * g.cell_area)
