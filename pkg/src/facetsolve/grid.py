"""Uniform 1D/2D box grids with Dirichlet-aware fields and adjoint difference operators.

Scalars (u, f) live on nodes, vectors (gradients, fluxes) on cells. The
cell-centered `gradient` and the node-centered `divergence` form an exact
negative-adjoint pair under the natural quadrature weights, so the discrete
Euler-Lagrange equations of cellwise energies are well posed by construction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "BallRegion",
    "gradient",
    "divergence",
    "integrate",
    "lp_norm",
    "sup_norm",
    "node_quadrature_weights",
    "scalar_to_csv",
    "scalar_from_csv",
    "vector_to_csv",
    "vector_from_csv",
]


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box split into `n_cells` uniform cells per axis.

    Nodes sit at cell corners ((N+1)^dim of them), cells are indexed by their
    lower corner. Spacing h = side / n_cells.
    """

    dim: int
    n_cells: int
    origin: tuple[float, ...] = None  # type: ignore[assignment]
    side: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n_cells < 4:
            raise ValueError(f"need at least 4 cells per axis, got {self.n_cells}")
        if not (self.side > 0.0 and np.isfinite(self.side)):
            raise ValueError(f"side must be positive and finite, got {self.side}")
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.dim)
        elif len(self.origin) != self.dim:
            raise ValueError("origin length must match dim")

    @property
    def h(self) -> float:
        return self.side / self.n_cells

    @property
    def node_shape(self) -> tuple[int, ...]:
        return (self.n_cells + 1,) * self.dim

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return (self.n_cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def node_axis(self, axis: int = 0) -> np.ndarray:
        return self.origin[axis] + self.h * np.arange(self.n_cells + 1)

    def cell_axis(self, axis: int = 0) -> np.ndarray:
        return self.origin[axis] + self.h * (np.arange(self.n_cells) + 0.5)

    def node_coords(self) -> tuple[np.ndarray, ...]:
        axes = [self.node_axis(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def cell_centers(self) -> tuple[np.ndarray, ...]:
        axes = [self.cell_axis(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.node_shape, dtype=bool)
        if self.dim == 1:
            mask[0] = mask[-1] = True
        else:
            mask[0, :] = mask[-1, :] = True
            mask[:, 0] = mask[:, -1] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def sample_nodes(self, fn) -> "ScalarField":
        return ScalarField(self, np.asarray(fn(*self.node_coords()), dtype=float))

    def constant_field(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.node_shape, float(value)))


@dataclass(frozen=True)
class ScalarField:
    """Node-sampled scalar (solution u, datum f, Dirichlet trace)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.node_shape:
            raise ValueError(f"scalar field shape {vals.shape} != node shape {self.grid.node_shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field contains non-finite values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass(frozen=True)
class VectorField:
    """Cell-sampled vector (gradient of u, flux Z). Last axis is the component."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        want = self.grid.cell_shape + (self.grid.dim,)
        if vals.shape != want:
            raise ValueError(f"vector field shape {vals.shape} != cell shape {want}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector field contains non-finite values")

    def magnitudes(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=-1))


@dataclass(frozen=True)
class BallRegion:
    """Closed ball used to localize norms; membership is by cell center."""

    center: tuple[float, ...]
    radius: float
    theta: float | None = None

    def __post_init__(self):
        if not (0.0 < self.radius <= 1.0):
            raise ValueError(f"radius must lie in (0, 1], got {self.radius}")
        if self.theta is not None and not (0.0 < self.theta < 1.0):
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")

    def check_inside(self, grid: Grid) -> None:
        for a in range(grid.dim):
            lo = grid.origin[a]
            hi = grid.origin[a] + grid.side
            c = self.center[a]
            if c - self.radius < lo - 1e-12 or c + self.radius > hi + 1e-12:
                raise ValueError(f"ball of radius {self.radius} at {self.center} leaves the domain")

    def cell_mask(self, grid: Grid) -> np.ndarray:
        centers = grid.cell_centers()
        d2 = np.zeros(grid.cell_shape)
        for a in range(grid.dim):
            d2 = d2 + (centers[a] - self.center[a]) ** 2
        return d2 <= self.radius**2

    def shrunk(self) -> "BallRegion":
        if self.theta is None:
            raise ValueError("no shrink factor set")
        return BallRegion(self.center, self.theta * self.radius)


def default_ball(grid: Grid, radius_factor: float = 0.4, theta: float = 0.5) -> BallRegion:
    """Ball centered in the domain with R = radius_factor * side, kept strictly interior."""
    center = tuple(grid.origin[a] + 0.5 * grid.side for a in range(grid.dim))
    return BallRegion(center, radius_factor * grid.side, theta)


# ---------------------------------------------------------------------------
# difference operators


def gradient(u: ScalarField) -> VectorField:
    """Cell-centered gradient: forward differences averaged over cell edges.

    Exact on affine functions and second-order accurate at cell centers.
    """
    g = u.grid
    vals = u.values
    h = g.h
    if g.dim == 1:
        gx = (vals[1:] - vals[:-1]) / h
        return VectorField(g, gx[:, None])
    gx = (vals[1:, :-1] + vals[1:, 1:] - vals[:-1, :-1] - vals[:-1, 1:]) / (2.0 * h)
    gy = (vals[:-1, 1:] + vals[1:, 1:] - vals[:-1, :-1] - vals[1:, :-1]) / (2.0 * h)
    return VectorField(g, np.stack([gx, gy], axis=-1))


def divergence(V: VectorField) -> ScalarField:
    """Node-centered negative adjoint of `gradient`.

    Satisfies sum_cells h^d <V, grad(phi)> = -sum_nodes h^d phi * div(V)
    exactly for every phi vanishing on the boundary.
    """
    g = V.grid
    h = g.h
    out = np.zeros(g.node_shape)
    if g.dim == 1:
        vx = V.values[:, 0] / h
        out[1:] += vx
        out[:-1] -= vx
        return ScalarField(g, -out)
    vx = V.values[..., 0] / (2.0 * h)
    vy = V.values[..., 1] / (2.0 * h)
    out[1:, :-1] += vx
    out[1:, 1:] += vx
    out[:-1, :-1] -= vx
    out[:-1, 1:] -= vx
    out[:-1, 1:] += vy
    out[1:, 1:] += vy
    out[:-1, :-1] -= vy
    out[1:, :-1] -= vy
    return ScalarField(g, -out)


def node_quadrature_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weights: h^d on interior nodes, halved per boundary face."""
    w1 = np.ones(grid.n_cells + 1)
    w1[0] = w1[-1] = 0.5
    if grid.dim == 1:
        return grid.h * w1
    return grid.h**2 * np.outer(w1, w1)


def cell_average(u: ScalarField) -> np.ndarray:
    """Mean of the cell's corner nodes; the quadrature sample for node data."""
    vals = u.values
    if u.grid.dim == 1:
        return 0.5 * (vals[1:] + vals[:-1])
    return 0.25 * (vals[:-1, :-1] + vals[1:, :-1] + vals[:-1, 1:] + vals[1:, 1:])


def _cell_samples(field, region: BallRegion | None) -> tuple[np.ndarray, Grid]:
    if isinstance(field, ScalarField):
        samples = cell_average(field)
        g = field.grid
    elif isinstance(field, VectorField):
        samples = field.magnitudes()
        g = field.grid
    else:
        raise TypeError(f"expected ScalarField or VectorField, got {type(field)!r}")
    if region is not None:
        region.check_inside(g)
        mask = region.cell_mask(g)
        if not mask.any():
            raise ValueError("region contains no cell centers")
        return samples[mask], g
    return samples.reshape(-1), g


def integrate(g: ScalarField, region: BallRegion | None = None) -> float:
    samples, grd = _cell_samples(g, region)
    return float(grd.cell_volume * samples.sum())


def cell_lp_norm(grid: Grid, cell_values: np.ndarray, p: float, region: BallRegion | None = None) -> float:
    """L^p norm of raw cellwise samples (for derived quantities living on cells).

    Exponents in (0, 1) are allowed (quasi-norm): iteration ladders start at
    p/2, which drops below one for p < 2.
    """
    if not (p > 0.0):
        raise ValueError(f"p must be positive or inf, got {p}")
    vals = np.abs(np.asarray(cell_values, dtype=float))
    if region is not None:
        region.check_inside(grid)
        mask = region.cell_mask(grid)
        if not mask.any():
            raise ValueError("region contains no cell centers")
        vals = vals[mask]
    if np.isinf(p):
        return float(vals.max())
    return float((grid.cell_volume * np.sum(vals**p)) ** (1.0 / p))


def lp_norm(field, p: float, region: BallRegion | None = None) -> float:
    """L^p norm over the region (whole domain if None); p = inf gives the max."""
    if not (p >= 1.0):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    samples, grd = _cell_samples(field, region)
    samples = np.abs(samples)
    if np.isinf(p):
        return float(samples.max())
    return float((grd.cell_volume * np.sum(samples**p)) ** (1.0 / p))


def sup_norm(field, region: BallRegion | None = None) -> float:
    return lp_norm(field, np.inf, region)


# ---------------------------------------------------------------------------
# CSV interchange


def _open_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def scalar_to_csv(field: ScalarField, path, header_note: str | None = None) -> None:
    g = field.grid
    coords = g.node_coords()
    names = ["index"] + ["x", "y"][: g.dim] + ["value"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        if header_note:
            f.write(f"# {header_note}\n")
        w = csv.writer(f)
        w.writerow(names)
        flat = [c.reshape(-1) for c in coords]
        vals = field.values.reshape(-1)
        for i in range(vals.size):
            w.writerow([i] + [repr(float(c[i])) for c in flat] + [repr(float(vals[i]))])


def scalar_from_csv(grid: Grid, path) -> ScalarField:
    header, rows = _open_rows(path)
    want = int(np.prod(grid.node_shape))
    if len(rows) != want:
        raise ValueError(f"{path}: {len(rows)} rows, grid expects {want} nodes")
    vals = np.empty(want)
    for row in rows:
        vals[int(row[0])] = float(row[-1])
    return ScalarField(grid, vals.reshape(grid.node_shape))


def vector_to_csv(field: VectorField, path, header_note: str | None = None) -> None:
    g = field.grid
    centers = g.cell_centers()
    comp = ["vx", "vy"][: g.dim]
    names = ["index"] + ["x", "y"][: g.dim] + comp
    with open(path, "w", newline="", encoding="utf-8") as f:
        if header_note:
            f.write(f"# {header_note}\n")
        w = csv.writer(f)
        w.writerow(names)
        flat = [c.reshape(-1) for c in centers]
        vals = field.values.reshape(-1, g.dim)
        for i in range(vals.shape[0]):
            w.writerow(
                [i]
                + [repr(float(c[i])) for c in flat]
                + [repr(float(v)) for v in vals[i]]
            )


def vector_from_csv(grid: Grid, path) -> VectorField:
    header, rows = _open_rows(path)
    want = int(np.prod(grid.cell_shape))
    if len(rows) != want:
        raise ValueError(f"{path}: {len(rows)} rows, grid expects {want} cells")
    vals = np.empty((want, grid.dim))
    for row in rows:
        vals[int(row[0])] = [float(v) for v in row[-grid.dim :]]
    return VectorField(grid, vals.reshape(grid.cell_shape + (grid.dim,)))
