# app/core/heat.py
"""
Geodesic distance and flow fields on occupancy-masked grids via the heat method.

Pipeline: rasterize the workspace, diffuse heat from the goal for one implicit
step (or hold it at fixed temperature and sweep), normalize the heat gradient,
solve a Poisson problem for the distance, then fit a cubic spline and blend with
the Euclidean attractor close to the goal.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix, csr_matrix, diags, identity
from scipy.sparse.linalg import cg, spsolve, splu

from app.core.exceptions import (
    FieldConstructionException,
    InvalidParameterException,
    SourceNotInFreespaceException,
)
from app.core.geometry import Workspace, sdf_workspace
from app.core.interpolation import CubicGridSpline

logger = logging.getLogger(__name__)

DEFAULT_CELLS_2D = 64
DEFAULT_CELLS_3D = 40
DEFAULT_BLEND_CELLS = 3.0
_EUCLIDEAN_EPS = 1e-9


@dataclass(frozen=True)
class ScalarGrid:
    """Cell-centered values on a regular grid; non-free and unreachable cells hold NaN."""

    origin: np.ndarray
    cell_size: float
    values: np.ndarray
    free_mask: np.ndarray

    def __post_init__(self) -> None:
        if self.cell_size <= 0.0:
            raise InvalidParameterException("cell_size", "must be positive")
        if self.values.shape != self.free_mask.shape:
            raise InvalidParameterException("free_mask", "shape does not match values")
        if min(self.values.shape) < 3:
            raise InvalidParameterException("shape", "grids need at least 3 cells per axis")

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.cell_size * (np.asarray(self.shape) - 1)

    @property
    def unreachable_mask(self) -> np.ndarray:
        return self.free_mask & ~np.isfinite(self.values)

    def node_positions(self) -> np.ndarray:
        axes = [self.origin[k] + self.cell_size * np.arange(n) for k, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def locate(self, point: np.ndarray) -> tuple[int, ...]:
        """
        Index of the cell whose center is nearest to ``point`` (clipped to the grid).

        :param point: Workspace point
        :type point: np.ndarray
        :return: Cell index
        :rtype: tuple[int, ...]
        """
        idx = np.rint((np.asarray(point, dtype=float) - self.origin) / self.cell_size)
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1).astype(int)
        return tuple(int(i) for i in idx)

    def with_values(self, values: np.ndarray) -> "ScalarGrid":
        return ScalarGrid(self.origin, self.cell_size, values, self.free_mask)


class HeatMode(str, Enum):
    CLOSED_FORM = "closed-form-solve"
    ITERATIVE = "iterative-sweeps"


@dataclass(frozen=True)
class HeatParams:
    """
    Diffusion settings. ``time_step`` is a multiple of cell_size squared.

    ``linear_solver`` selects a sparse direct factorization or Jacobi-preconditioned
    conjugate gradients for the implicit step.
    """

    time_step: float = 1.0
    mode: HeatMode = HeatMode.CLOSED_FORM
    sweep_count: int = 2000
    sweep_tolerance: float = 0.0
    linear_solver: str = "direct"
    solver_rtol: float = 1e-8

    def __post_init__(self) -> None:
        if self.time_step <= 0.0:
            raise InvalidParameterException("time_step", "must be positive")
        if self.sweep_count <= 0:
            raise InvalidParameterException("sweep_count", "must be positive")
        if self.linear_solver not in ("direct", "cg"):
            raise InvalidParameterException("linear_solver", "expected 'direct' or 'cg'")

    @property
    def cache_tag(self) -> str:
        # linear solver settings are not part of the tag
        return f"{self.mode.value}:{self.time_step:g}:{self.sweep_count}:{self.sweep_tolerance:g}"


def default_cell_size(ws: Workspace, cells_longest_axis: int | None = None) -> float:
    if cells_longest_axis is None:
        cells_longest_axis = DEFAULT_CELLS_2D if ws.dimension == 2 else DEFAULT_CELLS_3D
    extent = np.asarray(ws.bounds_max) - np.asarray(ws.bounds_min)
    return float(np.max(extent) / cells_longest_axis)


def rasterize_workspace(ws: Workspace, cell_size: float | None = None) -> ScalarGrid:
    """
    Sample the workspace SDF at cell centers; a cell is free iff the SDF is positive.

    :param ws: Workspace
    :type ws: Workspace
    :param cell_size: Cell edge length, defaults to the per-dimension resolution
    :type cell_size: float | None
    :return: Grid of SDF values with its free mask
    :rtype: ScalarGrid
    """
    if cell_size is None:
        cell_size = default_cell_size(ws)
    lo = np.asarray(ws.bounds_min, dtype=float)
    extent = np.asarray(ws.bounds_max, dtype=float) - lo
    shape = tuple(max(3, int(np.ceil(e / cell_size - 1e-9))) for e in extent)
    origin = lo + cell_size / 2
    template = ScalarGrid(origin, cell_size, np.zeros(shape), np.ones(shape, dtype=bool))
    sdf = sdf_workspace(template.node_positions(), ws).value
    return ScalarGrid(origin, cell_size, sdf, sdf > 0.0)


def _cell_indices(active: np.ndarray) -> np.ndarray:
    index = -np.ones(active.shape, dtype=np.int64)
    index[active] = np.arange(int(active.sum()))
    return index


def _links(index: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    lower = [slice(None)] * index.ndim
    upper = [slice(None)] * index.ndim
    lower[axis] = slice(0, -1)
    upper[axis] = slice(1, None)
    a, b = index[tuple(lower)], index[tuple(upper)]
    keep = (a >= 0) & (b >= 0)
    return a[keep], b[keep]


def graph_laplacian(active: np.ndarray) -> csr_matrix:
    """
    Positive semi-definite graph Laplacian D - A over active cells (face neighbors).

    Links into inactive cells are removed, which is a zero-Neumann condition.

    :param active: Boolean mask of cells taking part in the stencil
    :type active: np.ndarray
    :return: Sparse matrix in active-cell order
    :rtype: csr_matrix
    """
    index = _cell_indices(active)
    n = int(active.sum())
    rows, cols = [], []
    for axis in range(active.ndim):
        a, b = _links(index, axis)
        rows += [a, b]
        cols += [b, a]
    rows_arr = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols_arr = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    adjacency = coo_matrix((np.ones(rows_arr.size), (rows_arr, cols_arr)), shape=(n, n)).tocsr()
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    return (diags(degree) - adjacency).tocsr()


def _source_component(
    grid: ScalarGrid, source: np.ndarray
) -> tuple[tuple[int, ...], np.ndarray]:
    cell = grid.locate(source)
    if not grid.free_mask[cell]:
        raise SourceNotInFreespaceException()
    labels, _ = ndimage.label(grid.free_mask)
    return cell, labels == labels[cell]


def _solve_spd(matrix: csr_matrix, rhs: np.ndarray, solver: str, rtol: float) -> np.ndarray:
    if solver == "direct":
        return np.atleast_1d(spsolve(matrix.tocsc(), rhs))
    preconditioner = diags(1.0 / matrix.diagonal())
    solution, info = cg(matrix, rhs, rtol=rtol, atol=0.0, M=preconditioner, maxiter=20 * rhs.size)
    if info != 0:
        logger.warning("conjugate gradients stopped early info=%d size=%d", info, rhs.size)
    return solution


def diffuse_heat(
    grid: ScalarGrid, source: np.ndarray, params: HeatParams = HeatParams()
) -> ScalarGrid:
    """
    Diffuse heat from ``source`` over the free cells of ``grid``.

    Closed-form mode solves one implicit step (I - t L) u = delta_source with
    t = time_step * cell_size^2. Iterative mode runs Jacobi sweeps with the
    source held at temperature 1 and the outer domain boundary at 0. Cells not
    connected to the source are left NaN (unreachable).

    :param grid: Grid whose free mask defines the domain
    :type grid: ScalarGrid
    :param source: Source point
    :type source: np.ndarray
    :param params: Diffusion settings
    :type params: HeatParams
    :return: Heat grid
    :rtype: ScalarGrid
    :raises SourceNotInFreespaceException: If the source cell is not free
    """
    started = time.perf_counter()
    cell, active = _source_component(grid, source)
    values = np.full(grid.shape, np.nan)

    if params.mode == HeatMode.ITERATIVE:
        values[active] = _jacobi_sweeps(active, cell, params)[active]
    else:
        index = _cell_indices(active)
        n = int(active.sum())
        system = (identity(n, format="csr") + params.time_step * graph_laplacian(active)).tocsr()
        rhs = np.zeros(n)
        rhs[index[cell]] = 1.0
        values[active] = _solve_spd(system, rhs, params.linear_solver, params.solver_rtol)

    logger.debug(
        "heat diffused mode=%s cells=%d unreachable=%d seconds=%.3f",
        params.mode.value,
        int(active.sum()),
        int((grid.free_mask & ~active).sum()),
        time.perf_counter() - started,
    )
    return grid.with_values(values)


def _neighbor_shifts(active: np.ndarray):
    # yields (axis, direction, neighbor-active mask, neighbor-outside-domain mask)
    for axis in range(active.ndim):
        for direction in (1, -1):
            shifted = np.roll(active, -direction, axis=axis)
            outside = np.zeros_like(active)
            edge = [slice(None)] * active.ndim
            edge[axis] = -1 if direction == 1 else 0
            outside[tuple(edge)] = True
            shifted[tuple(edge)] = False
            yield axis, direction, shifted & active, outside & active


def _jacobi_sweeps(active: np.ndarray, source: tuple[int, ...], params: HeatParams) -> np.ndarray:
    shifts = list(_neighbor_shifts(active))
    count = sum(inside.astype(float) + outside.astype(float) for _, _, inside, outside in shifts)
    u = np.zeros(active.shape)
    u[source] = 1.0
    update = active & (count > 0)
    update[source] = False
    safe_count = np.where(count > 0, count, 1.0)

    for sweep in range(params.sweep_count):
        total = np.zeros(active.shape)
        for axis, direction, inside, _ in shifts:
            total += np.where(inside, np.roll(u, -direction, axis=axis), 0.0)
        candidate = np.where(update, total / safe_count, u)
        change = float(np.max(np.abs(candidate - u)))
        u = candidate
        if change <= params.sweep_tolerance * float(np.max(u)):
            logger.debug("jacobi sweeps converged after %d sweeps", sweep + 1)
            break
    return u


def discrete_laplacian(heat: ScalarGrid, absorbing_boundary: bool = True) -> np.ndarray:
    """
    Graph Laplacian of the heat values, with optional zero ghost cells outside the domain.

    :param heat: Heat grid (NaN cells are treated as inactive)
    :type heat: ScalarGrid
    :param absorbing_boundary: Include ghost neighbors at temperature 0 beyond the grid edge
    :type absorbing_boundary: bool
    :return: Laplacian per cell (NaN on inactive cells)
    :rtype: np.ndarray
    """
    active = np.isfinite(heat.values)
    u = np.where(active, heat.values, 0.0)
    result = np.zeros(heat.shape)
    for axis, direction, inside, outside in _neighbor_shifts(active):
        result += np.where(inside, np.roll(u, -direction, axis=axis) - u, 0.0)
        if absorbing_boundary:
            result -= np.where(outside, u, 0.0)
    return np.where(active, result, np.nan)


def transient_heat(
    grid: ScalarGrid,
    source: np.ndarray,
    n_frames: int = 4,
    steps_per_frame: int = 8,
    params: HeatParams = HeatParams(),
) -> list[ScalarGrid]:
    """
    Heat snapshots when the source is only set at the first step and then left out.

    :param grid: Grid whose free mask defines the domain
    :type grid: ScalarGrid
    :param source: Initial hot spot
    :type source: np.ndarray
    :param n_frames: Number of snapshots, the first being the initial state
    :type n_frames: int
    :param steps_per_frame: Implicit steps between snapshots
    :type steps_per_frame: int
    :param params: Diffusion settings (time step)
    :type params: HeatParams
    :return: Snapshots in time order
    :rtype: list[ScalarGrid]
    """
    cell, active = _source_component(grid, source)
    index = _cell_indices(active)
    n = int(active.sum())
    system = (identity(n, format="csc") + params.time_step * graph_laplacian(active)).tocsc()
    factor = splu(system)
    u = np.zeros(n)
    u[index[cell]] = 1.0
    frames = []
    for frame in range(n_frames):
        if frame > 0:
            for _ in range(steps_per_frame):
                u = factor.solve(u)
        values = np.full(grid.shape, np.nan)
        values[active] = u
        frames.append(grid.with_values(values))
    return frames


def heat_gradient(heat: ScalarGrid) -> np.ndarray:
    """
    Gradient of the heat: central differences, one-sided next to inactive cells.

    :param heat: Heat grid
    :type heat: ScalarGrid
    :return: Gradient per cell, shape (*shape, dim), zero on inactive cells
    :rtype: np.ndarray
    """
    active = np.isfinite(heat.values)
    u = np.where(active, heat.values, 0.0)
    h = heat.cell_size
    gradient = np.zeros(heat.shape + (heat.dimension,))
    for axis in range(heat.dimension):
        forward_ok = np.zeros_like(active)
        backward_ok = np.zeros_like(active)
        interior = [slice(None)] * heat.dimension
        interior[axis] = slice(0, -1)
        shifted = [slice(None)] * heat.dimension
        shifted[axis] = slice(1, None)
        forward_ok[tuple(interior)] = active[tuple(interior)] & active[tuple(shifted)]
        backward_ok[tuple(shifted)] = active[tuple(shifted)] & active[tuple(interior)]

        forward = np.zeros(heat.shape)
        backward = np.zeros(heat.shape)
        forward[tuple(interior)] = u[tuple(shifted)] - u[tuple(interior)]
        backward[tuple(shifted)] = u[tuple(shifted)] - u[tuple(interior)]

        both = forward_ok & backward_ok
        gradient[..., axis] = np.select(
            [both, forward_ok, backward_ok],
            [(forward + backward) / (2 * h), forward / h, backward / h],
            default=0.0,
        )
    gradient[~active] = 0.0
    return gradient


def geodesic_distance(
    heat: ScalarGrid, ws_grid_mask: np.ndarray | None = None, rtol: float = 1e-8
) -> ScalarGrid:
    """
    Poisson step of the heat method.

    X = -grad u / |grad u| per cell, then L d = div X over the source's component
    with d pinned to 0 at the hottest cell, clamped below at 0. Cells where the
    heat gradient vanishes are marked unreachable.

    :param heat: Output of :func:`diffuse_heat`
    :type heat: ScalarGrid
    :param ws_grid_mask: Optional extra free mask (must match the heat grid)
    :type ws_grid_mask: np.ndarray | None
    :param rtol: Relative residual of the conjugate-gradient Poisson solve
    :type rtol: float
    :return: Geodesic distance grid
    :rtype: ScalarGrid
    """
    active = np.isfinite(heat.values)
    if ws_grid_mask is not None:
        active &= np.asarray(ws_grid_mask, dtype=bool)
    if not active.any():
        raise FieldConstructionException("no reachable cells")
    h = heat.cell_size

    gradient = heat_gradient(heat)
    norm = np.linalg.norm(gradient, axis=-1)
    dead = active & ~(np.isfinite(norm) & (norm > 0.0))
    safe_norm = np.where(norm > 0.0, norm, 1.0)
    direction = np.where(dead[..., None], 0.0, -gradient / safe_norm[..., None])

    index = _cell_indices(active)
    n = int(active.sum())
    flat_direction = direction[active]
    divergence = np.zeros(n)
    for axis in range(heat.dimension):
        a, b = _links(index, axis)
        flux = 0.5 * (flat_direction[a, axis] + flat_direction[b, axis]) / h
        divergence += np.bincount(a, weights=flux, minlength=n)
        divergence -= np.bincount(b, weights=flux, minlength=n)

    heat_active = np.where(active, heat.values, -np.inf)
    source = np.unravel_index(int(np.argmax(heat_active)), heat.shape)
    pinned = index[source]
    distance = np.zeros(n)
    if n > 1:
        keep = np.ones(n, dtype=bool)
        keep[pinned] = False
        laplacian = graph_laplacian(active)[keep][:, keep]
        rhs = -h * h * divergence[keep]
        distance[keep] = _solve_spd(laplacian.tocsr(), rhs, "cg", rtol)
    distance -= distance[pinned]
    distance = np.maximum(distance, 0.0)

    values = np.full(heat.shape, np.nan)
    values[active] = distance
    values[dead] = np.nan
    if dead.any():
        logger.debug("geodesic distance marked %d dead cells unreachable", int(dead.sum()))
    return heat.with_values(values)


def _passage_warnings(grid: ScalarGrid, distance: ScalarGrid) -> tuple[str, ...]:
    free = grid.free_mask
    squeezed = np.zeros_like(free)
    for axis in range(free.ndim):
        padded = np.pad(free, [(1, 1) if k == axis else (0, 0) for k in range(free.ndim)])
        lower = np.take(padded, range(0, free.shape[axis]), axis=axis)
        upper = np.take(padded, range(2, free.shape[axis] + 2), axis=axis)
        squeezed |= free & ~lower & ~upper
    warnings = []
    if squeezed.any():
        position = grid.node_positions()[squeezed][0]
        warnings.append(
            f"passage narrower than 2 cells at {int(squeezed.sum())} cells, "
            f"first near {np.round(position, 3).tolist()}"
        )
    unreachable = int(distance.unreachable_mask.sum())
    if unreachable:
        warnings.append(f"{unreachable} free cells unreachable from the goal")
    return tuple(warnings)


def _fill_masked(distance: ScalarGrid) -> np.ndarray:
    valid = np.isfinite(distance.values)
    gap, nearest = ndimage.distance_transform_edt(~valid, return_indices=True)
    return distance.values[tuple(nearest)] + gap * distance.cell_size


@dataclass(frozen=True)
class FieldSample:
    """
    Blended geodesic distance and its gradient, the unit flow and its Jacobian.

    ``residual`` is the offset from the source rescaled to length ``distance``;
    it vanishes linearly at the source, so its Jacobian stays full rank there.
    """

    distance: np.ndarray
    gradient: np.ndarray
    flow: np.ndarray
    flow_jacobian: np.ndarray
    clamped: np.ndarray
    residual: np.ndarray
    residual_jacobian: np.ndarray


@dataclass(frozen=True)
class GeodesicField:
    """Geodesic distance to ``source`` with a smooth, normalized flow toward it."""

    distance: ScalarGrid
    source: np.ndarray
    blend_radius: float
    warnings: tuple[str, ...] = ()
    spline: CubicGridSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.blend_radius < 0.0:
            raise InvalidParameterException("blend_radius", "must be nonnegative")
        spline = CubicGridSpline(
            self.distance.origin, self.distance.cell_size, _fill_masked(self.distance)
        )
        object.__setattr__(self, "spline", spline)

    @property
    def dimension(self) -> int:
        return self.distance.dimension

    def query(self, p: np.ndarray) -> FieldSample:
        return field_query(self, p)


def blend_weight(radius: np.ndarray, blend_radius: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Smoothstep weight of the geodesic attractor and its radial derivative.

    The weight rises from 0 at the source to 1 at ``blend_radius`` with zero
    slope at both ends.

    :param radius: Distance to the source
    :type radius: np.ndarray
    :param blend_radius: Radius beyond which only the geodesic attractor acts
    :type blend_radius: float
    :return: (weight, d weight / d radius)
    :rtype: tuple[np.ndarray, np.ndarray]
    """
    radius = np.asarray(radius, dtype=float)
    if blend_radius <= 0.0:
        return np.ones_like(radius), np.zeros_like(radius)
    s = np.clip(radius / blend_radius, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s) / blend_radius


def _weight_ratio(radius: np.ndarray, blend_radius: float) -> tuple[np.ndarray, np.ndarray]:
    # weight / radius and its radial derivative, finite at the source
    if blend_radius <= 0.0:
        rho = np.sqrt(radius**2 + _EUCLIDEAN_EPS**2)
        return 1.0 / rho, -radius / rho**3
    s = radius / blend_radius
    inner = s < 1.0
    safe = np.where(inner, blend_radius, np.maximum(radius, _EUCLIDEAN_EPS))
    ratio = np.where(inner, s * (3.0 - 2.0 * s) / blend_radius, 1.0 / safe)
    slope = np.where(inner, (3.0 - 4.0 * s) / blend_radius**2, -1.0 / safe**2)
    return ratio, slope


def field_query(field_: GeodesicField, p: np.ndarray) -> FieldSample:
    """
    Spline-interpolated geodesic distance and flow, blended to the Euclidean
    attractor within ``blend_radius`` of the source.

    The blend weight is a smoothstep in the distance to the source, so distance,
    gradient and flow are continuously differentiable across the blend radius.
    At the source itself the flow falls back to the spline's descent direction.
    Points outside the grid are clamped to its boundary and flagged.

    :param field_: Geodesic field
    :type field_: GeodesicField
    :param p: Query point(s), shape (..., dim)
    :type p: np.ndarray
    :return: Field sample with matching leading axes
    :rtype: FieldSample
    """
    p = np.asarray(p, dtype=float)
    grid = field_.distance
    dim = grid.dimension
    eye = np.eye(dim)

    inside = np.clip(p, grid.origin, grid.upper)
    clamped = np.any(inside != p, axis=-1)
    value, grad, hess = field_.spline.derivatives(inside)

    grad_norm = np.linalg.norm(grad, axis=-1)
    safe_grad = np.where(grad_norm > 0.0, grad_norm, 1.0)
    geo_flow = -grad / safe_grad[..., None]
    tangent = eye - geo_flow[..., :, None] * geo_flow[..., None, :]
    geo_jac = -(tangent @ hess) / safe_grad[..., None, None]

    offset = inside - field_.source
    radius = np.linalg.norm(offset, axis=-1)
    rho = np.sqrt(radius**2 + _EUCLIDEAN_EPS**2)
    outward = offset / rho[..., None]
    euc_flow = -outward
    euc_jac = -eye / rho[..., None, None] + (offset[..., :, None] * offset[..., None, :]) / (
        rho**3
    )[..., None, None]

    weight, weight_slope = blend_weight(radius, field_.blend_radius)
    weight_grad = weight_slope[..., None] * outward
    w = weight[..., None]
    distance = weight * value + (1.0 - weight) * radius
    gradient = w * grad + (1.0 - w) * outward + (value - radius)[..., None] * weight_grad

    ratio, ratio_slope = _weight_ratio(radius, field_.blend_radius)
    scale = ratio * value + 1.0 - weight
    scale_grad = (ratio_slope * value)[..., None] * outward + ratio[..., None] * grad - weight_grad
    residual = offset * scale[..., None]
    residual_jacobian = (
        scale[..., None, None] * eye + offset[..., :, None] * scale_grad[..., None, :]
    )

    blended = w * geo_flow + (1.0 - w) * euc_flow
    blended_jac = (
        w[..., None] * geo_jac
        + (1.0 - w)[..., None] * euc_jac
        + (geo_flow - euc_flow)[..., :, None] * weight_grad[..., None, :]
    )
    norm = np.linalg.norm(blended, axis=-1)
    moving = norm > _EUCLIDEAN_EPS
    safe_norm = np.where(moving, norm, 1.0)
    fallback = np.where((grad_norm > 0.0)[..., None], geo_flow, eye[0])
    flow = np.where(moving[..., None], blended / safe_norm[..., None], fallback)
    projector = eye - flow[..., :, None] * flow[..., None, :]
    flow_jacobian = np.where(
        moving[..., None, None], (projector @ blended_jac) / safe_norm[..., None, None], 0.0
    )
    return FieldSample(
        distance=distance,
        gradient=gradient,
        flow=flow,
        flow_jacobian=flow_jacobian,
        clamped=clamped,
        residual=residual,
        residual_jacobian=residual_jacobian,
    )


def build_geodesic_field(
    ws: Workspace,
    goal: np.ndarray,
    cell_size: float | None = None,
    blend_radius: float | None = None,
    params: HeatParams = HeatParams(),
    cache=None,
) -> GeodesicField:
    """
    Rasterize ``ws`` and compute the geodesic field toward ``goal``.

    :param ws: Workspace
    :type ws: Workspace
    :param goal: Goal point in freespace
    :type goal: np.ndarray
    :param cell_size: Grid cell size (default: 64 cells / 40 cells along the longest axis)
    :type cell_size: float | None
    :param blend_radius: Euclidean blend radius (default: 3 cells)
    :type blend_radius: float | None
    :param params: Diffusion settings
    :type params: HeatParams
    :param cache: Optional :class:`app.core.storage.FieldCache`
    :return: Geodesic field
    :rtype: GeodesicField
    :raises SourceNotInFreespaceException: If the goal is inside an obstacle
    """
    goal = np.asarray(goal, dtype=float)
    if cell_size is None:
        cell_size = default_cell_size(ws)
    if blend_radius is None:
        blend_radius = DEFAULT_BLEND_CELLS * cell_size
    if float(sdf_workspace(goal, ws).value) <= 0.0:
        raise SourceNotInFreespaceException()

    started = time.perf_counter()
    grid = rasterize_workspace(ws, cell_size)
    distance = None
    if cache is not None:
        distance = cache.load(ws, goal, cell_size, grid.free_mask, params.cache_tag)
    if distance is None:
        heat = diffuse_heat(grid, goal, params)
        distance = geodesic_distance(heat)
        if cache is not None:
            cache.store(ws, goal, cell_size, distance, params.cache_tag)

    warnings = _passage_warnings(grid, distance)
    for message in warnings:
        logger.warning("geodesic field goal=%s: %s", np.round(goal, 3).tolist(), message)
    logger.info(
        "geodesic field built shape=%s cell_size=%.4f seconds=%.3f",
        grid.shape,
        cell_size,
        time.perf_counter() - started,
    )
    return GeodesicField(distance, goal, blend_radius, warnings)
