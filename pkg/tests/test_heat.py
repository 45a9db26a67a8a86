# tests/test_heat.py
"""
Unit tests for heat diffusion, geodesic distance and field queries.
"""
import numpy as np
import pytest

from app.core.checks import finite_difference_jacobian, relative_error
from app.core.exceptions import SourceNotInFreespaceException
from app.core.geometry import BoxObstacle, Workspace
from app.core.heat import (
    HeatMode,
    HeatParams,
    ScalarGrid,
    blend_weight,
    build_geodesic_field,
    diffuse_heat,
    discrete_laplacian,
    field_query,
    geodesic_distance,
    rasterize_workspace,
    transient_heat,
)
from app.core.interpolation import CubicGridSpline

CELL = 0.0625


@pytest.fixture
def open_workspace() -> Workspace:
    return Workspace((0.0, 0.0), (2.0, 2.0))


@pytest.fixture
def wall_workspace() -> Workspace:
    """Wall at x = 1 with 0.2 m gaps at the top and bottom."""
    return Workspace((0.0, 0.0), (2.0, 2.0), (BoxObstacle((1.0, 1.0), (0.05, 0.8)),))


@pytest.fixture
def thick_wall_workspace() -> Workspace:
    """Wall at x = 1 wide enough to block cells of 0.125 m, with 0.2 m gaps."""
    return Workspace((0.0, 0.0), (2.0, 2.0), (BoxObstacle((1.0, 1.0), (0.15, 0.8)),))


@pytest.fixture
def split_workspace() -> Workspace:
    """Wall cutting the square into two disconnected halves."""
    return Workspace((0.0, 0.0), (2.0, 2.0), (BoxObstacle((1.0, 1.0), (0.1, 1.0)),))


def test_rasterize_shape_and_mask(wall_workspace: Workspace) -> None:
    """
    Test grid shape, cell centers and the occupancy mask.

    :return: None
    """
    grid = rasterize_workspace(wall_workspace, CELL)
    assert grid.shape == (32, 32)
    assert np.allclose(grid.origin, [CELL / 2, CELL / 2])
    assert not grid.free_mask[grid.locate(np.array([1.0, 1.0]))]
    assert grid.free_mask[grid.locate(np.array([0.5, 1.0]))]


def test_source_in_obstacle_is_rejected(wall_workspace: Workspace) -> None:
    """
    Test that diffusion from inside an obstacle fails.

    :return: None
    """
    grid = rasterize_workspace(wall_workspace, CELL)
    with pytest.raises(SourceNotInFreespaceException):
        diffuse_heat(grid, np.array([1.0, 1.0]))
    with pytest.raises(SourceNotInFreespaceException):
        build_geodesic_field(wall_workspace, np.array([1.0, 1.0]), CELL)


def test_open_space_distance_is_euclidean(open_workspace: Workspace) -> None:
    """
    Test the heat-method distance against straight-line distance in open space.

    :return: None
    """
    field = build_geodesic_field(open_workspace, np.array([1.0, 1.0]), CELL)
    sample = field_query(field, np.array([[1.0, 1.0], [1.6, 1.0], [1.0, 0.4]]))
    assert sample.distance[0] == pytest.approx(0.0, abs=1e-6)
    assert sample.distance[1] == pytest.approx(0.6, rel=0.15)
    assert sample.distance[2] == pytest.approx(0.6, rel=0.15)


def test_flow_points_toward_goal(open_workspace: Workspace) -> None:
    """
    Test that the unit flow is aligned with the direction to the goal.

    :return: None
    """
    goal = np.array([1.0, 1.0])
    field = build_geodesic_field(open_workspace, goal, CELL)
    points = np.array([[0.4, 0.5], [1.5, 1.6], [1.7, 0.8]])
    sample = field.query(points)
    toward = (goal - points) / np.linalg.norm(goal - points, axis=-1, keepdims=True)
    assert np.allclose(np.linalg.norm(sample.flow, axis=-1), 1.0)
    assert np.all(np.sum(sample.flow * toward, axis=-1) > 0.9)


def test_wall_lengthens_distance(wall_workspace: Workspace) -> None:
    """
    Test that the distance through the wall gap exceeds the straight line.

    :return: None
    """
    field = build_geodesic_field(wall_workspace, np.array([0.5, 1.0]), CELL)
    sample = field.query(np.array([1.5, 1.0]))
    assert float(sample.distance) > 1.5


def test_unreachable_cells_are_reported(split_workspace: Workspace) -> None:
    """
    Test that the far side of a closed wall stays NaN and is warned about.

    :return: None
    """
    grid = rasterize_workspace(split_workspace, CELL)
    heat = diffuse_heat(grid, np.array([0.5, 1.0]))
    assert np.isnan(heat.values[grid.locate(np.array([1.5, 1.0]))])
    distance = geodesic_distance(heat)
    assert distance.unreachable_mask.any()

    field = build_geodesic_field(split_workspace, np.array([0.5, 1.0]), CELL)
    assert any("unreachable" in warning for warning in field.warnings)
    assert np.isfinite(field.query(np.array([1.5, 1.0])).distance)


def test_iterative_sweeps_are_monotone(open_workspace: Workspace) -> None:
    """
    Test the fixed-temperature sweep variant along a ray from the goal.

    :return: None
    """
    params = HeatParams(mode=HeatMode.ITERATIVE, sweep_count=3000)
    field = build_geodesic_field(open_workspace, np.array([1.0, 1.0]), CELL, params=params)
    sample = field.query(np.array([[1.3, 1.0], [1.6, 1.0], [1.9, 1.0]]))
    assert np.all(np.isfinite(sample.distance))
    assert sample.distance[0] < sample.distance[1] < sample.distance[2]


def test_points_outside_grid_are_clamped(open_workspace: Workspace) -> None:
    """
    Test that queries beyond the grid are flagged.

    :return: None
    """
    field = build_geodesic_field(open_workspace, np.array([1.0, 1.0]), CELL)
    sample = field.query(np.array([[5.0, 1.0], [1.2, 1.0]]))
    assert sample.clamped.tolist() == [True, False]


def test_transient_heat_conserves_energy(open_workspace: Workspace) -> None:
    """
    Test that snapshots keep total heat and spread out over time.

    :return: None
    """
    grid = rasterize_workspace(open_workspace, CELL)
    frames = transient_heat(grid, np.array([1.0, 1.0]), n_frames=3)
    assert len(frames) == 3
    peaks = [np.nanmax(frame.values) for frame in frames]
    assert peaks[0] == pytest.approx(1.0)
    assert peaks[0] > peaks[1] > peaks[2]
    for frame in frames:
        assert np.nansum(frame.values) == pytest.approx(1.0)


def test_laplacian_of_constant_is_zero(open_workspace: Workspace) -> None:
    """
    Test the reflecting Laplacian on constant heat and the absorbing ghost cells.

    :return: None
    """
    grid = rasterize_workspace(open_workspace, CELL).with_values(np.ones((32, 32)))
    assert np.allclose(discrete_laplacian(grid, absorbing_boundary=False), 0.0)
    absorbing = discrete_laplacian(grid, absorbing_boundary=True)
    assert absorbing[0, 0] == pytest.approx(-2.0)
    assert absorbing[10, 10] == pytest.approx(0.0)


def test_spline_reproduces_linear_data() -> None:
    """
    Test values and derivatives of a spline through a linear function.

    :return: None
    """
    axes = np.meshgrid(np.arange(8) * 0.1, np.arange(6) * 0.1, indexing="ij")
    spline = CubicGridSpline(np.zeros(2), 0.1, axes[0] + 2.0 * axes[1])
    value, gradient, hessian = spline.derivatives(np.array([0.37, 0.22]))
    assert float(value) == pytest.approx(0.81)
    assert np.allclose(gradient, [1.0, 2.0])
    assert np.allclose(hessian, 0.0, atol=1e-9)


def test_spline_rejects_missing_values() -> None:
    """
    Test that NaN node values are refused.

    :return: None
    """
    values = np.ones((4, 4))
    values[1, 1] = np.nan
    with pytest.raises(ValueError):
        CubicGridSpline(np.zeros(2), 1.0, values)


@pytest.fixture
def square_grid() -> ScalarGrid:
    """Free 21 x 21 grid with the center cell at (0.5, 0.5)."""
    return ScalarGrid(np.zeros(2), 0.05, np.zeros((21, 21)), np.ones((21, 21), dtype=bool))


def test_implicit_step_matches_dense_solve(square_grid: ScalarGrid) -> None:
    """
    Test the sparse heat step against a dense solve of (I + L) u = delta with t = h^2.

    :return: None
    """
    n = 21
    index = np.arange(n * n).reshape(n, n)
    laplacian = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            for di, dj in ((1, 0), (0, 1)):
                if i + di < n and j + dj < n:
                    a, b = index[i, j], index[i + di, j + dj]
                    laplacian[[a, b], [a, b]] += 1.0
                    laplacian[a, b] -= 1.0
                    laplacian[b, a] -= 1.0
    rhs = np.zeros(n * n)
    rhs[index[10, 10]] = 1.0
    dense = np.linalg.solve(np.eye(n * n) + laplacian, rhs).reshape(n, n)
    heat = diffuse_heat(square_grid, np.array([0.5, 0.5]))
    assert np.max(np.abs(heat.values - dense)) < 1e-10


def test_centered_source_is_four_fold_symmetric(square_grid: ScalarGrid) -> None:
    """
    Test rotation and reflection symmetry of heat and distance around a centered source.

    :return: None
    """
    heat = diffuse_heat(square_grid, np.array([0.5, 0.5]))
    for values in (heat.values, geodesic_distance(heat).values):
        assert np.allclose(values, np.rot90(values), rtol=0.0, atol=1e-10)
        assert np.allclose(values, values.T, rtol=0.0, atol=1e-10)


@pytest.mark.parametrize("mode", [HeatMode.CLOSED_FORM, HeatMode.ITERATIVE])
def test_heat_peaks_only_at_the_source(thick_wall_workspace: Workspace, mode: HeatMode) -> None:
    """
    Test the maximum principle: the hottest cell is the source and no other cell ties it.

    :return: None
    """
    grid = rasterize_workspace(thick_wall_workspace, 0.125)
    assert not grid.free_mask[grid.locate(np.array([1.0, 1.0]))]
    source = np.array([0.5, 1.0])
    params = HeatParams(mode=mode, sweep_count=5000, sweep_tolerance=1e-12)
    heat = diffuse_heat(grid, source, params)
    peak = grid.locate(source)
    others = heat.values.copy()
    others[peak] = np.nan
    assert np.nanmax(others) < heat.values[peak]
    assert np.nanmin(heat.values) > 0.0


def test_converged_sweeps_are_harmonic() -> None:
    """
    Test that converged sweeps leave a vanishing Laplacian away from the source,
    with reflecting obstacle walls and an absorbing outer boundary.

    :return: None
    """
    ws = Workspace((0.0, 0.0), (1.0, 1.0), (BoxObstacle((0.6, 0.6), (0.1, 0.1)),))
    grid = rasterize_workspace(ws, 1.0 / 16)
    source = np.array([0.25, 0.25])
    params = HeatParams(mode=HeatMode.ITERATIVE, sweep_count=20000, sweep_tolerance=1e-13)
    heat = diffuse_heat(grid, source, params)
    laplacian = discrete_laplacian(heat, absorbing_boundary=True)
    laplacian[grid.locate(source)] = 0.0
    assert np.nanmax(np.abs(laplacian)) < 1e-6 * np.nanmax(heat.values)


def test_distance_is_not_shorter_than_the_chord(thick_wall_workspace: Workspace) -> None:
    """
    Test that no free cell is closer than its straight-line distance minus two cells.

    :return: None
    """
    cell = 0.125
    grid = rasterize_workspace(thick_wall_workspace, cell)
    distance = geodesic_distance(diffuse_heat(grid, np.array([0.5, 1.0])))
    nodes = grid.node_positions()
    chord = np.linalg.norm(nodes - nodes[grid.locate(np.array([0.5, 1.0]))], axis=-1)
    free = np.isfinite(distance.values)
    assert free.sum() > 0.9 * grid.free_mask.sum()
    assert np.all(distance.values[free] >= chord[free] - 2 * cell)


def test_flow_descends_the_distance(open_workspace: Workspace) -> None:
    """
    Test that short steps along the flow strictly reduce the distance outside the blend region.

    :return: None
    """
    goal = np.array([1.0, 1.0])
    field = build_geodesic_field(open_workspace, goal, CELL)
    rng = np.random.default_rng(3)
    checked = 0
    for start in rng.uniform(0.1, 1.9, (10, 2)):
        point = start
        sample = field.query(point)
        for _ in range(50):
            following = point + CELL / 4 * sample.flow
            ahead = field.query(following)
            outside = min(np.linalg.norm(point - goal), np.linalg.norm(following - goal))
            if outside > field.blend_radius:
                assert float(ahead.distance) < float(sample.distance)
                checked += 1
            point, sample = following, ahead
    assert checked > 100


def test_flow_is_a_unit_vector_at_the_source(open_workspace: Workspace) -> None:
    """
    Test the flow on the source itself, where the blended direction vanishes.

    :return: None
    """
    goal = np.array([1.03, 0.97])
    field = build_geodesic_field(open_workspace, goal, CELL)
    sample = field.query(goal)
    assert float(sample.distance) == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(sample.flow))
    assert np.linalg.norm(sample.flow) == pytest.approx(1.0)
    assert np.allclose(sample.flow_jacobian, 0.0)
    assert np.allclose(sample.residual, 0.0)
    assert np.allclose(sample.residual_jacobian, np.eye(2))


def test_blend_is_smooth_across_the_radius(wall_workspace: Workspace) -> None:
    """
    Test that distance, gradient, flow and residual do not jump at the blend radius,
    and that the gradient and residual Jacobian match finite differences on both sides.

    :return: None
    """
    goal = np.array([0.5, 1.0])
    field = build_geodesic_field(wall_workspace, goal, CELL)
    direction = np.array([0.6, 0.8])
    radius = field.blend_radius
    inner = field.query(goal + (radius - 1e-9) * direction)
    outer = field.query(goal + (radius + 1e-9) * direction)
    for name in ("distance", "gradient", "flow", "residual"):
        assert np.allclose(getattr(inner, name), getattr(outer, name), rtol=0.0, atol=1e-6)

    weight, slope = blend_weight(np.array([0.0, radius / 2, radius, 2 * radius]), radius)
    assert np.allclose(weight, [0.0, 0.5, 1.0, 1.0])
    assert slope[0] == 0.0 and slope[2] == 0.0 and slope[3] == 0.0

    for scale in (0.4, 0.9, 1.3, 3.0):
        point = goal + scale * radius * direction
        sample = field.query(point)
        numeric = finite_difference_jacobian(lambda v: field.query(v).distance, point)
        assert relative_error(sample.gradient, numeric[0]) < 1e-5
        numeric = finite_difference_jacobian(lambda v: field.query(v).residual, point)
        assert relative_error(sample.residual_jacobian, numeric) < 1e-5
        assert np.linalg.norm(sample.residual) == pytest.approx(float(sample.distance))


def test_spline_interpolates_node_values() -> None:
    """
    Test that the spline passes through random node values.

    :return: None
    """
    values = np.random.default_rng(4).random((7, 9))
    spline = CubicGridSpline(np.array([0.5, -0.2]), 0.1, values)
    axes = np.meshgrid(0.5 + 0.1 * np.arange(7), -0.2 + 0.1 * np.arange(9), indexing="ij")
    nodes = np.stack(axes, axis=-1)
    assert np.allclose(spline(nodes), values, rtol=0.0, atol=1e-8)


def test_spline_gradient_is_continuous_across_cells() -> None:
    """
    Test that the gradient has no jump where neighboring cells meet.

    :return: None
    """
    rng = np.random.default_rng(5)
    spline = CubicGridSpline(np.zeros(2), 0.1, rng.random((8, 8)))
    for x in 0.1 * np.arange(1, 7):
        y = rng.uniform(0.05, 0.65)
        _, left, _ = spline.derivatives(np.array([x - 1e-10, y]))
        _, right, _ = spline.derivatives(np.array([x + 1e-10, y]))
        assert np.max(np.abs(left - right)) < 1e-6
        _, below, _ = spline.derivatives(np.array([y, x - 1e-10]))
        _, above, _ = spline.derivatives(np.array([y, x + 1e-10]))
        assert np.max(np.abs(below - above)) < 1e-6


def test_field_spline_keeps_grid_distances(wall_workspace: Workspace) -> None:
    """
    Test that the field returns the grid distance at free nodes beyond the blend radius.

    :return: None
    """
    goal = np.array([0.5, 1.0])
    field = build_geodesic_field(wall_workspace, goal, CELL)
    nodes = field.distance.node_positions()
    far = np.isfinite(field.distance.values) & (
        np.linalg.norm(nodes - goal, axis=-1) > field.blend_radius
    )
    sample = field.query(nodes[far])
    assert np.allclose(sample.distance, field.distance.values[far], rtol=0.0, atol=1e-8)
