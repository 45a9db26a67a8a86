# tests/test_checks.py
"""
Unit tests for the derivative checks, the Dijkstra oracle and the QP suite.
"""
import numpy as np
import pytest

from app.core import checks
from app.core.checks import (
    SOLVER_SUITE_SIZE,
    CheckResult,
    check_solver,
    dijkstra_distance,
    finite_difference_jacobian,
    geodesic_oracle_errors,
    oracle_scenes,
    random_convex_qp,
    relative_error,
    run_checks,
    three_circle_workspace,
)
from app.core.geometry import SdfSample
from app.core.heat import rasterize_workspace
from app.core.nlp import PlanningScene

GOAL = np.array([1.6, 1.5])


def test_finite_difference_jacobian() -> None:
    """
    Test central differences on a small polynomial map.

    :return: None
    """
    jac = finite_difference_jacobian(lambda x: np.array([x[0] ** 2, x[0] * x[1]]), [1.0, 2.0])
    assert np.allclose(jac, [[2.0, 0.0], [2.0, 1.0]], atol=1e-8)
    assert relative_error(np.array([100.0]), np.array([101.0])) == pytest.approx(1.0 / 101.0)


def test_check_result_verdict() -> None:
    """
    Test that non-finite errors never pass.

    :return: None
    """
    assert CheckResult("a", "g", 1e-9, 1e-6, 1).passed
    assert not CheckResult("a", "g", 1e-3, 1e-6, 1).passed
    assert not CheckResult("a", "g", float("nan"), 1e-6, 1).passed
    assert not CheckResult("a", "g", float("inf"), 1e-6, 0).passed
    assert CheckResult("a", "g", 0.0, 1e-6, 1).to_dict()["passed"] is True


def test_dijkstra_on_open_grid() -> None:
    """
    Test straight, diagonal and knight moves on a free grid.

    :return: None
    """
    distances = dijkstra_distance(np.ones((5, 5), dtype=bool), 0.5, (0, 0))
    assert distances[4, 0] == pytest.approx(2.0)
    assert distances[4, 4] == pytest.approx(4 * np.sqrt(2.0) * 0.5)
    assert distances[2, 1] == pytest.approx(np.sqrt(5.0) * 0.5)


def test_dijkstra_respects_walls() -> None:
    """
    Test NaN inside walls and infinity behind a closed wall.

    :return: None
    """
    free = np.ones((7, 7), dtype=bool)
    free[3, :] = False
    distances = dijkstra_distance(free, 1.0, (0, 0))
    assert np.isnan(distances[3, 3])
    assert np.isinf(distances[6, 6])

    free[3, 6] = True
    around = dijkstra_distance(free, 1.0, (0, 3))
    assert np.isfinite(around[6, 3])
    assert around[6, 3] > 6.0


def test_dijkstra_blocks_corner_cutting() -> None:
    """
    Test that a diagonal move between two blocked cells is refused.

    :return: None
    """
    free = np.ones((3, 3), dtype=bool)
    free[0, 1] = False
    free[1, 0] = False
    free[1, 2] = False
    free[2, 1] = False
    distances = dijkstra_distance(free, 1.0, (0, 0))
    assert np.isinf(distances[1, 1])


def test_planted_qp_is_optimal() -> None:
    """
    Test that the planted point satisfies the generated constraints.

    :return: None
    """
    problem, x_star = random_convex_qp(np.random.default_rng(5), 10)
    evaluation = problem.evaluate(x_star)
    assert np.all(evaluation.inequalities >= -1e-12)
    assert np.allclose(evaluation.equalities, 0.0, atol=1e-12)


def test_solver_suite_passes() -> None:
    """
    Test a few random QPs through the solver check.

    :return: None
    """
    results = check_solver(np.random.default_rng(0), 3)
    assert all(r.passed for r in results)


def test_derivative_checks_pass(planar_scene: PlanningScene) -> None:
    """
    Test geometry, kinematics and map checks on the planar scene.

    :return: None
    """
    results = run_checks(planar_scene, GOAL, 0, ("geometry", "kinematics", "workspace_map"), 30)
    assert [r.name for r in results] == ["sdf_gradient", "keypoint_jacobian", "map_jacobian"]
    assert all(r.passed for r in results), [r.to_dict() for r in results]


def test_nlp_checks_pass(planar_scene: PlanningScene) -> None:
    """
    Test objective term and constraint Jacobians on the planar scene.

    :return: None
    """
    results = run_checks(planar_scene, GOAL, 1, ("nlp",), 30, cell_size=0.0625)
    names = {r.name for r in results}
    assert {"term_accel", "term_geodesic", "term_flow", "constraint_collision"} <= names
    assert "constraint_goal_geodesic-flow" in names
    assert all(r.passed for r in results), [r.to_dict() for r in results]


def test_broken_gradient_is_caught(planar_scene: PlanningScene, monkeypatch) -> None:
    """
    Test that a wrong SDF gradient fails the geometry check.

    :return: None
    """
    original = checks.sdf_workspace

    def doubled(p, ws):
        sample = original(p, ws)
        return SdfSample(sample.value, 2.0 * sample.gradient, sample.hessian)

    monkeypatch.setattr(checks, "sdf_workspace", doubled)
    results = run_checks(planar_scene, GOAL, 0, ("geometry",), 20)
    assert not results[0].passed


@pytest.mark.slow
def test_geodesic_oracle_passes(planar_scene: PlanningScene) -> None:
    """
    Test the heat-method distance against the Dijkstra oracle.

    :return: None
    """
    results = run_checks(planar_scene, GOAL, 0, ("geodesic",))
    assert all(r.passed for r in results), [r.to_dict() for r in results]


def test_three_circle_scene_is_connected() -> None:
    """
    Test that the disks are blocked and every free cell is reachable from the source.

    :return: None
    """
    ws, source = oracle_scenes()["three_circles"]
    grid = rasterize_workspace(ws, 4.0 / 64)
    assert grid.shape == (64, 64)
    for obstacle in three_circle_workspace().obstacles:
        assert not grid.free_mask[grid.locate(np.asarray(obstacle.center))]
    assert grid.free_mask[grid.locate(source)]
    distances = dijkstra_distance(grid.free_mask, grid.cell_size, grid.locate(source))
    assert np.all(np.isfinite(distances[grid.free_mask]))


def test_oracle_errors_skip_the_source_neighborhood() -> None:
    """
    Test that cells within two cells of the source are left out of the comparison.

    :return: None
    """
    ws, source = oracle_scenes()["empty"]
    grid = rasterize_workspace(ws, 0.25)
    near = geodesic_oracle_errors(grid, source, exclusion_cells=0.5)
    far = geodesic_oracle_errors(grid, source)
    assert near.size - far.size == 12


def test_geodesic_check_reports_the_maximum(
    planar_scene: PlanningScene, monkeypatch
) -> None:
    """
    Test that a single large error fails the check while the median still passes.

    :return: None
    """
    errors = np.full(100, 0.01)
    errors[0] = 0.2
    monkeypatch.setattr(checks, "geodesic_oracle_errors", lambda grid, goal: errors)
    results = {r.name: r for r in run_checks(planar_scene, GOAL, 0, ("geodesic",))}
    assert set(results) == {
        f"geodesic{scene}_{stat}"
        for scene in ("", "_empty", "_wall_gap", "_three_circles")
        for stat in ("median", "max")
    }
    assert results["geodesic_median"].passed
    assert results["geodesic_max"].max_error == pytest.approx(0.2)
    assert not results["geodesic_max"].passed


def test_solver_check_runs_the_full_suite(monkeypatch) -> None:
    """
    Test that the solver check draws its QPs with up to fifty variables.

    :return: None
    """
    sizes: list[int] = []
    original = checks.random_convex_qp

    def recorded(rng, n):
        sizes.append(n)
        return original(rng, n)

    monkeypatch.setattr(checks, "random_convex_qp", recorded)
    results = check_solver(np.random.default_rng(0))
    assert len(sizes) == SOLVER_SUITE_SIZE
    assert min(sizes) >= 2 and max(sizes) <= 50
    assert results[0].samples == SOLVER_SUITE_SIZE
    assert results[0].passed, results[0].to_dict()
