# app/core/checks.py
"""
Derivative and oracle checks run by ``check``: finite-difference comparisons
for every analytic derivative, the grid Dijkstra oracle for geodesic
distances and a random convex QP suite for the solver.
"""
import logging
from dataclasses import dataclass
from itertools import product
from math import gcd
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from app.core.geometry import BoxObstacle, SphereObstacle, Workspace, sdf_workspace
from app.core.heat import (
    ScalarGrid,
    build_geodesic_field,
    diffuse_heat,
    geodesic_distance,
    rasterize_workspace,
)
from app.core.kinematics import keypoint_jacobians, forward_kinematics
from app.core.nlp import PlanningScene
from app.core.solver import QuadraticProgram, SolverConfig, solve
from app.core.terms import (
    Attractor,
    constraint_collision,
    constraint_goal,
    term_accel,
    term_flow,
    term_geodesic,
)
from app.core.trajectory import Trajectory
from app.core.workspace_map import eval_map, map_jacobian

logger = logging.getLogger(__name__)

CHECK_GROUPS = ("geometry", "kinematics", "workspace_map", "nlp", "geodesic", "solver")
_FD_STEP = 1e-6
_CLIQUES_PER_TRAJECTORY = 5
ORACLE_GRID_CELLS = 64
SOLVER_SUITE_SIZE = 50
SOLVER_SUITE_MAX_VARIABLES = 50


@dataclass(frozen=True)
class CheckResult:
    name: str
    group: str
    max_error: float
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_error) and self.max_error <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "group": self.group,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "passed": self.passed,
        }


def finite_difference_jacobian(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = _FD_STEP
) -> np.ndarray:
    """
    Central differences with a step relative to the magnitude of each coordinate.

    :param func: Vector function of x
    :type func: Callable[[np.ndarray], np.ndarray]
    :param x: Evaluation point
    :type x: np.ndarray
    :param step: Relative step
    :type step: float
    :return: Jacobian, shape (len(func(x)), len(x))
    :rtype: np.ndarray
    """
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        forward, backward = x.copy(), x.copy()
        forward[i] += h
        backward[i] -= h
        columns.append((np.atleast_1d(func(forward)) - np.atleast_1d(func(backward))) / (2 * h))
    return np.stack(columns, axis=-1)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(analytic - numeric)) / max(1.0, np.max(np.abs(numeric))))


def _random_points(scene: PlanningScene, rng: np.random.Generator, count: int) -> np.ndarray:
    lo = np.asarray(scene.workspace.bounds_min, dtype=float)
    hi = np.asarray(scene.workspace.bounds_max, dtype=float)
    return lo + rng.random((count, lo.size)) * (hi - lo)


def _random_configurations(
    scene: PlanningScene, rng: np.random.Generator, count: int
) -> np.ndarray:
    robot = scene.robot
    positions = _random_points(scene, rng, count)
    angles = rng.uniform(-np.pi, np.pi, (count, robot.n_angles))
    return np.hstack([positions, angles])


def _is_clear(scene: PlanningScene, configurations: np.ndarray, margin: float) -> np.ndarray:
    # keypoints at least ``margin`` away from every obstacle surface
    points = forward_kinematics(scene.robot, configurations)
    clear = np.ones(points.shape[:-2], dtype=bool)
    for obstacle in scene.workspace.obstacles:
        distance = obstacle.signed_distance(points, scene.workspace.hessian_clamp).value
        clear &= np.all(np.abs(distance) > margin, axis=-1)
    return clear


def _clear_configurations(
    scene: PlanningScene, rng: np.random.Generator, count: int, margin: float
) -> np.ndarray:
    kept: list[np.ndarray] = []
    for _ in range(200):
        candidates = _random_configurations(scene, rng, 4 * count)
        kept.extend(candidates[_is_clear(scene, candidates, margin)])
        if len(kept) >= count:
            break
    return np.asarray(kept[:count])


def _field_safe(field, points: np.ndarray) -> np.ndarray:
    # inside the grid, off the blend ring and away from the source singularity
    grid = field.distance
    inside = np.all(
        (points > grid.origin + grid.cell_size) & (points < grid.upper - grid.cell_size), axis=-1
    )
    radius = np.linalg.norm(points - field.source, axis=-1)
    return inside & (np.abs(radius - field.blend_radius) > 1e-2) & (radius > 1e-2)


def _trajectories(
    scene: PlanningScene, rng: np.random.Generator, samples: int, margin: float
) -> list[Trajectory]:
    """Short random trajectories whose knots all keep ``margin`` clearance."""
    wanted = max(1, -(-samples // _CLIQUES_PER_TRAJECTORY))
    dof = scene.robot.dof
    found: list[Trajectory] = []
    for _ in range(50 * wanted):
        start = _clear_configurations(scene, rng, 1, margin)
        if len(start) == 0:
            break
        drift = rng.uniform(-0.02, 0.02, dof)
        jitter = rng.uniform(-0.005, 0.005, (_CLIQUES_PER_TRAJECTORY, dof))
        steps = np.arange(1, _CLIQUES_PER_TRAJECTORY + 1)[:, None] * drift + jitter
        traj = Trajectory(start[0], start[0] + steps, 0.1)
        if np.all(_is_clear(scene, traj.configurations, margin)):
            found.append(traj)
        if len(found) >= wanted:
            break
    return found


def _term_check(name: str, build, trajectories: list[Trajectory]) -> CheckResult:
    worst = 0.0
    for traj in trajectories:
        block = build(traj, True)
        numeric = finite_difference_jacobian(
            lambda v: build(Trajectory.from_vector(traj.start, v, traj.dt), False).residuals,
            traj.as_vector(),
        )
        worst = max(worst, relative_error(block.jacobian.toarray(), numeric))
    if not trajectories:
        worst = np.inf
    return CheckResult(name, "nlp", worst, 1e-4, len(trajectories) * _CLIQUES_PER_TRAJECTORY)


def check_sdf_gradient(
    scene: PlanningScene, rng: np.random.Generator, samples: int
) -> CheckResult:
    """
    Workspace SDF gradient against finite differences of its value.

    Points whose numeric gradient is not unit length sit on a medial axis or a
    switch between components and are skipped.
    """
    ws = scene.workspace
    worst, used = 0.0, 0
    for p in _random_points(scene, rng, samples):
        numeric = finite_difference_jacobian(lambda v: sdf_workspace(v, ws).value, p)[0]
        if abs(np.linalg.norm(numeric) - 1.0) > 1e-3:
            continue
        analytic = sdf_workspace(p, ws).gradient
        worst = max(worst, relative_error(analytic, numeric))
        used += 1
    if used == 0:
        worst = np.inf
    return CheckResult("sdf_gradient", "geometry", worst, 1e-5, used)


def check_keypoint_jacobian(
    scene: PlanningScene, rng: np.random.Generator, samples: int
) -> CheckResult:
    robot = scene.robot
    worst = 0.0
    for q in _random_configurations(scene, rng, samples):
        analytic = keypoint_jacobians(robot, q).reshape(-1, robot.dof)
        numeric = finite_difference_jacobian(lambda v: forward_kinematics(robot, v).ravel(), q)
        worst = max(worst, relative_error(analytic, numeric))
    return CheckResult("keypoint_jacobian", "kinematics", worst, 1e-7, samples)


def check_map_jacobian(
    scene: PlanningScene, rng: np.random.Generator, samples: int
) -> CheckResult:
    m = scene.workspace_map
    margin = 1.2 / scene.workspace.hessian_clamp
    points = _random_points(scene, rng, 4 * samples)
    clear = np.ones(len(points), dtype=bool)
    for obstacle in scene.workspace.obstacles:
        distance = obstacle.signed_distance(points, scene.workspace.hessian_clamp).value
        clear &= np.abs(distance) > margin
    points = points[clear][:samples]
    worst = 0.0 if len(points) else np.inf
    for p in points:
        numeric = finite_difference_jacobian(lambda v: eval_map(m, v), p)
        worst = max(worst, relative_error(map_jacobian(m, p), numeric))
    return CheckResult("map_jacobian", "workspace_map", worst, 1e-6, len(points))


def check_terms(
    scene: PlanningScene, goal: np.ndarray, field, rng: np.random.Generator, samples: int
) -> list[CheckResult]:
    """
    Jacobians of every objective term and constraint against finite differences.

    Samples keep keypoints clear of obstacle surfaces by more than the inverse
    Hessian clamp so the clamped SDF curvature is exact there.
    """
    robot, m = scene.robot, scene.workspace_map
    margin = 1.2 / scene.workspace.hessian_clamp
    trajectories = _trajectories(scene, rng, samples, margin)
    results = [
        _term_check("term_accel", lambda t, d: term_accel(t, 1.0, d), trajectories),
        _term_check(
            "term_geodesic",
            lambda t, d: term_geodesic(t, robot, m, 1.0, derivatives=d),
            trajectories,
        ),
    ]
    if field is not None:
        usable = [
            t
            for t in trajectories
            if np.all(_field_safe(field, forward_kinematics(robot, t.configurations)))
        ]
        results.append(
            _term_check(
                "term_flow",
                lambda t, d: term_flow(t, robot, field, 1.0, all_keypoints=True, derivatives=d),
                usable,
            )
        )

    configurations = _clear_configurations(scene, rng, samples, margin)
    worst = 0.0 if len(configurations) else np.inf
    for q in configurations:
        _, gradient = constraint_collision(q, scene.workspace, robot, scene.softmin_beta)
        numeric = finite_difference_jacobian(
            lambda v: constraint_collision(v, scene.workspace, robot, scene.softmin_beta)[0], q
        )[0]
        worst = max(worst, relative_error(gradient, numeric))
    results.append(CheckResult("constraint_collision", "nlp", worst, 1e-4, len(configurations)))

    modes = [Attractor.EUCLIDEAN, Attractor.NATURAL]
    if field is not None:
        modes.append(Attractor.GEODESIC_FLOW)
    configurations = _clear_configurations(scene, rng, samples, margin)
    for mode in modes:
        candidates = configurations
        if mode == Attractor.GEODESIC_FLOW:
            tips = forward_kinematics(robot, configurations)[:, robot.end_effector_index]
            candidates = configurations[_field_safe(field, tips)]
        worst = 0.0 if len(candidates) else np.inf
        for q in candidates:
            residual = constraint_goal(q, mode, goal, robot, m, field)
            numeric = finite_difference_jacobian(
                lambda v: constraint_goal(v, mode, goal, robot, m, field).vector, q
            )
            worst = max(worst, relative_error(residual.jacobian, numeric))
        results.append(
            CheckResult(f"constraint_goal_{mode.value}", "nlp", worst, 1e-4, len(candidates))
        )
    return results


def _neighbor_offsets(dimension: int) -> list[tuple[int, ...]]:
    # 16-neighborhood in 2D (king and knight moves), 26-neighborhood in 3D
    if dimension == 2:
        return [
            (dx, dy)
            for dx, dy in product(range(-2, 3), repeat=2)
            if (dx, dy) != (0, 0) and gcd(abs(dx), abs(dy)) == 1
        ]
    return [offset for offset in product(range(-1, 2), repeat=3) if any(offset)]


def _crossed_cells(offset: tuple[int, ...]) -> np.ndarray:
    # unit moves need their whole bounding box free (no corner cutting);
    # longer moves need every cell the segment passes through
    if max(abs(o) for o in offset) <= 1:
        box = product(*[range(min(0, o), max(0, o) + 1) for o in offset])
        return np.array(list(box))
    fractions = (np.arange(16) + 0.5) / 16.0
    cells = np.rint(fractions[:, None] * np.asarray(offset)).astype(int)
    return np.unique(cells, axis=0)


def dijkstra_distance(
    free_mask: np.ndarray, cell_size: float, source: tuple[int, ...]
) -> np.ndarray:
    """
    Shortest paths over free cells on a 16-neighbor (2D) or 26-neighbor (3D) graph.

    A move is allowed only if every cell it crosses is free.

    :param free_mask: Free cells
    :type free_mask: np.ndarray
    :param cell_size: Cell edge length
    :type cell_size: float
    :param source: Source cell index
    :type source: tuple[int, ...]
    :return: Distances (inf where unreachable, NaN off the free mask)
    :rtype: np.ndarray
    """
    shape = np.asarray(free_mask.shape)
    index = -np.ones(free_mask.shape, dtype=np.int64)
    index[free_mask] = np.arange(int(free_mask.sum()))
    cells = np.argwhere(free_mask)
    rows, cols, weights = [], [], []
    for offset in _neighbor_offsets(free_mask.ndim):
        target = cells + np.asarray(offset)
        ok = np.all((target >= 0) & (target < shape), axis=1)
        for crossed in _crossed_cells(offset):
            through = cells[ok] + crossed
            ok[ok] = free_mask[tuple(through.T)]
        rows.append(index[tuple(cells[ok].T)])
        cols.append(index[tuple(target[ok].T)])
        weights.append(np.full(int(ok.sum()), cell_size * float(np.linalg.norm(offset))))
    n = len(cells)
    graph = coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    distances = dijkstra(graph, directed=True, indices=int(index[source]))
    result = np.full(free_mask.shape, np.nan)
    result[free_mask] = distances
    return result


def geodesic_oracle_errors(grid: ScalarGrid, goal: np.ndarray, exclusion_cells: float = 2.0):
    """
    Relative errors of the heat-method distance against the Dijkstra oracle.

    :return: Relative errors over reachable cells farther than ``exclusion_cells`` from the source
    :rtype: np.ndarray
    """
    heat = diffuse_heat(grid, goal)
    distance = geodesic_distance(heat)
    source = grid.locate(goal)
    oracle = dijkstra_distance(grid.free_mask, grid.cell_size, source)
    offsets = (grid.node_positions() - grid.node_positions()[source]) / grid.cell_size
    far = np.linalg.norm(offsets, axis=-1) > exclusion_cells
    valid = far & np.isfinite(distance.values) & np.isfinite(oracle) & (oracle > 0)
    return np.abs(distance.values[valid] - oracle[valid]) / oracle[valid]


def three_circle_workspace() -> Workspace:
    """Square with three disks between the heat source corner and the far side."""
    return Workspace(
        (0.0, 0.0),
        (4.0, 4.0),
        (
            SphereObstacle((1.5, 2.5), 0.5),
            SphereObstacle((2.5, 1.4), 0.5),
            SphereObstacle((2.9, 3.0), 0.4),
        ),
    )


def oracle_scenes() -> dict[str, tuple[Workspace, np.ndarray]]:
    """
    Reference grids for the distance oracle: open, a wall with one gap, three disks.

    :return: Workspace and heat source per scene name
    :rtype: dict[str, tuple[Workspace, np.ndarray]]
    """
    return {
        "empty": (Workspace((0.0, 0.0), (4.0, 4.0)), np.array([1.0, 1.0])),
        "wall_gap": (
            Workspace((0.0, 0.0), (4.0, 4.0), (BoxObstacle((2.0, 2.3), (0.1, 1.7)),)),
            np.array([1.0, 2.0]),
        ),
        "three_circles": (three_circle_workspace(), np.array([0.8, 0.8])),
    }


def _oracle_results(name: str, errors: np.ndarray) -> list[CheckResult]:
    if errors.size == 0:
        return [CheckResult(f"{name}_median", "geodesic", np.inf, 0.05, 0)]
    return [
        CheckResult(f"{name}_median", "geodesic", float(np.median(errors)), 0.05, errors.size),
        CheckResult(f"{name}_max", "geodesic", float(np.max(errors)), 0.15, errors.size),
    ]


def check_geodesic(
    scene: PlanningScene, goal: np.ndarray, cell_size: float | None
) -> list[CheckResult]:
    """
    Median and maximum relative distance error on the scene and the reference grids.

    :param scene: Planning scene whose workspace is rasterized
    :type scene: PlanningScene
    :param goal: Heat source in the scene
    :type goal: np.ndarray
    :param cell_size: Scene grid resolution (default: the workspace default)
    :type cell_size: float | None
    :return: Two results per grid
    :rtype: list[CheckResult]
    """
    grid = rasterize_workspace(scene.workspace, cell_size)
    results = _oracle_results("geodesic", geodesic_oracle_errors(grid, goal))
    for name, (ws, source) in oracle_scenes().items():
        extent = float(np.max(np.asarray(ws.bounds_max) - np.asarray(ws.bounds_min)))
        reference = rasterize_workspace(ws, extent / ORACLE_GRID_CELLS)
        errors = geodesic_oracle_errors(reference, source)
        results.extend(_oracle_results(f"geodesic_{name}", errors))
    return results


def random_convex_qp(
    rng: np.random.Generator, n: int
) -> tuple[QuadraticProgram, np.ndarray]:
    """
    Strongly convex QP with a planted optimum and strictly complementary duals.

    A random active set gets positive duals; d is chosen so stationarity holds
    at the planted point.

    :param rng: Random generator
    :type rng: np.random.Generator
    :param n: Number of variables
    :type n: int
    :return: (problem, optimal x)
    :rtype: tuple[QuadraticProgram, np.ndarray]
    """
    m_in = max(1, n // 2)
    m_eq = n // 4
    residual_matrix = rng.standard_normal((n + 5, n))
    x_star = rng.standard_normal(n)
    a_in = rng.standard_normal((m_in, n))
    a_eq = rng.standard_normal((m_eq, n))
    active = rng.random(m_in) < 0.5
    b_in = a_in @ x_star - np.where(active, 0.0, rng.uniform(0.5, 1.5, m_in))
    b_eq = a_eq @ x_star
    z_star = np.where(active, rng.uniform(0.5, 2.0, m_in), 0.0)
    y_star = rng.standard_normal(m_eq)
    pull = a_eq.T @ y_star + a_in.T @ z_star
    gram = residual_matrix.T @ residual_matrix
    offset = residual_matrix @ x_star - residual_matrix @ np.linalg.solve(gram, pull / 2.0)
    problem = QuadraticProgram(residual_matrix, offset, a_eq, b_eq, a_in, b_in)
    return problem, x_star


def check_solver(
    rng: np.random.Generator,
    instances: int = SOLVER_SUITE_SIZE,
    max_variables: int = SOLVER_SUITE_MAX_VARIABLES,
) -> list[CheckResult]:
    """
    Planted-optimum recovery over random convex QPs with 2 to ``max_variables`` variables.

    :param rng: Random generator
    :type rng: np.random.Generator
    :param instances: Number of QPs
    :type instances: int
    :param max_variables: Largest problem size drawn
    :type max_variables: int
    :return: Worst max-norm error to the planted optimum
    :rtype: list[CheckResult]
    """
    config = SolverConfig(kkt_tol=1e-9, wall_clock_limit=60.0)
    worst = 0.0
    for _ in range(instances):
        problem, x_star = random_convex_qp(rng, int(rng.integers(2, max_variables + 1)))
        result = solve(problem, np.zeros(problem.n_variables), config)
        worst = max(worst, float(np.max(np.abs(result.x - x_star))))
    return [CheckResult("convex_qp_suite", "solver", worst, 1e-6, instances)]


def run_checks(
    scene: PlanningScene,
    goal: np.ndarray,
    seed: int = 0,
    groups: tuple[str, ...] | None = None,
    samples: int = 100,
    cell_size: float | None = None,
) -> list[CheckResult]:
    """
    Run the selected check groups on one scene and goal.

    :param scene: Planning scene whose workspace, robot and map are checked
    :type scene: PlanningScene
    :param goal: Goal point for fields and goal constraints
    :type goal: np.ndarray
    :param seed: Seed of the sample points
    :type seed: int
    :param groups: Subset of :data:`CHECK_GROUPS` (all when None)
    :type groups: tuple[str, ...] | None
    :param samples: Evaluation points per check
    :type samples: int
    :param cell_size: Grid resolution for field checks
    :type cell_size: float | None
    :return: One result per check
    :rtype: list[CheckResult]
    """
    selected = CHECK_GROUPS if groups is None else tuple(groups)
    rng = np.random.default_rng(seed)
    goal = np.asarray(goal, dtype=float)
    results: list[CheckResult] = []
    if "geometry" in selected:
        results.append(check_sdf_gradient(scene, rng, samples))
    if "kinematics" in selected:
        results.append(check_keypoint_jacobian(scene, rng, samples))
    if "workspace_map" in selected:
        results.append(check_map_jacobian(scene, rng, samples))
    if "nlp" in selected:
        field = build_geodesic_field(scene.workspace, goal, cell_size)
        results.extend(check_terms(scene, goal, field, rng, samples))
    if "geodesic" in selected:
        results.extend(check_geodesic(scene, goal, cell_size))
    if "solver" in selected:
        results.extend(check_solver(rng))
    for result in results:
        log = logger.info if result.passed else logger.error
        log(
            "check %s.%s max_error=%.3e tolerance=%.1e samples=%d",
            result.group,
            result.name,
            result.max_error,
            result.tolerance,
            result.samples,
        )
    return results
