# app/services/benchmarks.py
"""
Benchmark harness: narrow-passage environments, goal lattices, experimental
conditions, single trials and parallel suites with rate aggregation.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd

from app.core.exceptions import InvalidParameterException, PlannerException
from app.core.geometry import DEFAULT_SOFTMIN_BETA, Workspace, keypoint_clearance, sdf_workspace
from app.core.heat import GeodesicField, HeatParams, build_geodesic_field
from app.core.kinematics import FreeFlyerRobot, forward_kinematics
from app.core.nlp import DEFAULT_GOAL_TOLERANCE, PlanningScene, TermWeights, assemble
from app.core.solver import IterationRecord, SolverConfig, solve
from app.core.storage import FieldCache, ResultStore, atomic_write_text
from app.core.terms import Attractor
from app.core.trajectory import DEFAULT_DT, DEFAULT_HORIZON, Trajectory
from app.core.workspace_map import DEFAULT_LENGTH_SCALE, WorkspaceMap

logger = logging.getLogger(__name__)

GOAL_REACHED_RADIUS = 0.05
COLLISION_SAMPLES_PER_INTERVAL = 10
GEODESIC_WEIGHTS = (0.0, 10.0, 50.0)
METRICS = ("success", "collision_free", "goal_reached")


@dataclass(frozen=True)
class GoalRegion:
    """Axis-aligned box filled with a regular lattice of ``counts`` goals."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not len(self.lower) == len(self.upper) == len(self.counts):
            raise InvalidParameterException("goal_region", "lower, upper and counts must agree")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise InvalidParameterException("goal_region", "lower exceeds upper")
        if any(n < 1 for n in self.counts):
            raise InvalidParameterException("goal_region", "counts must be positive")

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def lattice(self) -> np.ndarray:
        """
        Goals in C order over the axes (last axis fastest).

        :return: Goal points, shape (size, dim)
        :rtype: np.ndarray
        """
        axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.counts)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)


@dataclass(frozen=True)
class Environment:
    """A benchmark instance: workspace, robot, start and goal region."""

    name: str
    workspace: Workspace
    robot: FreeFlyerRobot
    start: tuple[float, ...]
    goal_region: GoalRegion
    length_scale: float = DEFAULT_LENGTH_SCALE
    identity_weight: float = 1.0
    potential_weights: tuple[float, ...] | None = None
    softmin_beta: float = DEFAULT_SOFTMIN_BETA

    def __post_init__(self) -> None:
        if len(self.goal_region.lower) != self.workspace.dimension:
            raise InvalidParameterException("goal_region", "dimension does not match the workspace")
        start = np.asarray(self.start, dtype=float)
        points = forward_kinematics(self.robot, start)
        clearance = keypoint_clearance(points, self.robot.radii, self.workspace)
        if float(clearance) <= 0.0:
            raise InvalidParameterException("start", "robot is in collision at the start")

    @property
    def workspace_map(self) -> WorkspaceMap:
        return WorkspaceMap(
            self.workspace, self.potential_weights, self.identity_weight, self.length_scale
        )

    def scene(self) -> PlanningScene:
        return PlanningScene(
            workspace=self.workspace,
            robot=self.robot,
            start=np.asarray(self.start, dtype=float),
            workspace_map=self.workspace_map,
            softmin_beta=self.softmin_beta,
        )

    def goals(self) -> np.ndarray:
        return self.goal_region.lattice()

    def invalid_goals(self) -> list[int]:
        """Indices of goals closer to an obstacle than the end-effector radius."""
        radius = self.robot.radii[self.robot.end_effector_index]
        clearance = sdf_workspace(self.goals(), self.workspace).value
        return [int(i) for i in np.flatnonzero(clearance < radius)]

    def without_obstacles(self) -> "Environment":
        return replace(
            self,
            name=f"{self.name}-free",
            workspace=self.workspace.without_obstacles(),
            potential_weights=None,
        )


@dataclass(frozen=True)
class Condition:
    """
    One column of the results table: attractor, geodesic weight and flow switch.

    Labels read ``attractor:weight`` with an optional ``:flow`` suffix,
    e.g. ``geodesic-flow:50`` or ``euclidean:50:flow``.
    """

    attractor: Attractor
    w_geodesic: float
    flow_term: bool = False

    @classmethod
    def parse(cls, label: str) -> "Condition":
        """
        Parse a condition label.

        :param label: Label such as ``natural:10``
        :type label: str
        :return: Condition
        :rtype: Condition
        :raises InvalidParameterException: On a malformed label
        """
        parts = label.strip().split(":")
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "flow"):
            raise InvalidParameterException("condition", f"cannot parse '{label}'")
        try:
            attractor = Attractor(parts[0])
            weight = float(parts[1])
        except ValueError as exc:
            raise InvalidParameterException("condition", f"cannot parse '{label}'") from exc
        if weight < 0.0:
            raise InvalidParameterException("condition", "geodesic weight must be nonnegative")
        return cls(attractor, weight, len(parts) == 3)

    @property
    def label(self) -> str:
        suffix = ":flow" if self.flow_term else ""
        return f"{self.attractor.value}:{self.w_geodesic:g}{suffix}"

    def apply(self, base: TermWeights) -> TermWeights:
        return replace(
            base,
            w_geodesic=self.w_geodesic,
            attractor=self.attractor,
            flow_term_enabled=self.flow_term,
        )


STANDARD_CONDITIONS = tuple(
    Condition(attractor, weight) for attractor in Attractor for weight in GEODESIC_WEIGHTS
)
FLOW_CONDITIONS = tuple(
    Condition(attractor, weight, True) for attractor in Attractor for weight in GEODESIC_WEIGHTS
)


@dataclass(frozen=True)
class TrialSettings:
    """Everything a trial needs besides the environment, goal and condition."""

    weights: TermWeights = TermWeights()
    horizon: int = DEFAULT_HORIZON
    dt: float = DEFAULT_DT
    goal_tolerance: float = DEFAULT_GOAL_TOLERANCE
    solver: SolverConfig = SolverConfig(wall_clock_limit=20.0)
    cell_size: float | None = None
    blend_radius: float | None = None
    heat: HeatParams = HeatParams()
    field_cache_dir: str | None = None


@dataclass(frozen=True)
class TrialResult:
    environment: str
    goal_index: int
    goal: tuple[float, ...]
    condition: str
    success: bool
    collision_free: bool
    goal_reached: bool
    solver_status: str
    wall_time: float
    final_objective: float
    iterations: int = 0
    kkt_residual: float = float("nan")
    min_clearance: float = float("nan")
    goal_error: float = float("nan")
    reason: str | None = None
    configurations: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        record = asdict(self)
        record.pop("configurations")
        record["goal"] = [float(v) for v in self.goal]
        return record


def trajectory_margins(
    configurations: np.ndarray, env: Environment, goal: np.ndarray
) -> tuple[float, float]:
    """
    Exact clearance over the densely resampled path and the final goal error.

    :param configurations: q_0..q_T
    :type configurations: np.ndarray
    :param env: Environment
    :type env: Environment
    :param goal: Goal point
    :type goal: np.ndarray
    :return: (minimum keypoint clearance, end-effector distance to the goal)
    :rtype: tuple[float, float]
    """
    configurations = np.asarray(configurations, dtype=float)
    dense = Trajectory(configurations[0], configurations[1:]).resample(
        COLLISION_SAMPLES_PER_INTERVAL
    )
    points = forward_kinematics(env.robot, dense)
    clearance = float(np.min(keypoint_clearance(points, env.robot.radii, env.workspace)))
    tip = points[-1, env.robot.end_effector_index]
    return clearance, float(np.linalg.norm(tip - np.asarray(goal, dtype=float)))


def evaluate_trajectory(
    traj: Trajectory | np.ndarray, env: Environment, goal: np.ndarray
) -> tuple[bool, bool]:
    """
    Collision and goal flags of a finished trajectory.

    Collision uses the hard minimum of keypoint clearances over 10 interpolated
    states per knot interval; the goal counts as reached within 5 cm.

    :param traj: Trajectory or its configurations q_0..q_T
    :type traj: Trajectory | np.ndarray
    :param env: Environment
    :type env: Environment
    :param goal: Goal point
    :type goal: np.ndarray
    :return: (collision_free, goal_reached)
    :rtype: tuple[bool, bool]
    """
    configurations = traj.configurations if isinstance(traj, Trajectory) else traj
    clearance, error = trajectory_margins(configurations, env, goal)
    return clearance >= 0.0, error <= GOAL_REACHED_RADIUS


def failed_trial(
    env: Environment,
    goal_index: int,
    goal: np.ndarray,
    condition: Condition,
    status: str,
    reason: str,
    wall_time: float = 0.0,
) -> TrialResult:
    """
    Record of a trial that produced no trajectory.

    :param status: ``not-run`` for planner errors, ``error`` for unexpected failures
    :type status: str
    :param reason: Error message kept in the results file
    :type reason: str
    :return: Trial record with every flag false
    :rtype: TrialResult
    """
    return TrialResult(
        environment=env.name,
        goal_index=goal_index,
        goal=tuple(float(v) for v in np.asarray(goal, dtype=float)),
        condition=condition.label,
        success=False,
        collision_free=False,
        goal_reached=False,
        solver_status=status,
        wall_time=wall_time,
        final_objective=float("nan"),
        reason=reason,
    )


def _field_for(
    env: Environment, goal: np.ndarray, settings: TrialSettings
) -> GeodesicField:
    cache = FieldCache(settings.field_cache_dir) if settings.field_cache_dir else None
    return build_geodesic_field(
        env.workspace, goal, settings.cell_size, settings.blend_radius, settings.heat, cache
    )


def run_trial(
    env: Environment,
    goal: np.ndarray,
    condition: Condition,
    settings: TrialSettings = TrialSettings(),
    goal_index: int = -1,
    field_: GeodesicField | None = None,
    trace: Callable[[IterationRecord], None] | None = None,
) -> TrialResult:
    """
    Plan toward ``goal`` under ``condition`` and score the result.

    Planner errors (goal outside the freespace, field construction failures,
    infeasible start) are recorded as a ``not-run`` trial with the reason; any
    other exception is logged with its traceback and recorded as ``error``.

    :param env: Environment
    :type env: Environment
    :param goal: Goal point
    :type goal: np.ndarray
    :param condition: Attractor, geodesic weight and flow switch
    :type condition: Condition
    :param settings: Horizon, solver, field and base weights
    :type settings: TrialSettings
    :param goal_index: Index of ``goal`` in the environment's goal set
    :type goal_index: int
    :param field_: Precomputed field of ``goal`` (built on demand otherwise)
    :type field_: GeodesicField | None
    :param trace: Receives every solver iteration
    :type trace: Callable[[IterationRecord], None] | None
    :return: Trial record
    :rtype: TrialResult
    """
    started = time.perf_counter()
    goal = np.asarray(goal, dtype=float)
    weights = condition.apply(settings.weights)
    try:
        if weights.needs_field and field_ is None:
            field_ = _field_for(env, goal, settings)
        problem = assemble(
            env.scene(),
            weights,
            goal,
            settings.horizon,
            settings.dt,
            field_ if weights.needs_field else None,
            goal_tolerance=settings.goal_tolerance,
        )
        solution = solve(problem, problem.x0, settings.solver, trace)
        configurations = problem.trajectory(solution.x).configurations
        clearance, error = trajectory_margins(configurations, env, goal)
    except PlannerException as exc:
        logger.warning(
            "trial failed env=%s goal=%d condition=%s error=%s",
            env.name,
            goal_index,
            condition.label,
            exc.error_code,
        )
        return failed_trial(
            env,
            goal_index,
            goal,
            condition,
            "not-run",
            exc.message,
            time.perf_counter() - started,
        )
    except Exception as exc:
        logger.exception(
            "trial crashed env=%s goal=%d condition=%s", env.name, goal_index, condition.label
        )
        return failed_trial(
            env,
            goal_index,
            goal,
            condition,
            "error",
            f"{type(exc).__name__}: {exc}",
            time.perf_counter() - started,
        )

    collision_free, goal_reached = clearance >= 0.0, error <= GOAL_REACHED_RADIUS
    result = TrialResult(
        environment=env.name,
        goal_index=goal_index,
        goal=tuple(float(v) for v in goal),
        condition=condition.label,
        success=collision_free and goal_reached,
        collision_free=collision_free,
        goal_reached=goal_reached,
        solver_status=solution.status.value,
        wall_time=time.perf_counter() - started,
        final_objective=solution.stats.objective,
        iterations=solution.stats.iterations,
        kkt_residual=solution.stats.kkt_residual,
        min_clearance=clearance,
        goal_error=error,
        configurations=configurations,
    )
    logger.info(
        "trial env=%s goal=%d condition=%s success=%s collision_free=%s goal_reached=%s "
        "status=%s seconds=%.2f",
        env.name,
        goal_index,
        condition.label,
        result.success,
        collision_free,
        goal_reached,
        result.solver_status,
        result.wall_time,
    )
    return result


def _run_goal(
    env: Environment,
    goal_index: int,
    goal: np.ndarray,
    conditions: Sequence[Condition],
    settings: TrialSettings,
) -> list[TrialResult]:
    # one field per goal shared by every condition that needs it
    field_ = None
    if any(c.apply(settings.weights).needs_field for c in conditions):
        try:
            field_ = _field_for(env, goal, settings)
        except PlannerException as exc:
            logger.warning(
                "field failed env=%s goal=%d error=%s", env.name, goal_index, exc.message
            )
        except Exception:
            logger.exception("field crashed env=%s goal=%d", env.name, goal_index)
    results = [run_trial(env, goal, c, settings, goal_index, field_) for c in conditions]
    # trajectories stay in the worker
    return [replace(r, configurations=None) for r in results]


class ResultsTable:
    """Per-condition success, collision-free and goal-reached rates over a goal set."""

    def __init__(self, records: Iterable[dict]) -> None:
        self.records = list(records)
        columns = ["environment", "goal_index", "condition", *METRICS]
        self.frame = pd.DataFrame(self.records, columns=columns if not self.records else None)

    @classmethod
    def from_file(cls, path: str | Path) -> "ResultsTable":
        return cls(ResultStore.read(path))

    def summary(self) -> pd.DataFrame:
        """
        Rates as arithmetic means of the per-trial flags.

        :return: One row per (environment, condition), in first-seen order
        :rtype: pd.DataFrame
        """
        frame = self.frame.copy()
        for metric in METRICS:
            frame[metric] = frame[metric].astype(float)
        grouped = frame.groupby(["environment", "condition"], sort=False)
        summary = grouped[list(METRICS)].mean()
        summary["trials"] = grouped.size()
        return summary.reset_index()

    def rate(
        self, condition: str, metric: str = "success", environment: str | None = None
    ) -> float:
        summary = self.summary()
        rows = summary[summary["condition"] == condition]
        if environment is not None:
            rows = rows[rows["environment"] == environment]
        if rows.empty:
            raise InvalidParameterException("condition", f"no trials for '{condition}'")
        return float(rows[metric].iloc[0])

    def to_text(self) -> str:
        """Metrics as rows and conditions as columns, one block per environment."""
        blocks = []
        summary = self.summary()
        for environment, rows in summary.groupby("environment", sort=False):
            table = rows.set_index("condition")[list(METRICS)].T
            table.index = ["success", "collision free", "goal reached"]
            text = table.to_string(float_format=lambda v: f"{v:.2f}")
            trials = int(rows["trials"].max())
            blocks.append(f"{environment} ({trials} goals)\n{text}")
        return "\n\n".join(blocks) + "\n"

    def to_csv(self) -> str:
        return self.summary().to_csv(index=False, float_format="%.4f")

    def write(self, directory: str | Path, stem: str = "summary") -> tuple[Path, Path]:
        directory = Path(directory)
        text = atomic_write_text(directory / f"{stem}.txt", self.to_text())
        csv = atomic_write_text(directory / f"{stem}.csv", self.to_csv())
        return text, csv


def run_suite(
    env: Environment,
    conditions: Sequence[Condition],
    settings: TrialSettings = TrialSettings(),
    parallelism: int = 3,
    store: ResultStore | None = None,
    goal_indices: Sequence[int] | None = None,
) -> ResultsTable:
    """
    Run every (goal, condition) trial and aggregate rates per condition.

    Goals are distributed over ``parallelism`` worker processes; each worker
    builds the goal's field once and runs all conditions on it. Records are
    merged into ``store`` as goals finish, replacing earlier records of the
    same goal and condition, and the file is finally sorted by goal and
    condition. A worker that dies records its goal's trials as ``error``.
    The returned table covers this run's trials only.

    :param env: Environment
    :type env: Environment
    :param conditions: Conditions to run on every goal
    :type conditions: Sequence[Condition]
    :param settings: Trial settings
    :type settings: TrialSettings
    :param parallelism: Worker processes (1 runs inline)
    :type parallelism: int
    :param store: Results file
    :type store: ResultStore | None
    :param goal_indices: Subset of the goal set (all goals when None)
    :type goal_indices: Sequence[int] | None
    :return: Aggregated table
    :rtype: ResultsTable
    """
    if parallelism < 1:
        raise InvalidParameterException("parallelism", "must be at least 1")
    goals = env.goals()
    indices = list(range(len(goals))) if goal_indices is None else list(goal_indices)
    for index in indices:
        if not 0 <= index < len(goals):
            raise InvalidParameterException("goal_index", f"{index} outside 0..{len(goals) - 1}")
    logger.info(
        "suite env=%s goals=%d conditions=%d parallelism=%d",
        env.name,
        len(indices),
        len(conditions),
        parallelism,
    )

    results: list[TrialResult] = []

    def collect(batch: list[TrialResult]) -> None:
        results.extend(batch)
        if store is not None:
            store.upsert(r.to_dict() for r in batch)
        logger.info("suite progress env=%s trials=%d", env.name, len(results))

    if parallelism == 1:
        for index in indices:
            collect(_run_goal(env, index, goals[index], conditions, settings))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = {
                pool.submit(_run_goal, env, index, goals[index], conditions, settings): index
                for index in indices
            }
            for future in as_completed(futures):
                index = futures[future]
                try:
                    batch = future.result()
                except Exception as exc:
                    logger.exception("suite worker failed env=%s goal=%d", env.name, index)
                    reason = f"{type(exc).__name__}: {exc}"
                    batch = [
                        failed_trial(env, index, goals[index], c, "error", reason)
                        for c in conditions
                    ]
                collect(batch)

    order = {c.label: k for k, c in enumerate(conditions)}
    results.sort(key=lambda r: (r.goal_index, order[r.condition]))
    records = [r.to_dict() for r in results]
    if store is not None:
        store.replace(
            sorted(
                store.records,
                key=lambda r: (
                    str(r.get("environment")),
                    r.get("goal_index", -1),
                    order.get(r.get("condition"), len(order)),
                    str(r.get("condition")),
                ),
            )
        )
    return ResultsTable(records)
