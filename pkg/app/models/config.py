# app/models/config.py
"""
Experiment documents: one YAML file per experiment describing the
environment, robot, weights, condition grid, solver and field settings.
"""
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from app.core.exceptions import ConfigurationException, PlannerException
from app.core.geometry import BoxObstacle, SphereObstacle, Workspace
from app.core.heat import HeatMode, HeatParams
from app.core.kinematics import FreeFlyerRobot, Keypoint
from app.core.nlp import TermWeights
from app.core.solver import SolverConfig
from app.services.benchmarks import (
    STANDARD_CONDITIONS,
    Condition,
    Environment,
    GoalRegion,
    TrialSettings,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ObstacleModel(_Strict):
    """Box (center, half extents, orientation) or sphere (center, radius)."""

    kind: Literal["box", "sphere"] = Field(..., description="Obstacle shape")
    center: list[float] = Field(..., min_length=2, max_length=3, description="Center in m")
    half_extents: list[float] | None = Field(None, description="Box half extents in m")
    orientation: list[float] = Field(
        default_factory=list, description="Planar angle or (roll, pitch, yaw) in rad"
    )
    radius: float | None = Field(None, gt=0.0, description="Sphere radius in m")

    @model_validator(mode="after")
    def check_shape(self) -> "ObstacleModel":
        if self.kind == "box":
            if self.half_extents is None or len(self.half_extents) != len(self.center):
                raise ValueError("box needs one half extent per center coordinate")
            if any(h <= 0.0 for h in self.half_extents):
                raise ValueError("box half extents must be positive")
        elif self.radius is None:
            raise ValueError("sphere needs a radius")
        return self

    def to_obstacle(self) -> BoxObstacle | SphereObstacle:
        if self.kind == "box":
            return BoxObstacle(
                tuple(self.center), tuple(self.half_extents), tuple(self.orientation)
            )
        return SphereObstacle(tuple(self.center), self.radius)


class GoalRegionModel(_Strict):
    lower: list[float] = Field(..., description="Lower corner of the goal box in m")
    upper: list[float] = Field(..., description="Upper corner of the goal box in m")
    counts: list[int] = Field(..., description="Goals per axis of the lattice")

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, v: list[int]) -> list[int]:
        if any(n < 1 for n in v):
            raise ValueError("lattice counts must be positive")
        return v


class EnvironmentModel(_Strict):
    name: str = Field(..., description="Environment name used in results")
    bounds_min: list[float] = Field(..., min_length=2, max_length=3)
    bounds_max: list[float] = Field(..., min_length=2, max_length=3)
    obstacles: list[ObstacleModel] = Field(default_factory=list)
    start: list[float] = Field(..., description="Start configuration")
    goal_region: GoalRegionModel
    hessian_clamp: float = Field(20.0, gt=0.0, description="SDF Hessian eigenvalue bound in 1/m")


class KeypointModel(_Strict):
    offset: list[float] = Field(..., description="Body-frame offset in m")
    radius: float = Field(..., gt=0.0, description="Collision sphere radius in m")


class RobotModel(_Strict):
    keypoints: list[KeypointModel] = Field(..., min_length=1)
    end_effector_index: int = Field(0, ge=0)

    def to_robot(self, dimension: int) -> FreeFlyerRobot:
        return FreeFlyerRobot(
            dimension,
            tuple(Keypoint(tuple(k.offset), k.radius) for k in self.keypoints),
            self.end_effector_index,
        )


class WorkspaceMapModel(_Strict):
    length_scale: float = Field(0.3, gt=0.0, description="Potential decay length l in m")
    identity_weight: float = Field(1.0, ge=0.0)
    potential_weights: list[float] | None = Field(None, description="One weight per obstacle")
    softmin_beta: float = Field(100.0, gt=0.0, description="Collision softmin temperature")


class PlanningModel(_Strict):
    horizon: int = Field(50, ge=2, description="Number of knots T")
    dt: float = Field(0.1, gt=0.0, description="Time step in s")
    goal_tolerance: float = Field(1e-3, gt=0.0, description="Goal constraint radius")
    w_accel: float = Field(1.0, ge=0.0)
    w_flow: float = Field(10.0, ge=0.0)
    w_postural: float = Field(1.0, ge=0.0)
    flow_all_keypoints: bool = Field(False, description="Apply the flow term to every keypoint")


class SolverModel(_Strict):
    mu_init: float = Field(0.1, gt=0.0)
    mu_shrink: float = Field(0.2, gt=0.0, lt=1.0)
    kkt_tol: float = Field(1e-6, gt=0.0)
    max_iterations: int = Field(1000, ge=1)
    wall_clock_limit: float = Field(20.0, gt=0.0, description="Seconds before giving up")
    fraction_to_boundary: float = Field(0.995, gt=0.0, lt=1.0)
    regularization: float = Field(1e-8, gt=0.0)


class FieldModel(_Strict):
    cell_size: float | None = Field(None, gt=0.0, description="Grid cell size in m")
    blend_radius: float | None = Field(None, ge=0.0, description="Euclidean blend radius in m")
    time_step: float = Field(1.0, gt=0.0, description="Diffusion time in cell_size^2")
    mode: HeatMode = HeatMode.CLOSED_FORM
    linear_solver: Literal["direct", "cg"] = "direct"
    sweep_count: int = Field(2000, ge=1)


class ExperimentConfig(_Strict):
    """A complete, validated experiment document."""

    environment: EnvironmentModel
    robot: RobotModel
    workspace_map: WorkspaceMapModel = Field(default_factory=WorkspaceMapModel)
    planning: PlanningModel = Field(default_factory=PlanningModel)
    conditions: list[str] = Field(
        default_factory=lambda: [c.label for c in STANDARD_CONDITIONS],
        description="Condition labels such as 'geodesic-flow:50' or 'euclidean:50:flow'",
    )
    solver: SolverModel = Field(default_factory=SolverModel)
    field: FieldModel = Field(default_factory=FieldModel)
    output_dir: str = Field("results", description="Directory for results and renderings")
    parallelism: int = Field(3, ge=1, description="Worker processes for suites")
    seed: int = Field(0, description="Seed of the gradient-check sample points")

    @field_validator("conditions")
    @classmethod
    def validate_conditions(cls, v: list[str]) -> list[str]:
        if not v:
            raise ValueError("at least one condition is required")
        labels = []
        for label in v:
            try:
                labels.append(Condition.parse(label).label)
            except PlannerException as exc:
                raise ValueError(exc.message) from exc
        if len(set(labels)) != len(labels):
            raise ValueError("conditions must be distinct")
        return v

    @model_validator(mode="after")
    def check_dimensions(self) -> "ExperimentConfig":
        env = self.environment
        dim = len(env.bounds_min)
        if len(env.bounds_max) != dim:
            raise ValueError("bounds_min and bounds_max differ in dimension")
        if len(env.start) != (3 if dim == 2 else 6):
            raise ValueError(f"start needs {3 if dim == 2 else 6} coordinates")
        for keypoint in self.robot.keypoints:
            if len(keypoint.offset) != dim:
                raise ValueError("keypoint offsets must match the workspace dimension")
        if self.robot.end_effector_index >= len(self.robot.keypoints):
            raise ValueError("end_effector_index is out of range")
        return self

    def condition_list(self) -> list[Condition]:
        return [Condition.parse(label) for label in self.conditions]

    def to_environment(self) -> Environment:
        """
        Build the core environment.

        :return: Environment with its workspace, robot and goal region
        :rtype: Environment
        :raises ConfigurationException: If the geometry is inconsistent
        """
        env = self.environment
        dim = len(env.bounds_min)
        try:
            workspace = Workspace(
                tuple(env.bounds_min),
                tuple(env.bounds_max),
                tuple(o.to_obstacle() for o in env.obstacles),
                env.hessian_clamp,
            )
            weights = self.workspace_map.potential_weights
            return Environment(
                name=env.name,
                workspace=workspace,
                robot=self.robot.to_robot(dim),
                start=tuple(env.start),
                goal_region=GoalRegion(
                    tuple(env.goal_region.lower),
                    tuple(env.goal_region.upper),
                    tuple(env.goal_region.counts),
                ),
                length_scale=self.workspace_map.length_scale,
                identity_weight=self.workspace_map.identity_weight,
                potential_weights=None if weights is None else tuple(weights),
                softmin_beta=self.workspace_map.softmin_beta,
            )
        except PlannerException as exc:
            raise ConfigurationException(exc.message) from exc

    def to_settings(
        self, time_limit: float | None = None, cache_dir: str | None = None
    ) -> TrialSettings:
        solver = self.solver.model_dump()
        if time_limit is not None:
            solver["wall_clock_limit"] = time_limit
        planning = self.planning
        return TrialSettings(
            weights=TermWeights(
                w_accel=planning.w_accel,
                w_flow=planning.w_flow,
                w_postural=planning.w_postural,
                flow_all_keypoints=planning.flow_all_keypoints,
            ),
            horizon=planning.horizon,
            dt=planning.dt,
            goal_tolerance=planning.goal_tolerance,
            solver=SolverConfig(**solver),
            cell_size=self.field.cell_size,
            blend_radius=self.field.blend_radius,
            heat=HeatParams(
                time_step=self.field.time_step,
                mode=self.field.mode,
                sweep_count=self.field.sweep_count,
                linear_solver=self.field.linear_solver,
            ),
            field_cache_dir=cache_dir,
        )

    def goal(self, index: int) -> np.ndarray:
        goals = self.to_environment().goals()
        if not 0 <= index < len(goals):
            raise ConfigurationException(f"goal index {index} outside 0..{len(goals) - 1}")
        return goals[index]

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str, source: str | None = None) -> "ExperimentConfig":
        """
        Parse and validate a YAML document.

        :param text: Document text
        :type text: str
        :param source: File name used in error messages
        :type source: str | None
        :return: Validated config
        :rtype: ExperimentConfig
        :raises ConfigurationException: On a YAML or validation error
        """
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationException(f"invalid YAML: {exc}", source) from exc
        if not isinstance(data, dict):
            raise ConfigurationException("config must be a mapping", source)
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigurationException(str(exc), source) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """
    Read an experiment document from disk.

    :param path: YAML file
    :type path: str | Path
    :return: Validated config
    :rtype: ExperimentConfig
    :raises ConfigurationException: If the file is missing or invalid
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationException(f"cannot read config: {exc.strerror}", str(path)) from exc
    return ExperimentConfig.from_yaml(text, str(path))
