# tests/conftest.py
"""
Shared fixtures: a small planar scene with one box and matching robots.
"""
from pathlib import Path

import numpy as np
import pytest

from app.core.geometry import BoxObstacle, Workspace
from app.core.kinematics import FreeFlyerRobot, Keypoint
from app.core.nlp import PlanningScene
from app.core.workspace_map import WorkspaceMap
from app.services.benchmarks import Environment, GoalRegion

PRESETS_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def planar_workspace() -> Workspace:
    """2 m square with a 0.4 m box in the middle."""
    return Workspace((0.0, 0.0), (2.0, 2.0), (BoxObstacle((1.0, 1.0), (0.2, 0.2)),))


@pytest.fixture
def planar_robot() -> FreeFlyerRobot:
    return FreeFlyerRobot(
        2, (Keypoint((-0.1, 0.0), 0.05), Keypoint((0.1, 0.0), 0.05)), end_effector_index=1
    )


@pytest.fixture
def spatial_robot() -> FreeFlyerRobot:
    return FreeFlyerRobot(
        3,
        (Keypoint((-0.1, 0.0, 0.0), 0.05), Keypoint((0.1, 0.0, 0.05), 0.05)),
        end_effector_index=1,
    )


@pytest.fixture
def planar_scene(planar_workspace: Workspace, planar_robot: FreeFlyerRobot) -> PlanningScene:
    return PlanningScene(
        planar_workspace, planar_robot, np.array([0.4, 0.4, 0.0]), WorkspaceMap(planar_workspace)
    )


@pytest.fixture
def planar_environment(
    planar_workspace: Workspace, planar_robot: FreeFlyerRobot
) -> Environment:
    return Environment(
        name="square",
        workspace=planar_workspace,
        robot=planar_robot,
        start=(0.4, 0.4, 0.0),
        goal_region=GoalRegion((1.5, 1.4), (1.7, 1.6), (2, 2)),
    )


@pytest.fixture
def planar_preset() -> Path:
    return PRESETS_DIR / "planar_narrow.yaml"
