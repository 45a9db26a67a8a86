# tests/test_workspace_map.py
"""
Unit tests for the workspace map and its pullback metric.
"""
import numpy as np
import pytest

from app.core.checks import finite_difference_jacobian, relative_error
from app.core.exceptions import InvalidParameterException
from app.core.geometry import Workspace
from app.core.workspace_map import (
    WorkspaceMap,
    eval_map,
    map_jacobian,
    metric_spectrum,
    natural_distance,
    pullback_metric,
)


def test_map_value(planar_workspace: Workspace) -> None:
    """
    Test one exponential potential per obstacle followed by the scaled point.

    :return: None
    """
    m = WorkspaceMap(planar_workspace, identity_weight=2.0, length_scale=0.3)
    value = eval_map(m, np.array([0.5, 1.0]))
    assert m.output_dimension == 3
    assert value[0] == pytest.approx(np.exp(-0.3 / 0.3))
    assert np.allclose(value[1:], [1.0, 2.0])


def test_map_jacobian_matches_finite_differences(planar_workspace: Workspace) -> None:
    """
    Test the analytic Jacobian away from obstacle surfaces.

    :return: None
    """
    m = WorkspaceMap(planar_workspace, potential_weights=(3.0,))
    for p in ([0.3, 0.4], [1.5, 1.1], [1.7, 1.6]):
        p = np.array(p)
        numeric = finite_difference_jacobian(lambda v: eval_map(m, v), p)
        assert relative_error(map_jacobian(m, p), numeric) < 1e-6


def test_metric_is_identity_without_obstacles(planar_workspace: Workspace) -> None:
    """
    Test that an empty workspace pulls back the Euclidean metric.

    :return: None
    """
    m = WorkspaceMap(planar_workspace.without_obstacles())
    assert np.allclose(pullback_metric(m, np.array([0.7, 0.2])), np.eye(2))


def test_metric_stretches_along_obstacle_normal(planar_workspace: Workspace) -> None:
    """
    Test that the largest eigenvector next to a box face is its normal.

    :return: None
    """
    m = WorkspaceMap(planar_workspace)
    metric = pullback_metric(m, np.array([1.3, 1.0]))
    assert np.allclose(metric, metric.T)
    values, vectors = metric_spectrum(m, np.array([1.3, 1.0]))
    assert values[0] == pytest.approx(1.0)
    assert values[1] > 1.0
    assert abs(vectors[0, 1]) == pytest.approx(1.0)


def test_natural_distance(planar_workspace: Workspace) -> None:
    """
    Test natural distance is zero at the goal and at least the scaled Euclidean gap.

    :return: None
    """
    m = WorkspaceMap(planar_workspace)
    goal = np.array([1.5, 1.5])
    points = np.array([[1.5, 1.5], [0.5, 0.5]])
    distance = natural_distance(m, points, goal)
    assert distance[0] == pytest.approx(0.0)
    assert distance[1] >= np.sqrt(2.0) - 1e-12


def test_map_validation(planar_workspace: Workspace) -> None:
    """
    Test weight and length-scale validation.

    :return: None
    """
    with pytest.raises(InvalidParameterException):
        WorkspaceMap(planar_workspace, potential_weights=(-1.0,))
    with pytest.raises(InvalidParameterException):
        WorkspaceMap(planar_workspace, potential_weights=(1.0, 1.0))
    with pytest.raises(InvalidParameterException):
        WorkspaceMap(planar_workspace, length_scale=0.0)
