# tests/test_geometry.py
"""
Unit tests for signed distance functions and workspace validation.
"""
import numpy as np
import pytest

from app.core.exceptions import InvalidParameterException
from app.core.geometry import (
    BoxObstacle,
    SphereObstacle,
    Workspace,
    keypoint_clearance,
    sdf_box,
    sdf_sphere,
    sdf_workspace,
    softmin,
)


def test_box_distance_outside_face() -> None:
    """
    Test distance and normal in a face region of an axis-aligned box.

    :return: None
    """
    box = BoxObstacle((1.0, 1.0), (0.2, 0.2))
    sample = sdf_box(np.array([2.0, 1.0]), box)
    assert float(sample.value) == pytest.approx(0.8)
    assert np.allclose(sample.gradient, [1.0, 0.0])
    assert np.allclose(sample.hessian, 0.0)


def test_box_distance_inside() -> None:
    """
    Test that the nearest face wins inside the box.

    :return: None
    """
    box = BoxObstacle((1.0, 1.0), (0.2, 0.2))
    sample = sdf_box(np.array([1.0, 1.1]), box)
    assert float(sample.value) == pytest.approx(-0.1)
    assert np.allclose(sample.gradient, [0.0, 1.0])


def test_box_corner_hessian() -> None:
    """
    Test corner curvature 1/d with a null direction along the gradient.

    :return: None
    """
    box = BoxObstacle((1.0, 1.0), (0.2, 0.2))
    sample = sdf_box(np.array([1.5, 1.5]), box)
    distance = np.sqrt(0.18)
    assert float(sample.value) == pytest.approx(distance)
    assert np.allclose(sample.hessian @ sample.gradient, 0.0)
    assert np.trace(sample.hessian) == pytest.approx(1.0 / distance)


def test_box_hessian_is_clamped() -> None:
    """
    Test that corner curvature never exceeds the clamp.

    :return: None
    """
    box = BoxObstacle((1.0, 1.0), (0.2, 0.2))
    sample = sdf_box(np.array([1.21, 1.21]), box, hessian_clamp=20.0)
    assert np.trace(sample.hessian) == pytest.approx(20.0)


def test_rotated_box_vertex() -> None:
    """
    Test a box rotated by 45 degrees, whose vertex points along x.

    :return: None
    """
    box = BoxObstacle((1.0, 1.0), (0.2, 0.2), (np.pi / 4,))
    sample = sdf_box(np.array([1.5, 1.0]), box)
    assert float(sample.value) == pytest.approx(0.5 - 0.2 * np.sqrt(2.0))
    assert np.allclose(sample.gradient, [1.0, 0.0])


def test_sphere_distance() -> None:
    """
    Test sphere distance, normal and tangential curvature.

    :return: None
    """
    sphere = SphereObstacle((0.0, 0.0, 0.0), 0.5)
    sample = sdf_sphere(np.array([0.0, 2.0, 0.0]), sphere)
    assert float(sample.value) == pytest.approx(1.5)
    assert np.allclose(sample.gradient, [0.0, 1.0, 0.0])
    assert np.allclose(np.diag(sample.hessian), [0.5, 0.0, 0.5])


def test_workspace_distance_takes_bounds_into_account(planar_workspace: Workspace) -> None:
    """
    Test that the inner distance to the bounds competes with obstacles.

    :return: None
    """
    sample = sdf_workspace(np.array([0.05, 1.0]), planar_workspace)
    assert float(sample.value) == pytest.approx(0.05)
    assert np.allclose(sample.gradient, [1.0, 0.0])

    outside = sdf_workspace(np.array([-0.1, 1.0]), planar_workspace)
    assert float(outside.value) < 0.0


def test_workspace_distance_is_batched(planar_workspace: Workspace) -> None:
    """
    Test evaluation on a (2, 3, dim) batch.

    :return: None
    """
    points = np.random.default_rng(0).uniform(0.0, 2.0, (2, 3, 2))
    sample = sdf_workspace(points, planar_workspace)
    assert sample.value.shape == (2, 3)
    assert sample.gradient.shape == (2, 3, 2)
    assert sample.hessian.shape == (2, 3, 2, 2)


def test_softmin_bounds_the_minimum() -> None:
    """
    Test min - log(n)/beta <= softmin <= min and convex weights.

    :return: None
    """
    values = np.array([0.1, 0.2, 0.5])
    value, weights = softmin(values, beta=100.0)
    assert value <= 0.1
    assert value >= 0.1 - np.log(3) / 100.0
    assert weights.sum() == pytest.approx(1.0)
    assert np.argmax(weights) == 0


def test_softmin_rejects_bad_temperature() -> None:
    """
    Test that a nonpositive beta is rejected.

    :return: None
    """
    with pytest.raises(InvalidParameterException):
        softmin(np.array([1.0]), beta=0.0)


def test_keypoint_clearance(planar_workspace: Workspace) -> None:
    """
    Test that clearance is the smallest sdf minus radius over keypoints.

    :return: None
    """
    points = np.array([[0.5, 1.0], [1.0, 0.3]])
    clearance = keypoint_clearance(points, np.array([0.05, 0.05]), planar_workspace)
    assert float(clearance) == pytest.approx(0.25)


def test_obstacle_outside_bounds_is_rejected() -> None:
    """
    Test that obstacles must intersect the bounds.

    :return: None
    """
    with pytest.raises(InvalidParameterException):
        Workspace((0.0, 0.0), (1.0, 1.0), (BoxObstacle((3.0, 3.0), (0.1, 0.1)),))


def test_empty_freespace_is_rejected() -> None:
    """
    Test that an obstacle covering the workspace is rejected.

    :return: None
    """
    with pytest.raises(InvalidParameterException):
        Workspace((0.0, 0.0), (1.0, 1.0), (BoxObstacle((0.5, 0.5), (1.0, 1.0)),))


def test_fingerprint_depends_on_geometry(planar_workspace: Workspace) -> None:
    """
    Test that the cache fingerprint changes with the obstacles.

    :return: None
    """
    assert planar_workspace.fingerprint() == planar_workspace.fingerprint()
    assert planar_workspace.fingerprint() != planar_workspace.without_obstacles().fingerprint()
