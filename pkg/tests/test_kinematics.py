# tests/test_kinematics.py
"""
Unit tests for free-flyer kinematics and rotation charts.
"""
import numpy as np
import pytest

from app.core.checks import finite_difference_jacobian, relative_error
from app.core.exceptions import DimensionMismatchException, InvalidParameterException
from app.core.kinematics import (
    FreeFlyerRobot,
    Keypoint,
    forward_kinematics,
    goal_configuration,
    jacobian_velocity_derivative,
    keypoint_jacobians,
)
from app.core.rotations import rotation_derivatives, rotation_matrix


def test_planar_forward_kinematics(planar_robot: FreeFlyerRobot) -> None:
    """
    Test keypoint placement after a quarter turn.

    :return: None
    """
    points = forward_kinematics(planar_robot, np.array([1.0, 2.0, np.pi / 2]))
    assert np.allclose(points, [[1.0, 1.9], [1.0, 2.1]])


def test_spatial_forward_kinematics(spatial_robot: FreeFlyerRobot) -> None:
    """
    Test that yaw rotates about z and leaves z offsets alone.

    :return: None
    """
    q = np.array([1.0, 2.0, 3.0, 0.0, 0.0, np.pi / 2])
    points = forward_kinematics(spatial_robot, q)
    assert np.allclose(points[1], [1.0, 2.1, 3.05])


def test_forward_kinematics_is_batched(planar_robot: FreeFlyerRobot) -> None:
    """
    Test (T, dof) input gives (T, K, dim) output.

    :return: None
    """
    q = np.zeros((5, 3))
    assert forward_kinematics(planar_robot, q).shape == (5, 2, 2)
    assert keypoint_jacobians(planar_robot, q).shape == (5, 2, 2, 3)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_keypoint_jacobians_match_finite_differences(
    planar_robot: FreeFlyerRobot, spatial_robot: FreeFlyerRobot, seed: int
) -> None:
    """
    Test analytic keypoint Jacobians in both dimensions.

    :return: None
    """
    rng = np.random.default_rng(seed)
    for robot in (planar_robot, spatial_robot):
        q = rng.uniform(-2.0, 2.0, robot.dof)
        analytic = keypoint_jacobians(robot, q).reshape(-1, robot.dof)
        numeric = finite_difference_jacobian(lambda v: forward_kinematics(robot, v).ravel(), q)
        assert relative_error(analytic, numeric) < 1e-7


def test_velocity_derivative_matches_finite_differences(spatial_robot: FreeFlyerRobot) -> None:
    """
    Test d(J(q) v)/dq with v held fixed.

    :return: None
    """
    rng = np.random.default_rng(3)
    q = rng.uniform(-1.0, 1.0, 6)
    v = rng.uniform(-1.0, 1.0, 6)
    analytic = jacobian_velocity_derivative(spatial_robot, q, v).reshape(-1, 6)
    numeric = finite_difference_jacobian(
        lambda w: (keypoint_jacobians(spatial_robot, w) @ v).ravel(), q
    )
    assert relative_error(analytic, numeric) < 1e-6


def test_rotation_is_orthonormal() -> None:
    """
    Test R^T R = I and det R = 1 for random Euler angles.

    :return: None
    """
    angles = np.random.default_rng(4).uniform(-np.pi, np.pi, (10, 3))
    rot = rotation_matrix(angles, 3)
    assert np.allclose(np.einsum("nji,njk->nik", rot, rot), np.eye(3))
    assert np.allclose(np.linalg.det(rot), 1.0)


def test_rotation_derivatives_match_finite_differences() -> None:
    """
    Test the first rotation derivatives against central differences.

    :return: None
    """
    angles = np.array([0.3, -0.7, 1.1])
    _, first, _ = rotation_derivatives(angles, 3)
    numeric = finite_difference_jacobian(lambda a: rotation_matrix(a, 3).ravel(), angles)
    assert relative_error(np.moveaxis(first, 0, -1).reshape(9, 3), numeric) < 1e-7


def test_goal_configuration_places_end_effector(spatial_robot: FreeFlyerRobot) -> None:
    """
    Test that the end effector lands on the goal for any orientation.

    :return: None
    """
    goal = np.array([1.0, 1.5, 0.5])
    q = goal_configuration(spatial_robot, goal, np.array([0.2, -0.1, 0.9]))
    assert np.allclose(forward_kinematics(spatial_robot, q)[1], goal)


def test_dimension_mismatch(planar_robot: FreeFlyerRobot) -> None:
    """
    Test that a configuration of the wrong size is rejected.

    :return: None
    """
    with pytest.raises(DimensionMismatchException):
        forward_kinematics(planar_robot, np.zeros(6))


def test_robot_validation() -> None:
    """
    Test keypoint and end-effector validation.

    :return: None
    """
    with pytest.raises(InvalidParameterException):
        FreeFlyerRobot(2, ())
    with pytest.raises(InvalidParameterException):
        FreeFlyerRobot(2, (Keypoint((0.0, 0.0), 0.1),), end_effector_index=1)
    with pytest.raises(InvalidParameterException):
        FreeFlyerRobot(2, (Keypoint((0.0, 0.0, 0.0), 0.1),))
