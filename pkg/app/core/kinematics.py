# app/core/kinematics.py
"""
Free-flying rigid-body kinematics on SE(2) and SE(3) charts.

Planar configurations are (x, y, theta); spatial configurations are
(x, y, z, roll, pitch, yaw) with R = Rz(yaw) Ry(pitch) Rx(roll). Angles are
never wrapped.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.core.exceptions import DimensionMismatchException, InvalidParameterException
from app.core.rotations import rotation_derivatives, rotation_matrix


@dataclass(frozen=True)
class Keypoint:
    """Collision sphere attached to the body frame."""

    offset: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class FreeFlyerRobot:
    """Rigid body described by a set of keypoints, one of which is the end effector."""

    dimension: int
    keypoints: tuple[Keypoint, ...]
    end_effector_index: int = 0

    def __post_init__(self) -> None:
        if self.dimension not in (2, 3):
            raise InvalidParameterException("dimension", "must be 2 or 3")
        if not self.keypoints:
            raise InvalidParameterException("keypoints", "at least one keypoint is required")
        for index, keypoint in enumerate(self.keypoints):
            if len(keypoint.offset) != self.dimension:
                raise InvalidParameterException(f"keypoints[{index}]", "offset dimension mismatch")
            if keypoint.radius <= 0.0:
                raise InvalidParameterException(f"keypoints[{index}]", "radius must be positive")
        if not 0 <= self.end_effector_index < len(self.keypoints):
            raise InvalidParameterException("end_effector_index", "out of range")

    @property
    def dof(self) -> int:
        return 3 if self.dimension == 2 else 6

    @property
    def n_angles(self) -> int:
        return self.dof - self.dimension

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([k.offset for k in self.keypoints], dtype=float)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([k.radius for k in self.keypoints], dtype=float)

    @cached_property
    def extent(self) -> float:
        """Largest body extent, keypoint spheres included."""
        offsets = self.offsets
        gaps = np.linalg.norm(offsets[:, None, :] - offsets[None, :, :], axis=-1)
        return float(np.max(gaps + self.radii[:, None] + self.radii[None, :]))

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "keypoints": [{"offset": list(k.offset), "radius": k.radius} for k in self.keypoints],
            "end_effector_index": self.end_effector_index,
        }


def _check(robot: FreeFlyerRobot, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != robot.dof:
        raise DimensionMismatchException(robot.dof, q.shape[-1])
    return q


def forward_kinematics(robot: FreeFlyerRobot, q: np.ndarray) -> np.ndarray:
    """
    Keypoint positions x_i = R(q) offset_i + translation(q).

    :param robot: Free-flying robot
    :type robot: FreeFlyerRobot
    :param q: Configuration(s), shape (..., dof)
    :type q: np.ndarray
    :return: Keypoint positions, shape (..., K, dim)
    :rtype: np.ndarray
    :raises DimensionMismatchException: If q does not match the robot
    """
    q = _check(robot, q)
    dim = robot.dimension
    rot = rotation_matrix(q[..., dim:], dim)
    return np.einsum("...ij,kj->...ki", rot, robot.offsets) + q[..., None, :dim]


def keypoint_jacobians(robot: FreeFlyerRobot, q: np.ndarray) -> np.ndarray:
    """
    Analytic Jacobians of every keypoint, translation block first.

    :param robot: Free-flying robot
    :type robot: FreeFlyerRobot
    :param q: Configuration(s), shape (..., dof)
    :type q: np.ndarray
    :return: Jacobians, shape (..., K, dim, dof)
    :rtype: np.ndarray
    """
    q = _check(robot, q)
    dim = robot.dimension
    _, first, _ = rotation_derivatives(q[..., dim:], dim)
    angular = np.einsum("...aij,kj->...kia", first, robot.offsets)
    linear = np.broadcast_to(np.eye(dim), angular.shape[:-1] + (dim,))
    return np.concatenate([linear, angular], axis=-1)


def keypoint_jacobian(robot: FreeFlyerRobot, q: np.ndarray, index: int) -> np.ndarray:
    """
    Jacobian of a single keypoint.

    :param robot: Free-flying robot
    :type robot: FreeFlyerRobot
    :param q: Configuration, shape (dof,)
    :type q: np.ndarray
    :param index: Keypoint index
    :type index: int
    :return: Jacobian, shape (dim, dof)
    :rtype: np.ndarray
    """
    if not 0 <= index < len(robot.keypoints):
        raise InvalidParameterException("index", "keypoint index out of range")
    return keypoint_jacobians(robot, q)[..., index, :, :]


def jacobian_velocity_derivative(
    robot: FreeFlyerRobot, q: np.ndarray, velocity: np.ndarray
) -> np.ndarray:
    """
    Derivative of the keypoint velocity J(q) v with respect to q, v held fixed.

    :param robot: Free-flying robot
    :type robot: FreeFlyerRobot
    :param q: Configuration(s), shape (..., dof)
    :type q: np.ndarray
    :param velocity: Configuration velocity, shape (..., dof)
    :type velocity: np.ndarray
    :return: Array of shape (..., K, dim, dof)
    :rtype: np.ndarray
    """
    q = _check(robot, q)
    dim = robot.dimension
    _, _, second = rotation_derivatives(q[..., dim:], dim)
    angle_rate = np.asarray(velocity, dtype=float)[..., dim:]
    angular = np.einsum("...abij,kj,...a->...kib", second, robot.offsets, angle_rate)
    linear = np.zeros(angular.shape[:-1] + (dim,))
    return np.concatenate([linear, angular], axis=-1)


def goal_configuration(
    robot: FreeFlyerRobot, goal: np.ndarray, angles: np.ndarray
) -> np.ndarray:
    """
    Configuration with the given orientation placing the end effector on ``goal``.

    :param robot: Free-flying robot
    :type robot: FreeFlyerRobot
    :param goal: Workspace goal point
    :type goal: np.ndarray
    :param angles: Orientation coordinates
    :type angles: np.ndarray
    :return: Configuration, shape (dof,)
    :rtype: np.ndarray
    """
    angles = np.asarray(angles, dtype=float)
    rot = rotation_matrix(angles, robot.dimension)
    translation = np.asarray(goal, dtype=float) - rot @ robot.offsets[robot.end_effector_index]
    return np.concatenate([translation, angles])
