# app/core/rotations.py
"""
Rotation matrices and their angle derivatives for planar and Z-Y-X Euler charts.

All functions broadcast over leading axes of the angle arrays.
"""
from collections.abc import Sequence

import numpy as np

_AXES = np.eye(3)


def _skew(axis: np.ndarray) -> np.ndarray:
    x, y, z = axis
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def planar_rotation(theta: np.ndarray | float, order: int = 0) -> np.ndarray:
    """
    Planar rotation matrix or its ``order``-th derivative in the angle.

    Differentiating a planar rotation shifts its angle by a quarter turn.

    :param theta: Rotation angle(s) in radians
    :type theta: np.ndarray | float
    :param order: Derivative order (0 for the matrix itself)
    :type order: int
    :return: Array of shape (..., 2, 2)
    :rtype: np.ndarray
    """
    shifted = np.asarray(theta, dtype=float) + order * np.pi / 2
    c, s = np.cos(shifted), np.sin(shifted)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)


def elementary_rotation(axis: int, angle: np.ndarray | float, order: int = 0) -> np.ndarray:
    """
    Rotation about a coordinate axis (Rodrigues form) or its angle derivative.

    :param axis: 0, 1 or 2 for x, y, z
    :type axis: int
    :param angle: Rotation angle(s) in radians
    :type angle: np.ndarray | float
    :param order: Derivative order
    :type order: int
    :return: Array of shape (..., 3, 3)
    :rtype: np.ndarray
    """
    angle = np.asarray(angle, dtype=float)
    k = _skew(_AXES[axis])
    k2 = k @ k
    sin_term = np.sin(angle + order * np.pi / 2)[..., None, None]
    cos_term = np.cos(angle + order * np.pi / 2)[..., None, None]
    base = 1.0 if order == 0 else 0.0
    return base * np.eye(3) + sin_term * k + (base - cos_term) * k2


def _euler_factors(angles: np.ndarray, orders: Sequence[int]) -> np.ndarray:
    # angles are (roll, pitch, yaw); R = Rz(yaw) Ry(pitch) Rx(roll)
    roll_order, pitch_order, yaw_order = orders
    rz = elementary_rotation(2, angles[..., 2], yaw_order)
    ry = elementary_rotation(1, angles[..., 1], pitch_order)
    rx = elementary_rotation(0, angles[..., 0], roll_order)
    return rz @ ry @ rx


def euler_rotation(angles: np.ndarray) -> np.ndarray:
    """
    Intrinsic Z-Y-X (yaw-pitch-roll) rotation matrix.

    :param angles: Array (..., 3) of (roll, pitch, yaw)
    :type angles: np.ndarray
    :return: Array of shape (..., 3, 3)
    :rtype: np.ndarray
    """
    return _euler_factors(np.asarray(angles, dtype=float), (0, 0, 0))


def rotation_matrix(angles: np.ndarray, dimension: int) -> np.ndarray:
    """
    Rotation for a planar angle (shape (..., 1)) or Euler triple (shape (..., 3)).

    :param angles: Orientation coordinates
    :type angles: np.ndarray
    :param dimension: Workspace dimension, 2 or 3
    :type dimension: int
    :return: Array of shape (..., dimension, dimension)
    :rtype: np.ndarray
    """
    angles = np.asarray(angles, dtype=float)
    if dimension == 2:
        return planar_rotation(angles[..., 0])
    return euler_rotation(angles)


def rotation_derivatives(
    angles: np.ndarray, dimension: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rotation matrix with first and second derivatives in every orientation coordinate.

    :param angles: Orientation coordinates, shape (..., n_angles)
    :type angles: np.ndarray
    :param dimension: Workspace dimension, 2 or 3
    :type dimension: int
    :return: (R, dR, d2R) with shapes (..., d, d), (..., a, d, d), (..., a, a, d, d)
    :rtype: tuple[np.ndarray, np.ndarray, np.ndarray]
    """
    angles = np.asarray(angles, dtype=float)
    if dimension == 2:
        theta = angles[..., 0]
        rot = planar_rotation(theta)
        first = planar_rotation(theta, 1)[..., None, :, :]
        second = planar_rotation(theta, 2)[..., None, None, :, :]
        return rot, first, second

    rot = _euler_factors(angles, (0, 0, 0))
    first = []
    second = []
    for a in range(3):
        orders = [0, 0, 0]
        orders[a] += 1
        first.append(_euler_factors(angles, orders))
        row = []
        for b in range(3):
            orders_ab = list(orders)
            orders_ab[b] += 1
            row.append(_euler_factors(angles, orders_ab))
        second.append(np.stack(row, axis=-3))
    return rot, np.stack(first, axis=-3), np.stack(second, axis=-4)


def rotation_from_orientation(orientation: Sequence[float], dimension: int) -> np.ndarray:
    """
    Rotation for an obstacle orientation; an empty orientation means identity.

    :param orientation: Planar angle or (roll, pitch, yaw)
    :type orientation: Sequence[float]
    :param dimension: Workspace dimension
    :type dimension: int
    :return: Rotation matrix (dimension, dimension)
    :rtype: np.ndarray
    """
    if len(orientation) == 0:
        return np.eye(dimension)
    return rotation_matrix(np.asarray(orientation, dtype=float), dimension)
