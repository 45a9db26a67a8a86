# app/core/trajectory.py
"""
Fixed-start trajectories and their finite-difference derivatives.

Knots q_1..q_T are the optimization variables; q_0 is the fixed start. Each
time step t owns the clique (q_{t-1}, q_t, q_{t+1}). Interior velocities are
central differences, the terminal velocity is the backward difference (free
terminal velocity) and accelerations exist for t = 1..T-1.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, diags, identity, kron

from app.core.exceptions import DimensionMismatchException, InvalidParameterException

DEFAULT_HORIZON = 50
DEFAULT_DT = 0.1


@dataclass(frozen=True)
class Trajectory:
    """q_0 plus T knots sampled every ``dt`` seconds."""

    start: np.ndarray
    knots: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise InvalidParameterException("dt", "must be positive")
        if self.knots.ndim != 2 or self.knots.shape[0] < 2:
            raise InvalidParameterException("knots", "need at least two knots (T >= 2)")
        if self.knots.shape[1] != self.start.shape[-1]:
            raise DimensionMismatchException(self.start.shape[-1], self.knots.shape[1])

    @classmethod
    def from_vector(cls, start: np.ndarray, x: np.ndarray, dt: float = DEFAULT_DT) -> "Trajectory":
        start = np.asarray(start, dtype=float)
        return cls(start, np.asarray(x, dtype=float).reshape(-1, start.shape[-1]), dt)

    @classmethod
    def straight_line(
        cls, start: np.ndarray, target: np.ndarray, horizon: int, dt: float = DEFAULT_DT
    ) -> "Trajectory":
        start = np.asarray(start, dtype=float)
        fractions = np.arange(1, horizon + 1)[:, None] / horizon
        return cls(start, start + fractions * (np.asarray(target, dtype=float) - start), dt)

    @property
    def horizon(self) -> int:
        return self.knots.shape[0]

    @property
    def dof(self) -> int:
        return self.knots.shape[1]

    @property
    def configurations(self) -> np.ndarray:
        """All T+1 configurations, start first."""
        return np.vstack([self.start[None, :], self.knots])

    def as_vector(self) -> np.ndarray:
        return self.knots.ravel().copy()

    def velocities(self) -> np.ndarray:
        """Velocities at t = 1..T, shape (T, dof)."""
        q = self.configurations
        velocity = np.empty_like(self.knots)
        velocity[:-1] = clique_derivatives(q[:-2], q[1:-1], q[2:], self.dt)[0]
        velocity[-1] = (q[-1] - q[-2]) / self.dt
        return velocity

    def accelerations(self) -> np.ndarray:
        """Accelerations at t = 1..T-1, shape (T-1, dof)."""
        q = self.configurations
        return clique_derivatives(q[:-2], q[1:-1], q[2:], self.dt)[1]

    def resample(self, samples_per_interval: int) -> np.ndarray:
        """
        Piecewise-linear resampling including every knot and the start.

        :param samples_per_interval: Sub-steps per knot interval
        :type samples_per_interval: int
        :return: Configurations, shape (T * samples_per_interval + 1, dof)
        :rtype: np.ndarray
        """
        q = self.configurations
        fractions = np.arange(samples_per_interval)[:, None, None] / samples_per_interval
        between = q[:-1][None] + fractions * (q[1:] - q[:-1])[None]
        dense = np.transpose(between, (1, 0, 2)).reshape(-1, self.dof)
        return np.vstack([dense, q[-1:]])


def clique_derivatives(
    q_prev: np.ndarray, q: np.ndarray, q_next: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Central velocity and acceleration of one clique, or of stacked cliques.

    :param q_prev: q_{t-1}
    :type q_prev: np.ndarray
    :param q: q_t
    :type q: np.ndarray
    :param q_next: q_{t+1}
    :type q_next: np.ndarray
    :param dt: Time step
    :type dt: float
    :return: (velocity, acceleration)
    :rtype: tuple[np.ndarray, np.ndarray]
    """
    q_prev, q, q_next = (np.asarray(v, dtype=float) for v in (q_prev, q, q_next))
    return (q_next - q_prev) / (2 * dt), (q_next - 2 * q + q_prev) / dt**2


def velocity_operator(horizon: int, dof: int, dt: float) -> csr_matrix:
    """
    Linear map from the knot vector to stacked velocities (q_0 terms excluded).

    :param horizon: T
    :type horizon: int
    :param dof: Degrees of freedom
    :type dof: int
    :param dt: Time step
    :type dt: float
    :return: Sparse matrix, shape (T*dof, T*dof)
    :rtype: csr_matrix
    """
    upper = np.full(horizon - 1, 1.0 / (2 * dt))
    lower = np.full(horizon - 1, -1.0 / (2 * dt))
    main = np.zeros(horizon)
    main[-1] = 1.0 / dt
    lower[-1] = -1.0 / dt
    scalar = diags([lower, main, upper], [-1, 0, 1], shape=(horizon, horizon))
    return kron(scalar, identity(dof), format="csr")


def acceleration_operator(horizon: int, dof: int, dt: float) -> csr_matrix:
    """
    Linear map from the knot vector to accelerations at t = 1..T-1 (q_0 terms excluded).

    :return: Sparse matrix, shape ((T-1)*dof, T*dof)
    :rtype: csr_matrix
    """
    scale = 1.0 / dt**2
    scalar = diags(
        [
            np.full(horizon - 1, -2 * scale),
            np.full(horizon - 1, scale),
            np.full(horizon - 2, scale),
        ],
        [0, 1, -1],
        shape=(horizon - 1, horizon),
    )
    return kron(scalar, identity(dof), format="csr")
