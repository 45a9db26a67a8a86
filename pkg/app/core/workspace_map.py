# app/core/workspace_map.py
"""
Workspace geometry map: per-obstacle exp(-sigma/l) potentials stacked on a
scaled identity, its Jacobian and the induced pullback metric.
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from app.core.exceptions import InvalidParameterException
from app.core.geometry import Workspace, obstacle_distances

DEFAULT_LENGTH_SCALE = 0.3


@dataclass(frozen=True)
class MapEvaluation:
    """Map value with first and second derivatives at a batch of points."""

    value: np.ndarray
    jacobian: np.ndarray
    potential_hessians: np.ndarray


@dataclass(frozen=True)
class WorkspaceMap:
    """
    Workspace map m(p) = [a_1 exp(-s_1(p)/l), ..., a_d exp(-s_d(p)/l), a_0 p]
    with one potential channel per obstacle SDF s_i and a scaled identity.

    ``proximity`` optionally replaces the constant potential weights with a
    point-dependent function returning shape (..., d); it is evaluated but not
    differentiated.
    """

    workspace: Workspace
    potential_weights: tuple[float, ...] | None = None
    identity_weight: float = 1.0
    length_scale: float = DEFAULT_LENGTH_SCALE
    proximity: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.length_scale <= 0.0:
            raise InvalidParameterException("length_scale", "must be positive")
        if self.identity_weight < 0.0:
            raise InvalidParameterException("identity_weight", "must be nonnegative")
        if self.potential_weights is not None:
            if len(self.potential_weights) != self.n_potentials:
                raise InvalidParameterException(
                    "potential_weights", "need one weight per obstacle"
                )
            if any(w < 0.0 for w in self.potential_weights):
                raise InvalidParameterException("potential_weights", "must be nonnegative")

    @property
    def n_potentials(self) -> int:
        return len(self.workspace.obstacles)

    @property
    def output_dimension(self) -> int:
        return self.n_potentials + self.workspace.dimension

    def weights(self, points: np.ndarray) -> np.ndarray:
        if self.proximity is not None:
            return np.asarray(self.proximity(points), dtype=float)
        if self.potential_weights is None:
            return np.ones(self.n_potentials)
        return np.asarray(self.potential_weights, dtype=float)


def evaluate_map(m: WorkspaceMap, p: np.ndarray) -> MapEvaluation:
    """
    Map value, Jacobian and potential-channel Hessians.

    :param m: Workspace map
    :type m: WorkspaceMap
    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :return: value (..., d+dim), jacobian (..., d+dim, dim), hessians (..., d, dim, dim)
    :rtype: MapEvaluation
    """
    p = np.asarray(p, dtype=float)
    dim = m.workspace.dimension
    batch = p.shape[:-1]
    scale = m.length_scale
    samples = obstacle_distances(p, m.workspace)

    if samples:
        sigma = np.stack([s.value for s in samples], axis=-1)
        grad = np.stack([s.gradient for s in samples], axis=-2)
        hess = np.stack([s.hessian for s in samples], axis=-3)
        potentials = m.weights(p) * np.exp(-sigma / scale)
        pot_jac = -(potentials / scale)[..., None] * grad
        pot_hess = (potentials / scale**2)[..., None, None] * (
            grad[..., :, None] * grad[..., None, :]
        ) - (potentials / scale)[..., None, None] * hess
    else:
        potentials = np.zeros(batch + (0,))
        pot_jac = np.zeros(batch + (0, dim))
        pot_hess = np.zeros(batch + (0, dim, dim))

    identity = m.identity_weight * p
    identity_jac = np.broadcast_to(m.identity_weight * np.eye(dim), batch + (dim, dim))
    return MapEvaluation(
        value=np.concatenate([potentials, identity], axis=-1),
        jacobian=np.concatenate([pot_jac, identity_jac], axis=-2),
        potential_hessians=pot_hess,
    )


def eval_map(m: WorkspaceMap, p: np.ndarray) -> np.ndarray:
    """
    Evaluate the map at point(s) p.

    :param m: Workspace map
    :type m: WorkspaceMap
    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :return: Co-domain vector(s), shape (..., d+dim)
    :rtype: np.ndarray
    """
    return evaluate_map(m, p).value


def map_jacobian(m: WorkspaceMap, p: np.ndarray) -> np.ndarray:
    return evaluate_map(m, p).jacobian


def pullback_metric(m: WorkspaceMap, p: np.ndarray) -> np.ndarray:
    """
    Pullback metric A(p) = J^T J of the workspace map.

    :param m: Workspace map
    :type m: WorkspaceMap
    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :return: Symmetric positive semi-definite matrices, shape (..., dim, dim)
    :rtype: np.ndarray
    """
    jac = map_jacobian(m, p)
    return np.einsum("...ki,...kj->...ij", jac, jac)


def metric_spectrum(m: WorkspaceMap, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues (ascending) and eigenvectors of the pullback metric.

    :param m: Workspace map
    :type m: WorkspaceMap
    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :return: (eigenvalues (..., dim), eigenvectors (..., dim, dim) as columns)
    :rtype: tuple[np.ndarray, np.ndarray]
    """
    return np.linalg.eigh(pullback_metric(m, p))


def natural_distance(m: WorkspaceMap, p: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """
    Euclidean distance between p and goal measured in the map's co-domain.

    :param m: Workspace map
    :type m: WorkspaceMap
    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :param goal: Goal point, shape (dim,)
    :type goal: np.ndarray
    :return: Distances, shape (...)
    :rtype: np.ndarray
    """
    return np.linalg.norm(eval_map(m, p) - eval_map(m, goal), axis=-1)
