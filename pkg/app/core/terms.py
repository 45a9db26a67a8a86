# app/core/terms.py
"""
Objective residual blocks and constraint functions of the trajectory program.

Objective terms are least-squares residuals so the solver can form the
Gauss-Newton Hessian J^T J:

* acceleration: r = sqrt(w) qdd_t
* geodesic: r = sqrt(w) J_phi(x) J_x(q_t) qd_t for every keypoint
* flow: r = sqrt(w/2) (u - f(x)), u = xd / (|xd| + eps), so |r|^2 ~ w (1 - <u, f>) while moving
* postural: r = sqrt(w) (q_T - q_default)

All blocks are evaluated for the whole trajectory at once.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.sparse import block_diag, csr_matrix

from app.core.exceptions import InvalidParameterException
from app.core.geometry import Workspace, sdf_workspace, softmin
from app.core.heat import GeodesicField, field_query
from app.core.kinematics import (
    FreeFlyerRobot,
    forward_kinematics,
    jacobian_velocity_derivative,
    keypoint_jacobians,
)
from app.core.trajectory import Trajectory, acceleration_operator, velocity_operator
from app.core.workspace_map import WorkspaceMap, evaluate_map

FLOW_EPSILON = 1e-6


class Attractor(str, Enum):
    EUCLIDEAN = "euclidean"
    NATURAL = "natural"
    GEODESIC_FLOW = "geodesic-flow"


@dataclass(frozen=True)
class TermBlock:
    """Stacked residuals of one term, their Jacobian and the clique index of every row."""

    name: str
    residuals: np.ndarray
    jacobian: csr_matrix | None
    times: np.ndarray

    @property
    def cost(self) -> float:
        return float(self.residuals @ self.residuals)


def _clique_jacobian(d_q: np.ndarray, d_v: np.ndarray, traj: Trajectory) -> csr_matrix:
    # d_q, d_v: (T, m, dof) partials wrt q_t and wrt the velocity at t
    jac_q = block_diag(list(d_q), format="csr")
    jac_v = block_diag(list(d_v), format="csr")
    return (jac_q + jac_v @ velocity_operator(traj.horizon, traj.dof, traj.dt)).tocsr()


def term_accel(traj: Trajectory, weight: float = 1.0, derivatives: bool = True) -> TermBlock:
    """
    Squared C-space accelerations.

    :param traj: Trajectory
    :type traj: Trajectory
    :param weight: Term weight
    :type weight: float
    :param derivatives: Also build the (constant) Jacobian
    :type derivatives: bool
    :return: Residual block of (T-1)*dof rows
    :rtype: TermBlock
    """
    scale = np.sqrt(weight)
    residuals = scale * traj.accelerations().ravel()
    jacobian = None
    if derivatives:
        jacobian = scale * acceleration_operator(traj.horizon, traj.dof, traj.dt)
    times = np.repeat(np.arange(1, traj.horizon), traj.dof)
    return TermBlock("accel", residuals, jacobian, times)


def term_geodesic(
    traj: Trajectory,
    robot: FreeFlyerRobot,
    workspace_map: WorkspaceMap,
    weight: float = 1.0,
    derivatives: bool = True,
) -> TermBlock:
    """
    Keypoint velocities pushed through the workspace map, |d/dt phi(x(q_t))|^2.

    :param traj: Trajectory
    :type traj: Trajectory
    :param robot: Robot whose keypoints are tracked
    :type robot: FreeFlyerRobot
    :param workspace_map: Workspace geometry map
    :type workspace_map: WorkspaceMap
    :param weight: Term weight
    :type weight: float
    :param derivatives: Also build the Jacobian
    :type derivatives: bool
    :return: Residual block of T*K*(d+dim) rows
    :rtype: TermBlock
    """
    scale = np.sqrt(weight)
    q = traj.knots
    velocity = traj.velocities()
    points = forward_kinematics(robot, q)
    kp_jac = keypoint_jacobians(robot, q)
    point_velocity = np.einsum("tkid,td->tki", kp_jac, velocity)
    mapped = evaluate_map(workspace_map, points)
    residuals = scale * np.einsum("tkci,tki->tkc", mapped.jacobian, point_velocity)

    horizon, n_keypoints, channels = residuals.shape
    times = np.repeat(np.arange(1, horizon + 1), n_keypoints * channels)
    if not derivatives:
        return TermBlock("geodesic", residuals.ravel(), None, times)

    d_v = scale * np.einsum("tkci,tkid->tkcd", mapped.jacobian, kp_jac)
    curvature = np.zeros(residuals.shape + (robot.dimension,))
    curvature[..., : workspace_map.n_potentials, :] = np.einsum(
        "tkcij,tkj->tkci", mapped.potential_hessians, point_velocity
    )
    rate = jacobian_velocity_derivative(robot, q, velocity)
    d_q = scale * (
        np.einsum("tkci,tkid->tkcd", curvature, kp_jac)
        + np.einsum("tkci,tkid->tkcd", mapped.jacobian, rate)
    )
    shape = (horizon, n_keypoints * channels, robot.dof)
    jacobian = _clique_jacobian(d_q.reshape(shape), d_v.reshape(shape), traj)
    return TermBlock("geodesic", residuals.ravel(), jacobian, times)


def flow_alignment_cost(
    velocity: np.ndarray, flow: np.ndarray, epsilon: float = FLOW_EPSILON
) -> np.ndarray:
    """
    1 - <xd / (|xd| + eps), f>, the linearized angle between motion and flow.

    :param velocity: Workspace velocity, shape (..., dim)
    :type velocity: np.ndarray
    :param flow: Unit flow, shape (..., dim)
    :type flow: np.ndarray
    :param epsilon: Velocity regularizer in m/s
    :type epsilon: float
    :return: Cost in [0, 2]
    :rtype: np.ndarray
    """
    velocity = np.asarray(velocity, dtype=float)
    speed = np.linalg.norm(velocity, axis=-1)
    unit = velocity / (speed + epsilon)[..., None]
    return 1.0 - np.sum(unit * np.asarray(flow, dtype=float), axis=-1)


def term_flow(
    traj: Trajectory,
    robot: FreeFlyerRobot,
    field: GeodesicField,
    weight: float = 1.0,
    all_keypoints: bool = False,
    derivatives: bool = True,
    epsilon: float = FLOW_EPSILON,
) -> TermBlock:
    """
    Alignment of keypoint motion with the geodesic flow toward the goal.

    Uses the end effector only unless ``all_keypoints`` is set. The residual is
    sqrt(w/2) (u - f); its square is w (1 - <u, f>) up to the eps term while the
    keypoint moves, and a keypoint at rest has u = 0 and contributes w/2.

    :param traj: Trajectory
    :type traj: Trajectory
    :param robot: Robot
    :type robot: FreeFlyerRobot
    :param field: Geodesic field of the current goal
    :type field: GeodesicField
    :param weight: Term weight
    :type weight: float
    :param all_keypoints: Apply the term to every keypoint
    :type all_keypoints: bool
    :param derivatives: Also build the Jacobian
    :type derivatives: bool
    :param epsilon: Velocity regularizer
    :type epsilon: float
    :return: Residual block of T*K_f*dim rows
    :rtype: TermBlock
    """
    scale = np.sqrt(weight / 2.0)
    selected = (
        np.arange(len(robot.keypoints)) if all_keypoints else np.array([robot.end_effector_index])
    )
    q = traj.knots
    velocity = traj.velocities()
    points = forward_kinematics(robot, q)[:, selected]
    kp_jac = keypoint_jacobians(robot, q)[:, selected]
    point_velocity = np.einsum("tkid,td->tki", kp_jac, velocity)
    sample = field_query(field, points)

    speed = np.linalg.norm(point_velocity, axis=-1)
    denom = speed + epsilon
    unit = point_velocity / denom[..., None]
    residuals = scale * (unit - sample.flow)

    horizon, n_selected, dim = residuals.shape
    times = np.repeat(np.arange(1, horizon + 1), n_selected * dim)
    if not derivatives:
        return TermBlock("flow", residuals.ravel(), None, times)

    safe_speed = np.where(speed > 0.0, speed, 1.0)
    outer = point_velocity[..., :, None] * point_velocity[..., None, :]
    d_unit = np.eye(dim) / denom[..., None, None] - outer / (safe_speed * denom**2)[
        ..., None, None
    ]
    rate = jacobian_velocity_derivative(robot, q, velocity)[:, selected]
    d_v = scale * np.einsum("tkij,tkjd->tkid", d_unit, kp_jac)
    d_q = scale * (
        np.einsum("tkij,tkjd->tkid", d_unit, rate)
        - np.einsum("tkij,tkjd->tkid", sample.flow_jacobian, kp_jac)
    )
    shape = (horizon, n_selected * dim, robot.dof)
    jacobian = _clique_jacobian(d_q.reshape(shape), d_v.reshape(shape), traj)
    return TermBlock("flow", residuals.ravel(), jacobian, times)


def term_postural(
    traj: Trajectory, q_default: np.ndarray, weight: float = 1.0, derivatives: bool = True
) -> TermBlock:
    """
    Terminal configuration pulled toward ``q_default``.

    :return: Residual block of dof rows
    :rtype: TermBlock
    """
    scale = np.sqrt(weight)
    residuals = scale * (traj.knots[-1] - np.asarray(q_default, dtype=float))
    jacobian = None
    if derivatives:
        dof, n = traj.dof, traj.horizon * traj.dof
        jacobian = csr_matrix(
            (np.full(dof, scale), (np.arange(dof), np.arange(n - dof, n))), shape=(dof, n)
        )
    return TermBlock("postural", residuals, jacobian, np.full(traj.dof, traj.horizon))


def constraint_collision(
    q: np.ndarray, ws: Workspace, robot: FreeFlyerRobot, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Softmin over keypoints of sdf(x_i(q)) - radius_i, one value per configuration.

    :param q: Configuration(s), shape (..., dof)
    :type q: np.ndarray
    :param ws: Workspace
    :type ws: Workspace
    :param robot: Robot
    :type robot: FreeFlyerRobot
    :param beta: Softmin temperature
    :type beta: float
    :return: (g, dg/dq) with shapes (...) and (..., dof)
    :rtype: tuple[np.ndarray, np.ndarray]
    """
    points = forward_kinematics(robot, q)
    sdf = sdf_workspace(points, ws)
    value, weights = softmin(sdf.value - robot.radii, beta)
    kp_jac = keypoint_jacobians(robot, q)
    gradient = np.einsum("...k,...ki,...kid->...d", weights, sdf.gradient, kp_jac)
    return value, gradient


@dataclass(frozen=True)
class GoalResidual:
    """Goal residual vector e with its Jacobian wrt q_T; ``value`` is |e|."""

    vector: np.ndarray
    jacobian: np.ndarray
    clamped: bool = False

    @property
    def value(self) -> float:
        return float(np.linalg.norm(self.vector))


def constraint_goal(
    q_final: np.ndarray,
    mode: Attractor,
    goal: np.ndarray,
    robot: FreeFlyerRobot,
    workspace_map: WorkspaceMap | None = None,
    field: GeodesicField | None = None,
) -> GoalResidual:
    """
    Distance from the end effector to the goal under the selected attractor.

    Euclidean: x_ee - goal. Natural: phi(x_ee) - phi(goal). Geodesic: x_ee - goal
    rescaled to the length of the blended field distance, so |e| is the geodesic
    distance and e matches the Euclidean residual at the goal.

    :param q_final: Terminal configuration
    :type q_final: np.ndarray
    :param mode: Attractor
    :type mode: Attractor
    :param goal: Goal point
    :type goal: np.ndarray
    :param robot: Robot
    :type robot: FreeFlyerRobot
    :param workspace_map: Map used by the Natural attractor
    :type workspace_map: WorkspaceMap | None
    :param field: Field used by the geodesic attractor
    :type field: GeodesicField | None
    :return: Goal residual
    :rtype: GoalResidual
    :raises InvalidParameterException: If the mode's model is missing
    """
    goal = np.asarray(goal, dtype=float)
    index = robot.end_effector_index
    point = forward_kinematics(robot, q_final)[index]
    point_jac = keypoint_jacobians(robot, q_final)[index]

    if mode == Attractor.EUCLIDEAN:
        return GoalResidual(point - goal, point_jac)
    if mode == Attractor.NATURAL:
        if workspace_map is None:
            raise InvalidParameterException("workspace_map", "required by the natural attractor")
        here = evaluate_map(workspace_map, point)
        there = evaluate_map(workspace_map, goal)
        return GoalResidual(here.value - there.value, here.jacobian @ point_jac)
    if field is None:
        raise InvalidParameterException("field", "required by the geodesic attractor")
    sample = field_query(field, point)
    return GoalResidual(sample.residual, sample.residual_jacobian @ point_jac, bool(sample.clamped))
