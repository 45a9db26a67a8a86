# app/core/nlp.py
"""
Trajectory nonlinear program: weighted residual terms, one collision inequality
per knot and the terminal goal constraint.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import block_diag, coo_matrix, csr_matrix, vstack

from app.core.exceptions import InfeasibleStartException, InvalidParameterException
from app.core.geometry import DEFAULT_SOFTMIN_BETA, Workspace, sdf_workspace
from app.core.heat import GeodesicField
from app.core.kinematics import FreeFlyerRobot, goal_configuration
from app.core.solver import NlpEvaluation
from app.core.terms import (
    Attractor,
    GoalResidual,
    TermBlock,
    constraint_collision,
    constraint_goal,
    term_accel,
    term_flow,
    term_geodesic,
    term_postural,
)
from app.core.trajectory import DEFAULT_DT, DEFAULT_HORIZON, Trajectory
from app.core.workspace_map import WorkspaceMap

logger = logging.getLogger(__name__)

DEFAULT_GOAL_TOLERANCE = 1e-3
INITIAL_CLEARANCE = 1e-3
_MAX_HALVINGS = 30


@dataclass(frozen=True)
class TermWeights:
    """Objective weights, attractor selection and flow-term switches."""

    w_accel: float = 1.0
    w_geodesic: float = 0.0
    w_flow: float = 10.0
    w_postural: float = 1.0
    attractor: Attractor = Attractor.EUCLIDEAN
    flow_term_enabled: bool = False
    flow_all_keypoints: bool = False

    def __post_init__(self) -> None:
        for name in ("w_accel", "w_geodesic", "w_flow", "w_postural"):
            if getattr(self, name) < 0.0:
                raise InvalidParameterException(name, "weights must be nonnegative")

    @property
    def flow_active(self) -> bool:
        return self.flow_term_enabled and self.w_flow > 0.0

    @property
    def needs_field(self) -> bool:
        return self.attractor == Attractor.GEODESIC_FLOW or self.flow_active


@dataclass(frozen=True)
class PlanningScene:
    """Everything about a planning query that does not depend on the goal."""

    workspace: Workspace
    robot: FreeFlyerRobot
    start: np.ndarray
    workspace_map: WorkspaceMap
    softmin_beta: float = DEFAULT_SOFTMIN_BETA

    def __post_init__(self) -> None:
        if self.workspace.dimension != self.robot.dimension:
            raise InvalidParameterException("robot", "dimension does not match the workspace")
        if np.shape(self.start) != (self.robot.dof,):
            raise InvalidParameterException("start", f"expected {self.robot.dof} coordinates")

    def collision(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return constraint_collision(q, self.workspace, self.robot, self.softmin_beta)


@dataclass(frozen=True)
class NlpProblem:
    """
    Variables are the flattened knots q_1..q_T. Inequalities are g_t >= 0 for
    t = 1..T followed by the goal row tol^2 - |e(q_T)|^2 >= 0.
    """

    scene: PlanningScene
    weights: TermWeights
    goal: np.ndarray
    horizon: int
    dt: float
    q_default: np.ndarray
    x0: np.ndarray
    field: GeodesicField | None = None
    goal_tolerance: float = DEFAULT_GOAL_TOLERANCE

    @property
    def n_equalities(self) -> int:
        return 0

    @property
    def dof(self) -> int:
        return self.scene.robot.dof

    @property
    def n_variables(self) -> int:
        return self.horizon * self.dof

    @property
    def n_collision_constraints(self) -> int:
        return self.horizon

    @property
    def n_goal_constraints(self) -> int:
        return 1

    @property
    def n_inequalities(self) -> int:
        return self.n_collision_constraints + self.n_goal_constraints

    def trajectory(self, x: np.ndarray) -> Trajectory:
        return Trajectory.from_vector(self.scene.start, x, self.dt)

    def terms(self, x: np.ndarray, derivatives: bool = True) -> list[TermBlock]:
        """
        Residual blocks of every active objective term, in a fixed order.

        Terms with zero weight are left out entirely.

        :param x: Knot vector
        :type x: np.ndarray
        :param derivatives: Build Jacobians too
        :type derivatives: bool
        :return: Residual blocks
        :rtype: list[TermBlock]
        """
        traj = self.trajectory(x)
        w = self.weights
        robot = self.scene.robot
        blocks = []
        if w.w_accel > 0.0:
            blocks.append(term_accel(traj, w.w_accel, derivatives))
        if w.w_geodesic > 0.0:
            blocks.append(
                term_geodesic(traj, robot, self.scene.workspace_map, w.w_geodesic, derivatives)
            )
        if w.flow_active:
            blocks.append(
                term_flow(traj, robot, self.field, w.w_flow, w.flow_all_keypoints, derivatives)
            )
        if w.w_postural > 0.0:
            blocks.append(term_postural(traj, self.q_default, w.w_postural, derivatives))
        return blocks

    def goal_residual(self, x: np.ndarray) -> GoalResidual:
        q_final = np.asarray(x, dtype=float)[-self.dof :]
        return constraint_goal(
            q_final,
            self.weights.attractor,
            self.goal,
            self.scene.robot,
            self.scene.workspace_map,
            self.field,
        )

    def evaluate(self, x: np.ndarray, derivatives: bool = True) -> NlpEvaluation:
        """
        Residuals, constraints and (optionally) their sparse Jacobians.

        :param x: Knot vector, length T*dof
        :type x: np.ndarray
        :param derivatives: Build Jacobians too
        :type derivatives: bool
        :return: Evaluation consumed by the interior-point solver
        :rtype: NlpEvaluation
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_variables,):
            raise InvalidParameterException("x", f"expected {self.n_variables} values")
        blocks = self.terms(x, derivatives)
        knots = x.reshape(self.horizon, self.dof)
        clearance, clearance_grad = self.scene.collision(knots)
        goal = self.goal_residual(x)
        tolerance = self.goal_tolerance**2
        residuals = np.concatenate([b.residuals for b in blocks]) if blocks else np.zeros(0)
        inequalities = np.append(clearance, tolerance - goal.vector @ goal.vector)
        if not derivatives:
            return NlpEvaluation(residuals, np.zeros(0), inequalities)

        n = self.n_variables
        if blocks:
            residual_jacobian = vstack([b.jacobian for b in blocks], format="csr")
        else:
            residual_jacobian = csr_matrix((0, n))
        goal_jac = np.zeros((goal.vector.size, n))
        goal_jac[:, n - self.dof :] = goal.jacobian
        goal_row = csr_matrix(-2.0 * (goal.vector @ goal_jac)[None, :])
        collision_rows = block_diag([g[None, :] for g in clearance_grad], format="csr")
        return NlpEvaluation(
            residuals=residuals,
            equalities=np.zeros(0),
            inequalities=inequalities,
            residual_jacobian=residual_jacobian,
            equality_jacobian=csr_matrix((0, n)),
            inequality_jacobian=vstack([collision_rows, goal_row], format="csr"),
            squared_inequalities=((self.horizon, csr_matrix(goal_jac)),),
        )

    def objective(self, x: np.ndarray) -> float:
        return self.evaluate(x, derivatives=False).objective

    def residual_times(self) -> np.ndarray:
        """Clique index of every residual row."""
        blocks = self.terms(self.x0, derivatives=False)
        return np.concatenate([b.times for b in blocks]) if blocks else np.zeros(0, dtype=int)

    def jacobian_sparsity(self) -> csr_matrix:
        """
        Structural nonzeros of the residual Jacobian: a row of clique t may
        touch the knots q_{t-1}, q_t and q_{t+1}.

        :return: Boolean sparse pattern, shape (n_residuals, n_variables)
        :rtype: csr_matrix
        """
        times = self.residual_times()
        rows, cols = [], []
        for offset in (-1, 0, 1):
            knot = times + offset
            keep = (knot >= 1) & (knot <= self.horizon)
            for d in range(self.dof):
                rows.append(np.nonzero(keep)[0])
                cols.append((knot[keep] - 1) * self.dof + d)
        row = np.concatenate(rows)
        col = np.concatenate(cols)
        pattern = coo_matrix(
            (np.ones(row.size, dtype=bool), (row, col)), shape=(times.size, self.n_variables)
        )
        return pattern.tocsr()


def initial_trajectory(
    scene: PlanningScene,
    target: np.ndarray,
    horizon: int,
    dt: float = DEFAULT_DT,
    clearance: float = INITIAL_CLEARANCE,
) -> Trajectory:
    """
    Straight line from the start toward ``target``, shortened until every knot
    satisfies g_t > ``clearance``.

    :param scene: Planning scene
    :type scene: PlanningScene
    :param target: Configuration the line heads for
    :type target: np.ndarray
    :param horizon: T
    :type horizon: int
    :param dt: Time step
    :type dt: float
    :param clearance: Required softmin clearance
    :type clearance: float
    :return: Strictly feasible trajectory
    :rtype: Trajectory
    :raises InfeasibleStartException: If the start itself violates the clearance
    """
    start = np.asarray(scene.start, dtype=float)
    start_clearance, _ = scene.collision(start)
    if float(start_clearance) <= clearance:
        raise InfeasibleStartException()
    scale = 1.0
    target = np.asarray(target, dtype=float)
    for _ in range(_MAX_HALVINGS):
        traj = Trajectory.straight_line(start, start + scale * (target - start), horizon, dt)
        values, _ = scene.collision(traj.knots)
        if np.all(values > clearance):
            logger.debug("initial trajectory scale=%.4g", scale)
            return traj
        scale *= 0.5
    return Trajectory(start, np.repeat(start[None, :], horizon, axis=0), dt)


def assemble(
    scene: PlanningScene,
    weights: TermWeights,
    goal: np.ndarray,
    horizon: int = DEFAULT_HORIZON,
    dt: float = DEFAULT_DT,
    field: GeodesicField | None = None,
    q_default: np.ndarray | None = None,
    goal_tolerance: float = DEFAULT_GOAL_TOLERANCE,
) -> NlpProblem:
    """
    Build the trajectory program for reaching ``goal`` from the scene's start.

    The postural target defaults to the start orientation with the end effector
    on the goal; the initial guess is the straight line toward it, shortened
    until strictly feasible.

    :param scene: Workspace, robot, start and workspace map
    :type scene: PlanningScene
    :param weights: Term weights and attractor
    :type weights: TermWeights
    :param goal: End-effector goal point
    :type goal: np.ndarray
    :param horizon: T
    :type horizon: int
    :param dt: Time step
    :type dt: float
    :param field: Geodesic field of ``goal`` (needed by the geodesic attractor and flow term)
    :type field: GeodesicField | None
    :param q_default: Postural target
    :type q_default: np.ndarray | None
    :param goal_tolerance: Radius of the relaxed goal constraint
    :type goal_tolerance: float
    :return: Assembled problem with its initial point ``x0``
    :rtype: NlpProblem
    :raises InfeasibleStartException: If the start is in collision
    :raises InvalidParameterException: If the goal is outside the freespace or a field is missing
    """
    goal = np.asarray(goal, dtype=float)
    robot = scene.robot
    if horizon < 2:
        raise InvalidParameterException("horizon", "must be at least 2")
    if dt <= 0.0:
        raise InvalidParameterException("dt", "must be positive")
    if goal.shape != (robot.dimension,):
        raise InvalidParameterException("goal", f"expected {robot.dimension} coordinates")
    if float(sdf_workspace(goal, scene.workspace).value) <= 0.0:
        raise InvalidParameterException("goal", "not in freespace")
    if weights.needs_field and field is None:
        raise InvalidParameterException("field", "required by the attractor or flow term")
    if goal_tolerance <= 0.0:
        raise InvalidParameterException("goal_tolerance", "must be positive")

    if q_default is None:
        q_default = goal_configuration(robot, goal, np.asarray(scene.start)[robot.dimension :])
    traj = initial_trajectory(scene, q_default, horizon, dt)
    problem = NlpProblem(
        scene=scene,
        weights=weights,
        goal=goal,
        horizon=horizon,
        dt=dt,
        q_default=np.asarray(q_default, dtype=float),
        x0=traj.as_vector(),
        field=field,
        goal_tolerance=goal_tolerance,
    )
    logger.debug(
        "assembled problem variables=%d inequalities=%d attractor=%s",
        problem.n_variables,
        problem.n_inequalities,
        weights.attractor.value,
    )
    return problem
