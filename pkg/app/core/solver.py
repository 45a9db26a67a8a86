# app/core/solver.py
"""
Primal-dual interior-point solver for least-squares objectives with sparse
equality and inequality constraints.

Problems expose f(x) = |r(x)|^2 through residuals and their Jacobian; the
Lagrangian Hessian is the Gauss-Newton matrix 2 J^T J (plus the Gauss-Newton
curvature of squared inequality rows, when a problem declares them).
Inequalities c_I(x) >= 0 are turned into c_I(x) - s = 0 with s > 0 held
inside the barrier -mu sum(log s).
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import numpy as np
from scipy.sparse import bmat, csc_matrix, csr_matrix, diags, identity
from scipy.sparse.linalg import splu

from app.core.exceptions import InvalidParameterException, InvalidStartException

logger = logging.getLogger(__name__)

_SCALE_MAX = 100.0
_ARMIJO = 1e-4
_PENALTY_RHO = 0.1
_DUAL_SAFEGUARD = 1e10
_REGULARIZATION_GROWTH = 10.0


@dataclass(frozen=True)
class SolverConfig:
    """Barrier schedule, tolerances and limits."""

    mu_init: float = 0.1
    mu_shrink: float = 0.2
    kkt_tol: float = 1e-6
    max_iterations: int = 1000
    wall_clock_limit: float = 20.0
    fraction_to_boundary: float = 0.995
    regularization: float = 1e-8
    max_regularization: float = 1e6
    slack_floor: float = 1e-2
    barrier_kappa: float = 10.0
    max_backtracks: int = 40

    def __post_init__(self) -> None:
        if self.mu_init <= 0.0:
            raise InvalidParameterException("mu_init", "must be positive")
        if not 0.0 < self.mu_shrink < 1.0:
            raise InvalidParameterException("mu_shrink", "must lie in (0, 1)")
        if self.kkt_tol <= 0.0:
            raise InvalidParameterException("kkt_tol", "must be positive")
        if self.max_iterations <= 0:
            raise InvalidParameterException("max_iterations", "must be positive")
        if self.wall_clock_limit <= 0.0:
            raise InvalidParameterException("wall_clock_limit", "must be positive")
        if not 0.0 < self.fraction_to_boundary < 1.0:
            raise InvalidParameterException("fraction_to_boundary", "must lie in (0, 1)")
        if self.regularization <= 0.0 or self.max_regularization < self.regularization:
            raise InvalidParameterException("regularization", "need 0 < start <= maximum")
        if self.slack_floor <= 0.0:
            raise InvalidParameterException("slack_floor", "must be positive")


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration-limit"
    TIME_LIMIT = "time-limit"
    LINE_SEARCH_FAILURE = "line-search-failure"


@dataclass(frozen=True)
class NlpEvaluation:
    """
    Values (and optionally first derivatives) of a least-squares program.

    ``squared_inequalities`` lists inequality rows of the form c = k - |e(x)|^2
    together with the Jacobian of e, so the solver can add their Gauss-Newton
    curvature 2 z J_e^T J_e.
    """

    residuals: np.ndarray
    equalities: np.ndarray
    inequalities: np.ndarray
    residual_jacobian: csr_matrix | None = None
    equality_jacobian: csr_matrix | None = None
    inequality_jacobian: csr_matrix | None = None
    squared_inequalities: tuple[tuple[int, csr_matrix], ...] = ()

    @property
    def objective(self) -> float:
        return float(self.residuals @ self.residuals)

    @property
    def gradient(self) -> np.ndarray:
        return 2.0 * (self.residual_jacobian.T @ self.residuals)

    @property
    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.residuals))
            and np.all(np.isfinite(self.equalities))
            and np.all(np.isfinite(self.inequalities))
        )


class LeastSquaresProgram(Protocol):
    n_variables: int
    n_equalities: int
    n_inequalities: int

    def evaluate(self, x: np.ndarray, derivatives: bool = True) -> NlpEvaluation: ...


@dataclass(frozen=True)
class Multipliers:
    equality: np.ndarray
    inequality: np.ndarray
    slacks: np.ndarray


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    kkt_residual: float
    wall_time: float
    objective: float


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    x: np.ndarray
    multipliers: Multipliers
    stats: SolveStats

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED


@dataclass(frozen=True)
class IterationRecord:
    """
    One accepted iteration, as streamed to trace callbacks.

    ``kkt_residual`` is measured against the current barrier parameter,
    ``optimality_error`` against zero. The slack and dual minima are infinite
    without inequalities.
    """

    iteration: int
    objective: float
    kkt_residual: float
    mu: float
    step_length: float
    merit: float
    merit_change: float
    regularization: float
    optimality_error: float
    min_slack: float
    min_dual: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "mu": self.mu,
            "step_length": self.step_length,
            "merit": self.merit,
            "merit_change": self.merit_change,
            "regularization": self.regularization,
            "optimality_error": self.optimality_error,
            "min_slack": self.min_slack,
            "min_dual": self.min_dual,
        }


@dataclass(frozen=True)
class QuadraticProgram:
    """
    min |C x - d|^2 s.t. A_eq x = b_eq, A_in x >= b_in.

    Dense matrices; used for solver checks and as a reference problem.
    """

    residual_matrix: np.ndarray
    residual_offset: np.ndarray
    equality_matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    equality_offset: np.ndarray = field(default_factory=lambda: np.zeros(0))
    inequality_matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    inequality_offset: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_variables(self) -> int:
        return self.residual_matrix.shape[1]

    @property
    def n_equalities(self) -> int:
        return self.equality_offset.shape[0]

    @property
    def n_inequalities(self) -> int:
        return self.inequality_offset.shape[0]

    def _rows(self, matrix: np.ndarray, count: int) -> np.ndarray:
        return matrix.reshape(count, self.n_variables) if count else np.zeros((0, self.n_variables))

    def evaluate(self, x: np.ndarray, derivatives: bool = True) -> NlpEvaluation:
        eq = self._rows(self.equality_matrix, self.n_equalities)
        ineq = self._rows(self.inequality_matrix, self.n_inequalities)
        evaluation = NlpEvaluation(
            residuals=self.residual_matrix @ x - self.residual_offset,
            equalities=eq @ x - self.equality_offset,
            inequalities=ineq @ x - self.inequality_offset,
        )
        if not derivatives:
            return evaluation
        return NlpEvaluation(
            residuals=evaluation.residuals,
            equalities=evaluation.equalities,
            inequalities=evaluation.inequalities,
            residual_jacobian=csr_matrix(self.residual_matrix),
            equality_jacobian=csr_matrix(eq),
            inequality_jacobian=csr_matrix(ineq),
        )


def _dual_residual(ev: NlpEvaluation, mult: Multipliers) -> np.ndarray:
    return (
        ev.gradient
        - ev.equality_jacobian.T @ mult.equality
        - ev.inequality_jacobian.T @ mult.inequality
    )


def kkt_residual(
    problem: LeastSquaresProgram,
    x: np.ndarray,
    multipliers: Multipliers,
    mu: float = 0.0,
    evaluation: NlpEvaluation | None = None,
) -> float:
    """
    Scaled optimality error of the barrier problem.

    Maximum of the scaled stationarity norm, the primal infeasibility of
    equalities and of c_I - s, and the scaled complementarity |s z - mu|.

    :param problem: Program
    :type problem: LeastSquaresProgram
    :param x: Primal point
    :type x: np.ndarray
    :param multipliers: Duals and slacks
    :type multipliers: Multipliers
    :param mu: Barrier parameter (0 for the original problem)
    :type mu: float
    :param evaluation: Cached evaluation at ``x``
    :type evaluation: NlpEvaluation | None
    :return: Residual
    :rtype: float
    """
    ev = evaluation if evaluation is not None else problem.evaluate(x)
    y, z, s = multipliers.equality, multipliers.inequality, multipliers.slacks
    m = y.size + z.size
    dual_scale = max(_SCALE_MAX, (np.abs(y).sum() + np.abs(z).sum()) / m) / _SCALE_MAX if m else 1.0
    comp_scale = max(_SCALE_MAX, np.abs(z).sum() / z.size) / _SCALE_MAX if z.size else 1.0

    stationarity = np.max(np.abs(_dual_residual(ev, multipliers)), initial=0.0) / dual_scale
    infeasibility = max(
        np.max(np.abs(ev.equalities), initial=0.0),
        np.max(np.abs(ev.inequalities - s), initial=0.0),
    )
    complementarity = np.max(np.abs(s * z - mu), initial=0.0) / comp_scale
    return float(max(stationarity, infeasibility, complementarity))


def _gauss_newton_hessian(ev: NlpEvaluation, z: np.ndarray) -> csr_matrix:
    hessian = 2.0 * (ev.residual_jacobian.T @ ev.residual_jacobian)
    for row, jac in ev.squared_inequalities:
        hessian = hessian + 2.0 * z[row] * (jac.T @ jac)
    return csr_matrix(hessian)


@dataclass
class _Direction:
    dx: np.ndarray
    ds: np.ndarray
    dy: np.ndarray
    dz: np.ndarray
    curvature: float
    regularization: float


def _newton_direction(
    ev: NlpEvaluation,
    x: np.ndarray,
    s: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    mu: float,
    config: SolverConfig,
) -> _Direction | None:
    n = x.size
    m_eq = y.size
    a_eq, a_in = ev.equality_jacobian, ev.inequality_jacobian
    sigma = z / s
    r_d = _dual_residual(ev, Multipliers(y, z, s))
    r_in = ev.inequalities - s
    r_c = s * z - mu

    hessian = _gauss_newton_hessian(ev, z)
    condensed = hessian
    rhs_x = -r_d
    if z.size:
        condensed = hessian + a_in.T @ diags(sigma) @ a_in
        rhs_x = rhs_x - a_in.T @ (r_c / s + sigma * r_in)
    rhs = np.concatenate([rhs_x, -ev.equalities])

    delta = config.regularization
    while delta <= config.max_regularization:
        primal = condensed + delta * identity(n)
        if m_eq:
            dual_shift = 0.0 if delta == config.regularization else delta * 1e-4
            system = bmat([[primal, a_eq.T], [a_eq, -dual_shift * identity(m_eq)]])
        else:
            system = primal
        try:
            solution = splu(csc_matrix(system)).solve(rhs)
        except RuntimeError:
            solution = None
        if solution is not None and np.all(np.isfinite(solution)):
            dx = solution[:n]
            ds = a_in @ dx + r_in
            dz = -(r_c + z * ds) / s
            dy = -solution[n:]
            curvature = float(dx @ (hessian @ dx) + ds @ (sigma * ds))
            return _Direction(dx, ds, dy, dz, curvature, delta)
        logger.debug("newton system singular, regularization=%.1e", delta)
        delta *= _REGULARIZATION_GROWTH
    return None


def _max_step(values: np.ndarray, step: np.ndarray, tau: float) -> float:
    shrinking = step < 0.0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, np.min(-tau * values[shrinking] / step[shrinking])))


def _merit(ev: NlpEvaluation, s: np.ndarray, mu: float, penalty: float) -> float:
    infeasibility = np.abs(ev.equalities).sum() + np.abs(ev.inequalities - s).sum()
    return float(ev.objective - mu * np.log(s).sum() + penalty * infeasibility)


def solve(
    problem: LeastSquaresProgram,
    x0: np.ndarray,
    config: SolverConfig = SolverConfig(),
    trace: Callable[[IterationRecord], None] | None = None,
) -> SolveResult:
    """
    Minimize a least-squares program with the primal-dual interior-point method.

    Steps are damped by the fraction-to-boundary rule and accepted by
    backtracking on an l1 merit function. The barrier parameter shrinks by
    ``mu_shrink`` whenever the barrier problem is solved to ``barrier_kappa * mu``.
    Any status other than converged returns the iterate with the smallest
    optimality error seen.

    :param problem: Program to solve
    :type problem: LeastSquaresProgram
    :param x0: Initial primal point
    :type x0: np.ndarray
    :param config: Solver settings
    :type config: SolverConfig
    :param trace: Called with every accepted iteration
    :type trace: Callable[[IterationRecord], None] | None
    :return: Solution with status, multipliers and statistics
    :rtype: SolveResult
    :raises InvalidStartException: If the program is not finite at x0
    """
    started = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    ev = problem.evaluate(x)
    if not ev.is_finite:
        raise InvalidStartException()

    tau_min = config.fraction_to_boundary
    mu = config.mu_init
    mu_min = config.kkt_tol / 10.0
    s = np.maximum(ev.inequalities, config.slack_floor)
    z = mu / s
    y = np.zeros(problem.n_equalities)
    penalty = 1.0

    best_error = np.inf
    best = (x, Multipliers(y, z, s), ev.objective)
    status = SolveStatus.ITERATION_LIMIT
    iteration = 0

    while True:
        mult = Multipliers(y, z, s)
        error = kkt_residual(problem, x, mult, 0.0, ev)
        if error < best_error:
            best_error = error
            best = (x, mult, ev.objective)
        if error <= config.kkt_tol:
            status = SolveStatus.CONVERGED
            break
        if iteration >= config.max_iterations:
            status = SolveStatus.ITERATION_LIMIT
            break
        if time.perf_counter() - started > config.wall_clock_limit:
            status = SolveStatus.TIME_LIMIT
            break

        while mu > mu_min and kkt_residual(problem, x, mult, mu, ev) <= config.barrier_kappa * mu:
            mu = max(mu_min, mu * config.mu_shrink)

        direction = _newton_direction(ev, x, s, y, z, mu, config)
        if direction is None:
            status = SolveStatus.LINE_SEARCH_FAILURE
            break

        tau = max(tau_min, 1.0 - mu)
        alpha_max = _max_step(s, direction.ds, tau)
        alpha_dual = _max_step(z, direction.dz, tau)

        infeasibility = np.abs(ev.equalities).sum() + np.abs(ev.inequalities - s).sum()
        slope_core = float(ev.gradient @ direction.dx - mu * np.sum(direction.ds / s))
        if infeasibility > 0.0:
            required = (slope_core + 0.5 * max(direction.curvature, 0.0)) / (
                (1.0 - _PENALTY_RHO) * infeasibility
            )
            penalty = max(penalty, required)
        slope = slope_core - penalty * infeasibility
        merit_here = _merit(ev, s, mu, penalty)

        alpha = alpha_max
        accepted = None
        for _ in range(config.max_backtracks):
            x_trial = x + alpha * direction.dx
            s_trial = s + alpha * direction.ds
            trial = problem.evaluate(x_trial, derivatives=False)
            if trial.is_finite and np.all(s_trial > 0.0):
                merit_trial = _merit(trial, s_trial, mu, penalty)
                allowance = 10.0 * np.finfo(float).eps * abs(merit_here)
                if merit_trial <= merit_here + _ARMIJO * alpha * min(slope, 0.0) + allowance:
                    accepted = (x_trial, s_trial, merit_trial)
                    break
            alpha *= 0.5
        if accepted is None:
            logger.debug("line search failed iteration=%d mu=%.2e", iteration, mu)
            status = SolveStatus.LINE_SEARCH_FAILURE
            break

        x, s, merit_new = accepted
        y = y + alpha * direction.dy
        z = z + alpha_dual * direction.dz
        z = np.clip(z, mu / (_DUAL_SAFEGUARD * s), _DUAL_SAFEGUARD * mu / s)
        ev = problem.evaluate(x)
        iteration += 1

        record = IterationRecord(
            iteration=iteration,
            objective=ev.objective,
            kkt_residual=kkt_residual(problem, x, Multipliers(y, z, s), mu, ev),
            mu=mu,
            step_length=alpha,
            merit=merit_new,
            merit_change=merit_new - merit_here,
            regularization=direction.regularization,
            optimality_error=kkt_residual(problem, x, Multipliers(y, z, s), 0.0, ev),
            min_slack=float(np.min(s, initial=np.inf)),
            min_dual=float(np.min(z, initial=np.inf)),
        )
        if trace is not None:
            trace(record)

    wall_time = time.perf_counter() - started
    if status != SolveStatus.CONVERGED:
        x, mult, objective = best
        error = best_error
    else:
        mult = Multipliers(y, z, s)
        objective = ev.objective
    logger.info(
        "interior point finished status=%s iterations=%d kkt=%.3e objective=%.6g seconds=%.3f",
        status.value,
        iteration,
        error,
        objective,
        wall_time,
    )
    return SolveResult(
        status=status,
        x=x,
        multipliers=mult,
        stats=SolveStats(
            iterations=iteration,
            kkt_residual=float(error),
            wall_time=wall_time,
            objective=objective,
        ),
    )
