# tests/test_solver.py
"""
Unit tests for the primal-dual interior-point solver.
"""
import numpy as np
import pytest

from app.core.checks import random_convex_qp
from app.core.exceptions import InvalidParameterException, InvalidStartException
from app.core.solver import (
    IterationRecord,
    Multipliers,
    QuadraticProgram,
    SolverConfig,
    SolveStatus,
    kkt_residual,
    solve,
)


def test_unconstrained_least_squares() -> None:
    """
    Test that a plain least-squares problem converges to its solution.

    :return: None
    """
    problem = QuadraticProgram(np.eye(2), np.array([1.0, 2.0]))
    result = solve(problem, np.zeros(2))
    assert result.converged
    assert np.allclose(result.x, [1.0, 2.0], atol=1e-6)


def test_active_bound() -> None:
    """
    Test min (x - 1)^2 subject to x >= 2 and its multiplier.

    :return: None
    """
    problem = QuadraticProgram(
        np.eye(1), np.array([1.0]), inequality_matrix=np.eye(1), inequality_offset=np.array([2.0])
    )
    result = solve(problem, np.zeros(1))
    assert result.status == SolveStatus.CONVERGED
    assert result.x[0] == pytest.approx(2.0, abs=1e-5)
    assert result.multipliers.inequality[0] == pytest.approx(2.0, abs=1e-4)


def test_inactive_bound() -> None:
    """
    Test that a slack inequality leaves the unconstrained optimum in place.

    :return: None
    """
    problem = QuadraticProgram(
        np.eye(1), np.array([1.0]), inequality_matrix=np.eye(1), inequality_offset=np.array([-3.0])
    )
    result = solve(problem, np.zeros(1))
    assert result.converged
    assert result.x[0] == pytest.approx(1.0, abs=1e-5)


def test_equality_constraint() -> None:
    """
    Test min |x|^2 subject to x_1 + x_2 = 1.

    :return: None
    """
    problem = QuadraticProgram(
        np.eye(2),
        np.zeros(2),
        equality_matrix=np.array([[1.0, 1.0]]),
        equality_offset=np.array([1.0]),
    )
    result = solve(problem, np.zeros(2))
    assert result.converged
    assert np.allclose(result.x, [0.5, 0.5], atol=1e-6)
    assert kkt_residual(problem, result.x, result.multipliers) <= 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_random_convex_qps(seed: int) -> None:
    """
    Test recovery of planted optima with mixed active sets.

    :return: None
    """
    rng = np.random.default_rng(seed)
    problem, x_star = random_convex_qp(rng, 8)
    result = solve(problem, np.zeros(problem.n_variables), SolverConfig(kkt_tol=1e-9))
    assert result.converged
    assert np.max(np.abs(result.x - x_star)) < 1e-6


def test_trace_receives_iterations() -> None:
    """
    Test that every accepted iteration is streamed in order.

    :return: None
    """
    records: list[IterationRecord] = []
    problem = QuadraticProgram(
        np.eye(1), np.array([1.0]), inequality_matrix=np.eye(1), inequality_offset=np.array([2.0])
    )
    result = solve(problem, np.zeros(1), trace=records.append)
    assert len(records) == result.stats.iterations
    assert [r.iteration for r in records] == list(range(1, len(records) + 1))
    assert set(records[0].to_dict()) >= {"objective", "kkt_residual", "mu", "step_length"}


def test_limits_return_best_iterate() -> None:
    """
    Test the time and iteration limits.

    :return: None
    """
    problem = QuadraticProgram(
        np.eye(1), np.array([1.0]), inequality_matrix=np.eye(1), inequality_offset=np.array([2.0])
    )
    timed = solve(problem, np.zeros(1), SolverConfig(wall_clock_limit=1e-12))
    assert timed.status == SolveStatus.TIME_LIMIT
    assert timed.stats.iterations == 0
    capped = solve(problem, np.zeros(1), SolverConfig(max_iterations=1))
    assert capped.status == SolveStatus.ITERATION_LIMIT
    assert np.all(np.isfinite(capped.x))


def test_iteration_limit_returns_smallest_optimality_error() -> None:
    """
    Test that a capped solve returns the iterate with the smallest optimality error.

    :return: None
    """
    problem, _ = random_convex_qp(np.random.default_rng(3), 12)
    records = []
    result = solve(
        problem, np.zeros(problem.n_variables), SolverConfig(max_iterations=3), records.append
    )
    assert result.status == SolveStatus.ITERATION_LIMIT
    assert len(records) == 3
    assert result.stats.kkt_residual <= min(r.optimality_error for r in records)
    returned = kkt_residual(problem, result.x, result.multipliers)
    assert returned == pytest.approx(result.stats.kkt_residual, rel=1e-12, abs=1e-15)


def test_non_finite_start_is_rejected() -> None:
    """
    Test that a NaN objective at x0 raises.

    :return: None
    """
    problem = QuadraticProgram(np.eye(1), np.array([1.0]))
    with pytest.raises(InvalidStartException):
        solve(problem, np.array([np.nan]))


def test_config_validation() -> None:
    """
    Test solver setting validation.

    :return: None
    """
    with pytest.raises(InvalidParameterException):
        SolverConfig(mu_shrink=1.5)
    with pytest.raises(InvalidParameterException):
        SolverConfig(kkt_tol=0.0)
    with pytest.raises(InvalidParameterException):
        SolverConfig(wall_clock_limit=-1.0)


def test_bound_constrained_minimum_norm() -> None:
    """
    Test min |x|^2 subject to x_1 >= 1 against its closed-form primal and dual solution.

    :return: None
    """
    bound = np.zeros((1, 4))
    bound[0, 0] = 1.0
    problem = QuadraticProgram(
        np.eye(4), np.zeros(4), inequality_matrix=bound, inequality_offset=np.array([1.0])
    )
    result = solve(problem, np.zeros(4), SolverConfig(kkt_tol=1e-10))
    assert result.converged
    assert np.allclose(result.x, [1.0, 0.0, 0.0, 0.0], rtol=0.0, atol=1e-8)
    assert result.multipliers.inequality[0] == pytest.approx(2.0, abs=1e-8)
    optimum = Multipliers(np.zeros(0), np.array([2.0]), np.array([0.0]))
    assert kkt_residual(problem, np.array([1.0, 0.0, 0.0, 0.0]), optimum) <= 1e-10


def test_projection_onto_hyperplane() -> None:
    """
    Test min |x - c|^2 subject to a.x = b against the projection formula.

    :return: None
    """
    rng = np.random.default_rng(11)
    c, a, b = rng.standard_normal(6), rng.standard_normal(6), 0.7
    problem = QuadraticProgram(
        np.eye(6), c, equality_matrix=a[None, :], equality_offset=np.array([b])
    )
    result = solve(problem, np.zeros(6), SolverConfig(kkt_tol=1e-10))
    expected = c + a * (b - a @ c) / (a @ a)
    assert result.converged
    assert np.allclose(result.x, expected, rtol=0.0, atol=1e-8)


def _suite_traces(count: int) -> list[tuple[QuadraticProgram, list[IterationRecord]]]:
    rng = np.random.default_rng(0)
    config = SolverConfig(kkt_tol=1e-9)
    traces = []
    for _ in range(count):
        problem, _ = random_convex_qp(rng, int(rng.integers(2, 51)))
        records: list[IterationRecord] = []
        result = solve(problem, np.zeros(problem.n_variables), config, records.append)
        assert result.converged
        traces.append((problem, records))
    return traces


def test_accepted_steps_decrease_merit_and_error() -> None:
    """
    Test every accepted iteration on twenty random QPs: the merit never rises and
    the optimality error stays below its starting value until it meets the tolerance.

    :return: None
    """
    config = SolverConfig(kkt_tol=1e-9)
    for problem, records in _suite_traces(20):
        x0 = np.zeros(problem.n_variables)
        ev = problem.evaluate(x0)
        slacks = np.maximum(ev.inequalities, config.slack_floor)
        start = Multipliers(np.zeros(problem.n_equalities), config.mu_init / slacks, slacks)
        initial_error = kkt_residual(problem, x0, start)
        assert records
        for record in records:
            assert record.merit_change <= 1e-12 * max(1.0, abs(record.merit))
            assert record.optimality_error <= initial_error
        assert records[-1].optimality_error <= config.kkt_tol


def test_slacks_and_duals_stay_interior() -> None:
    """
    Test strict positivity of slacks and inequality duals at every accepted iterate.

    :return: None
    """
    for _, records in _suite_traces(5):
        assert all(r.min_slack > 0.0 and r.min_dual > 0.0 for r in records)


def test_solver_is_deterministic() -> None:
    """
    Test that the same problem and settings reproduce the iterate sequence exactly.

    :return: None
    """
    problem, _ = random_convex_qp(np.random.default_rng(7), 30)
    runs = []
    for _ in range(2):
        records: list[IterationRecord] = []
        result = solve(problem, np.zeros(problem.n_variables), trace=records.append)
        runs.append((records, result.x))
    assert runs[0][0] == runs[1][0]
    assert np.array_equal(runs[0][1], runs[1][1])
