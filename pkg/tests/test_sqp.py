"""
Tests for the active-set QP and the line-search SQP solver.
"""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from trailer_loading.planning.sqp import SolverStatus, SQPOptions, SQPSolver, solve_box_qp


class ParabolaNLP:
    """min (x0-1)^2 + (x1-2)^2  s.t.  x0^2 - x1 = 0, with optional box bounds."""

    def __init__(self, lower=(-np.inf, -np.inf), upper=(np.inf, np.inf)):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)

    def objective(self, x):
        return float((x[0] - 1.0) ** 2 + (x[1] - 2.0) ** 2)

    def gradient(self, x):
        return np.array([2.0 * (x[0] - 1.0), 2.0 * (x[1] - 2.0)])

    def hessian(self, x):
        return sp.identity(2, format="csr") * 2.0

    def constraints(self, x):
        return np.array([x[0] ** 2 - x[1]])

    def jacobian(self, x):
        return sp.csr_matrix(np.array([[2.0 * x[0], -1.0]]))


class WrongGradientNLP:
    """min x0^2 s.t. x1 = 0, with a gradient of the wrong sign."""

    lower = np.full(2, -np.inf)
    upper = np.full(2, np.inf)

    def objective(self, x):
        return float(x[0] ** 2)

    def gradient(self, x):
        return np.array([-2.0 * x[0], 0.0])

    def hessian(self, x):
        return sp.identity(2, format="csr") * 2.0

    def constraints(self, x):
        return np.array([x[1]])

    def jacobian(self, x):
        return sp.csr_matrix(np.array([[0.0, 1.0]]))


class TestBoxQP:
    """Tests for solve_box_qp."""

    def test_equality_only(self):
        """Test an equality-constrained QP without active bounds."""
        solution = solve_box_qp(
            sp.identity(2, format="csr"), np.zeros(2), sp.csr_matrix([[1.0, 1.0]]), np.array([-1.0]),
            np.full(2, -np.inf), np.full(2, np.inf),
        )
        assert solution.converged
        assert solution.step == pytest.approx([0.5, 0.5])
        assert solution.eq_multipliers == pytest.approx([-0.5])

    def test_active_upper_bound(self):
        """Test the upper bound becomes active with a positive multiplier."""
        solution = solve_box_qp(
            sp.identity(2, format="csr"), np.zeros(2), sp.csr_matrix([[1.0, 1.0]]), np.array([-1.0]),
            np.full(2, -np.inf), np.array([np.inf, 0.2]),
        )
        assert solution.converged
        assert solution.step == pytest.approx([0.8, 0.2])
        assert solution.eq_multipliers == pytest.approx([-0.8])
        assert solution.bound_multipliers[1] == pytest.approx(0.6)
        assert solution.bound_multipliers[0] == 0.0

    def test_active_lower_bound(self):
        """Test a lower bound multiplier is negative."""
        solution = solve_box_qp(
            sp.identity(2, format="csr"), np.array([2.0, -1.0]), sp.csr_matrix([[0.0, 1.0]]), np.array([-1.0]),
            np.array([-0.5, -np.inf]), np.full(2, np.inf),
        )
        assert solution.converged
        assert solution.step == pytest.approx([-0.5, 1.0])
        assert solution.bound_multipliers[0] == pytest.approx(-1.5)
        assert solution.eq_multipliers == pytest.approx([0.0], abs=1e-12)

    def test_fallback_after_iteration_cap(self):
        """Test a capped primal-dual iteration still returns the bound-active solution."""
        solution = solve_box_qp(
            sp.identity(2, format="csr"), np.zeros(2), sp.csr_matrix([[1.0, 1.0]]), np.array([-1.0]),
            np.full(2, -np.inf), np.array([np.inf, 0.2]), max_iter=1,
        )
        assert solution.converged
        assert solution.step == pytest.approx([0.8, 0.2])
        assert solution.eq_multipliers == pytest.approx([-0.8])
        assert solution.bound_multipliers[1] == pytest.approx(0.6)

    def test_fallback_matches_full_solve(self):
        """Test the primal fallback reaches the same minimiser on a random strictly convex QP."""
        rng = np.random.default_rng(11)
        factor = rng.normal(size=(6, 6))
        hessian = sp.csr_matrix(factor.T @ factor + np.eye(6))
        gradient = rng.normal(size=6) * 3.0
        jacobian = sp.csr_matrix(rng.normal(size=(2, 6)))
        residual = rng.normal(size=2) * 0.1
        lower = np.array([-0.3, -0.3, -0.3, -0.3, -np.inf, -np.inf])
        upper = np.array([0.3, 0.3, 0.3, 0.3, np.inf, np.inf])

        full = solve_box_qp(hessian, gradient, jacobian, residual, lower, upper)
        capped = solve_box_qp(hessian, gradient, jacobian, residual, lower, upper, max_iter=1)
        assert full.converged and capped.converged
        assert capped.step == pytest.approx(full.step, abs=1e-8)
        assert np.all(capped.step >= lower - 1e-12) and np.all(capped.step <= upper + 1e-12)
        assert jacobian @ capped.step == pytest.approx(-residual, abs=1e-10)


class TestSQPSolver:
    """Tests for SQPSolver."""

    def test_converges_to_constrained_minimum(self):
        """Test the interior constrained minimum is found."""
        result = SQPSolver().solve(ParabolaNLP(), np.array([1.0, 1.0]))
        root = (1.0 + math.sqrt(3.0)) / 2.0
        assert result.status is SolverStatus.CONVERGED
        assert result.x == pytest.approx([root, root ** 2], abs=1e-5)
        assert result.constraint_violation <= 1e-8
        assert result.kkt_residual <= 1e-6
        assert result.eq_multipliers == pytest.approx([2.0 * (root ** 2 - 2.0)], abs=1e-4)

    def test_merit_decreases(self):
        """Test every accepted step lowers the merit function."""
        result = SQPSolver().solve(ParabolaNLP(), np.array([3.0, -1.0]))
        assert result.merit_history
        assert all(trial <= merit for merit, trial in result.merit_history)

    def test_bound_constrained_minimum(self):
        """Test an active upper bound at the solution."""
        result = SQPSolver().solve(ParabolaNLP(upper=(1.2, np.inf)), np.array([0.5, 0.25]))
        assert result.status is SolverStatus.CONVERGED
        assert result.x == pytest.approx([1.2, 1.44], abs=1e-6)

    def test_iteration_cap(self):
        """Test the iteration cap is reported, not raised."""
        result = SQPSolver(SQPOptions(max_iter=1)).solve(ParabolaNLP(), np.array([3.0, -1.0]))
        assert result.status is SolverStatus.MAX_ITER
        assert result.iterations == 1

    def test_inconsistent_bounds(self):
        """Test crossed bounds are reported as infeasible."""
        result = SQPSolver().solve(ParabolaNLP(lower=(1.0, 0.0), upper=(0.0, 1.0)), np.zeros(2))
        assert result.status is SolverStatus.INFEASIBLE
        assert result.iterations == 0

    def test_deterministic(self):
        """Test identical inputs give identical iterates."""
        first = SQPSolver().solve(ParabolaNLP(), np.array([2.0, 0.0]))
        second = SQPSolver().solve(ParabolaNLP(), np.array([2.0, 0.0]))
        assert np.array_equal(first.x, second.x)
        assert first.iterations == second.iterations

    def test_wrong_gradient_stalls(self):
        """Test an ascent direction exhausts the damping retries and reports a stall."""
        result = SQPSolver().solve(WrongGradientNLP(), np.array([1.0, 0.0]))
        assert result.status is SolverStatus.STALLED
        assert result.iterations == 1
        assert result.x == pytest.approx([1.0, 0.0])
        assert not result.merit_history

    def test_penalty_exceeds_multipliers(self):
        """Test the l1 penalty ends above the equality multiplier norm."""
        solver = SQPSolver()
        result = solver.solve(ParabolaNLP(), np.array([3.0, -1.0]))
        assert result.status is SolverStatus.CONVERGED
        assert solver.penalty > np.max(np.abs(result.eq_multipliers))

