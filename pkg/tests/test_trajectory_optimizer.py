"""
Tests for the docking NLP and its solution.
"""

import math
import os

import numpy as np
import pandas as pd
import pytest

from trailer_loading.dynamics.vessel_model import CALM, VesselState, WindCondition, simulate_euler
from trailer_loading.planning.path_planner import BufferPoint
from trailer_loading.planning.sqp import SolverStatus, SQPOptions
from trailer_loading.planning.trajectory_optimizer import (
    TRAJECTORY_COLUMNS,
    ControlBounds,
    DockingProblem,
    OptimizerConfig,
    build_problem,
    check_gradients,
    evaluate_objective,
    random_problem,
    solve,
)


def cruise_point(x=0.0, y=0.0, heading=0.0):
    return BufferPoint(position=np.array([x, y]), heading=heading, is_terminal_phase=False)


def terminal_point():
    return BufferPoint(position=np.zeros(2), heading=0.0, is_terminal_phase=True)


def bare_problem(params, horizon=1, **updates):
    """Problem with zero reference and weights, for hand-evaluated objectives."""
    fields = {
        "params": params,
        "initial_state": np.zeros(6),
        "reference": np.zeros((horizon + 1, 6)),
        "wind": CALM,
        "horizon": horizon,
        "dt": 0.2,
        "control_weights": np.zeros((2, 2)),
        "reference_weights": np.zeros((6, 6)),
        "slack_weight": 0.0,
        "bounds": ControlBounds(),
    }
    fields.update(updates)
    return DockingProblem(**fields)


class TestBuildProblem:
    """Tests for build_problem."""

    def test_far_from_trailer(self, params):
        """Test cruise bounds and no docking constraint far out."""
        problem = build_problem(VesselState(x=-100.0, u=2.0), params, cruise_point(-80.0), CALM)
        assert not problem.docking_active
        assert problem.bounds.rpm_max == 3000.0
        assert problem.reference[:, 3] == pytest.approx(2.0)

    def test_terminal_phase(self, params):
        """Test the loading-zone clamp and approach speed in the terminal phase."""
        problem = build_problem(VesselState(x=-30.0, u=1.0), params, terminal_point(), CALM)
        assert problem.bounds.rpm_max == 650.0
        assert problem.bounds.rpm_min == -650.0
        assert problem.reference[:, 3] == pytest.approx(1.0)
        assert not problem.docking_active

    def test_docking_within_reach(self, params):
        """Test the docking heading is enforced once the trailer is within the horizon."""
        problem = build_problem(VesselState(x=-6.0, u=1.0), params, terminal_point(), CALM)
        assert problem.docking_active
        assert problem.docking_heading == 0.0

    def test_reference_is_buffer_point(self, params):
        """Test the calm reference repeats the buffer point over the horizon."""
        config = OptimizerConfig(horizon=12)
        problem = build_problem(VesselState(x=-100.0), params, cruise_point(-80.0, 3.0, 0.2), CALM, config)
        assert problem.reference.shape == (13, 6)
        assert np.allclose(problem.reference[:, :3], [-80.0, 3.0, 0.2])

    def test_invalid_weights(self, params):
        """Test non-PSD weights are rejected."""
        with pytest.raises(ValueError):
            bare_problem(params, control_weights=np.diag([1.0, -1.0]))
        with pytest.raises(ValueError):
            bare_problem(params, reference_weights=np.triu(np.ones((6, 6))))
        with pytest.raises(ValueError):
            bare_problem(params, horizon=0, reference=np.zeros((1, 6)))


class TestObjective:
    """Tests for evaluate_objective."""

    def test_zero_at_reference(self, params):
        """Test zero cost on the reference with zero controls."""
        problem = build_problem(VesselState(x=-100.0), params, cruise_point(-80.0), CALM)
        cost = evaluate_objective(problem, problem.reference.copy(), np.zeros((problem.horizon, 2)))
        assert cost == 0.0

    def test_hand_evaluated(self, params):
        """Test the control quadratic form on a single step."""
        problem = bare_problem(params, control_weights=np.eye(2))
        assert evaluate_objective(problem, np.zeros((2, 6)), np.array([[0.1, 0.2]])) == pytest.approx(0.05)

    def test_slack_penalty(self, params):
        """Test the slack term is lambda_s * s^2."""
        problem = bare_problem(params, slack_weight=100.0)
        assert evaluate_objective(problem, np.zeros((2, 6)), np.zeros((1, 2)), 0.1) == pytest.approx(1.0)

    def test_heading_deviation_wrapped(self, params):
        """Test a heading of 2*pi counts as no deviation."""
        weights = np.zeros((6, 6))
        weights[2, 2] = 1.0
        problem = bare_problem(params, reference_weights=weights)
        states = np.zeros((2, 6))
        states[1, 2] = 2.0 * math.pi
        assert evaluate_objective(problem, states, np.zeros((1, 2))) == pytest.approx(0.0, abs=1e-20)

    def test_shape_mismatch(self, params):
        """Test mismatched shapes are rejected."""
        problem = bare_problem(params)
        with pytest.raises(ValueError):
            evaluate_objective(problem, np.zeros((3, 6)), np.zeros((1, 2)))
        with pytest.raises(ValueError):
            evaluate_objective(problem, np.zeros((2, 6)), np.zeros((2, 2)))


class TestGradients:
    """Tests for check_gradients."""

    def test_random_problems(self, params):
        """Test analytic derivatives on 10 random problems."""
        for seed in range(10):
            assert check_gradients(random_problem(seed, params), seed=seed) < 1e-4

    def test_pseudo_huber_and_hard_docking(self, params):
        """Test derivatives of the robust objective with the hard docking row."""
        config = OptimizerConfig(objective_mode="pseudo_huber", docking_mode="hard", horizon=15)
        problem = build_problem(VesselState(x=-2.5, y=0.5, psi=0.1, u=1.0), params, terminal_point(), CALM, config)
        assert problem.docking_active
        assert check_gradients(problem) < 1e-4

    def test_error_grows_with_step(self, params):
        """Test a coarse step is dominated by truncation error."""
        problem = random_problem(3, params)
        assert check_gradients(problem, step=1e-2) > check_gradients(problem, step=1e-6)

    def test_random_problem_deterministic(self, params):
        """Test random problems are reproducible from their seed."""
        first, second = random_problem(5, params), random_problem(5, params)
        assert np.array_equal(first.initial_state, second.initial_state)
        assert np.array_equal(first.reference, second.reference)
        assert first.wind == second.wind


class TestSolve:
    """Tests for solve."""

    def test_already_docked(self, params):
        """Test a vessel at rest on the reference stays put."""
        weights = np.diag([1.0, 1.0, 10.0, 1.0, 1.0, 1.0])
        problem = bare_problem(
            params, horizon=20, control_weights=np.diag([1e-7, 1.0]), reference_weights=weights,
        )
        trajectory = solve(problem)
        assert trajectory.objective_value < 1e-4
        assert np.max(np.abs(trajectory.controls[:, 0])) < params.neutral_rpm_threshold
        assert np.max(np.abs(trajectory.controls[:, 1])) < 1e-3

    def test_straight_ahead(self, params):
        """Test a straight-ahead goal keeps the azimuth small and moves the vessel forward."""
        problem = build_problem(VesselState(x=-40.0, u=1.0), params, cruise_point(0.0), CALM)
        trajectory = solve(problem)
        assert trajectory.solver_status is SolverStatus.CONVERGED
        assert np.max(np.abs(trajectory.controls[:, 1])) < 0.05
        assert np.max(np.abs(trajectory.states[:, 1])) < 1e-6
        assert trajectory.states[-1, 0] > -40.0 + 10.0

    def test_feasible_and_within_bounds(self, params):
        """Test the returned states follow the Euler dynamics and controls stay in bounds."""
        wind = WindCondition(4.0, 2.0)
        problem = build_problem(VesselState(x=-100.0, y=5.0, psi=0.3, u=1.5), params, cruise_point(-75.0), wind)
        trajectory = solve(problem)
        assert trajectory.solver_status is SolverStatus.CONVERGED

        rollout = simulate_euler(
            params, VesselState.from_array(problem.initial_state), trajectory.controls, wind, problem.dt,
            smooth_thrust=True, blend_width=problem.blend_width,
        )
        tolerance = 10.0 * problem.options.tol_con * problem.horizon
        assert np.max(np.abs(rollout - trajectory.states)) <= tolerance
        assert np.all(trajectory.controls >= problem.bounds.lower() - 1e-8)
        assert np.all(trajectory.controls <= problem.bounds.upper() + 1e-8)

    def test_crosswind_compensation(self, params):
        """Test a wind-aware plan drifts less off track than a calm plan flown in the wind."""
        wind = WindCondition(6.0, math.pi / 2)
        state = VesselState(x=-100.0, u=2.0)
        aware = solve(build_problem(state, params, cruise_point(-70.0), wind))
        unaware = solve(build_problem(state, params, cruise_point(-70.0), CALM))

        def drift(controls):
            rollout = simulate_euler(params, state, controls, wind, 0.2, smooth_thrust=True)
            return abs(rollout[-1, 1])

        assert drift(aware.controls) < drift(unaware.controls)
        assert not np.allclose(aware.controls[:, 1], unaware.controls[:, 1])

    def test_slack_shrinks_with_weight(self, params):
        """Test the docking slack is non-increasing in its weight."""
        state = VesselState(x=-6.0, y=0.5, psi=0.15, u=1.0)
        slacks = []
        for weight in (1.0, 1e2, 1e4, 1e6):
            config = OptimizerConfig(slack_weight=weight, horizon=30)
            problem = build_problem(state, params, terminal_point(), CALM, config)
            assert problem.docking_active
            slacks.append(abs(solve(problem).slack_psi))
        assert all(later <= earlier + 1e-9 for earlier, later in zip(slacks, slacks[1:]))

    def test_hard_docking_has_no_slack(self, params):
        """Test the hard docking mode meets the heading exactly."""
        config = OptimizerConfig(docking_mode="hard", horizon=30)
        problem = build_problem(VesselState(x=-6.0, y=0.3, psi=0.1, u=1.0), params, terminal_point(), CALM, config)
        trajectory = solve(problem)
        if trajectory.solver_status is SolverStatus.CONVERGED:
            assert abs(trajectory.slack_psi) <= 1e-6

    def test_deterministic_and_warm_start(self, params):
        """Test repeated solves agree and a warm start is accepted."""
        problem = random_problem(7, params)
        first, second = solve(problem), solve(problem)
        assert np.array_equal(first.controls, second.controls)
        warm = solve(problem, warm_start=first)
        assert warm.seed in ("cold", "warm")
        assert warm.controls.shape == first.controls.shape

    @pytest.mark.slow
    def test_warm_start_median_iterations(self, params):
        """Test warm starts need no more SQP iterations than cold starts over 20 receding steps."""
        wind = WindCondition(3.0, 1.0)
        state = VesselState(x=-100.0, y=4.0, psi=0.2, u=1.5)
        warm_iterations, cold_iterations = [], []
        previous = None
        for _ in range(20):
            problem = build_problem(state, params, cruise_point(-60.0), wind)
            cold = solve(problem)
            warm = solve(problem, warm_start=previous) if previous is not None else cold
            cold_iterations.append(cold.iterations)
            warm_iterations.append(warm.iterations)
            previous = warm
            state = VesselState.from_array(warm.states[1])
        assert np.median(warm_iterations) <= np.median(cold_iterations)

    def test_iteration_cap_reported(self, params):
        """Test a capped solve returns its best iterate with a status."""
        config = OptimizerConfig(solver=SQPOptions(max_iter=1))
        problem = build_problem(VesselState(x=-100.0, y=5.0, u=1.0), params, cruise_point(-70.0), CALM, config)
        trajectory = solve(problem)
        assert trajectory.solver_status in (SolverStatus.MAX_ITER, SolverStatus.CONVERGED)
        assert trajectory.iterations <= 1
        assert np.all(np.isfinite(trajectory.states))

    def test_trajectory_csv(self, params, temp_dir):
        """Test the trajectory CSV layout."""
        trajectory = solve(random_problem(1, params, OptimizerConfig(horizon=10)))
        path = os.path.join(temp_dir, "plan.csv")
        trajectory.to_csv(path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == TRAJECTORY_COLUMNS
        assert len(frame) == 11
        assert trajectory.diagnostics()["status"] == trajectory.solver_status.value
