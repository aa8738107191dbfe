"""
TrajectoryOptimizer - direct-transcription docking NLP solved by SQP.

Decision variables are the states s(1..T) and controls c(0..T-1); s(0) is
fixed to the current estimate. Euler dynamics enter as equality constraints.
Controls are scaled internally (rpm in thousands) to balance the KKT system.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import BaseModel, Field, model_validator

from trailer_loading.dynamics.params import VesselParams
from trailer_loading.dynamics.vessel_model import (
    CONTROL_DIM,
    STATE_DIM,
    VesselState,
    WindCondition,
    dynamics_batch,
    steady_rpm,
)
from trailer_loading.planning.path_planner import BufferPoint
from trailer_loading.planning.sqp import SolverStatus, SQPOptions, SQPSolver
from trailer_loading.utils.angles import wrap_angle
from trailer_loading.utils.logging import get_logger

logger = get_logger()

RPM_SCALE = 1000.0
TRAJECTORY_COLUMNS = ["t", "x", "y", "psi", "u", "v", "r", "rpm", "alpha"]


class ControlBounds(BaseModel):
    """Box bounds on rpm and azimuth angle."""
    rpm_min: float = -2500.0
    rpm_max: float = 3000.0
    alpha_min: float = -0.5
    alpha_max: float = 0.5

    @model_validator(mode="after")
    def _check_order(self) -> "ControlBounds":
        if self.rpm_min > self.rpm_max or self.alpha_min > self.alpha_max:
            raise ValueError("control bounds need min <= max")
        return self

    def lower(self) -> np.ndarray:
        return np.array([self.rpm_min, self.alpha_min])

    def upper(self) -> np.ndarray:
        return np.array([self.rpm_max, self.alpha_max])

    def clip(self, controls: np.ndarray) -> np.ndarray:
        return np.clip(controls, self.lower(), self.upper())

    def loading_zone(self, rpm_limit: float) -> "ControlBounds":
        """Bounds with the rpm range clamped to +/- rpm_limit."""
        return ControlBounds(
            rpm_min=max(self.rpm_min, -rpm_limit),
            rpm_max=min(self.rpm_max, rpm_limit),
            alpha_min=self.alpha_min,
            alpha_max=self.alpha_max,
        )


class OptimizerConfig(BaseModel):
    """Horizon, weights, bounds and solver settings of the docking NLP."""
    dt: float = Field(default=0.2, gt=0.0)
    horizon: int = Field(default=40, ge=1)
    weight_rpm: float = Field(default=1e-7, ge=0.0)
    weight_alpha: float = Field(default=1.0, ge=0.0)
    reference_weights: list[float] = Field(default_factory=lambda: [1.0, 1.0, 10.0, 1.0, 1.0, 1.0])
    terminal_along_weight: float = Field(default=0.0, ge=0.0)
    terminal_cross_weight: float = Field(default=5.0, ge=0.0)
    slack_weight: float = Field(default=100.0, ge=0.0)
    cruise_speed: float = Field(default=2.0, gt=0.0)
    approach_speed: float = Field(default=1.0, gt=0.0)
    bounds: ControlBounds = Field(default_factory=ControlBounds)
    loading_zone_rpm: float = Field(default=650.0, gt=0.0)
    blend_width: float = Field(default=30.0, ge=0.0)
    docking_mode: Literal["soft", "hard"] = "soft"
    objective_mode: Literal["quadratic", "pseudo_huber"] = "quadratic"
    huber_delta: float = Field(default=1.0, gt=0.0)
    solver: SQPOptions = Field(default_factory=SQPOptions)

    @model_validator(mode="after")
    def _check_weights(self) -> "OptimizerConfig":
        if len(self.reference_weights) != STATE_DIM or min(self.reference_weights) < 0.0:
            raise ValueError("reference_weights needs six non-negative entries")
        return self


def _check_psd(matrix: np.ndarray, name: str) -> None:
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(matrix)) < -1e-10:
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class DockingProblem:
    """One finite-horizon docking NLP instance."""
    params: VesselParams
    initial_state: np.ndarray
    reference: np.ndarray
    wind: WindCondition
    horizon: int
    dt: float
    control_weights: np.ndarray
    reference_weights: np.ndarray
    slack_weight: float
    bounds: ControlBounds
    docking_heading: float = 0.0
    docking_active: bool = False
    docking_mode: Literal["soft", "hard"] = "soft"
    objective_mode: Literal["quadratic", "pseudo_huber"] = "quadratic"
    huber_delta: float = 1.0
    blend_width: float = 30.0
    terminal_phase: bool = False
    options: SQPOptions = field(default_factory=SQPOptions)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.slack_weight < 0.0:
            raise ValueError("slack weight must be >= 0")
        if np.shape(self.initial_state) != (STATE_DIM,):
            raise ValueError("initial_state must have six entries")
        if np.shape(self.reference) != (self.horizon + 1, STATE_DIM):
            raise ValueError(f"reference must have shape ({self.horizon + 1}, {STATE_DIM})")
        _check_psd(np.asarray(self.control_weights), "control weights")
        _check_psd(np.asarray(self.reference_weights), "reference weights")

    @property
    def variable_count(self) -> int:
        return self.horizon * (STATE_DIM + CONTROL_DIM)


@dataclass
class Trajectory:
    """Time-indexed states and controls with solver diagnostics."""
    states: np.ndarray
    controls: np.ndarray
    dt: float
    objective_value: float
    slack_psi: float
    solver_status: SolverStatus
    iterations: int
    solve_time: float
    kkt_residual: float = float("nan")
    constraint_violation: float = float("nan")
    merit_history: list[tuple[float, float]] = field(default_factory=list)
    seed: str = "cold"

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * self.dt

    def first_control(self) -> np.ndarray:
        return self.controls[0].copy()

    def to_frame(self) -> pd.DataFrame:
        controls = np.vstack([self.controls, np.full((1, CONTROL_DIM), np.nan)])
        data = np.column_stack([self.times, self.states, controls])
        return pd.DataFrame(data, columns=TRAJECTORY_COLUMNS)

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False)

    def diagnostics(self) -> dict:
        return {
            "status": self.solver_status.value,
            "iterations": self.iterations,
            "solve_time": self.solve_time,
            "objective": self.objective_value,
            "slack_psi": self.slack_psi,
            "kkt_residual": self.kkt_residual,
            "constraint_violation": self.constraint_violation,
            "seed": self.seed,
        }


def _reference_weight_matrix(config: OptimizerConfig, buffer_point: BufferPoint) -> np.ndarray:
    weights = np.diag(np.asarray(config.reference_weights, dtype=float))
    if buffer_point.is_terminal_phase:
        c, s = np.cos(buffer_point.heading), np.sin(buffer_point.heading)
        rotation = np.array([[c, -s], [s, c]])
        local = np.diag([config.terminal_along_weight, config.terminal_cross_weight])
        weights[:2, :2] = rotation @ local @ rotation.T
    return weights


def build_problem(
    vessel_state: VesselState,
    params: VesselParams,
    buffer_point: BufferPoint,
    wind: WindCondition,
    config: Optional[OptimizerConfig] = None,
) -> DockingProblem:
    """
    Hold the buffer point static over the horizon and assemble the NLP.

    In the terminal phase the rpm range is clamped to the loading-zone limit,
    the reference speed drops to the approach speed and the position weight is
    expressed in the trailer frame. The docking heading is enforced only once
    the docking point lies within reach of the horizon.
    """
    config = config or OptimizerConfig()
    terminal = buffer_point.is_terminal_phase
    speed = config.approach_speed if terminal else config.cruise_speed
    reference_row = np.array([
        buffer_point.position[0], buffer_point.position[1], buffer_point.heading, speed, 0.0, 0.0,
    ])
    reference = np.tile(reference_row, (config.horizon + 1, 1))

    docking_active = False
    if terminal:
        axis = np.array([np.cos(buffer_point.heading), np.sin(buffer_point.heading)])
        remaining = float(np.dot(buffer_point.position - vessel_state.position, axis))
        reach = config.horizon * config.dt * max(abs(vessel_state.u), config.approach_speed)
        docking_active = remaining <= reach

    bounds = config.bounds.loading_zone(config.loading_zone_rpm) if terminal else config.bounds
    return DockingProblem(
        params=params,
        initial_state=vessel_state.as_array(),
        reference=reference,
        wind=wind,
        horizon=config.horizon,
        dt=config.dt,
        control_weights=np.diag([config.weight_rpm, config.weight_alpha]),
        reference_weights=_reference_weight_matrix(config, buffer_point),
        slack_weight=config.slack_weight,
        bounds=bounds,
        docking_heading=buffer_point.heading,
        docking_active=docking_active,
        docking_mode=config.docking_mode,
        objective_mode=config.objective_mode,
        huber_delta=config.huber_delta,
        blend_width=config.blend_width,
        terminal_phase=terminal,
        options=config.solver,
    )


def _state_deviation(problem: DockingProblem, states: np.ndarray) -> np.ndarray:
    deviation = states - problem.reference
    deviation[:, 2] = wrap_angle(deviation[:, 2])
    return deviation


def _weight_factor(problem: DockingProblem) -> np.ndarray:
    """L with L'L = reference weights (eigen factor, rows scaled by sqrt of eigenvalues)."""
    values, vectors = np.linalg.eigh(problem.reference_weights)
    return np.sqrt(np.clip(values, 0.0, None))[:, None] * vectors.T


def _pseudo_huber(residual: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, first and second derivative of 2*delta^2*(sqrt(1 + (e/delta)^2) - 1)."""
    ratio = 1.0 + (residual / delta) ** 2
    root = np.sqrt(ratio)
    return 2.0 * delta ** 2 * (root - 1.0), 2.0 * residual / root, 2.0 / (ratio * root)


def evaluate_objective(
    problem: DockingProblem,
    states: np.ndarray,
    controls: np.ndarray,
    slack: float = 0.0,
) -> float:
    """
    Control effort plus reference deviation plus the docking slack penalty.

    :param states: Array (T+1, 6); heading deviations are wrapped
    :param controls: Array (T, 2) of [rpm, alpha]
    :param slack: Docking heading slack s_psi [rad]
    :raises ValueError: On dimension mismatch
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    if states.shape != (problem.horizon + 1, STATE_DIM):
        raise ValueError(f"states must have shape ({problem.horizon + 1}, {STATE_DIM}), got {states.shape}")
    if controls.shape != (problem.horizon, CONTROL_DIM):
        raise ValueError(f"controls must have shape ({problem.horizon}, {CONTROL_DIM}), got {controls.shape}")

    effort = float(np.einsum("ki,ij,kj->", controls, problem.control_weights, controls))
    deviation = _state_deviation(problem, states)
    if problem.objective_mode == "pseudo_huber":
        residual = deviation @ _weight_factor(problem).T
        tracking = float(np.sum(_pseudo_huber(residual, problem.huber_delta)[0]))
    else:
        tracking = float(np.einsum("ki,ij,kj->", deviation, problem.reference_weights, deviation))
    return effort + tracking + problem.slack_weight * float(slack) ** 2


class TranscribedNLP:
    """
    Direct transcription of a DockingProblem for the SQP solver.

    Variable layout: [s(1), ..., s(T), c~(0), ..., c~(T-1)] with c~ = [rpm/1000, alpha].
    """

    def __init__(self, problem: DockingProblem):
        self.problem = problem
        self.T = problem.horizon
        self.n_states = self.T * STATE_DIM
        self.n = self.n_states + self.T * CONTROL_DIM
        self.scale = np.array([RPM_SCALE, 1.0])
        self.hard_docking = problem.docking_active and problem.docking_mode == "hard"
        self.soft_docking = problem.docking_active and problem.docking_mode == "soft"

        lower = np.full(self.n, -np.inf)
        upper = np.full(self.n, np.inf)
        lower[self.n_states:] = np.tile(problem.bounds.lower() / self.scale, self.T)
        upper[self.n_states:] = np.tile(problem.bounds.upper() / self.scale, self.T)
        self.lower, self.upper = lower, upper
        self._factor = _weight_factor(problem) if problem.objective_mode == "pseudo_huber" else None
        self._jacobian_pattern = self._build_pattern()
        self._constant_hessian: Optional[sp.csr_matrix] = None

    # -- packing ---------------------------------------------------------

    def pack(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        return np.concatenate([states[1:].ravel(), (controls / self.scale).ravel()])

    def unpack(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        states = np.vstack([self.problem.initial_state, z[: self.n_states].reshape(self.T, STATE_DIM)])
        controls = z[self.n_states:].reshape(self.T, CONTROL_DIM) * self.scale
        return states, controls

    def slack(self, states: np.ndarray) -> float:
        if not self.problem.docking_active:
            return 0.0
        return wrap_angle(states[-1, 2] - self.problem.docking_heading)

    # -- objective -------------------------------------------------------

    def objective(self, z: np.ndarray) -> float:
        states, controls = self.unpack(z)
        slack = self.slack(states) if self.soft_docking else 0.0
        return evaluate_objective(self.problem, states, controls, slack)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        problem = self.problem
        states, controls = self.unpack(z)
        deviation = _state_deviation(problem, states)[1:]
        if self._factor is not None:
            residual = deviation @ self._factor.T
            _, first, _ = _pseudo_huber(residual, problem.huber_delta)
            state_grad = first @ self._factor
        else:
            state_grad = 2.0 * deviation @ problem.reference_weights
        if self.soft_docking:
            state_grad[-1, 2] += 2.0 * problem.slack_weight * self.slack(states)
        control_grad = 2.0 * (controls @ problem.control_weights) * self.scale
        return np.concatenate([state_grad.ravel(), control_grad.ravel()])

    def hessian(self, z: np.ndarray) -> sp.csr_matrix:
        problem = self.problem
        if self._factor is None and self._constant_hessian is not None:
            return self._constant_hessian
        if self._factor is not None:
            states, _ = self.unpack(z)
            residual = _state_deviation(problem, states)[1:] @ self._factor.T
            _, _, second = _pseudo_huber(residual, problem.huber_delta)
            state_blocks = np.einsum("ai,ka,aj->kij", self._factor, second, self._factor)
        else:
            state_blocks = np.broadcast_to(2.0 * problem.reference_weights, (self.T, STATE_DIM, STATE_DIM)).copy()
        if self.soft_docking:
            state_blocks[-1, 2, 2] += 2.0 * problem.slack_weight
        control_block = 2.0 * self.scale[:, None] * problem.control_weights * self.scale[None, :]
        blocks = list(state_blocks) + [control_block] * self.T
        hessian = sp.block_diag(blocks, format="csr")
        if self._factor is None:
            self._constant_hessian = hessian
        return hessian

    # -- constraints -----------------------------------------------------

    def _dynamics(self, states: np.ndarray, controls: np.ndarray, with_jacobians: bool = False):
        problem = self.problem
        return dynamics_batch(
            problem.params, states[:-1], controls, problem.wind.speed, problem.wind.direction,
            smooth_thrust=True, blend_width=problem.blend_width, with_jacobians=with_jacobians,
        )

    def constraints(self, z: np.ndarray) -> np.ndarray:
        states, controls = self.unpack(z)
        defects = states[1:] - states[:-1] - self.problem.dt * self._dynamics(states, controls)
        values = defects.ravel()
        if self.hard_docking:
            values = np.append(values, self.slack(states))
        return values

    def _build_pattern(self) -> tuple[np.ndarray, np.ndarray]:
        T, ns, nc = self.T, STATE_DIM, CONTROL_DIM
        rows, cols = [], []
        ii, jj = np.meshgrid(np.arange(ns), np.arange(ns), indexing="ij")
        for k in range(T):
            rows.append(k * ns + np.arange(ns))
            cols.append(k * ns + np.arange(ns))
        for k in range(1, T):
            rows.append((k * ns + ii).ravel())
            cols.append(((k - 1) * ns + jj).ravel())
        ic, jc = np.meshgrid(np.arange(ns), np.arange(nc), indexing="ij")
        for k in range(T):
            rows.append((k * ns + ic).ravel())
            cols.append((self.n_states + k * nc + jc).ravel())
        return np.concatenate(rows), np.concatenate(cols)

    def jacobian(self, z: np.ndarray) -> sp.csr_matrix:
        problem = self.problem
        states, controls = self.unpack(z)
        _, a_mat, b_mat = self._dynamics(states, controls, with_jacobians=True)
        dt = problem.dt
        identity = np.ones(self.T * STATE_DIM)
        previous = -(np.eye(STATE_DIM)[None] + dt * a_mat[1:])
        control = -dt * b_mat * self.scale[None, None, :]
        values = np.concatenate([identity, previous.ravel(), control.ravel()])
        rows, cols = self._jacobian_pattern
        m = self.T * STATE_DIM
        jac = sp.coo_matrix((values, (rows, cols)), shape=(m, self.n)).tocsr()
        if self.hard_docking:
            row = sp.csr_matrix(([1.0], ([0], [self.n_states - STATE_DIM + 2])), shape=(1, self.n))
            jac = sp.vstack([jac, row], format="csr")
        return jac


def guidance_seed(problem: DockingProblem, gain: float = 1.0, speed_gain: float = 1500.0) -> np.ndarray:
    """
    Controls from a line-of-sight heading law and a proportional speed law.

    Rpm commands stay out of the flat part of the smoothed deadband.
    """
    params = problem.params
    target = problem.reference[0]
    state = problem.initial_state.copy()
    bounds = problem.bounds
    engage = params.neutral_rpm_threshold + problem.blend_width
    controls = np.zeros((problem.horizon, CONTROL_DIM))
    for k in range(problem.horizon):
        if problem.terminal_phase:
            axis = target[2]
            offset = state[:2] - target[:2]
            cross = -np.sin(axis) * offset[0] + np.cos(axis) * offset[1]
            desired = axis - np.arctan2(cross, 10.0)
        else:
            desired = np.arctan2(target[1] - state[1], target[0] - state[0])
        heading_error = wrap_angle(desired - state[2])
        alpha = -gain * heading_error + 2.0 * state[5]
        rpm = steady_rpm(params, target[3]) + speed_gain * (target[3] - state[3])
        if abs(rpm) < engage:
            rpm = engage if target[3] >= state[3] else -engage
        if rpm < 0.0:
            alpha = -alpha
        controls[k] = bounds.clip(np.array([rpm, alpha]))
        state = state + problem.dt * dynamics_batch(
            params, state[None], controls[k][None], problem.wind.speed, problem.wind.direction,
            smooth_thrust=True, blend_width=problem.blend_width,
        )[0]
    return controls


def _rollout_unwrapped(problem: DockingProblem, controls: np.ndarray) -> np.ndarray:
    states = np.empty((problem.horizon + 1, STATE_DIM))
    states[0] = problem.initial_state
    for k in range(problem.horizon):
        states[k + 1] = states[k] + problem.dt * dynamics_batch(
            problem.params, states[k][None], controls[k][None], problem.wind.speed, problem.wind.direction,
            smooth_thrust=True, blend_width=problem.blend_width,
        )[0]
    return states


def shifted_controls(previous: Trajectory, problem: DockingProblem) -> np.ndarray:
    """Previous plan advanced by one step, last control repeated, resized to the horizon."""
    controls = previous.controls[1:]
    if controls.shape[0] == 0:
        controls = previous.controls
    if controls.shape[0] < problem.horizon:
        pad = np.repeat(controls[-1:], problem.horizon - controls.shape[0], axis=0)
        controls = np.vstack([controls, pad])
    return problem.bounds.clip(controls[: problem.horizon])


def solve(
    problem: DockingProblem,
    warm_start: Optional[Trajectory] = None,
    solver: Optional[SQPSolver] = None,
) -> Trajectory:
    """
    Solve the docking NLP from the better of the guidance seed and the warm start.

    Non-convergence is reported through ``solver_status``; the best iterate is returned.
    """
    started = time.perf_counter()
    nlp = TranscribedNLP(problem)
    solver = solver or SQPSolver(problem.options)

    candidates = [("cold", guidance_seed(problem))]
    if warm_start is not None:
        candidates.append(("warm", shifted_controls(warm_start, problem)))
    seeds = []
    for label, controls in candidates:
        states = _rollout_unwrapped(problem, controls)
        z0 = nlp.pack(states, controls)
        seeds.append((nlp.objective(z0), label, z0))
    _, label, z0 = min(seeds, key=lambda item: item[0])

    result = solver.solve(nlp, z0)
    states, controls = nlp.unpack(result.x)
    trajectory = Trajectory(
        states=states,
        controls=controls,
        dt=problem.dt,
        objective_value=result.objective,
        slack_psi=nlp.slack(states),
        solver_status=result.status,
        iterations=result.iterations,
        solve_time=time.perf_counter() - started,
        kkt_residual=result.kkt_residual,
        constraint_violation=result.constraint_violation,
        merit_history=result.merit_history,
        seed=label,
    )
    logger.solve(
        f"{result.status.value} after {result.iterations} it ({label} seed), "
        f"J={result.objective:.4g}, kkt={result.kkt_residual:.1e}, "
        f"viol={result.constraint_violation:.1e}, {trajectory.solve_time * 1e3:.0f} ms"
    )
    return trajectory


def check_gradients(
    problem: DockingProblem,
    point: Optional[np.ndarray] = None,
    step: float = 1e-6,
    seed: int = 0,
) -> float:
    """
    Compare analytic objective gradient and constraint Jacobian with central differences.

    :param point: Packed NLP variables; a random interior point when omitted
    :param step: Finite-difference step in scaled variables
    :return: Max relative error, each block normalised by max(1, |finite difference|_inf)
    """
    nlp = TranscribedNLP(problem)
    if point is None:
        point = random_interior_point(problem, seed)
    z = np.asarray(point, dtype=float)

    grad_fd = np.empty(nlp.n)
    jac_fd = np.empty((nlp.constraints(z).shape[0], nlp.n))
    for i in range(nlp.n):
        forward, backward = z.copy(), z.copy()
        forward[i] += step
        backward[i] -= step
        grad_fd[i] = (nlp.objective(forward) - nlp.objective(backward)) / (2.0 * step)
        jac_fd[:, i] = (nlp.constraints(forward) - nlp.constraints(backward)) / (2.0 * step)

    grad_error = np.max(np.abs(nlp.gradient(z) - grad_fd)) / max(1.0, np.max(np.abs(grad_fd)))
    jac_error = np.max(np.abs(nlp.jacobian(z).toarray() - jac_fd)) / max(1.0, np.max(np.abs(jac_fd)))
    error = float(max(grad_error, jac_error))
    logger.info(f"Gradient check h={step:g}: objective {grad_error:.2e}, constraints {jac_error:.2e}", module="optimizer")
    return error


def random_interior_point(problem: DockingProblem, seed: int = 0) -> np.ndarray:
    """Random packed point with controls inside the box and away from deadband blend edges."""
    rng = np.random.default_rng(seed)
    nlp = TranscribedNLP(problem)
    bounds = problem.bounds
    rpm = rng.uniform(0.1, 0.9, problem.horizon) * (bounds.rpm_max - bounds.rpm_min) + bounds.rpm_min
    threshold = problem.params.neutral_rpm_threshold
    edges = np.array([threshold - problem.blend_width, threshold + problem.blend_width])
    near_edge = np.min(np.abs(np.abs(rpm)[:, None] - edges[None, :]), axis=1) < 1.0
    rpm[near_edge] += 5.0
    alpha = rng.uniform(0.1, 0.9, problem.horizon) * (bounds.alpha_max - bounds.alpha_min) + bounds.alpha_min
    controls = np.column_stack([rpm, alpha])
    states = _rollout_unwrapped(problem, controls)
    states[1:] += rng.normal(0.0, 0.05, states[1:].shape)
    return nlp.pack(states, controls)


def random_problem(
    seed: int = 0,
    params: Optional[VesselParams] = None,
    config: Optional[OptimizerConfig] = None,
) -> DockingProblem:
    """Random docking problem: state, buffer point, phase and wind drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    state = VesselState(
        x=rng.uniform(-60.0, -10.0),
        y=rng.uniform(-10.0, 10.0),
        psi=rng.uniform(-0.6, 0.6),
        u=rng.uniform(0.3, 2.0),
        v=rng.uniform(-0.2, 0.2),
        r=rng.uniform(-0.05, 0.05),
    )
    terminal = bool(rng.integers(0, 2))
    buffer_point = BufferPoint(
        position=np.array([0.0, rng.uniform(-2.0, 2.0)]),
        heading=rng.uniform(-0.3, 0.3),
        is_terminal_phase=terminal,
    )
    wind = WindCondition(rng.uniform(0.0, 8.0), rng.uniform(-np.pi, np.pi))
    return build_problem(state, params or VesselParams(), buffer_point, wind, config)
