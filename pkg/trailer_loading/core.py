"""
DockingPipeline - one decision step of the trailer-loading stack.

Coordinates:
- Path planner - Dubins reference path and wind-shifted buffer point
- Bail supervisor - funnel check with hysteresis, reverse-out command
- Trajectory optimizer - receding-horizon or open-loop SQP plans
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from trailer_loading.dynamics.params import VesselParams
from trailer_loading.dynamics.vessel_model import ControlInput, VesselState, WindCondition
from trailer_loading.perception.localization_sim import LocalizationConfig
from trailer_loading.planning.path_planner import (
    BufferPoint,
    PlannerConfig,
    Pose2D,
    build_reference_path,
    compute_buffer_point,
)
from trailer_loading.planning.sqp import SolverStatus, SQPOptions
from trailer_loading.planning.trajectory_optimizer import (
    OptimizerConfig,
    Trajectory,
    build_problem,
    solve,
)
from trailer_loading.sim.scenario import HarnessConfig, Scenario
from trailer_loading.supervision.bail_supervisor import BailConfig, BailMode, BailState, BailSupervisor
from trailer_loading.utils.logging import get_logger

logger = get_logger()


def _closed_loop_optimizer() -> OptimizerConfig:
    # each 10 Hz solve starts from the previous plan, a few SQP iterations suffice
    return OptimizerConfig(solver=SQPOptions(max_iter=10, tol_kkt=1e-4))


class PipelineConfig(BaseModel):
    """Aggregate configuration of one experiment."""
    vessel: VesselParams = Field(default_factory=VesselParams)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    optimizer: OptimizerConfig = Field(default_factory=_closed_loop_optimizer)
    bail: BailConfig = Field(default_factory=BailConfig)
    localization: LocalizationConfig = Field(default_factory=LocalizationConfig)
    harness: HarnessConfig = Field(default_factory=HarnessConfig)
    scenario: Scenario = Field(default_factory=Scenario)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """
    Apply ``dotted.key=value`` overrides to a config dict in place.

    Values are parsed as JSON when possible, else kept as strings.

    :raises ValueError: On malformed overrides or keys the config does not have
    """
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ValueError(f"unknown config key {key!r}")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ValueError(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(raw)
    return data


def load_config(path: Optional[str | Path] = None, overrides: Optional[list[str]] = None) -> PipelineConfig:
    """
    Load a PipelineConfig from JSON (defaults when ``path`` is None) and apply overrides.

    Partial files are completed with defaults.
    """
    data = PipelineConfig().model_dump(mode="json")
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        merge_dicts(data, loaded)
    if overrides:
        apply_overrides(data, overrides)
    return PipelineConfig.model_validate(data)


def merge_dicts(base: dict, update: dict) -> None:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merge_dicts(base[key], value)
        else:
            base[key] = value


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.model_dump(mode="json"), indent=2) + "\n")


@dataclass
class StepDecision:
    """What the pipeline decided at one control tick."""
    control: ControlInput
    buffer_point: BufferPoint
    bail_state: BailState
    trajectory: Optional[Trajectory] = None
    solve_time: float = 0.0
    replanned: bool = False
    budget_overrun: bool = False


class DockingPipeline:
    """
    Decision loop body: estimate in, control out.

    The plant, wind and sensors live in the harness; this class only sees the
    estimated vessel state and the wind the planner is allowed to know.
    """

    def __init__(
        self,
        config: PipelineConfig,
        trailer_pose: Pose2D,
        start_pose: Pose2D,
        replan_mode: Literal["open_loop", "receding_10hz"] = "receding_10hz",
    ):
        self.config = config
        self.trailer_pose = trailer_pose
        self.replan_mode = replan_mode
        self.reference = build_reference_path(start_pose, trailer_pose, config.planner)
        self.supervisor = BailSupervisor(trailer_pose, config.bail)

        self.plan: Optional[Trajectory] = None
        self.plan_time = 0.0
        self._plan_terminal: Optional[bool] = None
        self.solve_times: list[float] = []
        self.budget_overruns = 0
        self.solver_failures = 0

    def _plan_control(self, plan: Trajectory, plan_time: float, time: float) -> ControlInput:
        index = int(math.floor((time - plan_time) / plan.dt + 1e-9))
        index = min(max(index, 0), plan.controls.shape[0] - 1)
        return ControlInput.from_array(plan.controls[index])

    def _needs_plan(self, buffer_point: BufferPoint, time: float) -> bool:
        if self.plan is None or self.replan_mode == "receding_10hz":
            return True
        if self._plan_terminal != buffer_point.is_terminal_phase:
            return True
        elapsed = time - self.plan_time
        return elapsed >= self.plan.controls.shape[0] * self.plan.dt - 1e-9

    def decide(self, state: VesselState, wind: WindCondition, time: float) -> StepDecision:
        """
        Buffer point, bail check, then (re)plan per mode.

        :param state: Estimated vessel state
        :param wind: Wind as seen by the planner (sensed, or calm without anemometer)
        :param time: Simulation time [s]
        """
        pose = Pose2D(state.x, state.y, state.psi)
        buffer_point = compute_buffer_point(
            self.reference,
            pose,
            self.config.planner.lookahead,
            wind,
            self.config.planner.shift_gain,
            self.trailer_pose,
            self.config.planner.gate_distance,
        )
        bail_state = self.supervisor.step(pose, buffer_point.is_terminal_phase, time)
        if bail_state.mode is BailMode.REVERSING:
            self.plan = None
            return StepDecision(self.supervisor.command(state), buffer_point, bail_state)

        if not self._needs_plan(buffer_point, time):
            return StepDecision(self._plan_control(self.plan, self.plan_time, time), buffer_point, bail_state)

        problem = build_problem(state, self.config.vessel, buffer_point, wind, self.config.optimizer)
        trajectory = solve(problem, warm_start=self.plan)
        self.solve_times.append(trajectory.solve_time)
        if trajectory.solver_status is not SolverStatus.CONVERGED:
            self.solver_failures += 1

        harness = self.config.harness
        overrun = harness.enforce_solve_budget and trajectory.solve_time > harness.solve_budget
        if overrun:
            self.budget_overruns += 1
        if overrun and self.plan is not None:
            # a late plan is discarded; the previous one keeps running on its own clock
            logger.warning(
                f"t={time:.1f}s solve took {trajectory.solve_time * 1e3:.0f} ms, holding previous plan",
                module="harness",
            )
            control = self._plan_control(self.plan, self.plan_time, time)
            return StepDecision(
                control, buffer_point, bail_state, trajectory, trajectory.solve_time,
                replanned=False, budget_overrun=True,
            )
        if overrun:
            logger.warning(
                f"t={time:.1f}s first solve took {trajectory.solve_time * 1e3:.0f} ms, no earlier plan to hold",
                module="harness",
            )

        self.plan = trajectory
        self.plan_time = time
        self._plan_terminal = buffer_point.is_terminal_phase
        return StepDecision(
            ControlInput.from_array(trajectory.first_control()), buffer_point, bail_state, trajectory,
            trajectory.solve_time, replanned=True, budget_overrun=overrun,
        )
