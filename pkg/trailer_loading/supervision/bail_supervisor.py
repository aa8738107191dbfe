"""
BailSupervisor - funnel feasibility check, Schmitt-trigger mode switching and the reverse-out command.

The funnel approximates the forward-reachable set under maximum yaw rate at a
fixed surge speed: the two tangent turning circles of radius u_fix / r_max plus
a heading budget along the vessel's own heading. Wind torque is neglected.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from trailer_loading.dynamics.vessel_model import ControlInput, VesselState
from trailer_loading.planning.path_planner import Pose2D, project_distance
from trailer_loading.planning.trajectory_optimizer import ControlBounds
from trailer_loading.utils.angles import wrap_angle
from trailer_loading.utils.logging import get_logger

logger = get_logger()


class FunnelParams(BaseModel):
    """Funnel geometry and hysteresis band [m]."""
    r_max: float = Field(default=0.15, gt=0.0)
    u_fix: float = Field(default=1.0, gt=0.0)
    hysteresis_enter: float = Field(default=0.5, ge=0.0)
    hysteresis_exit: float = Field(default=1.5, ge=0.0)

    @model_validator(mode="after")
    def _check_band(self) -> "FunnelParams":
        if not self.hysteresis_exit > self.hysteresis_enter:
            raise ValueError(
                f"hysteresis_exit ({self.hysteresis_exit}) must exceed "
                f"hysteresis_enter ({self.hysteresis_enter})"
            )
        return self

    @property
    def turn_radius(self) -> float:
        return self.u_fix / self.r_max


class BailConfig(BaseModel):
    """Supervisor settings: funnel, reverse-out command and arming rules."""
    enabled: bool = True
    funnel: FunnelParams = Field(default_factory=FunnelParams)
    reverse_rpm: float = Field(default=-1200.0, lt=0.0)
    yaw_gain: float = Field(default=2.0, ge=0.0)
    commit_distance: float = Field(default=5.0, ge=0.0)
    bounds: ControlBounds = Field(default_factory=ControlBounds)


class BailMode(str, Enum):
    DOCKING = "docking"
    REVERSING = "reversing"


@dataclass(frozen=True)
class BailState:
    mode: BailMode = BailMode.DOCKING
    margin: float = float("inf")


def funnel_margin(vessel_pose: Pose2D, trailer_pose: Pose2D, funnel: FunnelParams) -> float:
    """
    Signed clearance of the trailer pose with respect to the vessel's funnel.

    Circle clearance is the distance of the target outside the nearer tangent
    turning circle; the heading budget is the along-track distance left once
    the heading change has been flown at maximum yaw rate.

    :return: min(circle clearance, heading budget); positive means feasible
    """
    radius = funnel.turn_radius
    position = vessel_pose.position
    heading = vessel_pose.direction
    port = np.array([-heading[1], heading[0]])
    target = trailer_pose.position

    centres = (position + radius * port, position - radius * port)
    clearance = min(float(np.linalg.norm(target - centre)) for centre in centres) - radius

    along = float(np.dot(target - position, heading))
    turn = abs(wrap_angle(trailer_pose.heading - vessel_pose.heading))
    budget = along - radius * turn
    return min(clearance, budget)


def update_mode(state: BailState, margin: float, funnel: FunnelParams) -> BailState:
    """Schmitt trigger: enter REVERSING below the lower threshold, leave above the upper one."""
    mode = state.mode
    if mode is BailMode.DOCKING and margin < funnel.hysteresis_enter:
        mode = BailMode.REVERSING
    elif mode is BailMode.REVERSING and margin > funnel.hysteresis_exit:
        mode = BailMode.DOCKING
    return BailState(mode=mode, margin=margin)


def reverse_command(vessel_state: VesselState, config: Optional[BailConfig] = None) -> ControlInput:
    """
    Constant reverse rpm with the azimuth proportional to the yaw rate.

    Under reverse thrust a negative azimuth gives a negative yaw moment, so
    alpha = -k * r opposes the current rotation and holds the heading.
    """
    config = config or BailConfig()
    command = config.bounds.clip(np.array([config.reverse_rpm, -config.yaw_gain * vessel_state.r]))
    return ControlInput(float(command[0]), float(command[1]))


def _arc_hits_target(
    vessel_pose: Pose2D,
    target: np.ndarray,
    funnel: FunnelParams,
    rate_count: int,
    position_tolerance: float,
    step: float,
) -> bool:
    """Sweep constant yaw-rate arcs at u_fix, each flown for at most half a revolution."""
    rates = np.linspace(-funnel.r_max, funnel.r_max, rate_count)
    distance = float(np.linalg.norm(target - vessel_pose.position))
    # a target reachable within half a turn lies at most pi/2 * chord along the arc
    max_length = 0.5 * math.pi * distance + 2.0 * position_tolerance
    lengths = np.arange(0.0, max_length + step, step)
    times = lengths / funnel.u_fix

    with np.errstate(divide="ignore"):
        half_turn = np.where(rates != 0.0, math.pi / np.abs(rates), np.inf)
    psi0 = vessel_pose.heading
    angle = psi0 + rates[:, None] * times[None, :]
    straight = np.abs(rates) < 1e-12
    safe_rates = np.where(straight, 1.0, rates)[:, None]
    x = np.where(
        straight[:, None],
        vessel_pose.x + funnel.u_fix * times[None, :] * math.cos(psi0),
        vessel_pose.x + funnel.u_fix / safe_rates * (np.sin(angle) - math.sin(psi0)),
    )
    y = np.where(
        straight[:, None],
        vessel_pose.y + funnel.u_fix * times[None, :] * math.sin(psi0),
        vessel_pose.y - funnel.u_fix / safe_rates * (np.cos(angle) - math.cos(psi0)),
    )
    within = times[None, :] <= half_turn[:, None] + 1e-9
    gaps = np.hypot(x - target[0], y - target[1])
    return bool(np.any(within & (gaps <= position_tolerance)))


def _heading_rollout_fits(
    vessel_pose: Pose2D,
    trailer_pose: Pose2D,
    funnel: FunnelParams,
    dt: float,
) -> bool:
    """
    Integrate the unicycle at u_fix while it turns onto the trailer heading at
    maximum yaw rate; the turn fits when no integrated position passes the
    trailer along the vessel's initial heading.
    """
    direction = vessel_pose.direction
    limit = float(np.dot(trailer_pose.position - vessel_pose.position, direction))
    x, y, psi = vessel_pose.x, vessel_pose.y, vessel_pose.heading
    error = wrap_angle(trailer_pose.heading - psi)
    while abs(error) > 1e-12:
        turn = math.copysign(min(funnel.r_max * dt, abs(error)), error)
        # exact chord of the arc flown during this step
        step = 2.0 * funnel.turn_radius * math.sin(0.5 * abs(turn))
        x += step * math.cos(psi + 0.5 * turn)
        y += step * math.sin(psi + 0.5 * turn)
        psi += turn
        error = wrap_angle(trailer_pose.heading - psi)
        if (x - vessel_pose.x) * direction[0] + (y - vessel_pose.y) * direction[1] > limit + 1e-9:
            return False
    return limit >= 0.0


def rollout_reachable(
    vessel_pose: Pose2D,
    trailer_pose: Pose2D,
    funnel: FunnelParams,
    rate_count: int = 801,
    position_tolerance: float = 0.5,
    step: float = 0.1,
) -> bool:
    """
    Brute-force reachability: some constant yaw-rate arc at u_fix passes the
    trailer within ``position_tolerance`` inside half a revolution, and the
    integrated maximum-rate turn onto the trailer heading does not carry the
    vessel past the trailer along its initial heading.
    """
    if rate_count < 2:
        raise ValueError(f"rate_count must be >= 2, got {rate_count}")
    hit = _arc_hits_target(
        vessel_pose, trailer_pose.position, funnel, rate_count, position_tolerance, step,
    )
    return hit and _heading_rollout_fits(vessel_pose, trailer_pose, funnel, dt=step / funnel.u_fix)


@dataclass
class ModeTransition:
    time: float
    previous: BailMode
    current: BailMode
    margin: float


@dataclass
class BailSupervisor:
    """
    Single-owner supervisor for one docking attempt.

    Armed only in the terminal phase and disarmed once the vessel is within
    ``commit_distance`` of the trailer plane; a disarmed check reports an
    infinite margin.
    """
    trailer_pose: Pose2D
    config: BailConfig = field(default_factory=BailConfig)
    state: BailState = field(default_factory=BailState)
    transitions: list[ModeTransition] = field(default_factory=list)

    @property
    def bail_count(self) -> int:
        return sum(1 for t in self.transitions if t.current is BailMode.REVERSING)

    @property
    def reversing(self) -> bool:
        return self.state.mode is BailMode.REVERSING

    def armed(self, vessel_pose: Pose2D, terminal_phase: bool) -> bool:
        if not (self.config.enabled and terminal_phase):
            return False
        return project_distance(self.trailer_pose, vessel_pose.position) > self.config.commit_distance

    def step(self, vessel_pose: Pose2D, terminal_phase: bool, time: float = 0.0) -> BailState:
        """Evaluate the funnel (when armed) and advance the mode."""
        if self.armed(vessel_pose, terminal_phase):
            margin = funnel_margin(vessel_pose, self.trailer_pose, self.config.funnel)
        else:
            margin = float("inf")
        previous = self.state.mode
        self.state = update_mode(self.state, margin, self.config.funnel)
        if self.state.mode is not previous:
            self.transitions.append(ModeTransition(time, previous, self.state.mode, margin))
            logger.mode(f"t={time:.1f}s {previous.value} -> {self.state.mode.value} (margin {margin:.2f} m)")
        return self.state

    def command(self, vessel_state: VesselState) -> ControlInput:
        return reverse_command(vessel_state, self.config)
