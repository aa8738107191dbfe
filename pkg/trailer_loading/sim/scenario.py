"""
Scenario and harness settings for closed-loop runs.
"""

import math
from typing import Literal

from pydantic import BaseModel, Field, model_validator

from trailer_loading.sim.wind import WindProcessSpec


class Scenario(BaseModel):
    """
    One docking attempt: initial vessel state, trailer pose, wind, noise and replanning mode.

    Poses are (x [m], y [m], heading [rad]); velocities are body-frame (u, v, r).
    """
    name: str = "scenario"
    start_pose: tuple[float, float, float] = (-60.0, 0.0, 0.0)
    start_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    trailer_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    wind: WindProcessSpec = Field(default_factory=WindProcessSpec)
    noise_profile: Literal["requirement", "measured", "none"] = "measured"
    replan_mode: Literal["open_loop", "receding_10hz"] = "receding_10hz"
    anemometer_enabled: bool = True
    seed: int = Field(default=0, ge=0)
    max_duration: float = Field(default=180.0, gt=0.0)

    @model_validator(mode="after")
    def _check_start(self) -> "Scenario":
        sx, sy, _ = self.start_pose
        tx, ty, heading = self.trailer_pose
        along = (sx - tx) * math.cos(heading) + (sy - ty) * math.sin(heading)
        if along >= 0.0:
            raise ValueError("start pose must lie behind the trailer entry plane")
        return self


class SuccessCriteria(BaseModel):
    """Thresholds evaluated at the trailer-plane crossing."""
    max_lateral: float = Field(default=0.15, gt=0.0)
    max_heading_deg: float = Field(default=3.0, gt=0.0)
    min_entry_speed: float = Field(default=0.5, ge=0.0)
    max_entry_speed: float = Field(default=1.5, gt=0.0)

    @model_validator(mode="after")
    def _check_speed(self) -> "SuccessCriteria":
        if self.min_entry_speed >= self.max_entry_speed:
            raise ValueError("min_entry_speed must be below max_entry_speed")
        return self

    def met(self, lateral: float, heading_error_deg: float, entry_speed: float) -> bool:
        return (
            abs(lateral) <= self.max_lateral
            and abs(heading_error_deg) <= self.max_heading_deg
            and self.min_entry_speed <= entry_speed <= self.max_entry_speed
        )


class HarnessConfig(BaseModel):
    """Loop rate, plant integration, sensing and run-termination settings."""
    control_rate: float = Field(default=10.0, gt=0.0)
    plant_dt: float = Field(default=0.01, gt=0.0)
    success: SuccessCriteria = Field(default_factory=SuccessCriteria)
    anemometer_speed_sigma: float = Field(default=0.3, ge=0.0)
    anemometer_direction_sigma_deg: float = Field(default=3.0, ge=0.0)
    enforce_solve_budget: bool = True
    solve_budget: float = Field(default=0.1, gt=0.0)
    bail_recovery_time: float = Field(default=30.0, gt=0.0)

    @model_validator(mode="after")
    def _check_rates(self) -> "HarnessConfig":
        if self.plant_dt > 1.0 / self.control_rate:
            raise ValueError("plant_dt must not exceed the control period")
        return self

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate
