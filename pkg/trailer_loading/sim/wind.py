"""
Wind process - mean-reverting gusts for speed and direction, and the anemometer model.
"""

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from trailer_loading.dynamics.vessel_model import WindCondition
from trailer_loading.utils.angles import wrap_angle


class WindProcessSpec(BaseModel):
    """
    Ornstein-Uhlenbeck wind: mean, stationary standard deviation and reversion time
    for speed and direction. Direction is where the wind blows from [rad].
    """
    mean_speed: float = Field(default=0.0, ge=0.0)
    mean_direction: float = 0.0
    speed_std: float = Field(default=1.5, ge=0.0)
    direction_std_deg: float = Field(default=15.0, ge=0.0)
    speed_tau: float = Field(default=5.0, gt=0.0)
    direction_tau: float = Field(default=20.0, gt=0.0)

    @classmethod
    def steady(cls, speed: float, direction: float) -> "WindProcessSpec":
        """Constant wind with zero volatility."""
        return cls(mean_speed=speed, mean_direction=direction, speed_std=0.0, direction_std_deg=0.0)

    def mean(self) -> WindCondition:
        return WindCondition(self.mean_speed, self.mean_direction)


def _ou_step(deviation: float, tau: float, std: float, dt: float, noise: float) -> float:
    """Exact discretisation of a zero-mean OU process with stationary std ``std``."""
    decay = math.exp(-dt / tau)
    return decay * deviation + std * math.sqrt(1.0 - decay * decay) * noise


def wind_process_step(
    spec: WindProcessSpec,
    current: WindCondition,
    dt: float,
    rng: np.random.Generator,
) -> WindCondition:
    """
    Advance the wind by ``dt``; speed is clamped at zero.

    :raises ValueError: If dt <= 0
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    noise = rng.standard_normal(2)
    speed = spec.mean_speed + _ou_step(
        current.speed - spec.mean_speed, spec.speed_tau, spec.speed_std, dt, noise[0],
    )
    offset = _ou_step(
        wrap_angle(current.direction - spec.mean_direction),
        spec.direction_tau,
        math.radians(spec.direction_std_deg),
        dt,
        noise[1],
    )
    return WindCondition(max(speed, 0.0), spec.mean_direction + offset)


def simulate_wind(
    spec: WindProcessSpec,
    steps: int,
    dt: float,
    rng: np.random.Generator,
    initial: Optional[WindCondition] = None,
) -> np.ndarray:
    """Series of (speed, direction) rows, starting from the mean unless ``initial`` is given."""
    wind = initial or spec.mean()
    series = np.empty((steps + 1, 2))
    series[0] = (wind.speed, wind.direction)
    for k in range(steps):
        wind = wind_process_step(spec, wind, dt, rng)
        series[k + 1] = (wind.speed, wind.direction)
    return series


def sense_wind(
    true_wind: WindCondition,
    rng: np.random.Generator,
    speed_sigma: float = 0.3,
    direction_sigma_deg: float = 3.0,
) -> WindCondition:
    """Anemometer reading: true wind plus white noise."""
    noise = rng.standard_normal(2)
    speed = max(true_wind.speed + speed_sigma * noise[0], 0.0)
    return WindCondition(speed, true_wind.direction + math.radians(direction_sigma_deg) * noise[1])
