"""
LocalizationSim - range-banded relative-pose measurements and the synchronizing Kalman filter.

The relative pose is the vessel's pose in the trailer frame: offset along the
trailer axis, offset across it, and heading relative to the trailer heading.
Camera errors are specified in the vessel's own frame (longitudinal, lateral)
and rotated into the trailer frame.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.stats import chi2

from trailer_loading.planning.path_planner import Pose2D
from trailer_loading.utils.angles import wrap_angle
from trailer_loading.utils.logging import get_logger

logger = get_logger()

POSE_DIM = 3
FILTER_DIM = 6
_COVARIANCE_FLOOR = 1e-12


class PoseSource(str, Enum):
    GNSS_INS = "gnss_ins"
    CAMERA_FUSED = "camera_fused"


class NoiseBands(BaseModel):
    """
    1-sigma camera errors per range band.

    With edges (23, 36) the bands are [0, 23), [23, 36) and [36, camera_range].
    """
    band_edges: list[float] = Field(default_factory=lambda: [23.0, 36.0])
    sigma_longitudinal: list[float] = Field(default_factory=lambda: [0.58, 0.58 * 36 / 23, 0.58 * 60 / 23])
    sigma_lateral: list[float] = Field(default_factory=lambda: [0.26, 0.26 * 36 / 23, 0.26 * 60 / 23])
    sigma_heading_deg: list[float] = Field(default_factory=lambda: [2.3, 2.3 * 36 / 23, 2.3 * 60 / 23])
    camera_range: float = Field(default=60.0, gt=0.0)
    camera_rate: float = Field(default=6.9, gt=0.0)
    system_rate: float = Field(default=10.0, gt=0.0)
    camera_jitter: float = Field(default=0.01, ge=0.0)

    @model_validator(mode="after")
    def _check_bands(self) -> "NoiseBands":
        edges = np.asarray(self.band_edges, dtype=float)
        if edges.size and (np.any(np.diff(edges) <= 0.0) or edges[0] <= 0.0):
            raise ValueError("band_edges must be positive and strictly increasing")
        count = len(self.band_edges) + 1
        for name in ("sigma_longitudinal", "sigma_lateral", "sigma_heading_deg"):
            values = getattr(self, name)
            if len(values) != count:
                raise ValueError(f"{name} needs {count} entries, one per band")
            if min(values) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if 0.5 / self.camera_rate <= self.camera_jitter:
            raise ValueError("camera_jitter must be below half the camera period")
        return self

    @classmethod
    def profile(cls, name: str) -> "NoiseBands":
        """Named noise profile: ``requirement`` or ``measured``."""
        if name not in NOISE_PROFILES:
            raise ValueError(f"unknown noise profile {name!r}; choose from {sorted(NOISE_PROFILES)}")
        return cls(**NOISE_PROFILES[name])

    def band_index(self, range_m: float) -> int:
        return int(np.searchsorted(self.band_edges, range_m, side="right"))

    def sigma(self, range_m: float) -> np.ndarray:
        """(longitudinal [m], lateral [m], heading [rad]) sigma at the given range."""
        band = self.band_index(range_m)
        return np.array([
            self.sigma_longitudinal[band],
            self.sigma_lateral[band],
            math.radians(self.sigma_heading_deg[band]),
        ])


NOISE_PROFILES: dict[str, dict] = {
    "requirement": {
        "sigma_longitudinal": [0.67, 2.14, 3.58],
        "sigma_lateral": [0.37, 1.33, 2.90],
        "sigma_heading_deg": [3.0, 3.0, 3.0],
    },
    "measured": {},
}


class LocalizationConfig(BaseModel):
    """Camera profile, GNSS/INS noise, per-run bias and filter process noise."""
    profile: Literal["requirement", "measured"] = "measured"
    bands: Optional[NoiseBands] = None
    noise_scale: float = Field(default=1.0, ge=0.0)
    gnss_sigma_position: float = Field(default=0.05, ge=0.0)
    gnss_sigma_heading_deg: float = Field(default=0.3, ge=0.0)
    bias_sigma_position: float = Field(default=0.1, ge=0.0)
    bias_sigma_heading_deg: float = Field(default=0.5, ge=0.0)
    ins_velocity_sigma: float = Field(default=0.02, ge=0.0)
    ins_yaw_rate_sigma: float = Field(default=0.002, ge=0.0)
    process_accel_sigma: float = Field(default=0.3, gt=0.0)
    process_yaw_accel_sigma: float = Field(default=0.05, gt=0.0)
    initial_rate_sigma: float = Field(default=1.0, gt=0.0)

    def noise_bands(self) -> NoiseBands:
        return self.bands if self.bands is not None else NoiseBands.profile(self.profile)

    def gnss_sigma(self) -> np.ndarray:
        return np.array([
            self.gnss_sigma_position, self.gnss_sigma_position, math.radians(self.gnss_sigma_heading_deg),
        ])


def _check_covariance(covariance: np.ndarray) -> None:
    """Symmetric PSD on the finite block; infinite variances must be uncorrelated."""
    if np.any(np.isnan(covariance)):
        raise ValueError("covariance contains NaN")
    finite = np.isfinite(np.diag(covariance))
    off = covariance[~finite][:, finite]
    if off.size and np.any(off != 0.0):
        raise ValueError("components with infinite variance must be uncorrelated")
    block = covariance[np.ix_(finite, finite)]
    if not np.allclose(block, block.T, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    if block.size:
        scale = max(1.0, float(np.max(np.abs(block))))
        if np.min(np.linalg.eigvalsh(block)) < -1e-9 * scale:
            raise ValueError("covariance must be positive semidefinite")


@dataclass(frozen=True)
class PoseEstimate:
    """
    Relative pose (with rates for filter estimates) and its covariance.

    ``state`` holds (along, cross, heading) for measurements and appends the
    three rates for filter estimates.
    """
    state: np.ndarray
    covariance: np.ndarray
    source: PoseSource
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        state = np.asarray(self.state, dtype=float).copy()
        covariance = np.asarray(self.covariance, dtype=float).copy()
        if state.shape not in ((POSE_DIM,), (FILTER_DIM,)):
            raise ValueError(f"state must have {POSE_DIM} or {FILTER_DIM} entries, got {state.shape}")
        if covariance.shape != (state.size, state.size):
            raise ValueError(f"covariance must be {state.size}x{state.size}, got {covariance.shape}")
        _check_covariance(covariance)
        state[2] = wrap_angle(state[2])
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "covariance", covariance)

    @property
    def pose(self) -> np.ndarray:
        return self.state[:POSE_DIM].copy()

    @property
    def pose_covariance(self) -> np.ndarray:
        return self.covariance[:POSE_DIM, :POSE_DIM].copy()

    @property
    def longitudinal(self) -> float:
        return float(self.state[0])

    @property
    def lateral(self) -> float:
        return float(self.state[1])

    @property
    def heading(self) -> float:
        return float(self.state[2])


def relative_pose(vessel_pose: Pose2D, trailer_pose: Pose2D) -> np.ndarray:
    """Vessel pose in the trailer frame: (along axis, across axis, relative heading)."""
    offset = vessel_pose.position - trailer_pose.position
    axis = trailer_pose.direction
    normal = np.array([-axis[1], axis[0]])
    return np.array([
        float(np.dot(offset, axis)),
        float(np.dot(offset, normal)),
        wrap_angle(vessel_pose.heading - trailer_pose.heading),
    ])


def world_pose(trailer_pose: Pose2D, relative: np.ndarray) -> Pose2D:
    """Compose a trailer pose with a relative pose back into a world-frame vessel pose."""
    axis = trailer_pose.direction
    normal = np.array([-axis[1], axis[0]])
    position = trailer_pose.position + relative[0] * axis + relative[1] * normal
    return Pose2D(float(position[0]), float(position[1]), trailer_pose.heading + float(relative[2]))


def _ego_to_trailer(relative_heading: float) -> np.ndarray:
    c, s = math.cos(relative_heading), math.sin(relative_heading)
    return np.array([[c, -s], [s, c]])


def measurement_covariance(sigma: np.ndarray, relative_heading: float) -> np.ndarray:
    """Ego-frame (longitudinal, lateral, heading) sigmas as a trailer-frame covariance."""
    rotation = _ego_to_trailer(relative_heading)
    covariance = np.zeros((POSE_DIM, POSE_DIM))
    covariance[:2, :2] = rotation @ np.diag(sigma[:2] ** 2) @ rotation.T
    covariance[2, 2] = sigma[2] ** 2
    return covariance


def measure(
    true_relative: np.ndarray,
    range_m: float,
    rng: np.random.Generator,
    config: Optional[LocalizationConfig] = None,
    timestamp: float = 0.0,
    camera_frame: bool = True,
) -> Optional[PoseEstimate]:
    """
    One relative-pose measurement.

    Within the camera range a measurement exists only on camera frames and
    carries the band's camera noise; beyond it GNSS/INS noise applies.

    :param true_relative: True (along, cross, heading) in the trailer frame
    :param range_m: Distance between vessel and trailer [m]
    :param rng: Generator for this run's measurement stream
    :param camera_frame: Whether a camera frame arrives at this timestamp
    :return: PoseEstimate, or None when the camera has no frame
    :raises ValueError: If range_m is negative
    """
    if range_m < 0.0:
        raise ValueError(f"range must be >= 0, got {range_m}")
    config = config or LocalizationConfig()
    bands = config.noise_bands()
    if range_m <= bands.camera_range:
        if not camera_frame:
            return None
        sigma = bands.sigma(range_m) * config.noise_scale
        source = PoseSource.CAMERA_FUSED
    else:
        sigma = config.gnss_sigma() * config.noise_scale
        source = PoseSource.GNSS_INS

    truth = np.asarray(true_relative, dtype=float)
    ego_error = rng.standard_normal(POSE_DIM) * sigma
    value = truth.copy()
    value[:2] += _ego_to_trailer(truth[2]) @ ego_error[:2]
    value[2] += ego_error[2]
    return PoseEstimate(value, measurement_covariance(sigma, truth[2]), source, timestamp)


def process_noise(dt: float, accel_sigma: np.ndarray) -> np.ndarray:
    """Continuous white-noise-acceleration Q of the constant-velocity model."""
    q = np.asarray(accel_sigma, dtype=float) ** 2
    noise = np.zeros((FILTER_DIM, FILTER_DIM))
    noise[:3, :3] = np.diag(q * dt ** 3 / 3.0)
    noise[:3, 3:] = np.diag(q * dt ** 2 / 2.0)
    noise[3:, :3] = np.diag(q * dt ** 2 / 2.0)
    noise[3:, 3:] = np.diag(q * dt)
    return noise


def kf_predict(
    estimate: PoseEstimate,
    dt: float,
    accel_sigma: tuple[float, float, float] = (0.3, 0.3, 0.05),
) -> PoseEstimate:
    """
    Constant-velocity prediction.

    :raises ValueError: If dt <= 0 or the estimate carries no rates
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if estimate.state.size != FILTER_DIM:
        raise ValueError("prediction needs a filter estimate with rates")
    transition = np.eye(FILTER_DIM)
    transition[:3, 3:] = dt * np.eye(3)
    state = transition @ estimate.state
    covariance = transition @ estimate.covariance @ transition.T + process_noise(dt, np.asarray(accel_sigma))
    covariance = 0.5 * (covariance + covariance.T)
    return PoseEstimate(state, covariance, estimate.source, estimate.timestamp + dt)


def kf_update(estimate: PoseEstimate, measurement: PoseEstimate) -> PoseEstimate:
    """
    Optimal-gain correction with a pose measurement.

    Components with infinite measurement variance are skipped.
    """
    if estimate.state.size != FILTER_DIM or measurement.state.size != POSE_DIM:
        raise ValueError("update needs a filter estimate and a pose measurement")
    used = np.isfinite(np.diag(measurement.covariance))
    if not np.any(used):
        return PoseEstimate(estimate.state, estimate.covariance, measurement.source, estimate.timestamp)

    observe = np.eye(POSE_DIM, FILTER_DIM)[used]
    noise = measurement.covariance[np.ix_(used, used)]
    innovation = measurement.state[used] - observe @ estimate.state
    heading_rows = np.flatnonzero(used) == 2
    innovation[heading_rows] = wrap_angle(innovation[heading_rows])

    prior = estimate.covariance
    innovation_cov = observe @ prior @ observe.T + noise + _COVARIANCE_FLOOR * np.eye(observe.shape[0])
    gain = np.linalg.solve(innovation_cov, observe @ prior).T
    state = estimate.state + gain @ innovation
    # Joseph form keeps the posterior symmetric PSD
    factor = np.eye(FILTER_DIM) - gain @ observe
    covariance = factor @ prior @ factor.T + gain @ noise @ gain.T
    covariance = 0.5 * (covariance + covariance.T)
    return PoseEstimate(state, covariance, measurement.source, estimate.timestamp)


def nees(estimate: PoseEstimate, true_relative: np.ndarray) -> float:
    """Normalised estimation error squared of the pose block."""
    error = estimate.pose - np.asarray(true_relative, dtype=float)
    error[2] = wrap_angle(error[2])
    return float(error @ np.linalg.solve(estimate.pose_covariance, error))


def chi2_band(dof: int = POSE_DIM, confidence: float = 0.95) -> tuple[float, float]:
    """Two-sided chi-square acceptance band for a single NEES sample."""
    tail = 0.5 * (1.0 - confidence)
    return float(chi2.ppf(tail, dof)), float(chi2.ppf(1.0 - tail, dof))


class CameraClock:
    """Frame arrival times at the camera rate with uniform jitter."""

    def __init__(self, rate: float, jitter: float, rng: np.random.Generator, start: float = 0.0):
        self.period = 1.0 / rate
        self.jitter = jitter
        self.rng = rng
        self._index = 0
        self._start = start
        self._next = self._draw()

    def _draw(self) -> float:
        offset = self.rng.uniform(-self.jitter, self.jitter) if self.jitter > 0.0 else 0.0
        return self._start + self._index * self.period + offset

    def frames_until(self, time: float) -> list[float]:
        """Pop every frame timestamp up to and including ``time``."""
        frames = []
        while self._next <= time:
            frames.append(self._next)
            self._index += 1
            self._next = self._draw()
        return frames


class LocalizationSim:
    """
    Perception stack for one run at the system rate.

    The trailer pose is known at t=0 up to a bias drawn once per run; the bias
    affects only GNSS/INS measurements, the camera sees the trailer directly.
    """

    def __init__(
        self,
        trailer_pose: Pose2D,
        config: Optional[LocalizationConfig] = None,
        seed: int = 0,
    ):
        self.trailer_pose = trailer_pose
        self.config = config or LocalizationConfig()
        self.bands = self.config.noise_bands()
        self.rng = np.random.default_rng(seed)
        bias_sigma = np.array([
            self.config.bias_sigma_position,
            self.config.bias_sigma_position,
            math.radians(self.config.bias_sigma_heading_deg),
        ])
        self.bias = self.rng.standard_normal(POSE_DIM) * bias_sigma * self.config.noise_scale
        self.clock = CameraClock(
            self.bands.camera_rate, self.bands.camera_jitter, np.random.default_rng([seed, 1]),
        )
        self.estimate: Optional[PoseEstimate] = None
        self.measurements: list[PoseEstimate] = []
        self._previous_truth: Optional[tuple[float, np.ndarray]] = None
        self._accel_sigma = (
            self.config.process_accel_sigma,
            self.config.process_accel_sigma,
            self.config.process_yaw_accel_sigma,
        )

    def _measure_at(self, truth: np.ndarray, time: float, camera_frame: bool) -> Optional[PoseEstimate]:
        range_m = float(np.hypot(truth[0], truth[1]))
        measurement = measure(truth, range_m, self.rng, self.config, time, camera_frame)
        if measurement is not None and measurement.source is PoseSource.GNSS_INS:
            biased = measurement.state - self.bias
            measurement = PoseEstimate(biased, measurement.covariance, measurement.source, time)
        if measurement is not None:
            self.measurements.append(measurement)
        return measurement

    def _truth_at(self, time: float, truth: np.ndarray, now: float) -> np.ndarray:
        if self._previous_truth is None:
            return truth
        before, previous = self._previous_truth
        if now <= before:
            return truth
        weight = min(max((time - before) / (now - before), 0.0), 1.0)
        delta = truth - previous
        delta[2] = wrap_angle(delta[2])
        value = previous + weight * delta
        value[2] = wrap_angle(value[2])
        return value

    def _initialize(self, truth: np.ndarray, time: float) -> PoseEstimate:
        first = self._measure_at(truth, time, camera_frame=True)
        state = np.concatenate([first.state, np.zeros(3)])
        covariance = np.zeros((FILTER_DIM, FILTER_DIM))
        covariance[:3, :3] = first.covariance + np.diag(self.bias ** 2)
        covariance[3:, 3:] = np.eye(3) * self.config.initial_rate_sigma ** 2
        return PoseEstimate(state, covariance, first.source, time)

    def step(self, vessel_pose: Pose2D, time: float) -> PoseEstimate:
        """
        Advance the filter to ``time`` and return the estimate at the system rate.

        Camera frames that arrived since the last call are fused at their own
        timestamps; the truth at a frame time is interpolated between calls.
        """
        truth = relative_pose(vessel_pose, self.trailer_pose)
        if self.estimate is None:
            self.estimate = self._initialize(truth, time)
            self.clock.frames_until(time)
            self._previous_truth = (time, truth)
            return self.estimate

        estimate = self.estimate
        range_m = float(np.hypot(truth[0], truth[1]))
        frames = self.clock.frames_until(time)
        if range_m <= self.bands.camera_range:
            for frame_time in frames:
                if frame_time > estimate.timestamp:
                    estimate = kf_predict(estimate, frame_time - estimate.timestamp, self._accel_sigma)
                measurement = self._measure_at(self._truth_at(frame_time, truth, time), frame_time, True)
                estimate = kf_update(estimate, measurement)
        else:
            if time > estimate.timestamp:
                estimate = kf_predict(estimate, time - estimate.timestamp, self._accel_sigma)
            estimate = kf_update(estimate, self._measure_at(truth, time, camera_frame=False))

        if time > estimate.timestamp:
            estimate = kf_predict(estimate, time - estimate.timestamp, self._accel_sigma)
        if self.estimate.source is not estimate.source:
            logger.info(f"t={time:.1f}s localization source -> {estimate.source.value}", module="localization")
        self.estimate = estimate
        self._previous_truth = (time, truth)
        return estimate

    def world_pose(self) -> Pose2D:
        """Current estimate as a world-frame vessel pose."""
        if self.estimate is None:
            raise ValueError("no estimate yet; call step() first")
        return world_pose(self.trailer_pose, self.estimate.pose)

    def ins_velocity(self, u: float, v: float, r: float) -> np.ndarray:
        """Body velocities as reported by the INS."""
        sigma = np.array([
            self.config.ins_velocity_sigma, self.config.ins_velocity_sigma, self.config.ins_yaw_rate_sigma,
        ]) * self.config.noise_scale
        return np.array([u, v, r]) + self.rng.standard_normal(3) * sigma
