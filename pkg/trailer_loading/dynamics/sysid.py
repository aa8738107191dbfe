"""
SystemIdentification - damping coefficients from maneuver logs by pseudo-inverse regression.

Synthetic maneuvers are simulated on the vessel model plant; the surge balance
is regressed on straight-line samples and the sway/yaw balances are stacked
and regressed on turning and zigzag samples.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.signal import savgol_filter

from trailer_loading.dynamics.params import VesselParams
from trailer_loading.dynamics.vessel_model import (
    STATE_DIM,
    VesselState,
    dynamics_batch,
    steady_surge_speed,
    thrust_force,
    wind_wrench_batch,
)
from trailer_loading.utils.logging import get_logger

logger = get_logger()

LOG_COLUMNS = ["t", "x", "y", "psi", "u", "v", "r", "rpm", "alpha", "wind_speed", "wind_dir"]
SURGE_PARAMS = ("Xu", "Xuu")
SWAY_YAW_PARAMS = ("Yv", "Yvv", "Yr", "Nv", "Nvv", "Nr", "Nrr")


class IllConditionedError(ValueError):
    """Regressor matrix cannot separate the requested coefficients."""

    def __init__(self, group: str, condition_number: float, detail: str = ""):
        self.group = group
        self.condition_number = condition_number
        message = f"{group} regression is ill-conditioned (condition number {condition_number:.3g})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class ManeuverKind(str, Enum):
    """Maneuver families of the identification suite."""
    STRAIGHT = "straight"
    TURNING = "turning"
    ZIGZAG = "zigzag"
    IDLE = "idle"


class ManeuverSpec(BaseModel):
    """
    Descriptor of one identification maneuver.

    Straight runs with negative rpm are reverse runs. ``start="steady"``
    begins at the analytic steady surge speed for the commanded rpm.
    """
    kind: ManeuverKind = ManeuverKind.STRAIGHT
    rpm: float = 1200.0
    alpha: float = Field(default=0.0, ge=-0.6, le=0.6)
    duration: float = Field(default=60.0, gt=0.0)
    zigzag_period: float = Field(default=20.0, gt=0.0)
    start: Literal["rest", "steady"] = "rest"
    dt: float = Field(default=0.05, gt=0.0, le=0.5)

    def control_at(self, t: float) -> tuple[float, float]:
        """Commanded (rpm, alpha) at time t."""
        if self.kind == ManeuverKind.IDLE:
            return 0.0, 0.0
        if self.kind == ManeuverKind.STRAIGHT:
            return self.rpm, 0.0
        if self.kind == ManeuverKind.ZIGZAG:
            phase = np.mod(t, self.zigzag_period)
            return self.rpm, self.alpha if phase < 0.5 * self.zigzag_period else -self.alpha
        return self.rpm, self.alpha


def default_suite() -> list[ManeuverSpec]:
    """
    Straight forward/reverse runs at several speeds, turning circles at four
    radii and two speeds, one zigzag.
    """
    suite = [
        ManeuverSpec(kind=ManeuverKind.STRAIGHT, rpm=rpm, duration=20.0, start="steady")
        for rpm in (800.0, 1200.0, 1600.0, 2000.0, 2400.0, -900.0, -1500.0)
    ]
    suite += [
        ManeuverSpec(kind=ManeuverKind.TURNING, rpm=rpm, alpha=alpha, duration=90.0)
        for rpm in (1200.0, 2000.0)
        for alpha in (0.1, 0.2, 0.3, 0.45)
    ]
    suite.append(ManeuverSpec(kind=ManeuverKind.ZIGZAG, rpm=1200.0, alpha=0.3, duration=80.0))
    return suite


@dataclass
class ManeuverLog:
    """
    Recorded maneuver: timestamps (N,), states (N, 6), controls (N-1 or N, 2), winds (N, 2).

    Wind rows hold (speed, direction-from).
    """
    timestamps: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    winds: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, STATE_DIM)
        self.controls = np.asarray(self.controls, dtype=float).reshape(-1, 2)
        self.winds = np.asarray(self.winds, dtype=float).reshape(-1, 2)
        n = self.timestamps.shape[0]
        if np.any(np.diff(self.timestamps) <= 0.0):
            raise ValueError("ManeuverLog timestamps must be strictly increasing")
        if self.states.shape[0] != n or self.winds.shape[0] != n:
            raise ValueError("ManeuverLog states and winds must match timestamps in length")
        if self.controls.shape[0] not in (n, n - 1):
            raise ValueError("ManeuverLog controls must have the same length as states or one fewer")

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    def state_at(self, index: int) -> VesselState:
        return VesselState.from_array(self.states[index])

    def to_frame(self) -> pd.DataFrame:
        n = len(self)
        controls = np.full((n, 2), np.nan)
        controls[: self.controls.shape[0]] = self.controls
        data = np.column_stack([self.timestamps, self.states, controls, self.winds])
        return pd.DataFrame(data, columns=LOG_COLUMNS)

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: str | Path) -> "ManeuverLog":
        frame = pd.read_csv(path)
        missing = set(LOG_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"maneuver log {path} is missing columns {sorted(missing)}")
        controls = frame[["rpm", "alpha"]].to_numpy()
        if np.isnan(controls[-1]).any():
            controls = controls[:-1]
        return cls(
            timestamps=frame["t"].to_numpy(),
            states=frame[["x", "y", "psi", "u", "v", "r"]].to_numpy(),
            controls=controls,
            winds=frame[["wind_speed", "wind_dir"]].to_numpy(),
            name=Path(path).stem,
        )


@dataclass
class RegressionSystem:
    """Linear system A @ theta ~= y for one coefficient group."""
    group: str
    names: tuple[str, ...]
    matrix: np.ndarray
    target: np.ndarray
    operating_points: int = 0

    @property
    def samples(self) -> int:
        return self.matrix.shape[0]

    def residual_norm(self, coefficients: np.ndarray) -> float:
        return float(np.linalg.norm(self.matrix @ coefficients - self.target))


@dataclass
class RegressionReport:
    """Estimated coefficients with fit diagnostics."""
    group: str
    estimated: dict[str, float]
    residual_norm: float
    condition_number: float
    samples_used: int
    relative_error: Optional[dict[str, float]] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "estimated": self.estimated,
            "residual_norm": self.residual_norm,
            "condition_number": self.condition_number,
            "samples_used": self.samples_used,
            "relative_error": self.relative_error,
            **self.extra,
        }

    def to_json(self, path: Optional[str | Path] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def _simulate_suite(params: VesselParams, suite: list[ManeuverSpec]) -> list[ManeuverLog]:
    """Euler-simulate every maneuver of a common dt as one vectorised batch."""
    logs: list[ManeuverLog] = []
    by_dt: dict[float, list[int]] = {}
    for index, spec in enumerate(suite):
        by_dt.setdefault(spec.dt, []).append(index)

    results: dict[int, ManeuverLog] = {}
    for dt, members in by_dt.items():
        specs = [suite[i] for i in members]
        steps = [int(round(spec.duration / dt)) for spec in specs]
        horizon = max(steps)
        states = np.zeros((horizon + 1, len(specs), STATE_DIM))
        for j, spec in enumerate(specs):
            if spec.start == "steady":
                states[0, j, 3] = steady_surge_speed(params, spec.control_at(0.0)[0])
        controls = np.zeros((horizon, len(specs), 2))
        for k in range(horizon):
            t = k * dt
            controls[k] = [spec.control_at(t) for spec in specs]
            derivative = dynamics_batch(params, states[k], controls[k])
            states[k + 1] = states[k] + dt * derivative

        for j, (spec, n) in enumerate(zip(specs, steps)):
            results[members[j]] = ManeuverLog(
                timestamps=np.arange(n + 1) * dt,
                states=states[: n + 1, j],
                controls=controls[:n, j],
                winds=np.zeros((n + 1, 2)),
                name=f"{spec.kind.value}_{spec.rpm:g}rpm_{spec.alpha:g}rad",
            )
    for index in range(len(suite)):
        logs.append(results[index])
    return logs


def add_measurement_noise(
    logs: list[ManeuverLog],
    noise_level: float,
    rng: np.random.Generator,
    yaw_noise_ratio: float = 0.1,
) -> list[ManeuverLog]:
    """
    Return copies of the logs with Gaussian noise on the body velocities.

    u and v get noise_level [m/s]; r gets noise_level * yaw_noise_ratio [rad/s].
    """
    if noise_level < 0.0:
        raise ValueError(f"noise level must be >= 0, got {noise_level}")
    noisy = []
    for log in logs:
        states = log.states.copy()
        if noise_level > 0.0:
            sigma = np.array([noise_level, noise_level, noise_level * yaw_noise_ratio])
            states[:, 3:6] += rng.normal(0.0, 1.0, size=(len(log), 3)) * sigma
        noisy.append(ManeuverLog(log.timestamps, states, log.controls.copy(), log.winds.copy(), log.name))
    return noisy


def generate_maneuvers(
    params: VesselParams,
    suite: list[ManeuverSpec],
    noise_level: float = 0.0,
    seed: int = 0,
    yaw_noise_ratio: float = 0.1,
) -> list[ManeuverLog]:
    """
    Simulate an identification suite on the vessel model plant.

    :param params: Generator parameters (ground truth)
    :param suite: Maneuver descriptors, must not be empty
    :param noise_level: Std of additive velocity noise [m/s]
    :param seed: Seed of the noise generator
    :param yaw_noise_ratio: Yaw-rate noise per unit velocity noise [rad/m]
    :return: One ManeuverLog per descriptor
    """
    if not suite:
        raise ValueError("maneuver suite must not be empty")
    if noise_level < 0.0:
        raise ValueError(f"noise level must be >= 0, got {noise_level}")
    logs = _simulate_suite(params, suite)
    logger.info(f"Simulated {len(logs)} maneuvers ({sum(len(log) for log in logs)} samples)", module="sysid")
    if noise_level > 0.0:
        logs = add_measurement_noise(logs, noise_level, np.random.default_rng(seed), yaw_noise_ratio)
    return logs


DerivativeMethod = Literal["difference", "savgol"]


def _derivatives(
    log: ManeuverLog, window: int, method: DerivativeMethod
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Velocities, accelerations and a centred steadiness estimate at samples 0..N-2.

    ``difference`` uses the forward difference (s[k+1] - s[k]) / dt, the exact
    model derivative for logs recorded at the integrator step under the control
    held from sample k. ``savgol`` smooths noisy velocities and averages the
    fitted derivative over [t_k, t_k+1] so it lines up with the same control.

    :return: (velocities, accelerations, centred accelerations), each (N-1, 3)
    """
    if method not in ("difference", "savgol"):
        raise ValueError(f"unknown derivative method {method!r}")
    velocities = log.states[:, 3:6]
    steps = np.diff(log.timestamps)[:, None]
    length = min(window, len(log))
    length -= 1 - length % 2
    if method == "difference" or length < 5:
        centred = np.gradient(velocities, log.timestamps, axis=0)
        return velocities[:-1], np.diff(velocities, axis=0) / steps, centred[:-1]

    dt = float(np.median(steps))
    smoothed = savgol_filter(velocities, window_length=length, polyorder=3, axis=0)
    slope = savgol_filter(velocities, window_length=length, polyorder=3, deriv=1, delta=dt, axis=0)
    return smoothed[:-1], 0.5 * (slope[:-1] + slope[1:]), slope[:-1]


def _forcing(params: VesselParams, controls: np.ndarray, states: np.ndarray, winds: np.ndarray) -> np.ndarray:
    """Known external wrench: propulsion plus wind, including a moving hull's own apparent wind."""
    force = thrust_force(params, controls[:, 0])
    alpha = controls[:, 1]
    propulsion = np.column_stack([
        2.0 * force * np.cos(alpha),
        2.0 * force * np.sin(alpha),
        -2.0 * force * params.Lx * np.sin(alpha),
    ])
    return propulsion + wind_wrench_batch(params, states, winds[:, 0], winds[:, 1])


@dataclass
class _BalanceRows:
    """Per-sample inputs of the force balances, aligned with the control held from each sample."""
    mask: np.ndarray
    controls: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    forcing: np.ndarray


def _balance_rows(
    log: ManeuverLog,
    params: VesselParams,
    steady_threshold: float,
    window: int,
    derivative: DerivativeMethod,
) -> _BalanceRows:
    """Samples with a held control whose every acceleration estimate is under the threshold."""
    n = min(len(log) - 1, log.controls.shape[0])
    if n <= 0:
        empty = np.zeros((0, 3))
        return _BalanceRows(np.zeros(0, dtype=bool), np.zeros((0, 2)), empty, empty, empty)

    velocities, accel, centred = (array[:n] for array in _derivatives(log, window, derivative))
    controls = log.controls[:n]
    mask = np.all(np.abs(centred) < steady_threshold, axis=1)

    if derivative == "savgol":
        # smoothing windows must not straddle a control switch or the log edges
        half = window // 2
        switches = np.flatnonzero(np.any(np.diff(controls, axis=0) != 0.0, axis=1)) + 1
        mask[:half] = False
        mask[max(n - half, 0):] = False
        for index in switches:
            mask[max(index - half, 0): index + half + 1] = False

    states = log.states[:n].copy()
    states[:, 3:6] = velocities
    forcing = _forcing(params, controls, states, log.winds[:n])
    return _BalanceRows(mask, controls, velocities, accel, forcing)


def _operating_points(controls: np.ndarray) -> set[tuple[float, float]]:
    """Distinct (rpm, |alpha|) conditions; mirrored turns excite the same terms."""
    return {(round(float(rpm), 6), round(abs(float(alpha)), 6)) for rpm, alpha in controls}


def build_surge_system(
    logs: list[ManeuverLog],
    params: VesselParams,
    steady_threshold: float = 0.01,
    window: int = 41,
    derivative: DerivativeMethod = "difference",
) -> RegressionSystem:
    """
    Surge balance on steady straight-line samples:

    tau_X + (m22*v + m23*r)*r - m11*u_dot = -Xu*u - Xuu*|u|*u
    """
    rows, targets, points = [], [], set()
    for log in logs:
        balance = _balance_rows(log, params, steady_threshold, window, derivative)
        straight = np.abs(balance.controls[:, 1]) < 1e-9
        engaged = thrust_force(params, balance.controls[:, 0]) != 0.0
        mask = balance.mask & straight & engaged
        points.update(_operating_points(balance.controls[mask]))
        u, v, r = balance.velocities[mask].T
        rows.append(np.column_stack([-u, -np.abs(u) * u]))
        targets.append(
            balance.forcing[mask, 0]
            + (params.m22 * v + params.m23 * r) * r
            - params.m11 * balance.accelerations[mask, 0]
        )
    return RegressionSystem(
        "surge", SURGE_PARAMS, np.vstack(rows), np.concatenate(targets), operating_points=len(points)
    )


def build_sway_yaw_system(
    logs: list[ManeuverLog],
    params: VesselParams,
    steady_threshold: float = 0.01,
    window: int = 41,
    derivative: DerivativeMethod = "difference",
) -> RegressionSystem:
    """
    Block-diagonal sway and yaw balances on steady turning samples.

    Sway: tau_Y - m11*u*r - (m22*v_dot + m23*r_dot) = -Yv*v - Yvv*|v|*v - Yr*r
    Yaw:  tau_N - (m22*v + m23*r)*u + m11*u*v - (m32*v_dot + m33*r_dot)
          = -Nv*v - Nvv*|v|*v - Nr*r - Nrr*|r|*r
    """
    sway_rows, sway_targets, yaw_rows, yaw_targets = [], [], [], []
    points = set()
    for log in logs:
        balance = _balance_rows(log, params, steady_threshold, window, derivative)
        turning = np.abs(balance.controls[:, 1]) > 1e-9
        mask = balance.mask & turning
        points.update(_operating_points(balance.controls[mask]))
        u, v, r = balance.velocities[mask].T
        v_dot, r_dot = balance.accelerations[mask, 1], balance.accelerations[mask, 2]
        tau = balance.forcing[mask]
        sway_rows.append(np.column_stack([-v, -np.abs(v) * v, -r]))
        sway_targets.append(tau[:, 1] - params.m11 * u * r - params.m22 * v_dot - params.m23 * r_dot)
        yaw_rows.append(np.column_stack([-v, -np.abs(v) * v, -r, -np.abs(r) * r]))
        yaw_targets.append(
            tau[:, 2]
            - (params.m22 * v + params.m23 * r) * u
            + params.m11 * u * v
            - params.m32 * v_dot
            - params.m33 * r_dot
        )

    sway = np.vstack(sway_rows)
    yaw = np.vstack(yaw_rows)
    matrix = np.zeros((sway.shape[0] + yaw.shape[0], 7))
    matrix[: sway.shape[0], :3] = sway
    matrix[sway.shape[0]:, 3:] = yaw
    target = np.concatenate(sway_targets + yaw_targets)
    return RegressionSystem("sway_yaw", SWAY_YAW_PARAMS, matrix, target, operating_points=len(points))


def condition_number(matrix: np.ndarray) -> float:
    """2-norm condition number after unit-RMS column scaling; inf when rank deficient."""
    if matrix.shape[0] < matrix.shape[1]:
        return float("inf")
    rms = np.sqrt(np.mean(matrix ** 2, axis=0))
    singular = np.linalg.svd(matrix / np.where(rms > 1e-12, rms, 1.0), compute_uv=False)
    if singular[-1] <= 0.0:
        return float("inf")
    return float(singular[0] / singular[-1])


def solve_regression(
    system: RegressionSystem,
    truth: Optional[VesselParams] = None,
    max_condition: float = 1e6,
) -> RegressionReport:
    """
    Pseudo-inverse solution with unit-RMS column scaling.

    :raises IllConditionedError: Too few samples or operating points, a dead column,
        or a condition number above max_condition
    """
    condition = condition_number(system.matrix)
    if system.samples < len(system.names):
        raise IllConditionedError(
            system.group, condition, f"only {system.samples} usable samples for {len(system.names)} coefficients"
        )
    if system.operating_points < 2:
        raise IllConditionedError(
            system.group,
            condition,
            f"modulus terms need at least two steady operating points, got {system.operating_points}",
        )
    scale = np.sqrt(np.mean(system.matrix ** 2, axis=0))
    if np.any(scale <= 1e-12):
        dead = [name for name, s in zip(system.names, scale) if s <= 1e-12]
        raise IllConditionedError(system.group, condition, f"no excitation of {dead}")
    if not np.isfinite(condition) or condition > max_condition:
        raise IllConditionedError(system.group, condition)

    coefficients = (np.linalg.pinv(system.matrix / scale) @ system.target) / scale
    estimated = {name: float(value) for name, value in zip(system.names, coefficients)}
    relative_error = None
    if truth is not None:
        relative_error = {
            name: abs(estimated[name] - getattr(truth, name)) / abs(getattr(truth, name))
            for name in system.names
        }
    report = RegressionReport(
        group=system.group,
        estimated=estimated,
        residual_norm=system.residual_norm(coefficients),
        condition_number=condition,
        samples_used=system.samples,
        relative_error=relative_error,
    )
    logger.info(
        f"{system.group}: {system.samples} samples, cond={condition:.3g}, residual={report.residual_norm:.4g}",
        module="sysid",
    )
    return report


def identify_surge(
    logs: list[ManeuverLog],
    params: Optional[VesselParams] = None,
    truth: Optional[VesselParams] = None,
    steady_threshold: float = 0.01,
    window: int = 41,
    derivative: DerivativeMethod = "difference",
) -> RegressionReport:
    """
    Regress Xu and Xuu from steady straight-line samples.

    :param params: Known inertia terms for the balance equations (defaults to the bundled table)
    :param truth: Optional generator parameters for relative errors
    :param derivative: ``difference`` for logs at the integrator step, ``savgol`` for noisy logs
    """
    params = params or VesselParams()
    system = build_surge_system(logs, params, steady_threshold, window, derivative)
    return solve_regression(system, truth)


def identify_sway_yaw(
    logs: list[ManeuverLog],
    params: Optional[VesselParams] = None,
    truth: Optional[VesselParams] = None,
    steady_threshold: float = 0.01,
    window: int = 41,
    derivative: DerivativeMethod = "difference",
) -> RegressionReport:
    """Regress Yv, Yvv, Yr, Nv, Nvv, Nr, Nrr from steady turning samples."""
    params = params or VesselParams()
    system = build_sway_yaw_system(logs, params, steady_threshold, window, derivative)
    return solve_regression(system, truth)


def identify_all(
    logs: list[ManeuverLog],
    params: Optional[VesselParams] = None,
    truth: Optional[VesselParams] = None,
    steady_threshold: float = 0.01,
    window: int = 41,
    derivative: DerivativeMethod = "difference",
) -> tuple[VesselParams, list[RegressionReport]]:
    """Run both regressions and return params with the damping terms replaced."""
    params = params or VesselParams()
    surge = identify_surge(logs, params, truth, steady_threshold, window, derivative)
    sway_yaw = identify_sway_yaw(logs, params, truth, steady_threshold, window, derivative)
    identified = params.with_updates(**surge.estimated, **sway_yaw.estimated)
    return identified, [surge, sway_yaw]
