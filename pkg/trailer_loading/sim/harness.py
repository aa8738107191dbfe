"""
Harness - closed-loop docking runs: plant, wind, sensors and the decision pipeline at 10 Hz.

The plant is always driven by the true wind. The pipeline sees the anemometer
reading, or calm air when the anemometer is disabled.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from trailer_loading.core import DockingPipeline, PipelineConfig
from trailer_loading.dynamics.vessel_model import CALM, ControlInput, VesselState, euler_step
from trailer_loading.perception.localization_sim import LocalizationConfig, LocalizationSim
from trailer_loading.planning.path_planner import Pose2D
from trailer_loading.sim.scenario import Scenario
from trailer_loading.sim.wind import WindProcessSpec, sense_wind, wind_process_step
from trailer_loading.supervision.bail_supervisor import BailMode
from trailer_loading.utils.angles import wrap_angle
from trailer_loading.utils.io import write_trace
from trailer_loading.utils.logging import get_logger

logger = get_logger()


class Outcome(str, Enum):
    SUCCESS = "success"
    MISS = "miss"
    TIMEOUT = "timeout"
    BAILED = "bailed"


@dataclass
class RunResult:
    """Scored outcome of one docking attempt plus its trace."""
    outcome: Outcome
    lateral_offset: float = float("nan")
    heading_error_deg: float = float("nan")
    entry_speed: float = float("nan")
    miss_distance: float = float("nan")
    bail_count: int = 0
    duration: float = 0.0
    trace_path: Optional[str] = None
    solve_times: list[float] = field(default_factory=list)
    budget_overruns: int = 0
    solver_failures: int = 0
    trace: Optional[pd.DataFrame] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "lateral_offset": self.lateral_offset,
            "heading_error_deg": self.heading_error_deg,
            "entry_speed": self.entry_speed,
            "miss_distance": self.miss_distance,
            "bail_count": self.bail_count,
            "duration": self.duration,
            "trace_path": self.trace_path,
            "budget_overruns": self.budget_overruns,
            "solver_failures": self.solver_failures,
            "solves": len(self.solve_times),
        }


@dataclass
class Crossing:
    lateral: float
    heading_error: float
    entry_speed: float


def _localization_config(config: PipelineConfig, scenario: Scenario) -> LocalizationConfig:
    if scenario.noise_profile == "none":
        return config.localization.model_copy(update={"noise_scale": 0.0})
    return config.localization.model_copy(update={"profile": scenario.noise_profile})


def bow_offsets(params_loa: float, state: VesselState, trailer: Pose2D) -> tuple[float, float]:
    """(along, across) trailer-frame offsets of the bow point, Loa/2 ahead of the origin."""
    bow = state.position + 0.5 * params_loa * np.array([math.cos(state.psi), math.sin(state.psi)])
    offset = bow - trailer.position
    axis = trailer.direction
    return float(offset @ axis), float(offset @ np.array([-axis[1], axis[0]]))


def _crossing(before: VesselState, after: VesselState, trailer: Pose2D, loa: float) -> Optional[Crossing]:
    along_before, cross_before = bow_offsets(loa, before, trailer)
    along_after, cross_after = bow_offsets(loa, after, trailer)
    if not (along_before < 0.0 <= along_after):
        return None
    weight = -along_before / (along_after - along_before)
    heading_before = wrap_angle(before.psi - trailer.heading)
    heading_after = heading_before + wrap_angle(after.psi - before.psi)
    return Crossing(
        lateral=cross_before + weight * (cross_after - cross_before),
        heading_error=wrap_angle(heading_before + weight * (heading_after - heading_before)),
        entry_speed=before.u + weight * (after.u - before.u),
    )


def run_scenario(
    scenario: Scenario,
    config: Optional[PipelineConfig] = None,
    trace_path: Optional[str | Path] = None,
) -> RunResult:
    """
    Run one docking attempt at the control rate.

    Terminates on the bow crossing the trailer entry plane, on timeout, or once
    a bail has recovered or exhausted its recovery time. Only the first
    attempt is scored: any bail yields BAILED.

    :raises ValueError: On configuration errors only
    """
    config = config or PipelineConfig()
    harness = config.harness
    params = config.vessel
    trailer = Pose2D(*scenario.trailer_pose)
    streams = np.random.SeedSequence(scenario.seed).spawn(3)
    wind_rng = np.random.default_rng(streams[0])
    anemometer_rng = np.random.default_rng(streams[1])
    localization_seed = int(streams[2].generate_state(1)[0])

    state = VesselState(*scenario.start_pose, *scenario.start_velocity)
    wind = scenario.wind.mean()
    localization = LocalizationSim(trailer, _localization_config(config, scenario), seed=localization_seed)
    localization.step(Pose2D(state.x, state.y, state.psi), 0.0)
    pipeline = DockingPipeline(config, trailer, localization.world_pose(), scenario.replan_mode)

    dt = harness.control_dt
    substeps = max(int(round(dt / harness.plant_dt)), 1)
    plant_dt = dt / substeps
    steps = int(math.ceil(scenario.max_duration / dt))
    rows: list[dict] = []
    crossing: Optional[Crossing] = None
    bailed_at: Optional[float] = None
    time = 0.0

    logger.info(
        f"{scenario.name}: start {scenario.start_pose}, wind {scenario.wind.mean_speed:.1f} m/s, "
        f"noise {scenario.noise_profile}, anemometer {'on' if scenario.anemometer_enabled else 'off'}",
        module="harness",
    )
    for step in range(steps):
        time = step * dt
        if step > 0:
            localization.step(Pose2D(state.x, state.y, state.psi), time)
        estimated_pose = localization.world_pose()
        estimate = localization.estimate
        u, v, r = localization.ins_velocity(state.u, state.v, state.r)
        estimated = VesselState(estimated_pose.x, estimated_pose.y, estimated_pose.heading, u, v, r)
        if scenario.anemometer_enabled:
            sensed = sense_wind(
                wind, anemometer_rng, harness.anemometer_speed_sigma, harness.anemometer_direction_sigma_deg,
            )
        else:
            sensed = CALM

        decision = pipeline.decide(estimated, sensed, time)
        control: ControlInput = decision.control
        status = decision.trajectory.solver_status.value if decision.trajectory is not None else ""
        rows.append({
            "t": time,
            "x": state.x, "y": state.y, "psi": state.psi,
            "u": state.u, "v": state.v, "r": state.r,
            "est_x": estimated.x, "est_y": estimated.y, "est_psi": estimated.psi,
            "est_source": estimate.source.value,
            "buffer_x": float(decision.buffer_point.position[0]),
            "buffer_y": float(decision.buffer_point.position[1]),
            "buffer_heading": decision.buffer_point.heading,
            "terminal": decision.buffer_point.is_terminal_phase,
            "rpm": control.rpm, "alpha": control.alpha,
            "mode": decision.bail_state.mode.value,
            "margin": decision.bail_state.margin,
            "wind_speed": wind.speed, "wind_direction": wind.direction,
            "sensed_wind_speed": sensed.speed, "sensed_wind_direction": sensed.direction,
            "solve_time": decision.solve_time,
            "solver_status": status,
        })

        if decision.bail_state.mode is BailMode.REVERSING and bailed_at is None:
            bailed_at = time
            logger.warning(f"{scenario.name}: bail at t={time:.1f}s", module="harness")
        if bailed_at is not None:
            recovered = decision.bail_state.mode is BailMode.DOCKING
            if recovered or time - bailed_at >= harness.bail_recovery_time:
                break

        for _ in range(substeps):
            previous = state
            state = euler_step(params, state, control, wind, plant_dt)
            crossing = _crossing(previous, state, trailer, params.Loa)
            if crossing is not None:
                break
        wind = wind_process_step(scenario.wind, wind, dt, wind_rng)
        if crossing is not None:
            time += dt
            break
    else:
        time = steps * dt

    result = _score(crossing, bailed_at, pipeline, config, time)
    result.trace = pd.DataFrame(rows)
    if trace_path is not None:
        result.trace_path = str(write_trace(result.trace, trace_path))
    logger.info(
        f"{scenario.name}: {result.outcome.value} after {result.duration:.1f}s "
        f"(lateral {result.lateral_offset:.3f} m, heading {result.heading_error_deg:.2f} deg, "
        f"speed {result.entry_speed:.2f} m/s)",
        module="harness",
    )
    return result


def _score(
    crossing: Optional[Crossing],
    bailed_at: Optional[float],
    pipeline: DockingPipeline,
    config: PipelineConfig,
    duration: float,
) -> RunResult:
    common = {
        "bail_count": pipeline.supervisor.bail_count,
        "duration": duration,
        "solve_times": list(pipeline.solve_times),
        "budget_overruns": pipeline.budget_overruns,
        "solver_failures": pipeline.solver_failures,
    }
    if bailed_at is not None:
        return RunResult(Outcome.BAILED, **common)
    if crossing is None:
        return RunResult(Outcome.TIMEOUT, **common)
    heading_deg = math.degrees(crossing.heading_error)
    met = config.harness.success.met(crossing.lateral, heading_deg, crossing.entry_speed)
    return RunResult(
        Outcome.SUCCESS if met else Outcome.MISS,
        lateral_offset=crossing.lateral,
        heading_error_deg=heading_deg,
        entry_speed=crossing.entry_speed,
        miss_distance=abs(crossing.lateral),
        **common,
    )


def solve_time_summary(solve_times: list[float]) -> dict:
    """Median, mean, tail percentiles and maximum of per-step solve times [s]."""
    if not solve_times:
        return {"count": 0}
    times = np.asarray(solve_times)
    return {
        "count": int(times.size),
        "mean": float(times.mean()),
        "median": float(np.median(times)),
        "p90": float(np.percentile(times, 90)),
        "p99": float(np.percentile(times, 99)),
        "max": float(times.max()),
    }


def run_ablation(
    scenario: Scenario,
    config: Optional[PipelineConfig] = None,
    trace_dir: Optional[str | Path] = None,
) -> dict:
    """
    Run the same scenario with and without the anemometer.

    :return: Dict with both RunResults and the miss-distance gap
    """
    results = {}
    for label, enabled in (("anemometer_on", True), ("anemometer_off", False)):
        variant = scenario.model_copy(update={"anemometer_enabled": enabled, "name": f"{scenario.name}-{label}"})
        trace = Path(trace_dir) / f"{variant.name}.csv" if trace_dir is not None else None
        results[label] = run_scenario(variant, config, trace)
    on, off = results["anemometer_on"], results["anemometer_off"]
    return {
        "anemometer_on": on,
        "anemometer_off": off,
        "miss_gap": off.miss_distance - on.miss_distance,
    }


def measure_solve_budget(
    scenario: Scenario,
    config: Optional[PipelineConfig] = None,
    limit: float = 1.0,
) -> dict:
    """Median warm-started receding-horizon solve time of one run against ``limit`` seconds."""
    variant = scenario.model_copy(update={"replan_mode": "receding_10hz"})
    result = run_scenario(variant, config)
    summary = solve_time_summary(result.solve_times)
    summary["limit"] = limit
    summary["within_budget"] = bool(summary.get("median", math.inf) <= limit)
    return summary


def straight_in(distance: float = 60.0, **updates) -> Scenario:
    """Aligned start ``distance`` metres behind a trailer at the origin."""
    return Scenario(**{"name": "straight_in", **updates, "start_pose": (-distance, 0.0, 0.0)})


def opposite_heading(distance: float = 60.0, **updates) -> Scenario:
    """Start ``distance`` metres behind the trailer pointing away from it."""
    return Scenario(**{"name": "opposite_heading", **updates, "start_pose": (-distance, 0.0, math.pi)})


def crosswind(speed: float = 6.0, **updates) -> Scenario:
    """Straight-in start under a steady wind from port (across the trailer axis)."""
    defaults = {
        "name": "crosswind",
        "wind": WindProcessSpec.steady(speed, math.pi / 2),
        "start_pose": (-60.0, 0.0, 0.0),
    }
    return Scenario(**{**defaults, **updates})
