"""
MonteCarlo - randomized batches of docking runs with success statistics.

Trials are independent and seeded from one SeedSequence, so a batch is
reproducible whether it runs serially or on a process pool. Wall-clock solve
timing is kept in a separate section because it is not reproducible.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.stats import norm

from trailer_loading.core import PipelineConfig
from trailer_loading.sim.harness import Outcome, run_scenario, solve_time_summary
from trailer_loading.sim.scenario import Scenario
from trailer_loading.sim.wind import WindProcessSpec
from trailer_loading.utils.io import write_json
from trailer_loading.utils.logging import get_logger

logger = get_logger()

REPORT_LABEL = "desk-scale analogue of the field trials, not a replication"


class TrialRandomization(BaseModel):
    """How each trial's start pose is drawn around the trailer axis."""
    min_range: float = Field(default=40.0, gt=0.0)
    max_range: float = Field(default=80.0, gt=0.0)
    bearing_spread_deg: float = Field(default=20.0, ge=0.0, lt=90.0)
    heading_spread_deg: float = Field(default=20.0, ge=0.0, le=180.0)

    @model_validator(mode="after")
    def _check_range(self) -> "TrialRandomization":
        if self.min_range > self.max_range:
            raise ValueError("min_range must not exceed max_range")
        return self


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError(f"trials must be >= 1, got {trials}")
    z = float(norm.ppf(0.5 + 0.5 * confidence))
    p = successes / trials
    denominator = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denominator
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half)


def randomize_scenario(
    template: Scenario,
    randomization: TrialRandomization,
    sequence: np.random.SeedSequence,
    index: int,
) -> Scenario:
    """Draw one trial's start pose and seed from its own SeedSequence child."""
    rng = np.random.default_rng(sequence)
    tx, ty, axis = template.trailer_pose
    distance = rng.uniform(randomization.min_range, randomization.max_range)
    bearing = axis + math.radians(rng.uniform(-randomization.bearing_spread_deg, randomization.bearing_spread_deg))
    x = tx - distance * math.cos(bearing)
    y = ty - distance * math.sin(bearing)
    heading = bearing + math.radians(
        rng.uniform(-randomization.heading_spread_deg, randomization.heading_spread_deg)
    )
    return template.model_copy(update={
        "name": f"{template.name}-{index:04d}",
        "start_pose": (x, y, heading),
        "seed": int(rng.integers(0, 2**31 - 1)),
    })


def _run_trial(job: tuple[dict, dict, Optional[str]]) -> dict:
    scenario_data, config_data, trace_path = job
    scenario = Scenario.model_validate(scenario_data)
    config = PipelineConfig.model_validate(config_data)
    result = run_scenario(scenario, config, trace_path)
    summary = result.to_dict()
    summary["name"] = scenario.name
    summary["seed"] = scenario.seed
    summary["start_pose"] = list(scenario.start_pose)
    summary["solve_times"] = result.solve_times
    return summary


@dataclass
class MonteCarloReport:
    """Aggregate of one batch; ``statistics`` is deterministic, ``timing`` is not."""
    template: str
    n_trials: int
    seed: int
    successes: int
    success_rate: float
    wilson_low: float
    wilson_high: float
    histogram: dict[str, int]
    trials: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    label: str = REPORT_LABEL

    def statistics(self) -> dict:
        return {
            "template": self.template,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "wilson_95": [self.wilson_low, self.wilson_high],
            "histogram": dict(self.histogram),
            "trials": [{k: v for k, v in trial.items() if k != "solve_times"} for trial in self.trials],
        }

    def to_dict(self) -> dict:
        return {"label": self.label, "statistics": self.statistics(), "timing": self.timing}

    def to_json(self, path: str | Path) -> None:
        write_json(self.to_dict(), path)


def run_monte_carlo(
    template: Scenario,
    n_trials: int,
    seed: int = 0,
    config: Optional[PipelineConfig] = None,
    randomization: Optional[TrialRandomization] = None,
    workers: int = 1,
    trace_dir: Optional[str | Path] = None,
) -> MonteCarloReport:
    """
    Run ``n_trials`` randomized trials of ``template``.

    :param seed: Root seed; each trial gets its own spawned stream
    :param workers: Process count; 1 runs serially in this process
    :param trace_dir: Optional directory receiving one trace CSV per trial
    :raises ValueError: If n_trials < 1 or workers < 1
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    config = config or PipelineConfig()
    randomization = randomization or TrialRandomization()
    children = np.random.SeedSequence(seed).spawn(n_trials)
    scenarios = [randomize_scenario(template, randomization, child, i) for i, child in enumerate(children)]

    config_data = config.model_dump(mode="json")
    jobs = []
    for scenario in scenarios:
        trace = str(Path(trace_dir) / f"{scenario.name}.csv") if trace_dir is not None else None
        jobs.append((scenario.model_dump(mode="json"), config_data, trace))

    logger.info(f"Monte Carlo {template.name}: {n_trials} trials, seed {seed}, {workers} worker(s)", module="harness")
    if workers == 1:
        trials = [_run_trial(job) for job in jobs]
    else:
        with Pool(processes=workers) as pool:
            trials = pool.map(_run_trial, jobs)

    histogram = Counter(trial["outcome"] for trial in trials)
    successes = histogram.get(Outcome.SUCCESS.value, 0)
    low, high = wilson_interval(successes, n_trials)
    all_times = [t for trial in trials for t in trial["solve_times"]]
    report = MonteCarloReport(
        template=template.name,
        n_trials=n_trials,
        seed=seed,
        successes=successes,
        success_rate=successes / n_trials,
        wilson_low=low,
        wilson_high=high,
        histogram={outcome.value: histogram.get(outcome.value, 0) for outcome in Outcome},
        trials=trials,
        timing=solve_time_summary(all_times),
    )
    logger.info(
        f"Monte Carlo {template.name}: {successes}/{n_trials} success "
        f"({report.success_rate:.1%}, 95% CI {low:.1%}-{high:.1%})",
        module="harness",
    )
    return report


def calm_control(template: Scenario) -> Scenario:
    """The template with the wind switched off, as a control batch."""
    return template.model_copy(update={
        "name": f"{template.name}-calm",
        "wind": WindProcessSpec.steady(0.0, template.wind.mean_direction),
    })
