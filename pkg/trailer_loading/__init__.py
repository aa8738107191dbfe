"""
TrailerLoading - automated trailer loading for a surface vessel.

Main exports:
    - DockingPipeline: One decision step (buffer point, bail check, plan)
    - PipelineConfig: Aggregate configuration with JSON load/save
    - VesselParams: Hydrodynamic and propulsion constants
    - run_scenario: Closed-loop docking run at 10 Hz
    - run_monte_carlo: Randomized batches with success statistics
"""

from trailer_loading.core import DockingPipeline, PipelineConfig, load_config, save_config
from trailer_loading.dynamics.params import VesselParams
from trailer_loading.sim.harness import Outcome, RunResult, run_scenario
from trailer_loading.sim.monte_carlo import run_monte_carlo
from trailer_loading.sim.scenario import Scenario

__version__ = "0.3.0"
__all__ = [
    "DockingPipeline",
    "PipelineConfig",
    "load_config",
    "save_config",
    "VesselParams",
    "Outcome",
    "RunResult",
    "run_scenario",
    "run_monte_carlo",
    "Scenario",
]
