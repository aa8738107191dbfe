"""Reference path, buffer point and trajectory optimization."""

from trailer_loading.planning.path_planner import BufferPoint, PlannerConfig, Pose2D
from trailer_loading.planning.sqp import SolverStatus, SQPSolver
from trailer_loading.planning.trajectory_optimizer import OptimizerConfig, Trajectory

__all__ = [
    "BufferPoint",
    "PlannerConfig",
    "Pose2D",
    "SolverStatus",
    "SQPSolver",
    "OptimizerConfig",
    "Trajectory",
]
