"""
PathPlanner - Dubins reference path, extended docking point and wind-shifted buffer point.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from trailer_loading.dynamics.vessel_model import WindCondition
from trailer_loading.utils.angles import mod2pi, wrap_angle
from trailer_loading.utils.logging import get_logger

logger = get_logger()

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_TURN = {"L": 1.0, "R": -1.0, "S": 0.0}


class PlannerConfig(BaseModel):
    """
    Reference-path and buffer-point settings.

    The default turning radius follows from a 2 m/s cruise speed at 0.15 rad/s
    maximum yaw rate.
    """
    min_radius: float = Field(default=2.0 / 0.15, gt=0.0)
    extension_length: float = Field(default=40.0, ge=0.0)
    lookahead: float = Field(default=20.0, gt=0.0)
    shift_gain: float = Field(default=0.5, ge=0.0)
    gate_distance: float = Field(default=50.0, gt=0.0)
    resolution: float = Field(default=0.1, gt=0.0, le=5.0)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose with heading wrapped to (-pi, pi]."""
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.heading), math.sin(self.heading)])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])


@dataclass(frozen=True)
class DubinsPath:
    """Three-segment curvature-bounded path; segment lengths in metres."""
    word: str
    segments: tuple[float, float, float]
    radius: float

    def __post_init__(self) -> None:
        if self.word not in WORDS:
            raise ValueError(f"unknown Dubins word {self.word!r}")
        if len(self.segments) != 3 or any(s < 0.0 for s in self.segments):
            raise ValueError("Dubins path needs three non-negative segment lengths")

    @property
    def length(self) -> float:
        return float(sum(self.segments))


@dataclass(frozen=True)
class BufferPoint:
    """Static reference point for one planning horizon."""
    position: np.ndarray
    heading: float
    is_terminal_phase: bool
    arc_length: float = 0.0
    projected_distance: float = float("inf")


def extend_docking_point(trailer_pose: Pose2D, extension_length: float) -> Pose2D:
    """
    Displace the trailer pose backward along its approach axis.

    :raises ValueError: If extension_length is negative
    """
    if extension_length < 0.0:
        raise ValueError(f"extension_length must be >= 0, got {extension_length}")
    offset = extension_length * trailer_pose.direction
    return Pose2D(trailer_pose.x - offset[0], trailer_pose.y - offset[1], trailer_pose.heading)


def _word_parameters(word: str, alpha: float, beta: float, d: float) -> Optional[tuple[float, float, float]]:
    """Normalised (t, p, q) of one word, or None when the word does not exist."""
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    c_ab = math.cos(alpha - beta)

    if word == "LSL":
        p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb)
        if p_sq < 0.0:
            return None
        tmp = math.atan2(cb - ca, d + sa - sb)
        return mod2pi(tmp - alpha), math.sqrt(p_sq), mod2pi(beta - tmp)
    if word == "RSR":
        p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa)
        if p_sq < 0.0:
            return None
        tmp = math.atan2(ca - cb, d - sa + sb)
        return mod2pi(alpha - tmp), math.sqrt(p_sq), mod2pi(tmp - beta)
    if word == "LSR":
        p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb)
        if p_sq < 0.0:
            return None
        p = math.sqrt(p_sq)
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return mod2pi(tmp - alpha), p, mod2pi(tmp - beta)
    if word == "RSL":
        p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb)
        if p_sq < 0.0:
            return None
        p = math.sqrt(p_sq)
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return mod2pi(alpha - tmp), p, mod2pi(beta - tmp)
    if word == "RLR":
        tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0
        if abs(tmp) > 1.0:
            return None
        phi = math.atan2(ca - cb, d - sa + sb)
        p = mod2pi(2.0 * math.pi - math.acos(tmp))
        t = mod2pi(alpha - phi + mod2pi(p / 2.0))
        return t, p, mod2pi(alpha - beta - t + mod2pi(p))
    if word == "LRL":
        tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0
        if abs(tmp) > 1.0:
            return None
        phi = math.atan2(ca - cb, d + sa - sb)
        p = mod2pi(2.0 * math.pi - math.acos(tmp))
        t = mod2pi(-alpha - phi + p / 2.0)
        return t, p, mod2pi(mod2pi(beta) - alpha - t + mod2pi(p))
    raise ValueError(f"unknown Dubins word {word!r}")


def enumerate_words(start: Pose2D, goal: Pose2D, min_radius: float) -> dict[str, DubinsPath]:
    """
    Every feasible word between two poses.

    :return: Mapping word -> DubinsPath (missing words do not exist for this pair)
    """
    if not min_radius > 0.0:
        raise ValueError(f"min_radius must be > 0, got {min_radius}")
    dx, dy = goal.x - start.x, goal.y - start.y
    d = math.hypot(dx, dy) / min_radius
    # coincident positions: measure angles from the start heading
    theta = mod2pi(math.atan2(dy, dx)) if d > 0.0 else mod2pi(start.heading)
    alpha = mod2pi(start.heading - theta)
    beta = mod2pi(goal.heading - theta)

    paths = {}
    for word in WORDS:
        params = _word_parameters(word, alpha, beta, d)
        if params is None:
            continue
        segments = tuple(float(value * min_radius) for value in params)
        paths[word] = DubinsPath(word, segments, min_radius)
    return paths


def dubins_shortest(start: Pose2D, goal: Pose2D, min_radius: float) -> DubinsPath:
    """
    Minimum-length Dubins path among the six words.

    Coincident poses yield a zero-length LSL path.
    """
    paths = enumerate_words(start, goal, min_radius)
    best = min(paths.values(), key=lambda path: path.length)
    logger.debug(f"Dubins {best.word} length={best.length:.2f} m", module="planner")
    return best


def _advance(x: float, y: float, heading: float, turn: float, length: float, radius: float):
    if turn == 0.0:
        return x + length * math.cos(heading), y + length * math.sin(heading), heading
    cx = x - turn * radius * math.sin(heading)
    cy = y + turn * radius * math.cos(heading)
    new_heading = heading + turn * length / radius
    return (
        cx + turn * radius * math.sin(new_heading),
        cy - turn * radius * math.cos(new_heading),
        new_heading,
    )


def sample_path(path: DubinsPath, start: Pose2D, arc_length: float) -> Pose2D:
    """
    Pose on the path at the given arc length from ``start``.

    :raises ValueError: If arc_length lies outside [0, path.length]
    """
    if arc_length < 0.0 or arc_length > path.length + 1e-9:
        raise ValueError(f"arc_length {arc_length} outside [0, {path.length}]")
    x, y, heading = start.x, start.y, start.heading
    remaining = min(arc_length, path.length)
    for letter, segment in zip(path.word, path.segments):
        step = min(remaining, segment)
        x, y, heading = _advance(x, y, heading, _TURN[letter], step, path.radius)
        remaining -= step
        if remaining <= 0.0:
            break
    return Pose2D(x, y, heading)


@dataclass
class ReferencePath:
    """
    Dubins path to the extended docking point followed by the straight run-in
    to the trailer, densely sampled.
    """
    start: Pose2D
    trailer_pose: Pose2D
    extended_pose: Pose2D
    dubins: DubinsPath
    arc_lengths: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    headings: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return float(self.arc_lengths[-1])

    def closest_index(self, position: np.ndarray) -> int:
        """Index of the densely sampled point nearest to ``position``."""
        offsets = self.points - np.asarray(position)[None, :]
        return int(np.argmin(np.einsum("ij,ij->i", offsets, offsets)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "arc_length": self.arc_lengths,
            "x": self.points[:, 0],
            "y": self.points[:, 1],
            "heading": self.headings,
        })


def build_reference_path(
    start: Pose2D,
    trailer_pose: Pose2D,
    config: Optional[PlannerConfig] = None,
) -> ReferencePath:
    """Plan the Dubins path to the extended docking point and append the run-in."""
    config = config or PlannerConfig()
    extended = extend_docking_point(trailer_pose, config.extension_length)
    dubins = dubins_shortest(start, extended, config.min_radius)
    total = dubins.length + config.extension_length

    count = max(int(math.ceil(total / config.resolution)), 1) + 1
    arc_lengths = np.linspace(0.0, total, count)
    points = np.empty((count, 2))
    headings = np.empty(count)
    for i, s in enumerate(arc_lengths):
        if s <= dubins.length:
            pose = sample_path(dubins, start, s)
        else:
            run_in = s - dubins.length
            pose = Pose2D(
                extended.x + run_in * math.cos(extended.heading),
                extended.y + run_in * math.sin(extended.heading),
                extended.heading,
            )
        points[i] = (pose.x, pose.y)
        headings[i] = pose.heading

    logger.info(
        f"Reference path {dubins.word}: {dubins.length:.1f} m + {config.extension_length:.1f} m run-in",
        module="planner",
    )
    return ReferencePath(start, trailer_pose, extended, dubins, arc_lengths, points, headings)


def export_polyline_csv(reference: ReferencePath, path: str | Path) -> None:
    """Write the sampled path as (arc_length, x, y, heading) rows."""
    reference.to_frame().to_csv(path, index=False)


def project_distance(trailer_pose: Pose2D, point: np.ndarray) -> float:
    """Distance from ``point`` to the trailer measured along the trailer approach axis."""
    return float(np.dot(trailer_pose.position - np.asarray(point), trailer_pose.direction))


def compute_buffer_point(
    reference: ReferencePath,
    vessel_pose: Pose2D,
    lookahead: float,
    wind: WindCondition,
    shift_gain: float,
    trailer_pose: Pose2D,
    gate_distance: float = 50.0,
) -> BufferPoint:
    """
    Floating reference point ``lookahead`` metres ahead of the vessel's projection.

    Outside the gate the point is shifted upwind by shift_gain * wind speed.
    Inside the gate the trailer pose itself is returned unshifted.

    :param reference: Sampled reference path
    :param vessel_pose: Current (estimated) vessel pose
    :param lookahead: Lookahead distance along the path [m]
    :param wind: Wind as seen by the planner (sensed, or calm when unavailable)
    :param shift_gain: Upwind shift per unit wind speed [s]
    :param trailer_pose: Docking target pose
    :param gate_distance: Projected distance below which the terminal phase starts [m]
    :return: BufferPoint
    """
    if not lookahead > 0.0:
        raise ValueError(f"lookahead must be > 0, got {lookahead}")
    if not gate_distance > 0.0:
        raise ValueError(f"gate_distance must be > 0, got {gate_distance}")

    nearest = reference.closest_index(vessel_pose.position)
    target_s = min(reference.arc_lengths[nearest] + lookahead, reference.length)
    index = int(np.searchsorted(reference.arc_lengths, target_s))
    index = min(index, len(reference.arc_lengths) - 1)
    point = reference.points[index]
    distance = project_distance(trailer_pose, point)

    if distance < gate_distance:
        return BufferPoint(
            position=trailer_pose.position,
            heading=trailer_pose.heading,
            is_terminal_phase=True,
            arc_length=float(reference.arc_lengths[index]),
            projected_distance=distance,
        )

    shift = shift_gain * wind.speed * np.array([math.cos(wind.direction), math.sin(wind.direction)])
    return BufferPoint(
        position=point + shift,
        heading=float(reference.headings[index]),
        is_terminal_phase=False,
        arc_length=float(reference.arc_lengths[index]),
        projected_distance=distance,
    )
