"""Vessel dynamics and system identification."""

from trailer_loading.dynamics.params import VesselParams, WindCoefficients
from trailer_loading.dynamics.vessel_model import ControlInput, VesselState, WindCondition

__all__ = ["VesselParams", "WindCoefficients", "ControlInput", "VesselState", "WindCondition"]
