"""Localization simulation."""

from trailer_loading.perception.localization_sim import LocalizationConfig, LocalizationSim, NoiseBands

__all__ = ["LocalizationConfig", "LocalizationSim", "NoiseBands"]
