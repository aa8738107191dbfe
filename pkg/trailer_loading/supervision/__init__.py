"""Bail supervision."""

from trailer_loading.supervision.bail_supervisor import BailConfig, BailMode, BailSupervisor, FunnelParams

__all__ = ["BailConfig", "BailMode", "BailSupervisor", "FunnelParams"]
