"""Utility modules."""

from trailer_loading.utils.logging import DockLogger, get_logger

__all__ = ["DockLogger", "get_logger"]
