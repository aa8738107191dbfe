"""
Angle helpers shared by the model, planner and estimators.
"""

import numpy as np


def wrap_angle(angle):
    """
    Wrap an angle (scalar or array) to (-pi, pi].

    Values already inside the interval are returned bit-for-bit unchanged.

    :param angle: Angle in radians
    :return: Wrapped angle, same shape as the input
    """
    angle = np.asarray(angle, dtype=float)
    inside = (angle > -np.pi) & (angle <= np.pi)
    wrapped = np.where(inside, angle, np.pi - np.mod(np.pi - angle, 2.0 * np.pi))
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def mod2pi(angle: float) -> float:
    """Map an angle to [0, 2*pi), snapping values within 1e-10 of 2*pi to zero."""
    value = float(np.mod(angle, 2.0 * np.pi))
    if value > 2.0 * np.pi - 1e-10:
        return 0.0
    return value
