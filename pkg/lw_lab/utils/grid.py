from __future__ import annotations

import math

from lw_lab.core.config import settings
from lw_lab.core.exceptions import InputError


def approx_le(a: float, b: float) -> bool:
    return a <= b + settings.TOLERANCE


def scaled_tol(reference: float) -> float:
    # absolute tolerance, widened for large utilities
    return settings.TOLERANCE * max(1.0, abs(reference))


def to_level(value: float, epsilon: float, what: str = "bid") -> int:
    if value < -settings.TOLERANCE:
        raise InputError(f"{what} {value} is negative")
    level = round(value / epsilon)
    if abs(level * epsilon - value) > settings.TOLERANCE * max(1.0, abs(value)):
        raise InputError(f"{what} {value} is not a multiple of the bid grid step {epsilon}")
    return int(level)


def budget_levels(budget: float, epsilon: float) -> int:
    if budget <= 0:
        return 0
    return int(math.floor(budget / epsilon + 1e-9))


def is_grid_multiple(value: float, epsilon: float) -> bool:
    return abs(round(value / epsilon) * epsilon - value) <= settings.TOLERANCE * max(1.0, abs(value))
