"""Small shared statistics helpers: interval estimates for MC diagnostics."""

from __future__ import annotations

import math

__all__ = ["wilson_interval", "dkw_epsilon"]


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def dkw_epsilon(n: int, delta: float = 0.001) -> float:
    """Half-width of the DKW confidence band at confidence 1 - delta."""
    if n <= 0:
        raise ValueError("need at least one sample")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))
