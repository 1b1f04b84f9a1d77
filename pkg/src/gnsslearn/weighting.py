"""Classical per-satellite weighting models used as comparison baselines.

Both formulas are singular at zero elevation, so callers mask satellites
below an elevation cutoff before weighting instead of feeding them here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidElevation


@dataclass(frozen=True)
class ElevationWeightParams:
    """Variance model sigma^2 = a^2 + b^2 / sin^2(elevation), meters."""

    a: float = 0.3
    b: float = 0.3

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a and b must be positive")


@dataclass(frozen=True)
class Cn0WeightParams:
    """Constants of the C/N0-plus-elevation weight (dB-Hz domain)."""

    big_a: float = 30.0
    a: float = 20.0
    s0: float = 10.0
    s1: float = 50.0

    def __post_init__(self):
        if self.s0 >= self.s1:
            raise ValueError("s0 must be below s1")


def rtklib_weight(elevation: float, params: ElevationWeightParams = ElevationWeightParams()) -> float:
    """Inverse elevation-dependent variance, RTKLIB style."""
    if elevation <= 0.0:
        raise InvalidElevation(f"elevation {elevation:.4f} rad not in (0, pi/2]")
    sin_el = math.sin(elevation)
    return 1.0 / (params.a**2 + params.b**2 / (sin_el * sin_el))


def gogps_weight(cn0: float, elevation: float, params: Cn0WeightParams = Cn0WeightParams()) -> float:
    """C/N0- and elevation-dependent weight, goGPS style.

    Strong signals (cn0 >= s1) get weight 1; below s1 the weight decays
    exponentially in the C/N0 deficit and with 1/sin^2 of the elevation.
    """
    if elevation <= 0.0:
        raise InvalidElevation(f"elevation {elevation:.4f} rad not in (0, pi/2]")
    if cn0 >= params.s1:
        return 1.0
    k1 = -(cn0 - params.s1) / params.a
    k2 = (cn0 - params.s1) / (params.s0 - params.s1)
    k1_s0 = -(params.s0 - params.s1) / params.a
    sin_el = math.sin(elevation)
    return (1.0 / (sin_el * sin_el)) * 10.0**k1 * ((params.big_a / 10.0**k1_s0 - 1.0) * k2 + 1.0)
