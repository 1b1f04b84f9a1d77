"""WGS-84 coordinate frames and satellite look angles.

ECEF <-> geodetic <-> local ENU conversions plus elevation/azimuth, used by
the solver Jacobian, the classical weighting formulas, and the horizontal /
3D error metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, NearSingularOrigin

# WGS-84 ellipsoid
WGS84_A = 6378137.0  # semi-major axis (m)
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)  # first eccentricity squared

_LAT_ITERATIONS = 10
_LAT_TOL = 1e-12  # rad


@dataclass(frozen=True)
class EcefPosition:
    """Point in the Earth-centered Earth-fixed frame, meters."""

    x: float
    y: float
    z: float

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "EcefPosition":
        return EcefPosition(float(a[0]), float(a[1]), float(a[2]))

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class GeodeticPosition:
    """Latitude/longitude in radians, height in meters above the WGS-84 ellipsoid."""

    latitude: float
    longitude: float
    height: float


@dataclass(frozen=True)
class EnuVector:
    """East/north/up offset in meters relative to some reference point."""

    east: float
    north: float
    up: float

    def to_array(self) -> np.ndarray:
        return np.array([self.east, self.north, self.up], dtype=float)

    def horizontal_norm(self) -> float:
        return math.hypot(self.east, self.north)

    def norm(self) -> float:
        return math.sqrt(self.east**2 + self.north**2 + self.up**2)


def geodetic_to_ecef(g: GeodeticPosition) -> EcefPosition:
    """Forward WGS-84 transform from (lat, lon, height) to ECEF."""
    sin_lat = math.sin(g.latitude)
    cos_lat = math.cos(g.latitude)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    x = (n + g.height) * cos_lat * math.cos(g.longitude)
    y = (n + g.height) * cos_lat * math.sin(g.longitude)
    z = (n * (1.0 - WGS84_E2) + g.height) * sin_lat
    return EcefPosition(x, y, z)


def ecef_to_geodetic(p: EcefPosition) -> GeodeticPosition:
    """Convert ECEF to geodetic via a bounded fixed-point latitude iteration.

    Raises NearSingularOrigin for points within 1 km of the Earth's center,
    where the conversion is meaningless.
    """
    if p.norm() <= 1e3:
        raise NearSingularOrigin(f"point too close to Earth center: |p| = {p.norm():.1f} m")

    rho = math.hypot(p.x, p.y)
    if rho < 1e-9:  # polar axis
        lat = math.copysign(math.pi / 2.0, p.z)
        return GeodeticPosition(lat, 0.0, abs(p.z) - WGS84_B)

    lon = math.atan2(p.y, p.x)
    lat = math.atan2(p.z, rho * (1.0 - WGS84_E2))
    for _ in range(_LAT_ITERATIONS):
        sin_lat = math.sin(lat)
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        height = rho / math.cos(lat) - n
        new_lat = math.atan2(p.z, rho * (1.0 - WGS84_E2 * n / (n + height)))
        done = abs(new_lat - lat) < _LAT_TOL
        lat = new_lat
        if done:
            break
    # near the poles rho/cos(lat) is ill-conditioned; z/sin(lat) is not
    sin_lat = math.sin(lat)
    cos_lat = math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    if abs(sin_lat) > abs(cos_lat):
        height = p.z / sin_lat - n * (1.0 - WGS84_E2)
    else:
        height = rho / cos_lat - n
    return GeodeticPosition(lat, lon, height)


def _enu_rotation(origin_geodetic: GeodeticPosition) -> np.ndarray:
    """Rows are the local east, north, up unit vectors expressed in ECEF."""
    sin_lat = math.sin(origin_geodetic.latitude)
    cos_lat = math.cos(origin_geodetic.latitude)
    sin_lon = math.sin(origin_geodetic.longitude)
    cos_lon = math.cos(origin_geodetic.longitude)
    return np.array(
        [
            [-sin_lon, cos_lon, 0.0],
            [-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat],
            [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat],
        ]
    )


def ecef_to_enu(p: EcefPosition, origin: EcefPosition) -> EnuVector:
    """Rotate (p - origin) into the local tangent frame at origin."""
    rot = _enu_rotation(ecef_to_geodetic(origin))
    enu = rot @ (p.to_array() - origin.to_array())
    return EnuVector(float(enu[0]), float(enu[1]), float(enu[2]))


def enu_to_ecef(v: EnuVector, origin: EcefPosition) -> EcefPosition:
    """Inverse of ecef_to_enu at the same origin."""
    rot = _enu_rotation(ecef_to_geodetic(origin))
    p = origin.to_array() + rot.T @ v.to_array()
    return EcefPosition.from_array(p)


def elevation_azimuth(receiver: EcefPosition, satellite: EcefPosition) -> tuple[float, float]:
    """Satellite look angles from the receiver's local horizon.

    Returns (elevation, azimuth) in radians; elevation in [-pi/2, pi/2],
    azimuth clockwise from north in [0, 2*pi).
    """
    los = satellite.to_array() - receiver.to_array()
    dist = float(np.linalg.norm(los))
    if dist < 1.0:
        raise DegenerateGeometry(f"satellite within {dist:.3f} m of receiver")
    enu = _enu_rotation(ecef_to_geodetic(receiver)) @ (los / dist)
    elevation = math.asin(max(-1.0, min(1.0, float(enu[2]))))
    azimuth = math.atan2(float(enu[0]), float(enu[1])) % (2.0 * math.pi)
    if azimuth >= 2.0 * math.pi:  # tiny negative atan2 wraps onto 2*pi exactly
        azimuth = 0.0
    return elevation, azimuth
