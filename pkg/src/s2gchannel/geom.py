"""Satellite/receiver geometry on a spherical Earth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
EARTH_RADIUS_M = EARTH_RADIUS_KM * 1000.0


@dataclass(frozen=True)
class SatelliteGeometry:
    """Satellite position as seen from the scene.

    altitude is in km above the mean Earth surface, elevation and azimuth
    in degrees (azimuth clockwise from north).
    """

    altitude: float = 550.0
    elevation: float = 40.0
    azimuth: float = 180.0

    def __post_init__(self):
        if not self.altitude > 0:
            raise ValueError(f"altitude must be positive, got {self.altitude}")
        if not 0 < self.elevation <= 90:
            raise ValueError(f"elevation must be in (0, 90], got {self.elevation}")
        if not 0 <= self.azimuth < 360:
            raise ValueError(f"azimuth must be in [0, 360), got {self.azimuth}")

    @property
    def slant_range_km(self) -> float:
        return slant_range(self.altitude, self.elevation)

    @property
    def direction(self) -> np.ndarray:
        return sat_direction(self.elevation, self.azimuth)


def slant_range(altitude: float, elevation: float) -> float:
    """Distance in km from a ground point to a satellite at `altitude` km
    seen at `elevation` degrees."""
    s = math.sin(math.radians(elevation))
    re = EARTH_RADIUS_KM
    if elevation == 90:
        return float(altitude)
    return math.sqrt((re * s) ** 2 + 2 * re * altitude + altitude**2) - re * s


def sat_direction(elevation: float, azimuth: float) -> np.ndarray:
    """Unit vector (east, north, up) pointing from the ground to the satellite."""
    el = math.radians(elevation)
    az = math.radians(azimuth)
    if elevation == 90:
        return np.array([0.0, 0.0, 1.0])
    v = np.array([math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)])
    return v / np.linalg.norm(v)


def to_local(origin: tuple[float, float], p: tuple[float, float]) -> tuple[float, float]:
    """Equirectangular projection of geodetic `p` = (lat, lon) about `origin`.

    Returns (east, north) in meters. Valid for offsets under one degree.
    """
    lat0, lon0 = origin
    lat, lon = p
    east = math.radians(lon - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    north = math.radians(lat - lat0) * EARTH_RADIUS_M
    return east, north


def to_geodetic(origin: tuple[float, float], xy: tuple[float, float]) -> tuple[float, float]:
    """Inverse of :func:`to_local`."""
    lat0, lon0 = origin
    east, north = xy
    lat = lat0 + math.degrees(north / EARTH_RADIUS_M)
    lon = lon0 + math.degrees(east / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat, lon
