"""Geographic primitives: points, great-circle distance, bearings."""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True, order=True)
class GeoPoint:
    """A WGS84 coordinate. Latitude in [-90, 90], longitude in [-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


def haversine(p1: GeoPoint, p2: GeoPoint) -> float:
    """Great-circle distance in meters between two points.

    Uses the mean Earth radius (6,371,000 m). Symmetric and non-negative.
    """
    phi1 = math.radians(p1.lat)
    phi2 = math.radians(p2.lat)
    dphi = math.radians(p2.lat - p1.lat)
    dlam = math.radians(p2.lon - p1.lon)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    # clamp guards rounding for antipodal points
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def polyline_length_m(points) -> float:
    """Sum of haversine distances along an ordered point sequence."""
    return sum(haversine(a, b) for a, b in zip(points, points[1:]))


def initial_bearing_deg(p1: GeoPoint, p2: GeoPoint) -> float:
    """Forward azimuth from p1 to p2 in degrees, normalized to [0, 360)."""
    phi1 = math.radians(p1.lat)
    phi2 = math.radians(p2.lat)
    dlam = math.radians(p2.lon - p1.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.degrees(math.atan2(y, x)) % 360.0


def bearing_change_deg(bearing_in: float, bearing_out: float) -> float:
    """Signed change of direction in degrees, in [-180, 180).

    Positive values turn clockwise (right), negative counter-clockwise (left).
    """
    return (bearing_out - bearing_in + 540.0) % 360.0 - 180.0


def midpoint(points) -> GeoPoint:
    """Point of a polyline at half its length (on a vertex or interpolated)."""
    if len(points) == 1:
        return points[0]
    total = polyline_length_m(points)
    if total == 0.0:
        return points[0]
    half = total / 2.0
    acc = 0.0
    for a, b in zip(points, points[1:]):
        seg = haversine(a, b)
        if acc + seg >= half:
            t = 0.0 if seg == 0.0 else (half - acc) / seg
            return GeoPoint(a.lat + (b.lat - a.lat) * t, a.lon + (b.lon - a.lon) * t)
        acc += seg
    return points[-1]
