"""Spherical-earth geometry and propagation latency kernels.

All latencies are round-trip milliseconds unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_VACUUM_KM_S = 299792.458
EARTH_RADIUS_KM = 6371.0
FIBER_FACTOR = 2.0 / 3.0


@dataclass(frozen=True, order=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")
        if lon == 180.0:
            lon = -180.0
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class PropagationModel:
    fiber_factor: float = FIBER_FACTOR
    earth_radius: float = EARTH_RADIUS_KM
    c_vacuum: float = C_VACUUM_KM_S

    def __post_init__(self):
        if not 0.0 < self.fiber_factor <= 1.0:
            raise ValueError(f"fiber_factor must be in (0, 1], got {self.fiber_factor}")
        if self.earth_radius <= 0:
            raise ValueError(f"earth_radius must be positive, got {self.earth_radius}")


DEFAULT_MODEL = PropagationModel()


def central_angle(lat1, lon1, lat2, lon2):
    """Haversine central angle in radians; broadcasts over numpy arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlam = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2) ** 2
    h = np.clip(h, 0.0, 1.0)
    return 2.0 * np.arctan2(np.sqrt(h), np.sqrt(1.0 - h))


def great_circle_km(a: GeoPoint, b: GeoPoint, model: PropagationModel = DEFAULT_MODEL) -> float:
    if a == b:
        return 0.0
    # order the arguments so the result is bitwise symmetric
    if b < a:
        a, b = b, a
    return float(model.earth_radius * central_angle(a.lat, a.lon, b.lat, b.lon))


def great_circle_km_many(p: GeoPoint, lats, lons, model: PropagationModel = DEFAULT_MODEL) -> np.ndarray:
    return model.earth_radius * central_angle(p.lat, p.lon, np.asarray(lats), np.asarray(lons))


def c_latency_rtt_ms(a: GeoPoint, b: GeoPoint, model: PropagationModel = DEFAULT_MODEL) -> float:
    return 2000.0 * great_circle_km(a, b, model) / model.c_vacuum


def medium_latency_rtt_ms(path_km: float, speed_fraction: float,
                          model: PropagationModel = DEFAULT_MODEL) -> float:
    if speed_fraction <= 0 or speed_fraction > 1:
        raise ValueError(f"speed_fraction must be in (0, 1], got {speed_fraction}")
    if path_km < 0:
        raise ValueError(f"path length must be non-negative, got {path_km}")
    return 2000.0 * path_km / (speed_fraction * model.c_vacuum)


def fiber_latency_rtt_ms(path_km: float, model: PropagationModel = DEFAULT_MODEL) -> float:
    return medium_latency_rtt_ms(path_km, model.fiber_factor, model)


def inflation(measured_ms: float, c_latency_ms: float) -> float:
    """Ratio of a measured time to the c-latency. Values below 1 are legitimate."""
    if not c_latency_ms > 0:
        raise ValueError(f"c-latency must be positive, got {c_latency_ms}")
    return measured_ms / c_latency_ms


def reachable_radius_km(rtt_budget_ms: float, speed_fraction: float,
                        model: PropagationModel = DEFAULT_MODEL) -> float:
    """Surface distance a signal can cover out and back within ``rtt_budget_ms``."""
    if rtt_budget_ms < 0:
        raise ValueError(f"rtt budget must be non-negative, got {rtt_budget_ms}")
    return (rtt_budget_ms / 2000.0) * speed_fraction * model.c_vacuum


def interpolate(a: GeoPoint, b: GeoPoint, f: float) -> GeoPoint:
    """Point a fraction ``f`` of the way along the great circle from a to b."""
    d = float(central_angle(a.lat, a.lon, b.lat, b.lon))
    if d == 0:
        return a
    p1, l1, p2, l2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    s1 = math.sin((1 - f) * d) / math.sin(d)
    s2 = math.sin(f * d) / math.sin(d)
    x = s1 * math.cos(p1) * math.cos(l1) + s2 * math.cos(p2) * math.cos(l2)
    y = s1 * math.cos(p1) * math.sin(l1) + s2 * math.cos(p2) * math.sin(l2)
    z = s1 * math.sin(p1) + s2 * math.sin(p2)
    return GeoPoint(math.degrees(math.atan2(z, math.hypot(x, y))), _wrap_lon(math.degrees(math.atan2(y, x))))


def destination(p: GeoPoint, bearing_deg: float, dist_km: float,
                model: PropagationModel = DEFAULT_MODEL) -> GeoPoint:
    delta = dist_km / model.earth_radius
    theta = math.radians(bearing_deg)
    p1, l1 = math.radians(p.lat), math.radians(p.lon)
    p2 = math.asin(math.sin(p1) * math.cos(delta) + math.cos(p1) * math.sin(delta) * math.cos(theta))
    l2 = l1 + math.atan2(math.sin(theta) * math.sin(delta) * math.cos(p1),
                         math.cos(delta) - math.sin(p1) * math.sin(p2))
    return GeoPoint(math.degrees(p2), _wrap_lon(math.degrees(l2)))


def centroid(points: list[GeoPoint]) -> GeoPoint:
    """Normalized mean of unit vectors."""
    if not points:
        raise ValueError("centroid of no points")
    lat = np.radians([p.lat for p in points])
    lon = np.radians([p.lon for p in points])
    x = np.mean(np.cos(lat) * np.cos(lon))
    y = np.mean(np.cos(lat) * np.sin(lon))
    z = np.mean(np.sin(lat))
    return GeoPoint(math.degrees(math.atan2(z, math.hypot(x, y))), _wrap_lon(math.degrees(math.atan2(y, x))))


def _wrap_lon(lon: float) -> float:
    lon = (lon + 180.0) % 360.0 - 180.0
    return max(-180.0, min(lon, 180.0))
