"""Great-circle geometry on a spherical earth."""
from __future__ import annotations

import math

EARTH_RADIUS_M = 6371000.0


def distance_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine distance in metres between (lat, lon) points in degrees."""
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = (math.sin(dlat / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2)
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def initial_bearing_deg(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Forward azimuth from a toward b, degrees in [0, 360)."""
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    dlon = lon2 - lon1
    x = math.sin(dlon) * math.cos(lat2)
    y = (math.cos(lat1) * math.sin(lat2)
         - math.sin(lat1) * math.cos(lat2) * math.cos(dlon))
    return math.degrees(math.atan2(x, y)) % 360.0


def intermediate_point(a: tuple[float, float], b: tuple[float, float],
                       fraction: float) -> tuple[float, float]:
    """Point a given fraction along the great circle from a to b."""
    if fraction <= 0:
        return a
    if fraction >= 1:
        return b
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    delta = distance_m(a, b) / EARTH_RADIUS_M
    if delta == 0:
        return a
    sin_delta = math.sin(delta)
    f1 = math.sin((1 - fraction) * delta) / sin_delta
    f2 = math.sin(fraction * delta) / sin_delta
    x = f1 * math.cos(lat1) * math.cos(lon1) + f2 * math.cos(lat2) * math.cos(lon2)
    y = f1 * math.cos(lat1) * math.sin(lon1) + f2 * math.cos(lat2) * math.sin(lon2)
    z = f1 * math.sin(lat1) + f2 * math.sin(lat2)
    lat = math.atan2(z, math.sqrt(x * x + y * y))
    lon = math.atan2(y, x)
    return math.degrees(lat), math.degrees(lon)


def polyline_length_m(waypoints: list[tuple[float, float]]) -> float:
    return sum(distance_m(waypoints[i], waypoints[i + 1])
               for i in range(len(waypoints) - 1))


def polyline_position(waypoints: list[tuple[float, float]],
                      travelled_m: float) -> tuple[float, float, float]:
    """(lat, lon, bearing) after travelling the given distance along the line.

    Clamps to the endpoints; the bearing is the current leg's forward azimuth
    (final leg's at or past the end).
    """
    if len(waypoints) < 2:
        raise ValueError("polyline needs at least two waypoints")
    if travelled_m <= 0:
        a, b = waypoints[0], waypoints[1]
        return a[0], a[1], initial_bearing_deg(a, b)
    remaining = travelled_m
    for i in range(len(waypoints) - 1):
        a, b = waypoints[i], waypoints[i + 1]
        leg = distance_m(a, b)
        if remaining <= leg or i == len(waypoints) - 2:
            if remaining >= leg:
                return b[0], b[1], initial_bearing_deg(a, b)
            lat, lon = intermediate_point(a, b, remaining / leg)
            return lat, lon, initial_bearing_deg(a, b)
        remaining -= leg
    raise AssertionError("unreachable")
