"""Local equirectangular meter frame shared by rasters and AIS positions.

Granule geotransforms already express pixel positions in meters east/north
of this frame: x = R * lon_rad * cos(lat_ref), y = R * lat_rad, with lat_ref
taken at the granule's own center. Adequate below scene scales of ~30 km;
this is deliberately not a geodesy library.
"""

from __future__ import annotations

import math

from .raster import Granule

EARTH_RADIUS_M = 6371008.8


def granule_lat_ref(g: Granule) -> float:
    """Reference latitude (radians) implied by the granule's center northing."""
    _, y_c = g.meta.pixel_to_meters(g.width / 2.0, g.height / 2.0)
    return y_c / EARTH_RADIUS_M


def latlon_to_meters(lat: float, lon: float, lat_ref: float) -> tuple[float, float]:
    x = EARTH_RADIUS_M * math.radians(lon) * math.cos(lat_ref)
    y = EARTH_RADIUS_M * math.radians(lat)
    return x, y


def meters_to_latlon(x: float, y: float, lat_ref: float) -> tuple[float, float]:
    lat = math.degrees(y / EARTH_RADIUS_M)
    lon = math.degrees(x / (EARTH_RADIUS_M * math.cos(lat_ref)))
    return lat, lon


def _point_segment_distance(p, a, b) -> float:
    px, py = p
    ax, ay = a
    bx, by = b
    vx, vy = bx - ax, by - ay
    seg2 = vx * vx + vy * vy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * vx + (py - ay) * vy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def footprint_corners(g: Granule) -> list[tuple[float, float]]:
    """Granule footprint in meters, corner order forming the boundary ring."""
    w, h = g.width, g.height
    return [g.meta.pixel_to_meters(c, r)
            for c, r in ((0, 0), (w, 0), (w, h), (0, h))]


def distance_to_footprint(point, corners) -> float:
    """0 inside the (convex) footprint, else distance to its boundary."""
    px, py = point
    n = len(corners)
    sides = []
    inside = True
    sign = 0.0
    for i in range(n):
        ax, ay = corners[i]
        bx, by = corners[(i + 1) % n]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cross != 0.0:
            if sign == 0.0:
                sign = math.copysign(1.0, cross)
            elif math.copysign(1.0, cross) != sign:
                inside = False
        sides.append(_point_segment_distance((px, py), (ax, ay), (bx, by)))
    return 0.0 if inside else min(sides)
