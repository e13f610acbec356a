"""WGS-84 coordinate conversions between geodetic, ECEF and local ENU frames.

All functions are pure and thread-safe. Latitude/longitude are degrees,
heights and Cartesian coordinates are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# WGS-84 ellipsoid
WGS84_A = 6378137.0                     # semi-major axis (m)
WGS84_F = 1.0 / 298.257223563           # flattening
WGS84_B = WGS84_A * (1.0 - WGS84_F)     # semi-minor axis (m)
_E2 = 1.0 - (WGS84_B * WGS84_B) / (WGS84_A * WGS84_A)   # first eccentricity^2
_EP2 = _E2 / (1.0 - _E2)                                 # second eccentricity^2

# Refinement target for the ECEF -> geodetic inverse, radians.
_LAT_TOL_RAD = 1e-12


@dataclass(frozen=True, slots=True)
class GeodeticCoord:
    """Geodetic position: latitude/longitude in degrees, height above the ellipsoid."""

    lat: float
    lon: float
    height: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon) and math.isfinite(self.height)):
            raise ValueError("geodetic coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        # normalize longitude into (-180, 180]
        lon = math.fmod(self.lon, 360.0)
        if lon > 180.0:
            lon -= 360.0
        elif lon <= -180.0:
            lon += 360.0
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True, slots=True)
class EcefCoord:
    """Earth-centered, Earth-fixed Cartesian position in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("ECEF coordinates must be finite")

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True, slots=True)
class EnuCoord:
    """Local East-North-Up offset in meters relative to a geodetic reference."""

    e: float
    n: float
    u: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.e) and math.isfinite(self.n) and math.isfinite(self.u)):
            raise ValueError("ENU coordinates must be finite")


# Default tangent-plane anchor used by the trace generators (central Florida
# test area). Traces generated around a different reference must pass it
# explicitly wherever a reference parameter is accepted.
DEFAULT_REFERENCE = GeodeticCoord(28.6, -81.2, 30.0)


def geodetic_to_ecef(g: GeodeticCoord) -> EcefCoord:
    """Forward WGS-84 conversion from geodetic to ECEF."""
    lat = math.radians(g.lat)
    lon = math.radians(g.lon)
    sin_lat = math.sin(lat)
    cos_lat = math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - _E2 * sin_lat * sin_lat)
    x = (n + g.height) * cos_lat * math.cos(lon)
    y = (n + g.height) * cos_lat * math.sin(lon)
    z = (n * (1.0 - _E2) + g.height) * sin_lat
    return EcefCoord(x, y, z)


def enu_rotation(ref: GeodeticCoord) -> np.ndarray:
    """3x3 matrix whose columns are the local east/north/up axes in ECEF.

    Multiplying an ENU column vector by this matrix yields an ECEF offset
    from the reference point.
    """
    lat = math.radians(ref.lat)
    lon = math.radians(ref.lon)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([
        [-so, -sl * co, cl * co],
        [co, -sl * so, cl * so],
        [0.0, cl, sl],
    ])


def enu_to_ecef(p: EnuCoord, ref: GeodeticCoord) -> EcefCoord:
    """Rotate a local ENU offset into ECEF and translate by the reference point."""
    lat = math.radians(ref.lat)
    lon = math.radians(ref.lon)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    r = geodetic_to_ecef(ref)
    x = -so * p.e - sl * co * p.n + cl * co * p.u + r.x
    y = co * p.e - sl * so * p.n + cl * so * p.u + r.y
    z = cl * p.n + sl * p.u + r.z
    return EcefCoord(x, y, z)


def ecef_to_enu(p: EcefCoord, ref: GeodeticCoord) -> EnuCoord:
    """Inverse of enu_to_ecef: ECEF position to local ENU offset around ref."""
    lat = math.radians(ref.lat)
    lon = math.radians(ref.lon)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    r = geodetic_to_ecef(ref)
    dx, dy, dz = p.x - r.x, p.y - r.y, p.z - r.z
    e = -so * dx + co * dy
    n = -sl * co * dx - sl * so * dy + cl * dz
    u = cl * co * dx + cl * so * dy + sl * dz
    return EnuCoord(e, n, u)


def ecef_to_geodetic(p: EcefCoord) -> GeodeticCoord:
    """Closed-form (Ferrari-style) inverse of geodetic_to_ecef, plus Newton polish.

    Longitude at the poles is reported as 0. Raises ValueError for points at
    (or numerically indistinguishable from) the Earth center.
    """
    if p.norm() < 1.0:
        raise ValueError("ECEF point too close to Earth center to invert")

    x, y, z = p.x, p.y, p.z
    r = math.hypot(x, y)
    if r < 1e-9:
        # polar axis: latitude is +/-90, longitude degenerate
        return GeodeticCoord(math.copysign(90.0, z) if z != 0.0 else 90.0, 0.0, abs(z) - WGS84_B)

    a, b, e2 = WGS84_A, WGS84_B, _E2
    big_e2 = a * a - b * b
    f = 54.0 * b * b * z * z
    g = r * r + (1.0 - e2) * z * z - e2 * big_e2
    c = e2 * e2 * f * r * r / (g * g * g)
    s = (1.0 + c + math.sqrt(c * c + 2.0 * c)) ** (1.0 / 3.0)
    t = s + 1.0 / s + 1.0
    pp = f / (3.0 * t * t * g * g)
    q = math.sqrt(1.0 + 2.0 * e2 * e2 * pp)
    r0 = -pp * e2 * r / (1.0 + q) + math.sqrt(
        max(
            0.0,
            0.5 * a * a * (1.0 + 1.0 / q)
            - pp * (1.0 - e2) * z * z / (q * (1.0 + q))
            - 0.5 * pp * r * r,
        )
    )
    u = math.hypot(r - e2 * r0, z)
    v = math.sqrt((r - e2 * r0) ** 2 + (1.0 - e2) * z * z)
    z0 = b * b * z / (a * v)
    height = u * (1.0 - b * b / (a * v))
    lat = math.atan((z + _EP2 * z0) / r)

    # Newton-style polish of the latitude/height pair to _LAT_TOL_RAD.
    for _ in range(4):
        sin_lat = math.sin(lat)
        n = a / math.sqrt(1.0 - e2 * sin_lat * sin_lat)
        height = r / math.cos(lat) - n
        new_lat = math.atan2(z, r * (1.0 - e2 * n / (n + height)))
        if abs(new_lat - lat) < _LAT_TOL_RAD:
            lat = new_lat
            break
        lat = new_lat

    sin_lat = math.sin(lat)
    n = a / math.sqrt(1.0 - e2 * sin_lat * sin_lat)
    height = r / math.cos(lat) - n

    return GeodeticCoord(math.degrees(lat), math.degrees(math.atan2(y, x)), height)
