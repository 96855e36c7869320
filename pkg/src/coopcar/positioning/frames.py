"""Local track frame <-> WGS-84 conversion with a scenario scale factor.

The mini-cars report positions in a flat local frame (x east, y north,
meters). Before geodetic conversion every distance and speed is multiplied
by ``ScenarioFrame.scale`` so a 1:10 car looks like a full-size vehicle to
the C-ITS stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from coopcar.errors import InvalidPoseError, MissingPositionError

METERS_PER_DEG_LAT = 111320.0
EARTH_RADIUS_M = 6371000.0


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float
    altitude: float | None = None

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude < 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180)")


@dataclass(frozen=True)
class LocalPose:
    """Pose in the track frame. ``heading`` is degrees clockwise from north."""

    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0
    timestamp: int = 0

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise InvalidPoseError(f"negative speed {self.speed}")
        object.__setattr__(self, "heading", normalize_heading(self.heading))


@dataclass(frozen=True)
class ScenarioFrame:
    origin: GeoPoint = field(default_factory=lambda: GeoPoint(44.0, 11.0))
    scale: float = 10.0

    def __post_init__(self) -> None:
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be > 0, got {self.scale}")

    @property
    def meters_per_deg_lon(self) -> float:
        return METERS_PER_DEG_LAT * math.cos(math.radians(self.origin.latitude))

    def to_virtual(self, point: GeoPoint) -> tuple[float, float]:
        """Offset of ``point`` from the origin in scaled (virtual) meters."""
        return (
            (point.longitude - self.origin.longitude) * self.meters_per_deg_lon,
            (point.latitude - self.origin.latitude) * METERS_PER_DEG_LAT,
        )


@dataclass(frozen=True)
class PvtFix:
    """Position-velocity-time fix. ``None`` marks a field as unavailable."""

    position: GeoPoint | None = None
    speed: float | None = None
    heading: float | None = None
    timestamp: int | None = None

    @property
    def has_position(self) -> bool:
        return self.position is not None


def normalize_heading(deg: float) -> float:
    h = math.fmod(deg, 360.0)
    if h < 0:
        h += 360.0
    # fmod of a tiny negative can round up to exactly 360.0
    return 0.0 if h >= 360.0 else h


def local_to_geo(pose: LocalPose, frame: ScenarioFrame) -> PvtFix:
    values = (pose.x, pose.y, pose.heading, pose.speed)
    if not all(math.isfinite(v) for v in values):
        raise InvalidPoseError(f"non-finite pose {pose}")
    lat = frame.origin.latitude + pose.y * frame.scale / METERS_PER_DEG_LAT
    lon = frame.origin.longitude + pose.x * frame.scale / frame.meters_per_deg_lon
    return PvtFix(
        position=GeoPoint(lat, lon, frame.origin.altitude),
        speed=pose.speed * frame.scale,
        heading=pose.heading,
        timestamp=pose.timestamp,
    )


def geo_to_local(fix: PvtFix, frame: ScenarioFrame) -> LocalPose:
    if fix.position is None:
        raise MissingPositionError("fix has no position")
    vx, vy = frame.to_virtual(fix.position)
    return LocalPose(
        x=vx / frame.scale,
        y=vy / frame.scale,
        heading=fix.heading if fix.heading is not None else 0.0,
        speed=fix.speed / frame.scale if fix.speed is not None else 0.0,
        timestamp=fix.timestamp if fix.timestamp is not None else 0,
    )


def haversine_m(a: GeoPoint, b: GeoPoint, radius: float = EARTH_RADIUS_M) -> float:
    """Great-circle distance on a spherical Earth."""
    phi1 = math.radians(a.latitude)
    phi2 = math.radians(b.latitude)
    dphi = phi2 - phi1
    dlmb = math.radians(b.longitude - a.longitude)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * radius * math.asin(min(1.0, math.sqrt(h)))
