"""Day-1 Intersection Collision Warning over LDM contents.

Geometry is evaluated in scaled ("virtual") meters: the receiver only sees
CAM positions and speeds, which already carry the scenario scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from coopcar.ldm import LdmEntry, LdmQueryResult
from coopcar.positioning.frames import LocalPose, ScenarioFrame

MIN_SPEED_MPS = 0.1


class TtiStatus(enum.Enum):
    RECEDING = "receding"
    INSUFFICIENT_DATA = "insufficient-data"


@dataclass(frozen=True)
class IntersectionZone:
    center: tuple[float, float]  # track frame, physical meters
    radius: float = 7.5  # virtual meters

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("zone radius must be > 0")

    def center_virtual(self, frame: ScenarioFrame) -> tuple[float, float]:
        return self.center[0] * frame.scale, self.center[1] * frame.scale

    def contains_local(self, x: float, y: float, frame: ScenarioFrame) -> bool:
        """Ground-truth membership test for a physical track-frame point."""
        return math.hypot(x - self.center[0], y - self.center[1]) * frame.scale <= self.radius


@dataclass(frozen=True)
class IcwConfig:
    tti_threshold_s: float = 5.0
    ego_proximity_m: float = 20.0
    hold_ms: float = 1000.0

    def __post_init__(self) -> None:
        if min(self.tti_threshold_s, self.ego_proximity_m, self.hold_ms) <= 0:
            raise ValueError("ICW thresholds must be positive")


@dataclass(frozen=True)
class WarningEvent:
    time_ms: float
    remote_station_id: int
    tti_s: float | None
    remote_distance_m: float | None
    state: str  # "raised" or "cleared"


def time_to_intersection(entry: LdmEntry, zone: IntersectionZone, frame: ScenarioFrame) -> float | TtiStatus:
    if entry.speed is None or entry.heading is None:
        return TtiStatus.INSUFFICIENT_DATA
    if entry.speed < MIN_SPEED_MPS:
        return TtiStatus.RECEDING
    px, py = frame.to_virtual(entry.position)
    cx, cy = zone.center_virtual(frame)
    h = math.radians(entry.heading)
    ux, uy = math.sin(h), math.cos(h)
    along = max(0.0, (cx - px) * ux + (cy - py) * uy)
    qx, qy = px + along * ux, py + along * uy
    if math.hypot(cx - qx, cy - qy) > zone.radius:
        return TtiStatus.RECEDING
    return along / entry.speed


class IcwMonitor:
    """Edge-triggered warning state for one ego station."""

    def __init__(self, zone: IntersectionZone, config: IcwConfig, frame: ScenarioFrame) -> None:
        self.zone = zone
        self.config = config
        self.frame = frame
        self._raised: dict[int, bool] = {}
        self._last_true: dict[int, float] = {}

    @property
    def active(self) -> list[int]:
        return sorted(k for k, v in self._raised.items() if v)

    def evaluate(self, ego: LocalPose, results: list[LdmQueryResult], now: float) -> list[WarningEvent]:
        cx, cy = self.zone.center
        ego_near = math.hypot(ego.x - cx, ego.y - cy) * self.frame.scale <= self.config.ego_proximity_m
        events = []
        seen = set()
        for result in results:
            sid = result.entry.stationId
            seen.add(sid)
            tti = time_to_intersection(result.entry, self.zone, self.frame)
            hit = ego_near and isinstance(tti, float) and tti <= self.config.tti_threshold_s
            if hit:
                self._last_true[sid] = now
                if not self._raised.get(sid):
                    self._raised[sid] = True
                    events.append(WarningEvent(now, sid, tti, result.distance, "raised"))
            elif self._should_clear(sid, now):
                events.append(WarningEvent(now, sid, None, result.distance, "cleared"))
        for sid in sorted(set(self._raised) - seen):
            if self._should_clear(sid, now):
                events.append(WarningEvent(now, sid, None, None, "cleared"))
        return events

    def _should_clear(self, sid: int, now: float) -> bool:
        if not self._raised.get(sid):
            return False
        if now - self._last_true.get(sid, now) >= self.config.hold_ms:
            self._raised[sid] = False
            return True
        return False


def icw_evaluate(
    monitor: IcwMonitor, ego: LocalPose, results: list[LdmQueryResult], now: float
) -> list[WarningEvent]:
    return monitor.evaluate(ego, results, now)
