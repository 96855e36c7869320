"""Local Dynamic Map: latest CAM-derived state per remote station."""

from __future__ import annotations

from dataclasses import dataclass

from coopcar.cam import CoopAwarenessMsg
from coopcar.positioning.frames import GeoPoint, haversine_m

DEFAULT_MAX_AGE_MS = 1500.0


@dataclass(frozen=True)
class LdmEntry:
    stationId: int
    position: GeoPoint
    speed: float | None
    heading: float | None
    lastCamGenDeltaTime: int
    insertTime: float


@dataclass(frozen=True)
class LdmQueryResult:
    entry: LdmEntry
    distance: float
    ageMs: float


class LocalDynamicMap:
    def __init__(self, max_age_ms: float = DEFAULT_MAX_AGE_MS) -> None:
        self.max_age_ms = max_age_ms
        self._entries: dict[int, LdmEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, station_id: object) -> bool:
        return station_id in self._entries

    def get(self, station_id: int) -> LdmEntry | None:
        return self._entries.get(station_id)

    def entries(self) -> list[LdmEntry]:
        return [self._entries[k] for k in sorted(self._entries)]

    def upsert(self, msg: CoopAwarenessMsg, now: float) -> bool:
        """Store ``msg`` as the latest state of its station.

        Returns False when nothing changed: a replay of the current
        (stationId, genDeltaTime), a CAM without position, or a receive time
        older than the stored entry.
        """
        position = msg.position
        if position is None:
            return False
        current = self._entries.get(msg.stationId)
        if current is not None:
            if current.lastCamGenDeltaTime == msg.genDeltaTime:
                return False
            if now < current.insertTime:
                return False
        self._entries[msg.stationId] = LdmEntry(
            stationId=msg.stationId,
            position=position,
            speed=msg.speed_mps,
            heading=msg.heading_deg,
            lastCamGenDeltaTime=msg.genDeltaTime,
            insertTime=now,
        )
        return True

    def query(self, center: GeoPoint, now: float, max_age_ms: float | None = None) -> list[LdmQueryResult]:
        limit = self.max_age_ms if max_age_ms is None else max_age_ms
        results = []
        for entry in self._entries.values():
            age = now - entry.insertTime
            if age <= limit:
                results.append(LdmQueryResult(entry, haversine_m(center, entry.position), age))
        results.sort(key=lambda r: (r.distance, r.entry.stationId))
        return results

    def gc(self, now: float, max_age_ms: float | None = None) -> list[int]:
        """Drop entries older than the limit; returns the removed station ids."""
        limit = self.max_age_ms if max_age_ms is None else max_age_ms
        stale = sorted(k for k, e in self._entries.items() if now - e.insertTime > limit)
        for k in stale:
            del self._entries[k]
        return stale
