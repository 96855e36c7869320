"""Positioning providers feeding PVT fixes to a station.

Pose-driven providers turn the simulator's ground-truth pose into a fix.
:class:`NmeaBridgeProvider` routes every fix through NMEA text the way the
car's bridge script and gpsd would; :class:`DirectProvider` skips the text
step. :class:`TraceProvider` replays a recorded JSON-lines trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator, Protocol

from coopcar.errors import TraceError
from coopcar.positioning.frames import GeoPoint, LocalPose, PvtFix, ScenarioFrame, local_to_geo
from coopcar.positioning.nmea import NmeaResult, merge_fixes, nmea_generate, nmea_parse

TRACE_FIELDS = ("t_ms", "lat", "lon", "speed_mps", "heading_deg")


class PoseProvider(Protocol):
    def fix_for(self, pose: LocalPose) -> PvtFix: ...


class DirectProvider:
    def __init__(self, frame: ScenarioFrame) -> None:
        self.frame = frame

    def fix_for(self, pose: LocalPose) -> PvtFix:
        return local_to_geo(pose, self.frame)


class NmeaBridgeProvider:
    """Pose -> RMC+GGA sentences -> parsed fix."""

    def __init__(self, frame: ScenarioFrame, talker: str = "GP") -> None:
        self.frame = frame
        self.talker = talker
        self.last_sentences: list[str] = []

    def fix_for(self, pose: LocalPose) -> PvtFix:
        self.last_sentences = nmea_generate(local_to_geo(pose, self.frame), self.talker)
        rmc = gga = None
        for sentence in self.last_sentences:
            parsed = nmea_parse(sentence)
            if isinstance(parsed, NmeaResult):
                if parsed.sentence_type == "RMC":
                    rmc = parsed.fix
                else:
                    gga = parsed.fix
        assert rmc is not None
        return merge_fixes(rmc, gga)


@dataclass(frozen=True)
class TraceRecord:
    t_ms: int
    fix: PvtFix


def _number(obj: dict, key: str, line: int, nullable: bool) -> float | None:
    value = obj[key]
    if value is None and nullable:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise TraceError(f"field {key!r} must be a finite number, got {value!r}", line)
    return float(value)


def parse_trace(lines: Iterator[str] | IO[str]) -> list[TraceRecord]:
    records: list[TraceRecord] = []
    last_t = None
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceError(f"invalid JSON: {exc.msg}", lineno) from exc
        if not isinstance(obj, dict):
            raise TraceError("record must be a JSON object", lineno)
        missing = [k for k in TRACE_FIELDS if k not in obj]
        if missing:
            raise TraceError(f"missing field(s) {', '.join(missing)}", lineno)
        t_ms = obj["t_ms"]
        if isinstance(t_ms, bool) or not isinstance(t_ms, int):
            raise TraceError(f"t_ms must be an integer, got {t_ms!r}", lineno)
        if last_t is not None and t_ms < last_t:
            raise TraceError(f"t_ms {t_ms} decreases (previous {last_t})", lineno)
        last_t = t_ms
        lat = _number(obj, "lat", lineno, nullable=False)
        lon = _number(obj, "lon", lineno, nullable=False)
        try:
            position = GeoPoint(lat, lon)
        except ValueError as exc:
            raise TraceError(str(exc), lineno) from exc
        fix = PvtFix(
            position=position,
            speed=_number(obj, "speed_mps", lineno, nullable=True),
            heading=_number(obj, "heading_deg", lineno, nullable=True),
            timestamp=t_ms,
        )
        records.append(TraceRecord(t_ms, fix))
    return records


class TraceProvider:
    """Replays trace records against the simulation clock."""

    def __init__(self, records: list[TraceRecord]) -> None:
        self.records = records
        self._next = 0

    @classmethod
    def from_file(cls, path: str | Path) -> TraceProvider:
        with open(path, encoding="utf-8") as fh:
            return cls(parse_trace(fh))

    @property
    def exhausted(self) -> bool:
        return self._next >= len(self.records)

    def peek_time(self) -> int | None:
        return None if self.exhausted else self.records[self._next].t_ms

    def pop(self) -> TraceRecord:
        if self.exhausted:
            raise StopIteration
        record = self.records[self._next]
        self._next += 1
        return record

    def fixes_until(self, now_ms: float) -> list[PvtFix]:
        """Pop every record with ``t_ms <= now_ms``."""
        out = []
        while not self.exhausted and self.records[self._next].t_ms <= now_ms:
            out.append(self.pop().fix)
        return out


class TraceRecorder:
    def __init__(self, fh: IO[str]) -> None:
        self._fh = fh

    def record(self, t_ms: int, fix: PvtFix) -> None:
        if fix.position is None:
            return
        row = {
            "t_ms": int(t_ms),
            "lat": fix.position.latitude,
            "lon": fix.position.longitude,
            "speed_mps": fix.speed,
            "heading_deg": fix.heading,
        }
        self._fh.write(json.dumps(row) + "\n")
