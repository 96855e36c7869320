"""CAM v2 basic container: fixed 26-byte wire codec and generation triggering.

Wire layout (big-endian, field order of :class:`CoopAwarenessMsg`)::

    offset size field           unit / sentinel
    0      1    protocolVersion =2
    1      1    messageId       =2
    2      4    stationId       uint32
    6      2    genDeltaTime    ms mod 65536
    8      4    latitude        int32, 1e-7 deg; 900000001 unavailable
    12     4    longitude       int32, 1e-7 deg; 1800000001 unavailable
    16     4    altitude        int32, 0.01 m; 800001 unavailable
    20     2    heading         uint16, 0.1 deg in [0, 3600]; 3601 unavailable
    22     2    speed           uint16, 0.01 m/s in [0, 16382]; 16383 unavailable
    24     1    driveDirection  0 forward, 1 backward, 2 unavailable
    25     1    stationType     5 passenger car
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from coopcar.errors import DecodeRangeError, FieldRangeError, LengthError, UnsupportedError
from coopcar.positioning.frames import GeoPoint, PvtFix, haversine_m

CAM_LEN = 26
PROTOCOL_VERSION = 2
MESSAGE_ID_CAM = 2
STATION_TYPE_PASSENGER_CAR = 5

LAT_UNAVAILABLE = 900000001
LON_UNAVAILABLE = 1800000001
ALT_UNAVAILABLE = 800001
HEADING_UNAVAILABLE = 3601
SPEED_UNAVAILABLE = 16383
DRIVE_FORWARD, DRIVE_BACKWARD, DRIVE_UNAVAILABLE = 0, 1, 2

_LAYOUT = struct.Struct(">BBIHiiiHHBB")
assert _LAYOUT.size == CAM_LEN

# (min, max) of the available range; the sentinel sits outside it
_RANGES = {
    "latitude": (-900000000, 900000000, LAT_UNAVAILABLE),
    "longitude": (-1800000000, 1800000000, LON_UNAVAILABLE),
    "altitude": (-100000, 800000, ALT_UNAVAILABLE),
    "heading": (0, 3600, HEADING_UNAVAILABLE),
    "speed": (0, 16382, SPEED_UNAVAILABLE),
}


@dataclass(frozen=True)
class CoopAwarenessMsg:
    """CAM in ETSI units. Optional fields use ``None`` for unavailable."""

    protocolVersion: int = PROTOCOL_VERSION
    messageId: int = MESSAGE_ID_CAM
    stationId: int = 0
    genDeltaTime: int = 0
    latitude: int | None = 0
    longitude: int | None = 0
    altitude: int | None = None
    heading: int | None = None
    speed: int | None = None
    driveDirection: int = DRIVE_UNAVAILABLE
    stationType: int = STATION_TYPE_PASSENGER_CAR

    @property
    def position(self) -> GeoPoint | None:
        if self.latitude is None or self.longitude is None:
            return None
        alt = self.altitude / 100.0 if self.altitude is not None else None
        return GeoPoint(self.latitude * 1e-7, self.longitude * 1e-7, alt)

    @property
    def heading_deg(self) -> float | None:
        return self.heading / 10.0 if self.heading is not None else None

    @property
    def speed_mps(self) -> float | None:
        return self.speed / 100.0 if self.speed is not None else None


def gen_delta_time(its_timestamp_ms: int) -> int:
    if its_timestamp_ms < 0:
        raise ValueError("timestamp must be >= 0")
    return int(its_timestamp_ms) % 65536


def cam_from_fix(station_id: int, fix: PvtFix, now_ms: int) -> CoopAwarenessMsg:
    pos = fix.position
    drive = DRIVE_FORWARD if fix.speed is not None else DRIVE_UNAVAILABLE
    heading = None
    if fix.heading is not None:
        heading = round(fix.heading * 10) % 3600
    return CoopAwarenessMsg(
        stationId=station_id,
        genDeltaTime=gen_delta_time(now_ms),
        latitude=round(pos.latitude * 1e7) if pos else None,
        longitude=round(pos.longitude * 1e7) if pos else None,
        altitude=round(pos.altitude * 100) if pos and pos.altitude is not None else None,
        heading=heading,
        speed=min(round(fix.speed * 100), _RANGES["speed"][1]) if fix.speed is not None else None,
        driveDirection=drive,
    )


def _check(name: str, value: int, lo: int, hi: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or not lo <= value <= hi:
        raise FieldRangeError(name, value)


def cam_encode(msg: CoopAwarenessMsg) -> bytes:
    _check("protocolVersion", msg.protocolVersion, 0, 255)
    _check("messageId", msg.messageId, 0, 255)
    _check("stationId", msg.stationId, 0, 0xFFFFFFFF)
    _check("genDeltaTime", msg.genDeltaTime, 0, 0xFFFF)
    wire = {}
    for name, (lo, hi, sentinel) in _RANGES.items():
        value = getattr(msg, name)
        if value is None:
            wire[name] = sentinel
        else:
            _check(name, value, lo, hi)
            wire[name] = value
    _check("driveDirection", msg.driveDirection, 0, 2)
    _check("stationType", msg.stationType, 0, 255)
    return _LAYOUT.pack(
        msg.protocolVersion,
        msg.messageId,
        msg.stationId,
        msg.genDeltaTime,
        wire["latitude"],
        wire["longitude"],
        wire["altitude"],
        wire["heading"],
        wire["speed"],
        msg.driveDirection,
        msg.stationType,
    )


def cam_decode(data: bytes) -> CoopAwarenessMsg:
    if len(data) != CAM_LEN:
        raise LengthError(f"CAM must be {CAM_LEN} bytes, got {len(data)}")
    (version, msg_id, station, gdt, lat, lon, alt, heading, speed, drive, stype) = _LAYOUT.unpack(data)
    if version != PROTOCOL_VERSION or msg_id != MESSAGE_ID_CAM:
        raise UnsupportedError(f"protocolVersion={version} messageId={msg_id}")
    values = {"latitude": lat, "longitude": lon, "altitude": alt, "heading": heading, "speed": speed}
    decoded: dict[str, int | None] = {}
    for name, (lo, hi, sentinel) in _RANGES.items():
        value = values[name]
        if value == sentinel:
            decoded[name] = None
        elif lo <= value <= hi:
            decoded[name] = value
        else:
            raise DecodeRangeError(name, value)
    if drive > DRIVE_UNAVAILABLE:
        raise DecodeRangeError("driveDirection", drive)
    return CoopAwarenessMsg(version, msg_id, station, gdt, driveDirection=drive, stationType=stype, **decoded)


@dataclass(frozen=True)
class CamTriggerConfig:
    t_gen_cam_min_ms: float = 100.0
    t_gen_cam_max_ms: float = 1000.0
    heading_delta_deg: float = 4.0
    position_delta_m: float = 4.0
    speed_delta_mps: float = 0.5
    n_gen_cam: int = 3


@dataclass(frozen=True)
class CamGenerationState:
    last_tx_time: float | None = None
    last_tx_position: GeoPoint | None = None
    last_tx_heading: float | None = None
    last_tx_speed: float | None = None
    t_gen_cam: float = 1000.0
    n_gen_cam_countdown: int = 0


@dataclass(frozen=True)
class TriggerDecision:
    transmit: bool
    state: CamGenerationState
    reason: str = ""  # "first", "dynamics", "timer" or "" on hold
    triggers: tuple[str, ...] = field(default_factory=tuple)


def _heading_delta(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def cam_trigger(
    state: CamGenerationState,
    fix: PvtFix,
    now: float,
    dcc_min_interval: float = 0.0,
    config: CamTriggerConfig = CamTriggerConfig(),
) -> TriggerDecision:
    """Decide whether a CAM is due at ``now`` (ms)."""

    def sent(reason: str, t_gen: float, countdown: int, triggers: tuple[str, ...] = ()) -> TriggerDecision:
        new = CamGenerationState(
            last_tx_time=now,
            last_tx_position=fix.position,
            last_tx_heading=fix.heading,
            last_tx_speed=fix.speed,
            t_gen_cam=t_gen,
            n_gen_cam_countdown=countdown,
        )
        return TriggerDecision(True, new, reason, triggers)

    if state.last_tx_time is None:
        return sent("first", config.t_gen_cam_max_ms, 0)
    elapsed = now - state.last_tx_time
    if elapsed < max(config.t_gen_cam_min_ms, dcc_min_interval):
        return TriggerDecision(False, state)

    triggers = []
    if fix.heading is not None and state.last_tx_heading is not None:
        if _heading_delta(fix.heading, state.last_tx_heading) >= config.heading_delta_deg:
            triggers.append("heading")
    if fix.position is not None and state.last_tx_position is not None:
        if haversine_m(fix.position, state.last_tx_position) >= config.position_delta_m:
            triggers.append("position")
    if fix.speed is not None and state.last_tx_speed is not None:
        if abs(fix.speed - state.last_tx_speed) >= config.speed_delta_mps:
            triggers.append("speed")

    if triggers:
        t_gen = min(max(elapsed, config.t_gen_cam_min_ms), config.t_gen_cam_max_ms)
        return sent("dynamics", t_gen, config.n_gen_cam, tuple(triggers))
    if elapsed >= state.t_gen_cam:
        countdown = state.n_gen_cam_countdown
        t_gen = state.t_gen_cam
        if countdown > 0:
            countdown -= 1
            if countdown == 0:
                t_gen = config.t_gen_cam_max_ms
        return sent("timer", t_gen, countdown)
    return TriggerDecision(False, state)


def reset_generation(state: CamGenerationState) -> CamGenerationState:
    """State after dissemination is stopped: next CAM is sent immediately."""
    return replace(state, last_tx_time=None)
