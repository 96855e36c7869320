"""NMEA 0183 RMC/GGA generation and parsing.

Scenario timestamps (ms since scenario epoch) are rendered as UTC wall time
relative to ``NMEA_EPOCH``. Positions use ddmm.mmmmmm so a round trip keeps
well under 1e-6 degrees of error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from coopcar.errors import ChecksumError, FramingError
from coopcar.positioning.frames import GeoPoint, PvtFix

NMEA_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)
KNOTS_PER_MPS = 1.9438445
MINUTE_DECIMALS = 6

_SENTENCE_RE = re.compile(r"^\$([^*$]*)\*([0-9A-Fa-f]{2})\s*$")


@dataclass(frozen=True)
class Ignored:
    """A well-formed sentence of a type this parser does not interpret."""

    sentence_type: str


@dataclass(frozen=True)
class NmeaResult:
    sentence_type: str  # "RMC" or "GGA"
    talker: str
    fix: PvtFix
    # GGA carries no date: its timestamp is ms since midnight of the epoch day
    has_date: bool


def checksum(body: str) -> str:
    value = 0
    for ch in body.encode("ascii"):
        value ^= ch
    return f"{value:02X}"


def _frame(body: str) -> str:
    return f"${body}*{checksum(body)}\r\n"


def _angle(value: float | None, deg_width: int, hemis: str) -> tuple[str, str]:
    if value is None:
        return "", ""
    scale = 10**MINUTE_DECIMALS
    total = round(abs(value) * 60 * scale)
    deg, rem = divmod(total, 60 * scale)
    minutes = rem / scale
    text = f"{deg:0{deg_width}d}{minutes:0{3 + MINUTE_DECIMALS}.{MINUTE_DECIMALS}f}"
    return text, hemis[0] if value >= 0 else hemis[1]


def _utc(timestamp: int | None) -> datetime | None:
    if timestamp is None:
        return None
    return NMEA_EPOCH + timedelta(milliseconds=timestamp)


def nmea_generate(fix: PvtFix, talker: str = "GP") -> list[str]:
    """Return ``[RMC, GGA]`` sentences (CR LF terminated) for ``fix``."""
    when = _utc(fix.timestamp)
    hhmmss = when.strftime("%H%M%S") + f".{when.microsecond // 1000:03d}" if when else ""
    ddmmyy = when.strftime("%d%m%y") if when else ""
    pos = fix.position
    lat, ns = _angle(pos.latitude if pos else None, 2, "NS")
    lon, ew = _angle(pos.longitude if pos else None, 3, "EW")
    status = "A" if pos is not None else "V"
    speed = f"{fix.speed * KNOTS_PER_MPS:.3f}" if fix.speed is not None else ""
    course = f"{round(fix.heading, 2) % 360.0:.2f}" if fix.heading is not None else ""
    mode = "A" if pos is not None else "N"
    rmc = f"{talker}RMC,{hhmmss},{status},{lat},{ns},{lon},{ew},{speed},{course},{ddmmyy},,,{mode}"

    quality = "1" if pos is not None else "0"
    sats = "08" if pos is not None else "00"
    hdop = "0.9" if pos is not None else ""
    alt = f"{pos.altitude:.2f}" if pos is not None and pos.altitude is not None else ""
    alt_unit = "M" if alt else ""
    gga = f"{talker}GGA,{hhmmss},{lat},{ns},{lon},{ew},{quality},{sats},{hdop},{alt},{alt_unit},,,,"
    return [_frame(rmc), _frame(gga)]


def _parse_angle(text: str, hemi: str, deg_width: int, positive: str, negative: str) -> float | None:
    if not text:
        return None
    if hemi not in (positive, negative) or len(text) < deg_width + 2:
        raise FramingError(f"bad coordinate {text!r}{hemi!r}")
    try:
        deg = int(text[:deg_width])
        minutes = float(text[deg_width:])
    except ValueError as exc:
        raise FramingError(f"bad coordinate {text!r}") from exc
    if not 0 <= minutes < 60:
        raise FramingError(f"minutes out of range in {text!r}")
    value = deg + minutes / 60.0
    return -value if hemi == negative else value


def _parse_time(text: str) -> int | None:
    """Milliseconds since midnight."""
    if not text:
        return None
    try:
        hh, mm = int(text[0:2]), int(text[2:4])
        sec = float(text[4:])
    except ValueError as exc:
        raise FramingError(f"bad time {text!r}") from exc
    if hh > 23 or mm > 59 or not 0 <= sec < 61:
        raise FramingError(f"bad time {text!r}")
    return (hh * 3600 + mm * 60) * 1000 + round(sec * 1000)


def _parse_date_ms(text: str) -> int | None:
    """Milliseconds from ``NMEA_EPOCH`` to midnight of the ddmmyy date."""
    if not text:
        return None
    try:
        day = datetime.strptime(text, "%d%m%y").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise FramingError(f"bad date {text!r}") from exc
    return int((day - NMEA_EPOCH) / timedelta(milliseconds=1))


def _float(text: str) -> float | None:
    if not text:
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise FramingError(f"bad number {text!r}") from exc


def _position(lat: float | None, lon: float | None, alt: float | None) -> GeoPoint | None:
    if lat is None or lon is None:
        return None
    try:
        return GeoPoint(lat, lon, alt)
    except ValueError as exc:
        raise FramingError(str(exc)) from exc


def nmea_parse(sentence: str) -> NmeaResult | Ignored:
    """Validate framing and checksum, then extract a partial fix.

    Raises :class:`FramingError` for malformed input and
    :class:`ChecksumError` when the transmitted checksum does not match.
    """
    match = _SENTENCE_RE.match(sentence)
    if match is None:
        raise FramingError(f"not an NMEA sentence: {sentence[:40]!r}")
    body, transmitted = match.groups()
    try:
        expected = checksum(body)
    except UnicodeEncodeError as exc:
        raise FramingError("non-ASCII sentence body") from exc
    if expected != transmitted.upper():
        raise ChecksumError(f"checksum {transmitted} != computed {expected}")

    fields = body.split(",")
    address = fields[0]
    if len(address) != 5 or not address.isalnum():
        raise FramingError(f"bad address field {address!r}")
    talker, kind = address[:2], address[2:]

    if kind == "RMC":
        if len(fields) < 10:
            raise FramingError(f"RMC has {len(fields)} fields")
        tod = _parse_time(fields[1])
        day = _parse_date_ms(fields[9])
        valid = fields[2] == "A"
        lat = _parse_angle(fields[3], fields[4], 2, "N", "S")
        lon = _parse_angle(fields[5], fields[6], 3, "E", "W")
        knots = _float(fields[7])
        timestamp = tod + day if tod is not None and day is not None else tod
        fix = PvtFix(
            position=_position(lat, lon, None) if valid else None,
            speed=knots / KNOTS_PER_MPS if knots is not None else None,
            heading=_float(fields[8]),
            timestamp=timestamp,
        )
        return NmeaResult("RMC", talker, fix, has_date=day is not None)

    if kind == "GGA":
        if len(fields) < 10:
            raise FramingError(f"GGA has {len(fields)} fields")
        tod = _parse_time(fields[1])
        lat = _parse_angle(fields[2], fields[3], 2, "N", "S")
        lon = _parse_angle(fields[4], fields[5], 3, "E", "W")
        quality = fields[6]
        alt = _float(fields[9])
        position = _position(lat, lon, alt) if quality not in ("", "0") else None
        return NmeaResult("GGA", talker, PvtFix(position=position, timestamp=tod), has_date=False)

    return Ignored(kind)


def merge_fixes(rmc: PvtFix, gga: PvtFix | None) -> PvtFix:
    """Combine an RMC fix with the altitude of a GGA fix from the same epoch."""
    if gga is None or gga.position is None or rmc.position is None:
        return rmc
    pos = rmc.position
    return PvtFix(
        position=GeoPoint(pos.latitude, pos.longitude, gga.position.altitude),
        speed=rmc.speed,
        heading=rmc.heading,
        timestamp=rmc.timestamp,
    )
