"""UBX-NAV-PVT framing, Fletcher checksum and stream reader."""

from __future__ import annotations

import struct
from dataclasses import astuple, dataclass
from coopcar.errors import ChecksumError, LengthError
from coopcar.positioning.frames import GeoPoint, PvtFix

SYNC = b"\xb5\x62"
NAV_CLASS = 0x01
NAV_PVT_ID = 0x07
NAV_PVT_LEN = 92
HEADER_LEN = 6  # sync(2) class id length(2)

_NAV_PVT = struct.Struct("<IHBBBBBBIiBBBBiiiiIIiiiiiIIHB5sihH")
assert _NAV_PVT.size == NAV_PVT_LEN


@dataclass(frozen=True)
class NavPvt:
    """Raw NAV-PVT payload fields in u-blox units."""

    iTOW: int = 0  # ms
    year: int = 0
    month: int = 0
    day: int = 0
    hour: int = 0
    min: int = 0
    sec: int = 0
    valid: int = 0
    tAcc: int = 0
    nano: int = 0
    fixType: int = 0
    flags: int = 0
    flags2: int = 0
    numSV: int = 0
    lon: int = 0  # 1e-7 deg
    lat: int = 0  # 1e-7 deg
    height: int = 0  # mm
    hMSL: int = 0  # mm
    hAcc: int = 0
    vAcc: int = 0
    velN: int = 0  # mm/s
    velE: int = 0
    velD: int = 0
    gSpeed: int = 0  # mm/s
    headMot: int = 0  # 1e-5 deg
    sAcc: int = 0
    headAcc: int = 0
    pDOP: int = 0
    flags3: int = 0
    reserved1: bytes = bytes(5)
    headVeh: int = 0
    magDec: int = 0
    magAcc: int = 0

    @property
    def lat_deg(self) -> float:
        return self.lat * 1e-7

    @property
    def lon_deg(self) -> float:
        return self.lon * 1e-7

    @property
    def ground_speed_mps(self) -> float:
        return self.gSpeed / 1000.0

    @property
    def heading_deg(self) -> float:
        return self.headMot * 1e-5

    @property
    def gnss_fix_ok(self) -> bool:
        return bool(self.flags & 0x01)

    def to_fix(self, require_fix_ok: bool = False) -> PvtFix:
        position = None
        if not require_fix_ok or self.gnss_fix_ok:
            try:
                position = GeoPoint(self.lat_deg, self.lon_deg, self.hMSL / 1000.0)
            except ValueError:
                position = None
        return PvtFix(
            position=position,
            speed=self.ground_speed_mps,
            heading=self.heading_deg,
            timestamp=self.iTOW,
        )


@dataclass(frozen=True)
class Ignored:
    """A valid UBX frame of a class/id other than NAV-PVT."""

    msg_class: int
    msg_id: int


def fletcher8(data: bytes) -> bytes:
    ck_a = ck_b = 0
    for b in data:
        ck_a = (ck_a + b) & 0xFF
        ck_b = (ck_b + ck_a) & 0xFF
    return bytes((ck_a, ck_b))


def build_frame(msg_class: int, msg_id: int, payload: bytes) -> bytes:
    body = bytes((msg_class, msg_id)) + struct.pack("<H", len(payload)) + payload
    return SYNC + body + fletcher8(body)


def encode_nav_pvt(pvt: NavPvt) -> bytes:
    return build_frame(NAV_CLASS, NAV_PVT_ID, _NAV_PVT.pack(*astuple(pvt)))


def decode_nav_pvt_payload(payload: bytes) -> NavPvt:
    if len(payload) != NAV_PVT_LEN:
        raise LengthError(f"NAV-PVT payload is {len(payload)} bytes, expected {NAV_PVT_LEN}")
    return NavPvt(*_NAV_PVT.unpack(payload))


def ubx_parse(buf: bytes) -> tuple[NavPvt | Ignored | None, int]:
    """Parse the first frame in ``buf``.

    Returns ``(item, consumed)``. ``item`` is None when nothing was produced:
    with ``consumed > 0`` leading garbage was skipped to the next sync pair,
    with ``consumed == 0`` the buffer holds only a partial frame and more data
    is needed. A bad checksum raises :class:`ChecksumError` whose ``consumed``
    tells the caller how far to advance (past the bad sync pair).
    """
    start = buf.find(SYNC)
    if start < 0:
        # keep a trailing 0xB5 that may start the next sync pair
        keep = 1 if buf[-1:] == SYNC[:1] else 0
        return None, len(buf) - keep
    if start > 0:
        return None, start
    if len(buf) < HEADER_LEN:
        return None, 0
    msg_class, msg_id, length = struct.unpack_from("<BBH", buf, 2)
    end = HEADER_LEN + length + 2
    if len(buf) < end:
        return None, 0
    if fletcher8(buf[2:end - 2]) != buf[end - 2:end]:
        raise ChecksumError(f"bad Fletcher checksum for class 0x{msg_class:02x} id 0x{msg_id:02x}", consumed=2)
    if (msg_class, msg_id) != (NAV_CLASS, NAV_PVT_ID):
        return Ignored(msg_class, msg_id), end
    try:
        return decode_nav_pvt_payload(buf[HEADER_LEN:end - 2]), end
    except LengthError as exc:
        exc.consumed = end
        raise


class UbxStreamReader:
    """Incremental reader that resyncs across garbage and corrupt frames."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self.checksum_errors = 0
        self.length_errors = 0
        self.skipped_bytes = 0

    def feed(self, data: bytes) -> list[NavPvt | Ignored]:
        self._buf.extend(data)
        out: list[NavPvt | Ignored] = []
        while self._buf:
            try:
                item, consumed = ubx_parse(bytes(self._buf))
            except ChecksumError as exc:
                self.checksum_errors += 1
                del self._buf[: exc.consumed]
                continue
            except LengthError as exc:
                # well-framed NAV-PVT with the wrong payload size
                self.length_errors += 1
                del self._buf[: getattr(exc, "consumed", 2)]
                continue
            if consumed == 0:
                break
            del self._buf[:consumed]
            if item is None:
                self.skipped_bytes += consumed
            else:
                out.append(item)
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)
