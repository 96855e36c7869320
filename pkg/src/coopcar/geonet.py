"""GeoNetworking single-hop broadcast + BTP-B framing.

Header layout (44 bytes, big-endian)::

    offset size field
    -- Basic Header --
    0      1    version (high nibble, =1) | nextHeader (low nibble, =1 Common)
    1      1    reserved
    2      1    lifetime (raw)
    3      1    remainingHopLimit (=1)
    -- Common Header --
    4      1    nextHeader (high nibble, =2 BTP-B) | reserved
    5      1    headerType (high nibble, =5 TSB) | headerSubtype (low nibble, =0 SHB)
    6      1    trafficClass
    7      1    flags (=0)
    8      2    payloadLength
    10     1    maxHopLimit (=1)
    11     1    reserved
    -- SHB source position vector --
    12     8    sourceAddress
    20     4    timestamp (ms mod 2^32)
    24     4    latitude (1e-7 deg)
    28     4    longitude (1e-7 deg)
    32     2    speed (0.01 m/s)
    34     2    heading (0.1 deg)
    36     4    reserved
    -- BTP-B --
    40     2    destinationPort (2001 = CAM)
    42     2    destinationPortInfo (=0)
    44     ...  payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from coopcar.errors import DecodeRangeError, FieldRangeError, InconsistencyError, LengthError, SizeError, UnsupportedError

GN_VERSION = 1
NH_COMMON = 1
NH_BTP_B = 2
HT_TSB = 5
HST_SHB = 0
BTP_PORT_CAM = 2001
MAX_PAYLOAD = 1400
HEADER_LEN = 44

_HEADER = struct.Struct(">BBBB BBBBHBB QIiiHHI HH".replace(" ", ""))
assert _HEADER.size == HEADER_LEN


@dataclass(frozen=True)
class GnShbFrame:
    lifetime: int = 0x50  # raw byte; 0x50 = 20 x 1 s
    trafficClass: int = 0
    sourceAddress: int = 0
    timestamp: int = 0
    latitude: int = 0
    longitude: int = 0
    speed: int = 0
    heading: int = 0
    btpDestPort: int = BTP_PORT_CAM
    payload: bytes = b""


_LIMITS = {
    "lifetime": (0, 0xFF),
    "trafficClass": (0, 0xFF),
    "sourceAddress": (0, 2**64 - 1),
    "timestamp": (0, 2**32 - 1),
    "latitude": (-900000000, 900000001),
    "longitude": (-1800000000, 1800000001),
    "speed": (0, 16383),
    "heading": (0, 3601),
    "btpDestPort": (0, 0xFFFF),
}


def gn_encode(frame: GnShbFrame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise SizeError(f"payload {len(frame.payload)} B exceeds {MAX_PAYLOAD} B")
    for name, (lo, hi) in _LIMITS.items():
        value = getattr(frame, name)
        if isinstance(value, bool) or not isinstance(value, int) or not lo <= value <= hi:
            raise FieldRangeError(name, value)
    header = _HEADER.pack(
        (GN_VERSION << 4) | NH_COMMON, 0, frame.lifetime, 1,
        NH_BTP_B << 4, (HT_TSB << 4) | HST_SHB, frame.trafficClass, 0,
        len(frame.payload), 1, 0,
        frame.sourceAddress, frame.timestamp, frame.latitude, frame.longitude,
        frame.speed, frame.heading, 0,
        frame.btpDestPort, 0,
    )
    return header + bytes(frame.payload)


def gn_decode(data: bytes) -> GnShbFrame:
    if len(data) < HEADER_LEN:
        raise LengthError(f"frame of {len(data)} B shorter than {HEADER_LEN} B header")
    (vnh, _r0, lifetime, _rhl, ch_nh, ht_hst, tc, _flags, plen, _mhl, _r1,
     src, ts, lat, lon, speed, heading, _r2, port, _port_info) = _HEADER.unpack_from(data)
    if vnh >> 4 != GN_VERSION:
        raise UnsupportedError(f"GeoNetworking version {vnh >> 4}")
    if vnh & 0x0F != NH_COMMON or ch_nh >> 4 != NH_BTP_B:
        raise UnsupportedError(f"next header {vnh & 0x0F}/{ch_nh >> 4}")
    if (ht_hst >> 4, ht_hst & 0x0F) != (HT_TSB, HST_SHB):
        raise UnsupportedError(f"header type {ht_hst >> 4}/{ht_hst & 0x0F}")
    if plen != len(data) - HEADER_LEN:
        raise InconsistencyError(f"payloadLength {plen} but {len(data) - HEADER_LEN} B present")
    if plen > MAX_PAYLOAD:
        raise InconsistencyError(f"payloadLength {plen} exceeds {MAX_PAYLOAD}")
    frame = GnShbFrame(lifetime, tc, src, ts, lat, lon, speed, heading, port, bytes(data[HEADER_LEN:]))
    for name in ("latitude", "longitude", "speed", "heading"):
        lo, hi = _LIMITS[name]
        if not lo <= getattr(frame, name) <= hi:
            raise DecodeRangeError(name, getattr(frame, name))
    return frame
