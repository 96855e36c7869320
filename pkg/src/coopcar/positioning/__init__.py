"""Coordinate frames, NMEA/UBX codecs and positioning providers."""

from coopcar.positioning.frames import (
    EARTH_RADIUS_M,
    METERS_PER_DEG_LAT,
    GeoPoint,
    LocalPose,
    PvtFix,
    ScenarioFrame,
    geo_to_local,
    haversine_m,
    local_to_geo,
    normalize_heading,
)
from coopcar.positioning.nmea import nmea_generate, nmea_parse
from coopcar.positioning.providers import (
    DirectProvider,
    NmeaBridgeProvider,
    TraceProvider,
    TraceRecorder,
    parse_trace,
)
from coopcar.positioning.ubx import NavPvt, UbxStreamReader, encode_nav_pvt, ubx_parse

__all__ = [
    "EARTH_RADIUS_M",
    "METERS_PER_DEG_LAT",
    "DirectProvider",
    "GeoPoint",
    "LocalPose",
    "NavPvt",
    "NmeaBridgeProvider",
    "PvtFix",
    "ScenarioFrame",
    "TraceProvider",
    "TraceRecorder",
    "UbxStreamReader",
    "encode_nav_pvt",
    "geo_to_local",
    "haversine_m",
    "local_to_geo",
    "nmea_generate",
    "nmea_parse",
    "normalize_heading",
    "parse_trace",
    "ubx_parse",
]
