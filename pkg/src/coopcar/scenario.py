"""Scenario files: strict JSON schema, validation and typed configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any

import jsonschema

from coopcar.cam import CamTriggerConfig
from coopcar.dcc import DccRow, DccTable
from coopcar.errors import GeometryError, ScenarioError
from coopcar.icw import IcwConfig, IntersectionZone
from coopcar.netsim import ChannelConfig
from coopcar.positioning.frames import GeoPoint, LocalPose, ScenarioFrame
from coopcar.vehicle import DEFAULT_WHEELBASE, Path, build_oval

ROLES = ("mobile", "stationary", "replay")
POSITIONING = ("nmea", "direct")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}


def _obj(props: dict, required: tuple[str, ...] = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCENARIO_SCHEMA: dict[str, Any] = _obj(
    {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "duration_s": _NONNEG,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "step_ms": {"type": "integer", "minimum": 1, "maximum": 50},
        "frame": _obj(
            {
                "origin": _obj(
                    {
                        "lat": {"type": "number", "minimum": -90, "maximum": 90},
                        "lon": {"type": "number", "minimum": -180, "exclusiveMaximum": 180},
                        "alt": _NUM,
                    },
                    ("lat", "lon"),
                ),
                "scale": _POS,
            },
            ("origin",),
        ),
        "channel": _obj(
            {
                "bitrate_bps": _POS,
                "loss_probability": _PROB,
                "latency_ms": _NONNEG,
                "jitter_ms": _NONNEG,
            }
        ),
        "cam": _obj(
            {
                "t_gen_cam_min_ms": _POS,
                "t_gen_cam_max_ms": _POS,
                "heading_delta_deg": _POS,
                "position_delta_m": _POS,
                "speed_delta_mps": _POS,
                "n_gen_cam": {"type": "integer", "minimum": 0},
            }
        ),
        "dcc": _obj(
            {
                "table": {
                    "type": "array",
                    "minItems": 1,
                    "items": _obj(
                        {"cbr": _PROB, "interval_ms": _NONNEG, "name": {"type": "string"}},
                        ("cbr", "interval_ms"),
                    ),
                },
                "window_ms": _POS,
                "smoothing": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            }
        ),
        "ldm": _obj({"max_age_ms": _POS}),
        "zone": _obj(
            {
                "center": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "radius_m": _POS,
            },
            ("center",),
        ),
        "icw": _obj({"tti_threshold_s": _POS, "ego_proximity_m": _POS, "hold_ms": _POS}),
        "log": _obj({"pose_interval_ms": {"type": "integer", "minimum": 0}}),
        "stations": {
            "type": "array",
            "items": _obj(
                {
                    "id": {"type": "integer", "minimum": 0, "maximum": 2**32 - 1},
                    "role": {"enum": list(ROLES)},
                    "path": {
                        "oneOf": [
                            _obj(
                                {
                                    "oval": _obj(
                                        {
                                            "length_m": _POS,
                                            "width_m": _POS,
                                            "corner_radius_m": _POS,
                                            "spacing_m": _POS,
                                        },
                                        ("length_m", "width_m", "corner_radius_m"),
                                    )
                                },
                                ("oval",),
                            ),
                            _obj(
                                {
                                    "waypoints": {
                                        "type": "array",
                                        "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                                    },
                                    "closed": {"type": "boolean"},
                                },
                                ("waypoints",),
                            ),
                        ]
                    },
                    "start_s": _NUM,
                    "pose": _obj({"x": _NUM, "y": _NUM, "heading_deg": _NUM}, ("x", "y")),
                    "trace_file": {"type": "string"},
                    "target_speed": _NONNEG,
                    "lookahead_m": _POS,
                    "max_steer_rad": _POS,
                    "wheelbase_m": _POS,
                    "noise_sigma_m": _NONNEG,
                    "positioning": {"enum": list(POSITIONING)},
                    "cam_enabled": {"type": "boolean"},
                    "dcc_enabled": {"type": "boolean"},
                    "icw_enabled": {"type": "boolean"},
                },
                ("id", "role"),
            ),
        },
    },
    ("duration_s", "frame", "stations"),
)


@dataclass(frozen=True)
class StationConfig:
    id: int
    role: str
    path: Path | None = None
    start_s: float = 0.0
    pose: LocalPose | None = None
    trace_file: str | None = None
    target_speed: float = 0.0
    lookahead: float = 0.8
    max_steer: float = 0.41
    wheelbase: float = DEFAULT_WHEELBASE
    noise_sigma: float = 0.0
    positioning: str = "nmea"
    cam_enabled: bool = True
    dcc_enabled: bool = True
    icw_enabled: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    frame: ScenarioFrame
    stations: tuple[StationConfig, ...]
    duration_s: float
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    seed: int = 0
    step_ms: int = 10
    cam: CamTriggerConfig = field(default_factory=CamTriggerConfig)
    dcc_table: DccTable = field(default_factory=DccTable)
    dcc_window_ms: float = 100.0
    dcc_smoothing: float = 0.0
    ldm_max_age_ms: float = 1500.0
    zone: IntersectionZone | None = None
    icw: IcwConfig = field(default_factory=IcwConfig)
    pose_interval_ms: int = 100
    name: str = ""

    def station(self, station_id: int) -> StationConfig:
        for st in self.stations:
            if st.id == station_id:
                return st
        raise KeyError(station_id)


def _dotted(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _build_path(spec: dict, where: str) -> Path:
    try:
        if "oval" in spec:
            o = spec["oval"]
            return build_oval(o["length_m"], o["width_m"], o["corner_radius_m"], o.get("spacing_m", 0.1))
        return Path(tuple(tuple(p) for p in spec["waypoints"]), spec.get("closed", True))
    except GeometryError as exc:
        raise ScenarioError(str(exc), field=where) from exc


def scenario_from_dict(obj: Any, base_dir: str | FsPath | None = None) -> ScenarioConfig:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ScenarioError(err.message, field=_dotted(err.absolute_path))

    origin = obj["frame"]["origin"]
    frame = ScenarioFrame(GeoPoint(origin["lat"], origin["lon"], origin.get("alt")), obj["frame"].get("scale", 10.0))

    stations = []
    seen: set[int] = set()
    for i, st in enumerate(obj["stations"]):
        where = f"stations[{i}]"
        if st["id"] in seen:
            raise ScenarioError(f"duplicate station id {st['id']}", field=f"{where}.id")
        seen.add(st["id"])
        role = st["role"]
        path = pose = trace = None
        if role == "mobile":
            if "path" not in st:
                raise ScenarioError("mobile station requires a path", field=f"{where}.path")
            path = _build_path(st["path"], f"{where}.path")
        elif role == "stationary":
            if "pose" not in st:
                raise ScenarioError("stationary station requires a pose", field=f"{where}.pose")
            p = st["pose"]
            pose = LocalPose(p["x"], p["y"], p.get("heading_deg", 0.0), 0.0)
        else:
            if "trace_file" not in st:
                raise ScenarioError("replay station requires trace_file", field=f"{where}.trace_file")
            trace = st["trace_file"]
            if base_dir is not None and not FsPath(trace).is_absolute():
                trace = str(FsPath(base_dir) / trace)
        stations.append(
            StationConfig(
                id=st["id"],
                role=role,
                path=path,
                start_s=st.get("start_s", 0.0),
                pose=pose,
                trace_file=trace,
                target_speed=st.get("target_speed", 0.0),
                lookahead=st.get("lookahead_m", 0.8),
                max_steer=st.get("max_steer_rad", 0.41),
                wheelbase=st.get("wheelbase_m", DEFAULT_WHEELBASE),
                noise_sigma=st.get("noise_sigma_m", 0.0),
                positioning=st.get("positioning", "nmea"),
                cam_enabled=st.get("cam_enabled", True),
                dcc_enabled=st.get("dcc_enabled", True),
                icw_enabled=st.get("icw_enabled", False),
            )
        )

    ch = obj.get("channel", {})
    seed = obj.get("seed", 0)
    channel = ChannelConfig(
        bitrate_bps=ch.get("bitrate_bps", 6_000_000.0),
        loss_probability=ch.get("loss_probability", 0.0),
        latency_ms=ch.get("latency_ms", 1.0),
        jitter_ms=ch.get("jitter_ms", 0.0),
        rng_seed=seed,
    )

    cam = CamTriggerConfig(**obj.get("cam", {}))
    if cam.t_gen_cam_min_ms > cam.t_gen_cam_max_ms:
        raise ScenarioError("t_gen_cam_min_ms exceeds t_gen_cam_max_ms", field="cam.t_gen_cam_min_ms")

    dcc = obj.get("dcc", {})
    table = DccTable()
    if "table" in dcc:
        try:
            table = DccTable(tuple(DccRow(r["cbr"], r["interval_ms"], r.get("name", "")) for r in dcc["table"]))
        except ValueError as exc:
            raise ScenarioError(str(exc), field="dcc.table") from exc

    zone = None
    if "zone" in obj:
        z = obj["zone"]
        zone = IntersectionZone(tuple(z["center"]), z.get("radius_m", 7.5))
    if zone is None and any(s.icw_enabled for s in stations):
        raise ScenarioError("icw_enabled stations need a zone", field="zone")

    return ScenarioConfig(
        frame=frame,
        stations=tuple(stations),
        duration_s=obj["duration_s"],
        channel=channel,
        seed=seed,
        step_ms=obj.get("step_ms", 10),
        cam=cam,
        dcc_table=table,
        dcc_window_ms=dcc.get("window_ms", 100.0),
        dcc_smoothing=dcc.get("smoothing", 0.0),
        ldm_max_age_ms=obj.get("ldm", {}).get("max_age_ms", 1500.0),
        zone=zone,
        icw=IcwConfig(**obj.get("icw", {})),
        pose_interval_ms=obj.get("log", {}).get("pose_interval_ms", 100),
        name=obj.get("name", ""),
    )


def load_scenario(path: str | FsPath) -> ScenarioConfig:
    path = FsPath(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    return scenario_from_dict(obj, base_dir=path.parent)
