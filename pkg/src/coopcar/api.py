"""Newline-delimited JSON management API over TCP.

Each request line is ``{"cmd": str, "args": {...}}`` and receives exactly one
response line ``{"ok": true, "data": ...}`` or ``{"ok": false, "error": ...}``.
Commands never touch the simulation directly: the live session funnels them
through one queue that the simulation thread drains between events.
"""

from __future__ import annotations

import json
import logging
import queue
import socketserver
import threading
import time
from typing import Any

import jsonschema

from coopcar.dcc import DccRow, DccTable, dcc_min_interval
from coopcar.positioning.frames import GeoPoint
from coopcar.runner import EventLog, Station, World, encode_record
from coopcar.scenario import ScenarioConfig

log = logging.getLogger(__name__)

DEFAULT_PORT = 48110

_EMPTY = {"type": "object", "additionalProperties": False}
ARG_SCHEMAS: dict[str, dict[str, Any]] = {
    "cam_start": _EMPTY,
    "cam_stop": _EMPTY,
    "status": _EMPTY,
    "ldm_query": {
        "type": "object",
        "properties": {
            "center": {
                "type": "object",
                "properties": {
                    "lat": {"type": "number", "minimum": -90, "maximum": 90},
                    "lon": {"type": "number", "minimum": -180, "exclusiveMaximum": 180},
                },
                "required": ["lat", "lon"],
                "additionalProperties": False,
            },
            "max_age_ms": {"type": "number", "minimum": 0},
        },
        "required": ["center"],
        "additionalProperties": False,
    },
    "dcc_config": {
        "type": "object",
        "properties": {
            "table": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {
                        "cbr": {"type": "number", "minimum": 0, "maximum": 1},
                        "interval_ms": {"type": "number", "minimum": 0},
                        "name": {"type": "string"},
                    },
                    "required": ["cbr", "interval_ms"],
                    "additionalProperties": False,
                },
            },
            "enabled": {"type": "boolean"},
            "smoothing": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        },
        "additionalProperties": False,
    },
}
MUTATING = ("cam_start", "cam_stop", "dcc_config")


def _error(code: str, detail: str | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {"ok": False, "error": code}
    if detail:
        out["detail"] = detail
    return out


def api_handle(station: Station, request: str | bytes, now: float, event_log: EventLog | None = None) -> dict[str, Any]:
    """Apply one request line to ``station`` at simulation time ``now``."""
    try:
        obj = json.loads(request)
    except (json.JSONDecodeError, UnicodeDecodeError):
        return _error("parse_error")
    if not isinstance(obj, dict) or not isinstance(obj.get("cmd"), str):
        return _error("bad_args", "request must be an object with a string 'cmd'")
    extra = set(obj) - {"cmd", "args"}
    if extra:
        return _error("bad_args", f"unexpected request field(s): {', '.join(sorted(extra))}")
    cmd = obj["cmd"]
    if cmd not in ARG_SCHEMAS:
        return _error("unknown_command")
    args = obj.get("args", {})
    errors = list(jsonschema.Draft202012Validator(ARG_SCHEMAS[cmd]).iter_errors(args))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "args"
        return _error("bad_args", f"{where}: {err.message}")

    if cmd == "cam_start":
        changed = station.cam_start()
        data: dict[str, Any] = {"cam_enabled": True, "changed": changed}
    elif cmd == "cam_stop":
        changed = station.cam_stop()
        data = {"cam_enabled": False, "changed": changed}
    elif cmd == "dcc_config":
        table = None
        if "table" in args:
            try:
                table = DccTable(tuple(DccRow(r["cbr"], r["interval_ms"], r.get("name", "")) for r in args["table"]))
            except ValueError as exc:
                return _error("bad_args", f"table: {exc}")
        station.configure_dcc(table, args.get("enabled"), args.get("smoothing"))
        data = {
            "enabled": station.dcc_enabled,
            "state": station.dcc_state.name,
            "interval_ms": dcc_min_interval(station.dcc_state),
            "rows": len(station.dcc_state.table.rows),
        }
    elif cmd == "ldm_query":
        c = args["center"]
        results = station.ldm_query(GeoPoint(c["lat"], c["lon"]), now, args.get("max_age_ms"))
        data = {
            "entries": [
                {
                    "stationId": r.entry.stationId,
                    "position": {"lat": r.entry.position.latitude, "lon": r.entry.position.longitude},
                    "speed": r.entry.speed,
                    "heading": r.entry.heading,
                    "distance_m": r.distance,
                    "age_ms": r.ageMs,
                }
                for r in results
            ]
        }
    else:
        data = station.status(now)

    if event_log is not None and cmd in MUTATING:
        event_log.emit(now, station.id, "api", {"cmd": cmd, "args": args, "live": True})
    return {"ok": True, "data": data}


class LiveSession:
    """Runs a world in a background thread and serializes API commands into it.

    ``speed`` scales simulated time against wall time (1.0 = real time,
    0 = run as fast as possible).
    """

    def __init__(self, config: ScenarioConfig, station_id: int, speed: float = 1.0, log_path: str | None = None) -> None:
        if station_id not in {s.id for s in config.stations}:
            raise KeyError(f"no station {station_id} in scenario")
        self._log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
        self.world = World(config, EventLog(self._log_fh))
        self.station_id = station_id
        self.speed = speed
        self.commands: queue.Queue[tuple[str, queue.Queue]] = queue.Queue()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="coopcar-sim", daemon=True)
        self.finished = threading.Event()

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5)
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    def submit(self, line: str, timeout: float = 10.0) -> dict[str, Any]:
        reply: queue.Queue = queue.Queue(maxsize=1)
        self.commands.put((line, reply))
        return reply.get(timeout=timeout)

    def _apply(self, line: str, reply: queue.Queue) -> None:
        station = self.world.stations[self.station_id]
        try:
            response = api_handle(station, line, self.world.now, self.world.log)
        except Exception:  # keep the loop alive; report to the client
            log.exception("API command failed")
            response = _error("internal_error")
        reply.put(response)

    def _drain(self, wait: float) -> None:
        try:
            item = self.commands.get(timeout=wait) if wait > 0 else self.commands.get_nowait()
        except queue.Empty:
            return
        self._apply(*item)
        while True:
            try:
                item = self.commands.get_nowait()
            except queue.Empty:
                return
            self._apply(*item)

    def _loop(self) -> None:
        sim = self.world.sim
        end = self.world.end_ms
        t0 = time.monotonic()
        while not self._stop.is_set():
            next_t = sim.peek_time()
            if next_t is None or next_t >= end:
                if not self.finished.is_set():
                    self.world.sim.now = max(sim.now, end)
                    self.world.finish()
                    self.finished.set()
                self._drain(0.05)
                continue
            if self.speed > 0:
                due = t0 + next_t / 1000.0 / self.speed
                wait = due - time.monotonic()
                if wait > 0:
                    self._drain(min(wait, 0.05))
                    continue
            self._drain(0)
            sim.step()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session: LiveSession = self.server.session  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            try:
                response = session.submit(line)
            except queue.Empty:
                response = _error("timeout")
            self.wfile.write(encode_record(response).encode())
            self.wfile.flush()


class ApiServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, session: LiveSession, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
        super().__init__((host, port), _Handler)
        self.session = session
