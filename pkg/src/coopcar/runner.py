"""Station actors, the simulated world, the JSONL event log and run summaries."""

from __future__ import annotations

import functools
import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path as FsPath
from typing import IO, Any, Iterable

from coopcar.cam import (
    CamGenerationState,
    CoopAwarenessMsg,
    cam_decode,
    cam_encode,
    cam_from_fix,
    cam_trigger,
    reset_generation,
)
from coopcar.dcc import DccState, DccTable, cbr_measure, dcc_min_interval, dcc_update
from coopcar.errors import DecodeError
from coopcar.geonet import GnShbFrame, gn_decode, gn_encode
from coopcar.icw import IcwMonitor
from coopcar.ldm import LdmQueryResult, LocalDynamicMap
from coopcar.netsim import FIX_UPDATE, FRAME_RX, FRAME_TX, TIMER, BroadcastChannel, SimEvent, Simulator, rng_stream
from coopcar.positioning.frames import GeoPoint, LocalPose, PvtFix
from coopcar.positioning.providers import DirectProvider, NmeaBridgeProvider, TraceProvider, TraceRecorder
from coopcar.scenario import ScenarioConfig, StationConfig
from coopcar.vehicle import BicycleState, PurePursuitConfig, PurePursuitController, bicycle_step, start_state

LOG_KINDS = ("cam-tx", "cam-rx", "ldm", "dcc", "icw", "pose", "api")


@functools.lru_cache(maxsize=256)
def _decode_frame(frame: bytes) -> CoopAwarenessMsg:
    # pure, and every receiver of a broadcast sees the same bytes
    return cam_decode(gn_decode(frame).payload)


def _r(value: float | None, digits: int = 6) -> float | None:
    return None if value is None else round(value, digits)


class EventLog:
    """In-memory list of log records with optional streaming to a file."""

    def __init__(self, stream: IO[str] | None = None) -> None:
        self.records: list[dict[str, Any]] = []
        self._stream = stream

    def emit(self, t_ms: float, station: int, kind: str, detail: dict[str, Any]) -> None:
        record = {"t_ms": round(t_ms, 3), "station": station, "kind": kind, "detail": detail}
        self.records.append(record)
        if self._stream is not None:
            self._stream.write(encode_record(record))


def encode_record(record: dict[str, Any]) -> str:
    return json.dumps(record, separators=(",", ":"), allow_nan=False) + "\n"


class Station:
    def __init__(self, cfg: StationConfig, world: World) -> None:
        sc = world.config
        self.cfg = cfg
        self.id = cfg.id
        self.world = world
        self.cam_enabled = cfg.cam_enabled
        self.dcc_enabled = cfg.dcc_enabled
        self.cam_state = CamGenerationState(t_gen_cam=sc.cam.t_gen_cam_max_ms)
        self.dcc_state = DccState(table=sc.dcc_table)
        self.dcc_smoothing = sc.dcc_smoothing
        self.ldm = LocalDynamicMap(sc.ldm_max_age_ms)
        self.icw = IcwMonitor(sc.zone, sc.icw, sc.frame) if cfg.icw_enabled and sc.zone else None
        self.noise_rng = rng_stream(sc.seed, cfg.id, "noise")
        self.cam_tx = 0
        self.cam_rx = 0
        self.rx_errors = 0
        self.last_fix: PvtFix | None = None
        self.in_zone = False
        self.recorder: TraceRecorder | None = None

        self.vehicle: BicycleState | None = None
        self.controller: PurePursuitController | None = None
        self.trace: TraceProvider | None = None
        if cfg.role == "mobile":
            pp = PurePursuitConfig(cfg.lookahead, cfg.target_speed, cfg.max_steer)
            self.controller = PurePursuitController(cfg.path, pp)
            self.vehicle = start_state(cfg.path, cfg.start_s, cfg.target_speed, cfg.wheelbase)
        elif cfg.role == "stationary":
            pose = cfg.pose
            theta = math.radians(90.0 - pose.heading)
            self.vehicle = BicycleState(pose.x, pose.y, theta, 0.0, cfg.wheelbase)
        else:
            self.trace = TraceProvider.from_file(cfg.trace_file)
        self.provider = NmeaBridgeProvider(sc.frame) if cfg.positioning == "nmea" else DirectProvider(sc.frame)

    # -- state snapshots -------------------------------------------------

    def local_pose(self, now: float) -> LocalPose | None:
        if self.vehicle is None:
            return None
        x, y = self.vehicle.x, self.vehicle.y
        sigma = self.cfg.noise_sigma
        if sigma > 0:
            x += self.noise_rng.gauss(0.0, sigma)
            y += self.noise_rng.gauss(0.0, sigma)
        st = self.vehicle
        return LocalPose(x, y, 90.0 - math.degrees(st.theta), st.v, int(now))

    def dcc_interval(self) -> float:
        return dcc_min_interval(self.dcc_state) if self.dcc_enabled else 0.0

    # -- API-facing operations -------------------------------------------

    def cam_start(self) -> bool:
        if self.cam_enabled:
            return False
        self.cam_enabled = True
        self.cam_state = reset_generation(self.cam_state)
        return True

    def cam_stop(self) -> bool:
        if not self.cam_enabled:
            return False
        self.cam_enabled = False
        return True

    def configure_dcc(self, table: DccTable | None, enabled: bool | None, smoothing: float | None) -> None:
        if table is not None:
            self.dcc_state = dcc_update(DccState(table=table, last_cbr=self.dcc_state.last_cbr), self.dcc_state.last_cbr)
        if enabled is not None:
            self.dcc_enabled = enabled
        if smoothing is not None:
            self.dcc_smoothing = smoothing

    def ldm_query(self, center: GeoPoint, now: float, max_age_ms: float | None = None) -> list[LdmQueryResult]:
        return self.ldm.query(center, now, max_age_ms)

    def status(self, now: float) -> dict[str, Any]:
        fix = self.last_fix
        pos = fix.position if fix else None
        return {
            "station": self.id,
            "role": self.cfg.role,
            "time_ms": round(now, 3),
            "cam_enabled": self.cam_enabled,
            "cam_tx": self.cam_tx,
            "cam_rx": self.cam_rx,
            "dcc": {
                "enabled": self.dcc_enabled,
                "state": self.dcc_state.name,
                "cbr": _r(self.dcc_state.last_cbr),
                "interval_ms": dcc_min_interval(self.dcc_state),
            },
            "ldm_size": len(self.ldm),
            "position": None if pos is None else {"lat": pos.latitude, "lon": pos.longitude},
            "speed": fix.speed if fix else None,
            "heading": fix.heading if fix else None,
            "warnings_active": self.icw.active if self.icw else [],
        }


@dataclass(frozen=True)
class _Tx:
    station: int
    fix: PvtFix
    reason: str
    triggers: tuple[str, ...]


class World:
    """All stations, the channel and the event loop for one scenario run."""

    def __init__(self, config: ScenarioConfig, log: EventLog | None = None, trace_dir: str | FsPath | None = None) -> None:
        self.config = config
        self.log = log or EventLog()
        self.sim = Simulator()
        self.channel = BroadcastChannel(config.channel)
        self.end_ms = config.duration_s * 1000.0
        self.stations: dict[int, Station] = {}
        self._trace_files: list[IO[str]] = []
        for cfg in config.stations:
            station = Station(cfg, self)
            self.stations[cfg.id] = station
            self.channel.register(cfg.id)
            if trace_dir is not None:
                fh = open(FsPath(trace_dir) / f"station_{cfg.id}.jsonl", "w", encoding="utf-8")
                self._trace_files.append(fh)
                station.recorder = TraceRecorder(fh)
        for station in self.stations.values():
            if station.trace is not None and not station.trace.exhausted:
                self._schedule(station.trace.peek_time(), FIX_UPDATE, self._on_fix_update, station.id)
            self._schedule(0.0, TIMER, self._on_tick, station.id, "tick")
        for station in self.stations.values():
            self._schedule(config.dcc_window_ms, TIMER, self._on_housekeeping, station.id, "dcc")
            if station.icw is not None:
                self._schedule(0.0, TIMER, self._on_icw_timer, station.id, "icw")

    def _schedule(self, t: float, kind: str, handler, station: int, payload: Any = None) -> None:
        if t < self.end_ms:
            self.sim.schedule(t, kind, handler, station, payload)

    @property
    def now(self) -> float:
        return self.sim.now

    # -- event handlers ----------------------------------------------------

    def _on_fix_update(self, ev: SimEvent) -> None:
        station = self.stations[ev.station]
        record = station.trace.pop()
        station.last_fix = record.fix
        if not station.trace.exhausted:
            self._schedule(station.trace.peek_time(), FIX_UPDATE, self._on_fix_update, station.id)

    def _on_tick(self, ev: SimEvent) -> None:
        now = ev.time_ms
        station = self.stations[ev.station]
        cfg = self.config
        if station.vehicle is not None:
            pose = station.local_pose(now)
            station.last_fix = station.provider.fix_for(pose)
            self._log_pose(station, now)
        fix = station.last_fix
        if fix is not None and station.recorder is not None:
            station.recorder.record(int(now), fix)

        if fix is not None and station.cam_enabled:
            decision = cam_trigger(station.cam_state, fix, now, station.dcc_interval(), cfg.cam)
            if decision.transmit:
                station.cam_state = decision.state
                tx = _Tx(station.id, fix, decision.reason, decision.triggers)
                self.sim.schedule(now, FRAME_TX, self._on_frame_tx, station.id, tx)

        if station.controller is not None:
            cmd = station.controller.command(station.vehicle)
            station.vehicle = bicycle_step(station.vehicle, cmd.angle, cfg.step_ms / 1000.0, station.cfg.target_speed)
        self._schedule(now + cfg.step_ms, TIMER, self._on_tick, station.id, "tick")

    def _log_pose(self, station: Station, now: float) -> None:
        cfg = self.config
        st = station.vehicle
        if station.cfg.role == "mobile" and cfg.zone is not None:
            inside = cfg.zone.contains_local(st.x, st.y, cfg.frame)
            if inside != station.in_zone:
                station.in_zone = inside
                self.log.emit(now, station.id, "pose", {"zone": "enter" if inside else "exit", "x": _r(st.x), "y": _r(st.y)})
        if station.cfg.role == "mobile" and cfg.pose_interval_ms and int(now) % cfg.pose_interval_ms == 0:
            self.log.emit(now, station.id, "pose", self._pose_detail(st))

    @staticmethod
    def _pose_detail(st: BicycleState) -> dict[str, Any]:
        return {
            "x": _r(st.x),
            "y": _r(st.y),
            "heading": _r((90.0 - math.degrees(st.theta)) % 360.0, 4),
            "speed": _r(st.v, 4),
        }

    def _on_frame_tx(self, ev: SimEvent) -> None:
        now = ev.time_ms
        tx: _Tx = ev.payload
        station = self.stations[tx.station]
        msg = cam_from_fix(station.id, tx.fix, int(now))
        payload = cam_encode(msg)
        frame = gn_encode(
            GnShbFrame(
                sourceAddress=station.id,
                timestamp=int(now) % 2**32,
                latitude=msg.latitude if msg.latitude is not None else 900000001,
                longitude=msg.longitude if msg.longitude is not None else 1800000001,
                speed=msg.speed if msg.speed is not None else 16383,
                heading=msg.heading if msg.heading is not None else 3601,
                payload=payload,
            )
        )
        station.cam_tx += 1
        self.log.emit(
            now,
            station.id,
            "cam-tx",
            {
                "gdt": msg.genDeltaTime,
                "lat": msg.latitude,
                "lon": msg.longitude,
                "speed": msg.speed,
                "heading": msg.heading,
                "reason": tx.reason,
                "triggers": list(tx.triggers),
                "bytes": len(frame),
            },
        )
        for delivery in self.channel.broadcast(frame, station.id, now):
            self.sim.schedule(delivery.time_ms, FRAME_RX, self._on_frame_rx, delivery.rx_station, (station.id, frame))

    def _on_frame_rx(self, ev: SimEvent) -> None:
        now = ev.time_ms
        station = self.stations[ev.station]
        sender, frame = ev.payload
        try:
            msg = _decode_frame(frame)
        except DecodeError as exc:
            station.rx_errors += 1
            self.log.emit(now, station.id, "cam-rx", {"from": sender, "error": type(exc).__name__})
            return
        station.cam_rx += 1
        known = msg.stationId in station.ldm
        changed = station.ldm.upsert(msg, now)
        self.log.emit(now, station.id, "cam-rx", {"from": msg.stationId, "gdt": msg.genDeltaTime, "fresh": changed})
        if changed and not known:
            self.log.emit(now, station.id, "ldm", {"op": "insert", "remote": msg.stationId})
        if changed and station.icw is not None:
            self._evaluate_icw(station, now)

    def _on_housekeeping(self, ev: SimEvent) -> None:
        now = ev.time_ms
        station = self.stations[ev.station]
        window = self.config.dcc_window_ms
        cbr = cbr_measure(self.channel.take_busy_us(station.id) / 1000.0, window)
        previous = station.dcc_state.current_row
        station.dcc_state = dcc_update(station.dcc_state, cbr, station.dcc_smoothing)
        self.log.emit(
            now,
            station.id,
            "dcc",
            {
                "cbr": _r(cbr),
                "state": station.dcc_state.name,
                "interval_ms": dcc_min_interval(station.dcc_state),
                "changed": station.dcc_state.current_row != previous,
                "enabled": station.dcc_enabled,
            },
        )
        for remote in station.ldm.gc(now):
            self.log.emit(now, station.id, "ldm", {"op": "expire", "remote": remote})
        self._schedule(now + window, TIMER, self._on_housekeeping, station.id, "dcc")

    def _on_icw_timer(self, ev: SimEvent) -> None:
        self._evaluate_icw(self.stations[ev.station], ev.time_ms)
        self._schedule(ev.time_ms + 100.0, TIMER, self._on_icw_timer, ev.station, "icw")

    def _evaluate_icw(self, station: Station, now: float) -> None:
        fix = station.last_fix
        pose = station.local_pose(now) if station.vehicle is not None else None
        if fix is None or fix.position is None or pose is None:
            return
        results = station.ldm.query(fix.position, now)
        for w in station.icw.evaluate(pose, results, now):
            self.log.emit(
                now,
                station.id,
                "icw",
                {
                    "remote": w.remote_station_id,
                    "state": w.state,
                    "tti_s": _r(w.tti_s),
                    "distance_m": _r(w.remote_distance_m),
                },
            )

    # -- driving the loop ----------------------------------------------------

    def run(self, until_ms: float | None = None) -> None:
        limit = self.end_ms if until_ms is None else min(until_ms, self.end_ms)
        self.sim.run(limit)

    def finish(self) -> None:
        """Emit the closing pose snapshot of every station and close trace files."""
        if self.end_ms > 0:
            for station in self.stations.values():
                detail = {"final": True, "cam_tx": station.cam_tx, "cam_rx": station.cam_rx}
                if station.vehicle is not None:
                    detail.update(self._pose_detail(station.vehicle))
                self.log.emit(self.end_ms, station.id, "pose", detail)
        for fh in self._trace_files:
            fh.close()
        self._trace_files.clear()


def summarize(records: Iterable[dict[str, Any]]) -> dict[str, Any]:
    """Run statistics computed from log records only."""
    duration_ms = 0.0
    stations: dict[int, dict[str, Any]] = {}
    cbr_sum: dict[int, list[float]] = {}
    raises: list[tuple[float, int, int]] = []
    clears = 0
    entries: dict[int, list[float]] = {}
    exits: dict[int, list[float]] = {}

    def st(sid: int) -> dict[str, Any]:
        return stations.setdefault(sid, {"cam_tx": 0, "cam_rx": 0})

    for rec in records:
        sid, kind, detail, t = rec["station"], rec["kind"], rec["detail"], rec["t_ms"]
        if kind == "cam-tx":
            st(sid)["cam_tx"] += 1
        elif kind == "cam-rx" and "error" not in detail:
            st(sid)["cam_rx"] += 1
        elif kind == "dcc":
            acc = cbr_sum.setdefault(sid, [0.0, 0])
            acc[0] += detail["cbr"]
            acc[1] += 1
        elif kind == "icw":
            if detail["state"] == "raised":
                raises.append((t, sid, detail["remote"]))
            else:
                clears += 1
        elif kind == "pose":
            st(sid)
            if detail.get("final"):
                duration_ms = max(duration_ms, t)
            elif detail.get("zone") == "enter":
                entries.setdefault(sid, []).append(t)
            elif detail.get("zone") == "exit":
                exits.setdefault(sid, []).append(t)

    duration_s = duration_ms / 1000.0
    for sid, data in stations.items():
        data["cam_rate_hz"] = round(data["cam_tx"] / duration_s, 6) if duration_s > 0 else 0.0
        if sid in cbr_sum and cbr_sum[sid][1]:
            data["mean_cbr"] = round(cbr_sum[sid][0] / cbr_sum[sid][1], 6)

    leads = []
    for t, _ego, remote in raises:
        later = [e for e in entries.get(remote, []) if e >= t]
        if later:
            leads.append(later[0] - t)
    laps_warned = 0
    n_entries = 0
    for remote, ents in entries.items():
        ex = exits.get(remote, [])
        for e in ents:
            n_entries += 1
            window_start = max([x for x in ex if x < e], default=-math.inf)
            if any(r == remote and window_start < t <= e for t, _ego, r in raises):
                laps_warned += 1

    return {
        "duration_s": duration_s,
        "stations": {str(k): stations[k] for k in sorted(stations)},
        "warnings_raised": len(raises),
        "warnings_cleared": clears,
        "zone_entries": n_entries,
        "zone_entries_warned": laps_warned,
        "raises_without_entry": len(raises) - len(leads),
        "min_lead_time_s": round(min(leads) / 1000.0, 6) if leads else None,
        "lead_times_s": [round(x / 1000.0, 6) for x in leads],
    }


def read_log(path: str | FsPath) -> list[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def verify_log(path: str | FsPath, summary: dict[str, Any]) -> bool:
    """True when ``summary`` equals the statistics recomputed from the log file."""
    return summarize(read_log(path)) == summary


def file_sha256(path: str | FsPath) -> str:
    return hashlib.sha256(FsPath(path).read_bytes()).hexdigest()


@dataclass
class RunResult:
    summary: dict[str, Any]
    records: list[dict[str, Any]]
    world: World
    log_path: FsPath | None = None


def run_scenario(
    config: ScenarioConfig,
    seed: int | None = None,
    out: str | FsPath | None = None,
    duration_s: float | None = None,
    trace_dir: str | FsPath | None = None,
) -> RunResult:
    """Run the scenario to completion and optionally write the JSONL log to ``out``."""
    if seed is not None:
        config = replace(config, seed=seed, channel=replace(config.channel, rng_seed=seed))
    if duration_s is not None:
        config = replace(config, duration_s=duration_s)
    fh = open(out, "w", encoding="utf-8", newline="\n") if out is not None else None
    try:
        world = World(config, EventLog(fh), trace_dir)
        world.run()
        world.finish()
    finally:
        if fh is not None:
            fh.close()
    records = world.log.records
    return RunResult(summarize(records), records, world, FsPath(out) if out is not None else None)
