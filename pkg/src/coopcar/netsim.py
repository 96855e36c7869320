"""Deterministic discrete-event core and a lossy broadcast channel.

The channel replaces the 802.11p radio. Frames never collide; each receiver
drops a frame with an independent Bernoulli draw. Every frame adds its
airtime to every station's busy-time counter, which the stations turn into a
channel busy ratio.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from coopcar.errors import OrderingError, RegistrationError

FRAME_TX = "frame-tx"
FRAME_RX = "frame-rx"
TIMER = "timer"
FIX_UPDATE = "fix-update"
EVENT_KINDS = (FRAME_TX, FRAME_RX, TIMER, FIX_UPDATE)


def airtime_us(frame_len_bytes: int, bitrate_bps: float) -> float:
    """Payload-only airtime; PHY preamble and headers are ignored."""
    if frame_len_bytes <= 0:
        raise ValueError("frame length must be > 0")
    return frame_len_bytes * 8 / bitrate_bps * 1e6


def rng_stream(seed: int, station: int | str, purpose: str) -> random.Random:
    """Independent generator for one (station, purpose) pair."""
    digest = hashlib.sha256(f"{seed}/{station}/{purpose}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class ChannelConfig:
    bitrate_bps: float = 6_000_000.0
    loss_probability: float = 0.0
    latency_ms: float = 1.0
    jitter_ms: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.bitrate_bps > 0:
            raise ValueError("bitrate_bps must be > 0")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must be in [0, 1]")
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency_ms and jitter_ms must be >= 0")


@dataclass(frozen=True)
class Delivery:
    rx_station: int
    time_ms: float


class BroadcastChannel:
    def __init__(self, config: ChannelConfig) -> None:
        self.config = config
        self._stations: list[int] = []
        self._busy_us: dict[int, float] = {}
        self._loss_rng: dict[int, random.Random] = {}
        self._jitter_rng: dict[int, random.Random] = {}
        self.frames_sent = 0

    @property
    def stations(self) -> list[int]:
        return list(self._stations)

    def register(self, station_id: int) -> None:
        if station_id in self._busy_us:
            raise RegistrationError(f"station {station_id} already registered")
        self._stations.append(station_id)
        self._busy_us[station_id] = 0.0
        self._loss_rng[station_id] = rng_stream(self.config.rng_seed, station_id, "loss")
        self._jitter_rng[station_id] = rng_stream(self.config.rng_seed, station_id, "jitter")

    def broadcast(self, frame: bytes, tx_station: int, now: float) -> list[Delivery]:
        if tx_station not in self._busy_us:
            raise RegistrationError(f"station {tx_station} is not registered")
        cfg = self.config
        air = airtime_us(len(frame), cfg.bitrate_bps)
        self.frames_sent += 1
        deliveries = []
        for station in self._stations:
            self._busy_us[station] += air
            if station == tx_station:
                continue
            # one draw per receiver and frame keeps each stream's consumption fixed
            lost = self._loss_rng[station].random() < cfg.loss_probability
            jitter = self._jitter_rng[station].uniform(0.0, cfg.jitter_ms) if cfg.jitter_ms else 0.0
            if not lost:
                deliveries.append(Delivery(station, now + cfg.latency_ms + jitter))
        return deliveries

    def busy_us(self, station_id: int) -> float:
        return self._busy_us[station_id]

    def take_busy_us(self, station_id: int) -> float:
        """Return and reset the busy time accumulated since the last call."""
        value = self._busy_us[station_id]
        self._busy_us[station_id] = 0.0
        return value


@dataclass(order=False)
class SimEvent:
    time_ms: float
    kind: str
    station: int | None = None
    payload: Any = None
    handler: Callable[[SimEvent], None] | None = field(default=None, repr=False)
    seq: int = -1


class Simulator:
    """Single-threaded event loop ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._queue: list[tuple[float, int, SimEvent]] = []
        self._seq = 0
        self.now = 0.0
        self.processed = 0

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(
        self,
        time_ms: float,
        kind: str,
        handler: Callable[[SimEvent], None] | None = None,
        station: int | None = None,
        payload: Any = None,
    ) -> SimEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if time_ms < self.now:
            raise OrderingError(f"event at {time_ms} ms scheduled before now={self.now} ms")
        event = SimEvent(time_ms, kind, station, payload, handler, self._seq)
        heapq.heappush(self._queue, (time_ms, self._seq, event))
        self._seq += 1
        return event

    def peek_time(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def step(self) -> SimEvent | None:
        """Process one event; None signals the end of the simulation."""
        if not self._queue:
            return None
        time_ms, _, event = heapq.heappop(self._queue)
        self.now = time_ms
        self.processed += 1
        if event.handler is not None:
            event.handler(event)
        return event

    def run(self, until_ms: float | None = None) -> int:
        """Process events with ``time < until_ms`` (all when None)."""
        count = 0
        while self._queue and (until_ms is None or self._queue[0][0] < until_ms):
            self.step()
            count += 1
        return count
