"""Reactive decentralized congestion control.

A table maps the measured channel busy ratio (CBR) to a minimum interval
between transmissions. Row ``i`` applies while ``cbr < threshold_i``; the
last row catches everything above the previous threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class DccRow:
    threshold: float
    min_interval_ms: float
    name: str = ""


DEFAULT_ROWS = (
    DccRow(0.30, 60.0, "Relaxed"),
    DccRow(0.40, 100.0, "Active1"),
    DccRow(0.50, 200.0, "Active2"),
    DccRow(0.60, 250.0, "Active3"),
    DccRow(1.00, 1000.0, "Restrictive"),
)


@dataclass(frozen=True)
class DccTable:
    rows: tuple[DccRow, ...] = DEFAULT_ROWS

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise ValueError("DCC table needs at least one row")
        for i, row in enumerate(rows):
            if not 0.0 <= row.threshold <= 1.0:
                raise ValueError(f"rows[{i}].threshold {row.threshold} outside [0, 1]")
            if row.min_interval_ms < 0:
                raise ValueError(f"rows[{i}].min_interval_ms must be >= 0")
        for i, (a, b) in enumerate(zip(rows, rows[1:]), start=1):
            if b.threshold <= a.threshold:
                raise ValueError(f"rows[{i}].threshold must be strictly increasing")
            if b.min_interval_ms < a.min_interval_ms:
                raise ValueError(f"rows[{i}].min_interval_ms must be non-decreasing")

    def row_for(self, cbr: float) -> int:
        for i, row in enumerate(self.rows[:-1]):
            if cbr < row.threshold:
                return i
        return len(self.rows) - 1


@dataclass(frozen=True)
class DccState:
    current_row: int = 0
    last_cbr: float = 0.0
    table: DccTable = field(default_factory=DccTable)

    @property
    def name(self) -> str:
        return self.table.rows[self.current_row].name or f"row{self.current_row}"


def cbr_measure(busy_time_ms: float, window_ms: float) -> float:
    if window_ms <= 0:
        raise ValueError(f"invalid window {window_ms} ms")
    return min(1.0, max(0.0, busy_time_ms / window_ms))


def dcc_update(state: DccState, cbr: float, smoothing: float = 0.0) -> DccState:
    """Table lookup on ``cbr``; ``smoothing`` in [0, 1) blends in the previous CBR."""
    if smoothing:
        cbr = smoothing * state.last_cbr + (1.0 - smoothing) * cbr
    return DccState(state.table.row_for(cbr), cbr, state.table)


def dcc_min_interval(state: DccState) -> float:
    return state.table.rows[state.current_row].min_interval_ms
