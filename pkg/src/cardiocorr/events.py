"""Timed event traces, ECG/PPG cycle pairing and interval computation.

Event alphabet: ``p q r t`` for ECG peaks, ``F`` (pulse onset), ``P``
(systolic peak), ``D`` (diastolic peak) for PPG.  Times are real-valued
milliseconds from the start of the record.

A cardiac cycle is anchored at the ECG R-peak.  Each cycle is paired with
the PPG pulse whose systolic peak lags R within a configurable window;
interval records are then filled from the definitional formulas (PR = R-P,
RR = next R - R, systole = systolic - onset, and so on).  Intervals that
need the next cycle are absent on the final cycle; absent events leave
their intervals absent rather than interpolated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .delineate import EcgEvents, PpgEvents
from .errors import TimeRegression

ALPHABET = ("p", "q", "r", "t", "F", "P", "D")

ECG_INTERVAL_NAMES = ("pr_ms", "qr_ms", "rp_ms", "rt_ms", "qt_ms", "rr_ms")
PPG_INTERVAL_NAMES = (
    "systole_ms",
    "diastole_ms",
    "peak_to_peak_ms",
    "pulse_interval_ms",
    "delta_t_ms",
)

DEFAULT_LAG_WINDOW_MS = (200.0, 1200.0)


@dataclass(frozen=True)
class TimedEvent:
    label: str
    time_ms: float

    def __post_init__(self):
        if self.label not in ALPHABET:
            raise ValueError(f"unknown event label {self.label!r}")
        if self.time_ms < 0:
            raise ValueError(f"negative event time {self.time_ms}")


@dataclass(frozen=True)
class TimedTrace:
    """Chronological sequence of timed events."""

    events: tuple[TimedEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for a, b in zip(self.events, self.events[1:]):
            if b.time_ms < a.time_ms:
                raise TimeRegression(
                    f"event ({b.label}, {b.time_ms}) precedes ({a.label}, {a.time_ms})"
                )

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def shifted(self, offset_ms: float) -> "TimedTrace":
        return TimedTrace(tuple(TimedEvent(e.label, e.time_ms + offset_ms) for e in self.events))


@dataclass(frozen=True)
class EcgIntervals:
    pr_ms: float | None = None
    qr_ms: float | None = None
    rp_ms: float | None = None
    rt_ms: float | None = None
    qt_ms: float | None = None
    rr_ms: float | None = None


@dataclass(frozen=True)
class PpgIntervals:
    systole_ms: float | None = None
    diastole_ms: float | None = None
    peak_to_peak_ms: float | None = None
    pulse_interval_ms: float | None = None
    delta_t_ms: float | None = None


@dataclass(frozen=True)
class CardiacCycle:
    """One R-anchored cycle with its paired PPG pulse, if any.

    ``next_*`` fields carry the successor event times from the underlying
    ECG/PPG streams so cross-cycle intervals stay correct even when the
    neighbouring cycle is unpaired.
    """

    r_ms: float
    p_ms: float | None = None
    q_ms: float | None = None
    t_ms: float | None = None
    onset_ms: float | None = None
    systolic_ms: float | None = None
    diastolic_ms: float | None = None
    next_r_ms: float | None = None
    next_p_ms: float | None = None
    next_onset_ms: float | None = None
    next_systolic_ms: float | None = None
    ecg_intervals: EcgIntervals | None = None
    ppg_intervals: PpgIntervals | None = None

    def __post_init__(self):
        ecg_order = [v for v in (self.p_ms, self.q_ms, self.r_ms, self.t_ms) if v is not None]
        if any(b <= a for a, b in zip(ecg_order, ecg_order[1:])):
            raise ValueError(f"ECG events out of order: {ecg_order}")
        ppg_order = [v for v in (self.onset_ms, self.systolic_ms) if v is not None]
        if any(b <= a for a, b in zip(ppg_order, ppg_order[1:])):
            raise ValueError(f"PPG events out of order: {ppg_order}")
        if (
            self.systolic_ms is not None
            and self.diastolic_ms is not None
            and self.diastolic_ms < self.systolic_ms
        ):
            raise ValueError("diastolic peak before systolic peak")
        if self.systolic_ms is not None and not self.systolic_ms > self.r_ms:
            raise ValueError("paired systolic peak must follow the R-peak")

    @property
    def paired(self) -> bool:
        return self.systolic_ms is not None


@dataclass(frozen=True)
class CycleSeries:
    cycles: tuple[CardiacCycle, ...]
    fs: float
    ambiguous_pairings: int = 0

    def __len__(self) -> int:
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    @property
    def n_paired(self) -> int:
        return sum(1 for c in self.cycles if c.paired)

    def interval_series(self, name: str) -> list[float | None]:
        """Per-cycle values of one named interval (None where absent)."""
        out: list[float | None] = []
        for c in self.cycles:
            if name in ECG_INTERVAL_NAMES:
                out.append(getattr(c.ecg_intervals, name) if c.ecg_intervals else None)
            elif name in PPG_INTERVAL_NAMES:
                out.append(getattr(c.ppg_intervals, name) if c.ppg_intervals else None)
            else:
                raise KeyError(name)
        return out


def _sample_ms(index: int | None, fs: float) -> float | None:
    return None if index is None else 1000.0 * index / fs


def to_timed_trace(events: EcgEvents | PpgEvents, fs: float) -> TimedTrace:
    """Convert detected event indices to a chronological millisecond trace."""
    if fs <= 0:
        raise ValueError(f"sampling rate must be positive, got {fs}")
    items: list[TimedEvent] = []
    if isinstance(events, EcgEvents):
        for i, r in enumerate(events.r_peaks):
            for label, idx in (
                ("p", events.p_peaks[i]),
                ("q", events.q_peaks[i]),
                ("r", int(r)),
                ("t", events.t_peaks[i]),
            ):
                if idx is not None:
                    items.append(TimedEvent(label, 1000.0 * idx / fs))
    elif isinstance(events, PpgEvents):
        for i, s in enumerate(events.systolic_peaks):
            for label, idx in (
                ("F", events.onsets[i]),
                ("P", int(s)),
                ("D", events.diastolic_peaks[i]),
            ):
                if idx is not None:
                    items.append(TimedEvent(label, 1000.0 * idx / fs))
    else:
        raise TypeError(f"unsupported events type {type(events).__name__}")
    items.sort(key=lambda e: e.time_ms)
    return TimedTrace(tuple(items))


def pair_cycles(ecg: EcgEvents, ppg: PpgEvents, fs: float,
                lag_window_ms: tuple[float, float] = DEFAULT_LAG_WINDOW_MS) -> CycleSeries:
    """Pair each ECG cycle with the PPG pulse lagging R inside the window.

    When several unused pulses fall in one window the nearest lag wins and
    the ambiguity count is incremented.  Pairing is injective; unmatched
    cycles keep absent PPG fields.
    """
    lo, hi = lag_window_ms
    if not lo < hi:
        raise ValueError(f"lag window must satisfy lo < hi, got ({lo}, {hi})")

    sys_ms = [_sample_ms(int(s), fs) for s in ppg.systolic_peaks]
    used: set[int] = set()
    ambiguous = 0
    assigned: list[int | None] = []
    for r in ecg.r_peaks:
        r_ms = 1000.0 * int(r) / fs
        candidates = [
            (s - r_ms, j)
            for j, s in enumerate(sys_ms)
            if j not in used and lo <= s - r_ms <= hi
        ]
        if not candidates:
            assigned.append(None)
            continue
        if len(candidates) > 1:
            ambiguous += 1
        lag, j = min(candidates)
        used.add(j)
        assigned.append(j)

    cycles: list[CardiacCycle] = []
    n_ecg = ecg.n_cycles
    for i, r in enumerate(ecg.r_peaks):
        j = assigned[i]
        next_i = i + 1 if i + 1 < n_ecg else None
        next_j = j + 1 if j is not None and j + 1 < ppg.n_cycles else None
        cycles.append(CardiacCycle(
            r_ms=1000.0 * int(r) / fs,
            p_ms=_sample_ms(ecg.p_peaks[i], fs),
            q_ms=_sample_ms(ecg.q_peaks[i], fs),
            t_ms=_sample_ms(ecg.t_peaks[i], fs),
            onset_ms=_sample_ms(ppg.onsets[j], fs) if j is not None else None,
            systolic_ms=sys_ms[j] if j is not None else None,
            diastolic_ms=_sample_ms(ppg.diastolic_peaks[j], fs) if j is not None else None,
            next_r_ms=_sample_ms(int(ecg.r_peaks[next_i]), fs) if next_i is not None else None,
            next_p_ms=_sample_ms(ecg.p_peaks[next_i], fs) if next_i is not None else None,
            next_onset_ms=_sample_ms(ppg.onsets[next_j], fs) if next_j is not None else None,
            next_systolic_ms=sys_ms[next_j] if next_j is not None else None,
        ))
    return CycleSeries(cycles=tuple(cycles), fs=fs, ambiguous_pairings=ambiguous)


def _positive(value: float | None) -> float | None:
    return value if value is not None and value > 0 else None


def _diff(b: float | None, a: float | None) -> float | None:
    return None if a is None or b is None else b - a


def compute_intervals(series: CycleSeries) -> CycleSeries:
    """Fill per-cycle interval records from the event times."""
    out: list[CardiacCycle] = []
    for c in series.cycles:
        ecg_iv = EcgIntervals(
            pr_ms=_positive(_diff(c.r_ms, c.p_ms)),
            qr_ms=_positive(_diff(c.r_ms, c.q_ms)),
            rp_ms=_positive(_diff(c.next_p_ms, c.r_ms)),
            rt_ms=_positive(_diff(c.t_ms, c.r_ms)),
            qt_ms=_positive(_diff(c.t_ms, c.q_ms)),
            rr_ms=_positive(_diff(c.next_r_ms, c.r_ms)),
        )
        if c.paired:
            ppg_iv = PpgIntervals(
                systole_ms=_positive(_diff(c.systolic_ms, c.onset_ms)),
                diastole_ms=_positive(_diff(c.next_onset_ms, c.systolic_ms)),
                peak_to_peak_ms=_positive(_diff(c.next_systolic_ms, c.systolic_ms)),
                pulse_interval_ms=_positive(_diff(c.next_onset_ms, c.onset_ms)),
                delta_t_ms=_positive(_diff(c.diastolic_ms, c.systolic_ms)),
            )
        else:
            ppg_iv = None
        out.append(replace(c, ecg_intervals=ecg_iv, ppg_intervals=ppg_iv))
    return CycleSeries(cycles=tuple(out), fs=series.fs,
                       ambiguous_pairings=series.ambiguous_pairings)


def intervals_to_csv(series: CycleSeries, path: str | Path) -> None:
    """One row per cycle, one column per interval, empty cell when absent."""
    names = list(ECG_INTERVAL_NAMES) + list(PPG_INTERVAL_NAMES)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("cycle_index," + ",".join(names) + "\n")
        for i, c in enumerate(series.cycles):
            cells = []
            for name in names:
                rec = c.ecg_intervals if name in ECG_INTERVAL_NAMES else c.ppg_intervals
                v = getattr(rec, name) if rec is not None else None
                cells.append("" if v is None else repr(v))
            fh.write(f"{i}," + ",".join(cells) + "\n")


def read_trace_csv(path: str | Path) -> TimedTrace:
    """Read a trace CSV (header ``label,time_ms``); order errors carry line numbers."""
    events: list[TimedEvent] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["label", "time_ms"]:
            raise ValueError(f"{path}: expected header 'label,time_ms'")
        last = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            label, time_ms = row[0].strip(), float(row[1])
            if last is not None and time_ms < last:
                raise TimeRegression(f"{path}: time regression at line {lineno} ({time_ms} < {last})")
            last = time_ms
            events.append(TimedEvent(label, time_ms))
    return TimedTrace(tuple(events))


def write_trace_csv(trace: TimedTrace, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("label,time_ms\n")
        for e in trace:
            fh.write(f"{e.label},{e.time_ms!r}\n")
