"""Cardiac event detection on ECG and PPG waveforms.

ECG events (P, Q, R, T peaks) come from an R-peak detector in the
Pan-Tompkins family (band-pass, derivative, squaring, moving-window
integration, adaptive dual thresholds, refractory period) followed by
fixed-window searches around each R.  PPG events (pulse onset, systolic
peak, diastolic peak) come from prominence-gated peak picking and
per-pulse extremum searches.

All outputs are sample indices into the input waveform.  Events whose
search window leaves the record are reported absent rather than clamped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, filtfilt, find_peaks

from .errors import BadBand, SignalTooShort
from .ingest import Waveform

# Search windows around R, in seconds (Q before R, P before Q, T after R).
Q_WINDOW_S = 0.080
P_WINDOW_S = 0.300
T_GAP_S = 0.080
T_WINDOW_S = 0.400

MIN_DURATION_MS = 2000.0


@dataclass(frozen=True)
class EcgEvents:
    """Per-cycle ECG event indices, aligned to ``r_peaks``."""

    r_peaks: np.ndarray
    p_peaks: tuple[int | None, ...]
    q_peaks: tuple[int | None, ...]
    t_peaks: tuple[int | None, ...]

    def __post_init__(self):
        object.__setattr__(self, "r_peaks", np.asarray(self.r_peaks, dtype=np.int64))
        r = self.r_peaks
        if len(r) != len(self.p_peaks) or len(r) != len(self.q_peaks) or len(r) != len(self.t_peaks):
            raise ValueError("per-cycle event lists must align with r_peaks")
        if np.any(np.diff(r) <= 0):
            raise ValueError("r_peaks must be strictly ascending")
        for i in range(len(r)):
            p, q, t = self.p_peaks[i], self.q_peaks[i], self.t_peaks[i]
            order = [v for v in (p, q, r[i], t) if v is not None]
            if any(b <= a for a, b in zip(order, order[1:])):
                raise ValueError(f"cycle {i}: events out of order {order}")

    @property
    def n_cycles(self) -> int:
        return len(self.r_peaks)


@dataclass(frozen=True)
class PpgEvents:
    """Per-pulse PPG event indices, aligned to ``systolic_peaks``."""

    systolic_peaks: np.ndarray
    onsets: tuple[int | None, ...]
    diastolic_peaks: tuple[int | None, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "systolic_peaks", np.asarray(self.systolic_peaks, dtype=np.int64)
        )
        s = self.systolic_peaks
        if len(s) != len(self.onsets) or len(s) != len(self.diastolic_peaks):
            raise ValueError("per-pulse event lists must align with systolic_peaks")
        if np.any(np.diff(s) <= 0):
            raise ValueError("systolic_peaks must be strictly ascending")
        for i in range(len(s)):
            onset, dia = self.onsets[i], self.diastolic_peaks[i]
            if onset is not None and not onset < s[i]:
                raise ValueError(f"pulse {i}: onset {onset} not before systolic {s[i]}")
            if dia is not None and not s[i] <= dia:
                raise ValueError(f"pulse {i}: diastolic {dia} before systolic {s[i]}")

    @property
    def n_cycles(self) -> int:
        return len(self.systolic_peaks)


def bandpass(w: Waveform, lo: float, hi: float, order: int = 2) -> Waveform:
    """Zero-phase Butterworth band-pass; length and sample times preserved."""
    if not (0 < lo < hi < w.fs / 2):
        raise BadBand(f"need 0 < lo < hi < fs/2, got lo={lo}, hi={hi}, fs={w.fs}")
    nyq = w.fs / 2.0
    b, a = butter(order, [lo / nyq, hi / nyq], btype="band")
    y = filtfilt(b, a, w.samples)
    return Waveform(y, fs=w.fs, label=w.label)


def detect_r_peaks(ecg: Waveform, band: tuple[float, float] = (5.0, 15.0),
                   integration_ms: float = 150.0,
                   refractory_ms: float = 200.0) -> np.ndarray:
    """Detect R-peaks, returned as strictly ascending sample indices.

    Stages: band-pass, five-point derivative, squaring, moving-window
    integration, peak candidates at the refractory spacing, adaptive
    signal/noise thresholds with a search-back pass for long gaps, then
    refinement of each accepted candidate to the band-passed maximum.
    """
    if ecg.duration_ms < MIN_DURATION_MS:
        raise SignalTooShort(
            f"need >= {MIN_DURATION_MS / 1000:.0f} s of signal, got {ecg.duration_ms / 1000:.2f} s"
        )
    fs = ecg.fs
    lo, hi = band
    hi = min(hi, 0.45 * fs)  # keep the band valid at low sampling rates
    filtered = bandpass(ecg, lo, hi).samples

    # Derivative emphasizes QRS slope; squaring rectifies and sharpens it.
    kernel = np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * (fs / 8.0)
    squared = np.convolve(filtered, kernel, mode="same") ** 2

    win = max(1, round(integration_ms / 1000.0 * fs))
    mwi = np.convolve(squared, np.ones(win) / win, mode="same")

    refractory = max(1, round(refractory_ms / 1000.0 * fs))
    candidates, _ = find_peaks(mwi, distance=refractory)
    if candidates.size == 0:
        return np.array([], dtype=np.int64)

    # Adaptive signal/noise levels, seeded from the first two seconds.
    head = mwi[: int(2 * fs)]
    spk = 0.25 * float(head.max())
    npk = 0.5 * float(head.mean())
    threshold = npk + 0.25 * (spk - npk)

    accepted: list[int] = []
    rejected: list[int] = []
    for idx in candidates:
        if mwi[idx] > threshold and mwi[idx] > 0:
            accepted.append(int(idx))
            spk = 0.125 * mwi[idx] + 0.875 * spk
        else:
            rejected.append(int(idx))
            npk = 0.125 * mwi[idx] + 0.875 * npk
        threshold = npk + 0.25 * (spk - npk)

    # Search-back: a gap much longer than the running RR suggests a missed
    # beat; admit the largest rejected candidate above the lower threshold.
    if len(accepted) >= 2 and rejected:
        rejected_arr = np.array(rejected)
        rr = np.diff(accepted)
        filled: list[int] = [accepted[0]]
        for nxt in accepted[1:]:
            gap = nxt - filled[-1]
            if gap > 1.66 * float(np.median(rr)):
                inside = rejected_arr[(rejected_arr > filled[-1]) & (rejected_arr < nxt)]
                inside = inside[mwi[inside] > 0.5 * threshold]
                if inside.size:
                    filled.append(int(inside[np.argmax(mwi[inside])]))
            filled.append(nxt)
        accepted = filled

    # Refine each candidate to the local band-passed maximum.
    half = max(1, round(0.100 * fs))
    peaks: list[int] = []
    for idx in accepted:
        lo_i = max(0, idx - half)
        hi_i = min(len(filtered), idx + half + 1)
        peaks.append(lo_i + int(np.argmax(filtered[lo_i:hi_i])))

    # Refinement can merge neighbours: deduplicate and re-apply refractory,
    # keeping the larger peak of any colliding pair.
    peaks = sorted(set(peaks))
    result: list[int] = []
    for p in peaks:
        if result and p - result[-1] < refractory:
            if filtered[p] > filtered[result[-1]]:
                result[-1] = p
        else:
            result.append(p)
    return np.array(result, dtype=np.int64)


def delineate_ecg(ecg: Waveform, r_peaks: np.ndarray) -> EcgEvents:
    """Locate P, Q and T around each R-peak with fixed search windows.

    Q is the minimum shortly before R, P the maximum in the window before
    the Q search region, T the maximum after R.  A window that leaves the
    record makes the event absent for that cycle.
    """
    x = ecg.samples
    fs = ecg.fs
    n = len(x)
    q_w = round(Q_WINDOW_S * fs)
    p_w = round(P_WINDOW_S * fs)
    t_gap = round(T_GAP_S * fs)
    t_w = round(T_WINDOW_S * fs)

    p_peaks: list[int | None] = []
    q_peaks: list[int | None] = []
    t_peaks: list[int | None] = []
    for r in np.asarray(r_peaks, dtype=np.int64):
        q_lo = r - q_w
        if q_lo >= 0 and q_lo < r:
            q = q_lo + int(np.argmin(x[q_lo:r]))
        else:
            q = None
        q_peaks.append(q)

        p_lo = r - p_w
        if p_lo >= 0 and p_lo < q_lo:
            p = p_lo + int(np.argmax(x[p_lo:q_lo]))
        else:
            p = None
        p_peaks.append(p)

        t_lo = r + t_gap + 1
        t_hi = r + t_w + 1
        if t_hi <= n and t_lo < t_hi:
            t = t_lo + int(np.argmax(x[t_lo:t_hi]))
        else:
            t = None
        t_peaks.append(t)

    return EcgEvents(
        r_peaks=np.asarray(r_peaks, dtype=np.int64),
        p_peaks=tuple(p_peaks),
        q_peaks=tuple(q_peaks),
        t_peaks=tuple(t_peaks),
    )


def detect_ppg_events(ppg: Waveform, expected_rate_hint: float | None = None) -> PpgEvents:
    """Detect pulse onsets, systolic peaks and diastolic peaks.

    The systolic peak is the dominant local maximum per pulse; the onset is
    the minimum between the previous systolic peak (or record start) and the
    current one; the diastolic peak is the largest local maximum between the
    systolic peak and the next onset (record end for the last pulse), absent
    when the downstroke has none.
    """
    if ppg.duration_ms < MIN_DURATION_MS:
        raise SignalTooShort(
            f"need >= {MIN_DURATION_MS / 1000:.0f} s of signal, got {ppg.duration_ms / 1000:.2f} s"
        )
    x = ppg.samples
    fs = ppg.fs
    rate = expected_rate_hint if expected_rate_hint else 75.0
    period_s = 60.0 / rate
    distance = max(1, round(0.5 * period_s * fs))

    spread = float(np.percentile(x, 95) - np.percentile(x, 5))
    if spread <= 0:
        return PpgEvents(np.array([], dtype=np.int64), (), ())
    systolic, _ = find_peaks(x, distance=distance, prominence=0.25 * spread)
    if systolic.size == 0:
        return PpgEvents(np.array([], dtype=np.int64), (), ())

    onsets: list[int | None] = []
    for i, s in enumerate(systolic):
        start = int(systolic[i - 1]) if i > 0 else 0
        if start < s:
            onsets.append(start + int(np.argmin(x[start:s])))
        else:
            onsets.append(None)

    diastolic: list[int | None] = []
    for i, s in enumerate(systolic):
        end = onsets[i + 1] if i + 1 < len(systolic) and onsets[i + 1] is not None else len(x)
        segment = x[s + 1:end]
        if segment.size >= 3:
            local_max, _ = find_peaks(segment)
            if local_max.size:
                best = local_max[np.argmax(segment[local_max])]
                diastolic.append(int(s) + 1 + int(best))
                continue
        diastolic.append(None)

    return PpgEvents(
        systolic_peaks=systolic.astype(np.int64),
        onsets=tuple(onsets),
        diastolic_peaks=tuple(diastolic),
    )


def events_to_csv(events: EcgEvents | PpgEvents, fs: float, path: str | Path) -> None:
    """Write events as CSV rows: cycle_index, event_label, sample_index, time_ms."""
    rows: list[tuple[int, str, int]] = []
    if isinstance(events, EcgEvents):
        per_cycle = [("p", events.p_peaks), ("q", events.q_peaks), ("t", events.t_peaks)]
        for i, r in enumerate(events.r_peaks):
            rows.append((i, "r", int(r)))
            for label, seq in per_cycle:
                if seq[i] is not None:
                    rows.append((i, label, int(seq[i])))
    else:
        for i, s in enumerate(events.systolic_peaks):
            rows.append((i, "P", int(s)))
            if events.onsets[i] is not None:
                rows.append((i, "F", int(events.onsets[i])))
            if events.diastolic_peaks[i] is not None:
                rows.append((i, "D", int(events.diastolic_peaks[i])))
    rows.sort(key=lambda r: (r[0], r[2]))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("cycle_index,event_label,sample_index,time_ms\n")
        for cycle, label, idx in rows:
            fh.write(f"{cycle},{label},{idx},{1000.0 * idx / fs!r}\n")
