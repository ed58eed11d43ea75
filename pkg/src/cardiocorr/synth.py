"""Synthetic ECG/PPG generators with exact per-cycle ground truth.

Event streams place the seven cardiac events per cycle from configurable
interval parameters; the PPG events trail their ECG counterparts by the
pulse arrival time (onset follows the P-peak, systolic peak follows the
R-peak).  Waveforms render those schedules as Gaussian bumps (ECG) and a
piecewise pulse with a dicrotic notch and diastolic bump (PPG).  Waveform
ground truth is snapped to the actual extrema of the noiseless signal, so
detector accuracy can be asserted in samples.

Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadSpec
from .events import TimedEvent, TimedTrace
from .ingest import SyncedRecord, Waveform

EVENT_ORDER = ("p", "q", "r", "t", "F", "P", "D")

# ECG bump shapes: (amplitude, sigma_ms)
_ECG_SHAPES = {"p": (0.20, 25.0), "q": (-0.15, 10.0), "r": (1.00, 12.0),
               "s": (-0.20, 10.0), "t": (0.35, 40.0)}
_S_LAG_MS = 40.0

# PPG pulse shape: dicrotic notch on the downstroke plus a diastolic bump.
_NOTCH_LEVEL = 0.35
_NOTCH_LAG_MS = 100.0
_DIA_SIGMA_MS = 40.0


@dataclass(frozen=True)
class SynthSpec:
    n_cycles: int
    rr_mean_ms: float = 800.0
    rr_jitter_ms: float = 0.0
    pr_mean_ms: float = 160.0
    pr_jitter_ms: float = 0.0
    pat_ms: float = 650.0
    pat_jitter_ms: float = 0.0
    delta_t_ms: float = 250.0
    fs: float = 125.0
    noise_sigma: float = 0.0
    seed: int = 0
    q_lead_ms: float = 40.0
    t_lag_ms: float = 250.0
    dia_amp: float = 0.40

    def validate(self, for_waveforms: bool = False) -> None:
        if self.n_cycles < 1:
            raise BadSpec(f"n_cycles must be >= 1, got {self.n_cycles}")
        for name in ("rr_mean_ms", "pr_mean_ms", "pat_ms", "delta_t_ms",
                     "q_lead_ms", "t_lag_ms", "fs"):
            if not getattr(self, name) > 0:
                raise BadSpec(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("rr_jitter_ms", "pr_jitter_ms", "pat_jitter_ms", "noise_sigma"):
            if getattr(self, name) < 0:
                raise BadSpec(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.pr_mean_ms < self.rr_mean_ms:
            raise BadSpec("pr_mean_ms must be below rr_mean_ms")
        if not self.pat_ms < self.rr_mean_ms:
            raise BadSpec("pat_ms must lie in (0, rr_mean_ms)")
        if not self.q_lead_ms < self.pr_mean_ms:
            raise BadSpec("q_lead_ms must be below pr_mean_ms")
        if for_waveforms and self.fs < 100:
            raise BadSpec(f"waveform synthesis needs fs >= 100 Hz, got {self.fs}")


@dataclass(frozen=True)
class GroundTruth:
    """True per-cycle event times in ms (and sample indices for waveforms)."""

    times_ms: dict[str, tuple[float, ...]]
    indices: dict[str, tuple[int, ...]] | None = None

    @property
    def n_cycles(self) -> int:
        return len(self.times_ms["r"])

    def lags(self, ecg_label: str, ppg_label: str) -> np.ndarray:
        a = np.array(self.times_ms[ecg_label])
        b = np.array(self.times_ms[ppg_label])
        return b - a

    def to_dict(self) -> dict:
        doc: dict = {"times_ms": {k: list(v) for k, v in self.times_ms.items()}}
        if self.indices is not None:
            doc["indices"] = {k: list(v) for k, v in self.indices.items()}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(
            times_ms={k: tuple(v) for k, v in doc["times_ms"].items()},
            indices={k: tuple(v) for k, v in doc["indices"].items()}
            if "indices" in doc else None,
        )


def _schedule(spec: SynthSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Draw per-cycle event times; raises BadSpec if jitter breaks ordering."""
    n = spec.n_cycles
    rr = spec.rr_mean_ms + rng.normal(0.0, spec.rr_jitter_ms, size=n)
    rr = np.maximum(rr, 0.4 * spec.rr_mean_ms)
    r = spec.rr_mean_ms + np.concatenate(([0.0], np.cumsum(rr[:-1])))

    pr = spec.pr_mean_ms + rng.normal(0.0, spec.pr_jitter_ms, size=n)
    pr = np.maximum(pr, spec.q_lead_ms + 10.0)
    p = r - pr
    q = r - spec.q_lead_ms
    t = r + spec.t_lag_ms

    onset = p + spec.pat_ms + rng.normal(0.0, spec.pat_jitter_ms, size=n)
    systolic = r + spec.pat_ms + rng.normal(0.0, spec.pat_jitter_ms, size=n)
    diastolic = systolic + spec.delta_t_ms

    sched = {"p": p, "q": q, "r": r, "t": t, "F": onset, "P": systolic, "D": diastolic}
    for name, series in sched.items():
        if np.any(series < 0):
            raise BadSpec(f"schedule places {name} before the record start")
    if np.any(systolic <= onset) or np.any(onset[1:] <= systolic[:-1]):
        raise BadSpec("pat_jitter_ms too large for the pulse spacing")
    return sched


def gen_event_streams(spec: SynthSpec) -> tuple[TimedTrace, TimedTrace, GroundTruth]:
    """Generate paired ECG/PPG timed traces plus their ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sched = _schedule(spec, rng)

    ecg_events = [
        TimedEvent(label, float(sched[label][i]))
        for i in range(spec.n_cycles)
        for label in ("p", "q", "r", "t")
    ]
    ppg_events = [
        TimedEvent(label, float(sched[label][i]))
        for i in range(spec.n_cycles)
        for label in ("F", "P", "D")
    ]
    ecg_events.sort(key=lambda e: e.time_ms)
    ppg_events.sort(key=lambda e: e.time_ms)
    truth = GroundTruth(times_ms={k: tuple(float(v) for v in vals)
                                  for k, vals in sched.items()})
    return TimedTrace(tuple(ecg_events)), TimedTrace(tuple(ppg_events)), truth


def _add_bumps(signal: np.ndarray, fs: float, centers_ms: np.ndarray,
               amp: float, sigma_ms: float) -> None:
    """Accumulate Gaussian bumps in place, each evaluated on a +-4 sigma slice."""
    n = len(signal)
    half = max(1, int(round(4.0 * sigma_ms / 1000.0 * fs)))
    for c_ms in centers_ms:
        center = int(round(c_ms / 1000.0 * fs))
        lo = max(0, center - half)
        hi = min(n, center + half + 1)
        if lo >= hi:
            continue
        t_ms = np.arange(lo, hi) * (1000.0 / fs)
        signal[lo:hi] += amp * np.exp(-0.5 * ((t_ms - c_ms) / sigma_ms) ** 2)


def _snap(signal: np.ndarray, fs: float, nominal_ms: float, mode: str,
          half_ms: float = 40.0) -> int:
    """Index of the noiseless extremum nearest the nominal event time."""
    center = int(round(nominal_ms / 1000.0 * fs))
    half = max(1, int(round(half_ms / 1000.0 * fs)))
    lo = max(0, center - half)
    hi = min(len(signal), center + half + 1)
    window = signal[lo:hi]
    offset = int(np.argmin(window)) if mode == "min" else int(np.argmax(window))
    return lo + offset


def gen_waveforms(spec: SynthSpec) -> tuple[SyncedRecord, GroundTruth]:
    """Render the event schedule as sampled ECG/PPG channels.

    Ground-truth indices point at the extrema of the noiseless channels,
    which for composite PPG shapes may sit a sample or two from the nominal
    schedule; times are the sample-aligned versions of those indices.
    """
    spec.validate(for_waveforms=True)
    rng = np.random.default_rng(spec.seed)
    sched = _schedule(spec, rng)

    last_ms = max(float(sched["t"][-1]), float(sched["D"][-1]))
    duration_ms = last_ms + 400.0
    n = int(round(duration_ms / 1000.0 * spec.fs)) + 1

    ecg = np.zeros(n)
    for label, (amp, sigma) in _ECG_SHAPES.items():
        centers = sched["r"] + _S_LAG_MS if label == "s" else sched[label]
        _add_bumps(ecg, spec.fs, centers, amp, sigma)

    # PPG base: linear upstroke onset->systolic, drop to the dicrotic notch,
    # then decay to the next onset; a Gaussian diastolic bump rides on top.
    notch_lag = min(_NOTCH_LAG_MS, 0.4 * spec.delta_t_ms)
    knot_t: list[float] = [0.0]
    knot_v: list[float] = [_NOTCH_LEVEL]
    for i in range(spec.n_cycles):
        knot_t += [float(sched["F"][i]), float(sched["P"][i]), float(sched["P"][i]) + notch_lag]
        knot_v += [0.0, 1.0, _NOTCH_LEVEL]
    virtual_onset = float(sched["P"][-1]) + (spec.rr_mean_ms - spec.pr_mean_ms)
    knot_t.append(virtual_onset)
    knot_v.append(0.0)
    if any(b <= a for a, b in zip(knot_t, knot_t[1:])):
        raise BadSpec("pulse shape knots overlap; increase rr_mean_ms or reduce delta_t_ms")
    t_grid = np.arange(n) * (1000.0 / spec.fs)
    ppg = np.interp(t_grid, knot_t, knot_v)
    _add_bumps(ppg, spec.fs, sched["D"], spec.dia_amp, _DIA_SIGMA_MS)

    modes = {"p": "max", "q": "min", "r": "max", "t": "max",
             "F": "min", "P": "max", "D": "max"}
    indices = {
        label: tuple(
            _snap(ecg if label in "pqrt" else ppg, spec.fs, float(ms), modes[label])
            for ms in sched[label]
        )
        for label in EVENT_ORDER
    }
    times = {
        label: tuple(1000.0 * idx / spec.fs for idx in idxs)
        for label, idxs in indices.items()
    }

    if spec.noise_sigma > 0:
        ecg = ecg + rng.normal(0.0, spec.noise_sigma, size=n)
        ppg = ppg + rng.normal(0.0, spec.noise_sigma, size=n)

    record = SyncedRecord(
        ecg=Waveform(ecg, fs=spec.fs, label="ecg"),
        ppg=Waveform(ppg, fs=spec.fs, label="ppg"),
        record_id=f"synth-seed{spec.seed}",
    )
    return record, GroundTruth(times_ms=times, indices=indices)


def write_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    Path(path).write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_ground_truth(path: str | Path) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
