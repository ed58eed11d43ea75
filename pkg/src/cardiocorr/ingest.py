"""Loading and validation of paired ECG/PPG waveform recordings.

File formats:
  * channel CSV: UTF-8, one header line, one decimal amplitude per row,
    ``.`` as decimal separator (canonical header: ``amplitude``)
  * record manifest: JSON object ``{record_id, ecg_path, ppg_path, fs_hz}``,
    optionally ``ecg_fs_hz``/``ppg_fs_hz`` per-channel overrides; a file may
    also hold a list of such objects or ``{"records": [...]}``.

Channels of a record are assumed simultaneously recorded and already
time-aligned; only length trimming is performed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadColumn,
    EmptySignal,
    MissingFile,
    NonFiniteSample,
    SampleRateMismatch,
)


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled single-channel signal."""

    samples: np.ndarray
    fs: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if not self.fs > 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")
        bad = np.flatnonzero(~np.isfinite(self.samples))
        if bad.size:
            raise NonFiniteSample(int(bad[0]))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.fs

    def times_ms(self) -> np.ndarray:
        """Sample times in milliseconds from the start of the record."""
        return np.arange(len(self.samples)) * (1000.0 / self.fs)


@dataclass(frozen=True)
class SyncedRecord:
    """A pair of simultaneously recorded ECG and PPG channels."""

    ecg: Waveform
    ppg: Waveform
    record_id: str = ""

    def __post_init__(self):
        if self.ecg.fs != self.ppg.fs:
            raise SampleRateMismatch(
                f"ecg fs {self.ecg.fs} Hz != ppg fs {self.ppg.fs} Hz"
            )
        if len(self.ecg) != len(self.ppg):
            raise ValueError("channels must have equal length after trimming")

    @property
    def fs(self) -> float:
        return self.ecg.fs


def load_waveform(path: str | Path, column: str | int = 0, fs: float = 0.0,
                  label: str | None = None) -> Waveform:
    """Load one channel from a CSV file.

    ``column`` selects by header name or 0-based index.  Rows that do not
    parse as a finite number raise :class:`NonFiniteSample` with the 0-based
    data-row index.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    if not fs > 0:
        raise ValueError(f"sampling rate must be positive, got {fs}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySignal(f"{path}: no header line") from None
        header = [h.strip() for h in header]
        if isinstance(column, int):
            if not 0 <= column < len(header):
                raise BadColumn(f"{path}: column index {column} out of range")
            col_idx = column
        else:
            if column not in header:
                raise BadColumn(f"{path}: no column named {column!r}")
            col_idx = header.index(column)

        values: list[float] = []
        for i, row in enumerate(reader):
            if col_idx >= len(row):
                raise NonFiniteSample(i, f"{path}: row {i} has no value in column {col_idx}")
            try:
                v = float(row[col_idx])
            except ValueError:
                raise NonFiniteSample(i, f"{path}: row {i} is not numeric") from None
            if not math.isfinite(v):
                raise NonFiniteSample(i, f"{path}: non-finite value at row {i}")
            values.append(v)

    if not values:
        raise EmptySignal(f"{path}: no samples")
    return Waveform(np.array(values), fs=fs, label=label if label is not None else str(column))


def write_waveform_csv(w: Waveform, path: str | Path) -> None:
    """Write a channel in the canonical single-column CSV format."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("amplitude\n")
        for v in w.samples:
            fh.write(f"{v!r}\n")


def load_record_pair(ecg_path: str | Path, ppg_path: str | Path, fs: float,
                     record_id: str = "", ecg_column: str | int = 0,
                     ppg_column: str | int = 0, ecg_fs: float | None = None,
                     ppg_fs: float | None = None) -> SyncedRecord:
    """Load an ECG/PPG pair and trim both channels to the shorter length.

    Per-channel rates (``ecg_fs``/``ppg_fs``, e.g. from manifest metadata)
    must agree; a disagreement raises :class:`SampleRateMismatch` before any
    file is read.
    """
    if ecg_fs is not None and ppg_fs is not None and ecg_fs != ppg_fs:
        raise SampleRateMismatch(f"ecg metadata {ecg_fs} Hz != ppg metadata {ppg_fs} Hz")
    rate = ecg_fs if ecg_fs is not None else (ppg_fs if ppg_fs is not None else fs)
    ecg = load_waveform(ecg_path, column=ecg_column, fs=rate, label="ecg")
    ppg = load_waveform(ppg_path, column=ppg_column, fs=rate, label="ppg")
    n = min(len(ecg), len(ppg))
    if n < len(ecg):
        ecg = Waveform(ecg.samples[:n], fs=ecg.fs, label=ecg.label)
    if n < len(ppg):
        ppg = Waveform(ppg.samples[:n], fs=ppg.fs, label=ppg.label)
    return SyncedRecord(ecg=ecg, ppg=ppg, record_id=record_id)


@dataclass(frozen=True)
class ManifestEntry:
    record_id: str
    ecg_path: Path
    ppg_path: Path
    fs_hz: float
    ecg_fs_hz: float | None = None
    ppg_fs_hz: float | None = None

    def load(self) -> SyncedRecord:
        return load_record_pair(
            self.ecg_path, self.ppg_path, fs=self.fs_hz, record_id=self.record_id,
            ecg_fs=self.ecg_fs_hz, ppg_fs=self.ppg_fs_hz,
        )


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse a manifest file; relative channel paths resolve against it."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    with path.open(encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "records" in doc:
        items = doc["records"]
    elif isinstance(doc, dict):
        items = [doc]
    else:
        items = doc
    base = path.parent
    entries = []
    for item in items:
        try:
            entries.append(ManifestEntry(
                record_id=str(item["record_id"]),
                ecg_path=base / item["ecg_path"],
                ppg_path=base / item["ppg_path"],
                fs_hz=float(item["fs_hz"]),
                ecg_fs_hz=float(item["ecg_fs_hz"]) if "ecg_fs_hz" in item else None,
                ppg_fs_hz=float(item["ppg_fs_hz"]) if "ppg_fs_hz" in item else None,
            ))
        except KeyError as e:
            raise BadColumn(f"{path}: manifest entry missing key {e}") from None
    return entries


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    path = Path(path)
    base = path.parent
    records = []
    for e in entries:
        rec = {
            "record_id": e.record_id,
            "ecg_path": _relativize(e.ecg_path, base),
            "ppg_path": _relativize(e.ppg_path, base),
            "fs_hz": e.fs_hz,
        }
        if e.ecg_fs_hz is not None:
            rec["ecg_fs_hz"] = e.ecg_fs_hz
        if e.ppg_fs_hz is not None:
            rec["ppg_fs_hz"] = e.ppg_fs_hz
        records.append(rec)
    doc = records[0] if len(records) == 1 else {"records": records}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _relativize(p: Path, base: Path) -> str:
    try:
        return str(Path(p).relative_to(base))
    except ValueError:
        return str(p)
