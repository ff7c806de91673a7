"""Record I/O, resampling, and the internal ECG annotator.

A record is one subject's synchronized SCG/ECG streams. On disk it is a
UTF-8 CSV with header ``t,scg`` or ``t,scg,ecg`` and one sample per row; the
time column is only checked for monotonicity. R-peak annotations live in a
sibling ``<record>.rpeaks`` file, one ascending integer sample index per
line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from .errors import RecordFormatError, ValidationError


@dataclass
class Record:
    """Synchronized sample streams for one subject."""

    subject_id: str
    fs: float
    scg: np.ndarray
    ecg: np.ndarray | None = None
    rpeaks: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.fs <= 0:
            raise ValidationError(f"sampling rate must be > 0, got {self.fs}")
        self.scg = np.asarray(self.scg, dtype=np.float64)
        if self.scg.ndim != 1:
            raise ValidationError("scg must be one-dimensional")
        if self.ecg is not None:
            self.ecg = np.asarray(self.ecg, dtype=np.float64)
            if self.ecg.shape != self.scg.shape:
                raise ValidationError(
                    f"ecg length {self.ecg.size} != scg length {self.scg.size}")
        if self.rpeaks is not None:
            self.rpeaks = np.asarray(self.rpeaks, dtype=np.int64)
            validate_annotations(self.rpeaks, len(self.scg))

    def __len__(self) -> int:
        return self.scg.size


def validate_annotations(indices: np.ndarray, length: int) -> None:
    """Check that annotation indices are strictly increasing and in range."""
    indices = np.asarray(indices)
    if indices.size == 0:
        return
    if np.any(np.diff(indices) <= 0):
        raise ValidationError("annotation indices must be strictly increasing")
    if indices[0] < 0 or indices[-1] >= length:
        raise ValidationError(
            f"annotation indices must lie in [0, {length - 1}]")


def load_record(path: str | Path, fs: float, subject_id: str | None = None) -> Record:
    """Load a record CSV plus its optional sibling annotation file."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        columns = [c.strip() for c in header.split(",")]
        if columns not in (["t", "scg"], ["t", "scg", "ecg"]):
            raise RecordFormatError(
                f"{path}: expected header 't,scg' or 't,scg,ecg', got {header!r}")
        has_ecg = len(columns) == 3
        times, scg, ecg = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise RecordFormatError(
                    f"{path}:{lineno}: expected {len(columns)} fields, got {len(parts)}")
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise RecordFormatError(f"{path}:{lineno}: {exc}") from None
            times.append(values[0])
            scg.append(values[1])
            if has_ecg:
                ecg.append(values[2])

    times_arr = np.asarray(times)
    if times_arr.size > 1 and np.any(np.diff(times_arr) <= 0):
        raise RecordFormatError(f"{path}: time column is not strictly increasing")

    rpeaks = None
    ann_path = annotation_path(path)
    if ann_path.exists():
        rpeaks = load_annotations(ann_path)

    return Record(
        subject_id=subject_id or path.stem,
        fs=fs,
        scg=np.asarray(scg),
        ecg=np.asarray(ecg) if has_ecg else None,
        rpeaks=rpeaks,
    )


def annotation_path(record_path: str | Path) -> Path:
    return Path(str(record_path) + ".rpeaks")


def load_annotations(path: str | Path) -> np.ndarray:
    indices = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                indices.append(int(line))
            except ValueError as exc:
                raise RecordFormatError(f"{path}:{lineno}: {exc}") from None
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and np.any(np.diff(indices) <= 0):
        raise ValidationError(f"{path}: annotation indices must be strictly increasing")
    return indices


def write_record(record: Record, path: str | Path) -> None:
    """Write a record CSV (and ``.rpeaks`` sibling when annotated).

    Sample values are written with shortest round-trip formatting, so a
    load after a write reproduces them bit for bit.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        if record.ecg is not None:
            fh.write("t,scg,ecg\n")
            for i in range(len(record)):
                t = i / record.fs
                fh.write(f"{t!r},{float(record.scg[i])!r},{float(record.ecg[i])!r}\n")
        else:
            fh.write("t,scg\n")
            for i in range(len(record)):
                fh.write(f"{i / record.fs!r},{float(record.scg[i])!r}\n")
    if record.rpeaks is not None:
        with open(annotation_path(path), "w", encoding="utf-8") as fh:
            for idx in record.rpeaks:
                fh.write(f"{int(idx)}\n")


def resample(signal: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Linear-interpolation resampling; output length = round(L*fs_out/fs_in)."""
    if fs_in <= 0 or fs_out <= 0:
        raise ValidationError("sampling rates must be > 0")
    signal = np.asarray(signal, dtype=np.float64)
    if fs_in == fs_out:
        return signal.copy()
    out_len = int(round(signal.size * fs_out / fs_in))
    positions = np.arange(out_len) * (fs_in / fs_out)
    return np.interp(positions, np.arange(signal.size), signal)


def rescale_indices(indices: np.ndarray, fs_in: float, fs_out: float,
                    out_len: int) -> np.ndarray:
    """Map annotation indices to a new rate; collisions collapse to one."""
    scaled = np.round(np.asarray(indices) * (fs_out / fs_in)).astype(np.int64)
    scaled = np.clip(scaled, 0, out_len - 1)
    return np.unique(scaled)


def resample_record(record: Record, fs_out: float) -> Record:
    """Resample all streams of a record to fs_out."""
    if fs_out == record.fs:
        return record
    scg = resample(record.scg, record.fs, fs_out)
    ecg = resample(record.ecg, record.fs, fs_out) if record.ecg is not None else None
    rpeaks = None
    if record.rpeaks is not None:
        rpeaks = rescale_indices(record.rpeaks, record.fs, fs_out, scg.size)
    return Record(record.subject_id, fs_out, scg, ecg, rpeaks)


def annotate_ecg_rpeaks(ecg: np.ndarray, fs: float) -> np.ndarray:
    """Locate R-peaks with a differenced-squared-integrated energy envelope.

    The envelope is thresholded adaptively (fraction of its 99th
    percentile), local maxima closer than a 200 ms refractory period are
    thinned, and each surviving candidate is snapped to the largest
    baseline excursion of the raw ECG within +-100 ms. A flat signal
    yields an empty result.
    """
    ecg = np.asarray(ecg, dtype=np.float64)
    if ecg.size < 2 * fs:
        raise ValidationError(f"need at least 2 s of signal, got {ecg.size / fs:.3f} s")

    energy = np.gradient(ecg) ** 2
    width = max(1, int(round(0.15 * fs)))
    envelope = np.convolve(energy, np.ones(width) / width, mode="same")

    scale = np.percentile(envelope, 99)
    if scale <= 0:
        return np.zeros(0, dtype=np.int64)
    threshold = 0.3 * scale
    refractory = max(1, int(round(0.2 * fs)))
    candidates, _ = find_peaks(envelope, height=threshold, distance=refractory)
    if candidates.size == 0:
        return np.zeros(0, dtype=np.int64)

    baseline = np.median(ecg)
    half = max(1, int(round(0.1 * fs)))
    refined = np.empty(candidates.size, dtype=np.int64)
    for i, c in enumerate(candidates):
        lo = max(0, c - half)
        hi = min(ecg.size, c + half + 1)
        refined[i] = lo + int(np.argmax(np.abs(ecg[lo:hi] - baseline)))
    return np.unique(refined)
