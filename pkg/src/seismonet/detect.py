"""Valley detection on predicted waveforms and tolerance-based peak scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import peak_prominences

from .errors import ValidationError


@dataclass(frozen=True)
class ValleyParams:
    """Detector knobs; prominence is in the waveform's units (samples)."""

    min_prominence: float = 0.0
    refractory_ms: float = 200.0
    smoothing: int = 0

    def __post_init__(self):
        if self.refractory_ms <= 0:
            raise ValidationError(f"refractory_ms must be > 0, got {self.refractory_ms}")
        if self.min_prominence < 0:
            raise ValidationError(f"min_prominence must be >= 0, got {self.min_prominence}")
        if self.smoothing < 0:
            raise ValidationError(f"smoothing must be >= 0, got {self.smoothing}")


def detect_valleys(t_pred: np.ndarray, fs: float,
                   params: ValleyParams = ValleyParams()) -> np.ndarray:
    """Indices of waveform valleys, thinned by the refractory period.

    A valley is a sample strictly lower than both neighbors (after optional
    moving-average smoothing) with prominence at least ``min_prominence``.
    Greedy thinning keeps the deeper of any two valleys closer than
    refractory_ms*fs/1000 samples.
    """
    signal = np.asarray(t_pred, dtype=np.float64)
    if signal.size < 3:
        raise ValidationError(f"need at least 3 samples, got {signal.size}")
    if params.smoothing > 1:
        kernel = np.ones(params.smoothing) / params.smoothing
        signal = np.convolve(signal, kernel, mode="same")

    interior = np.arange(1, signal.size - 1)
    is_valley = (signal[interior] < signal[interior - 1]) & \
                (signal[interior] < signal[interior + 1])
    candidates = interior[is_valley]
    if candidates.size == 0:
        return np.zeros(0, dtype=np.int64)

    if params.min_prominence > 0:
        prominences = peak_prominences(-signal, candidates)[0]
        candidates = candidates[prominences >= params.min_prominence]
        if candidates.size == 0:
            return np.zeros(0, dtype=np.int64)

    gap = params.refractory_ms * fs / 1000.0
    # Deepest first; ties resolved by position for determinism.
    order = np.lexsort((candidates, signal[candidates]))
    kept: list[int] = []
    for idx in candidates[order]:
        if all(abs(int(idx) - k) >= gap for k in kept):
            kept.append(int(idx))
    return np.asarray(sorted(kept), dtype=np.int64)


def match_peaks(detected: np.ndarray, actual: np.ndarray, tol_ms: float,
                fs: float) -> tuple[int, int, int]:
    """One-to-one greedy nearest matching within a time tolerance.

    Candidate pairs within tol_ms*fs/1000 samples are taken closest first,
    each detection and each actual peak used at most once. Returns
    (TP, FP, FN).
    """
    detected = np.asarray(detected, dtype=np.int64)
    actual = np.asarray(actual, dtype=np.int64)
    tol = tol_ms * fs / 1000.0

    pairs = []
    for di, d in enumerate(detected):
        lo = np.searchsorted(actual, d - math.ceil(tol))
        hi = np.searchsorted(actual, d + math.ceil(tol) + 1)
        for ai in range(lo, hi):
            dist = abs(int(d) - int(actual[ai]))
            if dist <= tol:
                pairs.append((dist, di, ai))
    pairs.sort()

    used_d = np.zeros(detected.size, dtype=bool)
    used_a = np.zeros(actual.size, dtype=bool)
    tp = 0
    for _, di, ai in pairs:
        if not used_d[di] and not used_a[ai]:
            used_d[di] = True
            used_a[ai] = True
            tp += 1
    return tp, int(detected.size - tp), int(actual.size - tp)


def sensitivity(tp: int, fn: int) -> float:
    """TP/(TP+FN); NaN when the denominator is zero."""
    if tp < 0 or fn < 0:
        raise ValidationError("counts must be non-negative")
    if tp + fn == 0:
        return math.nan
    return tp / (tp + fn)


def ppv(tp: int, fp: int) -> float:
    """TP/(TP+FP); NaN when the denominator is zero."""
    if tp < 0 or fp < 0:
        raise ValidationError("counts must be non-negative")
    if tp + fp == 0:
        return math.nan
    return tp / (tp + fp)
