"""Time-domain heart-rate-variability indices and Bland-Altman agreement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class HrvIndices:
    mean_nn: float
    sdnn: float
    rmssd: float
    pnn50: float


@dataclass(frozen=True)
class BlandAltmanStats:
    mean_diff: float
    sd_diff: float
    loa_low: float
    loa_high: float
    loa_range: float
    points: tuple[tuple[float, float], ...]
    outliers: tuple[int, ...]


def nn_intervals(peaks: np.ndarray, fs: float) -> np.ndarray:
    """Successive peak-to-peak intervals in milliseconds."""
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size < 2:
        raise ValidationError(f"need at least 2 peaks, got {peaks.size}")
    if np.any(np.diff(peaks) <= 0):
        raise ValidationError("peak indices must be strictly increasing")
    if fs <= 0:
        raise ValidationError(f"fs must be > 0, got {fs}")
    return np.diff(peaks) * (1000.0 / fs)


def hrv_indices(nn: np.ndarray) -> HrvIndices:
    """Mean NN, SDNN (n-1 divisor), RMSSD, and pNN50 over NN intervals (ms)."""
    nn = np.asarray(nn, dtype=np.float64)
    if nn.size < 2:
        raise ValidationError(f"need at least 2 intervals, got {nn.size}")
    diffs = np.diff(nn)
    return HrvIndices(
        mean_nn=float(np.mean(nn)),
        sdnn=float(np.std(nn, ddof=1)),
        rmssd=float(np.sqrt(np.mean(diffs ** 2))),
        pnn50=float(np.count_nonzero(np.abs(diffs) > 50.0) / diffs.size),
    )


def bland_altman(pairs) -> BlandAltmanStats:
    """Agreement statistics for paired measurements.

    Per pair (a, b): diff = a-b and mean = (a+b)/2. Limits of agreement sit
    at mean_diff +- 1.96*sd_diff (sample SD); outliers are points whose
    diff falls strictly outside the limits.
    """
    pairs = [(float(a), float(b)) for a, b in pairs]
    if len(pairs) < 2:
        raise ValidationError(f"need at least 2 pairs, got {len(pairs)}")
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    diffs = a - b
    means = (a + b) / 2.0
    mean_diff = float(np.mean(diffs))
    sd_diff = float(np.std(diffs, ddof=1))
    loa_low = mean_diff - 1.96 * sd_diff
    loa_high = mean_diff + 1.96 * sd_diff
    outliers = tuple(
        int(i) for i in range(len(pairs))
        if diffs[i] < loa_low or diffs[i] > loa_high)
    return BlandAltmanStats(
        mean_diff=mean_diff,
        sd_diff=sd_diff,
        loa_low=loa_low,
        loa_high=loa_high,
        loa_range=loa_high - loa_low,
        points=tuple(zip(means.tolist(), diffs.tolist())),
        outliers=outliers,
    )
