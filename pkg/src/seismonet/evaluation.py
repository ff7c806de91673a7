"""Scoring of detected beats against ground truth, per subject and overall."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .detect import ValleyParams, detect_valleys, match_peaks, ppv, sensitivity
from .errors import ValidationError
from .hrv import HrvIndices, bland_altman, hrv_indices, nn_intervals
from .windows import Window, group_by_subject

DEFAULT_TOL_MS = 90.0

HRV_INDEX_NAMES = ("mean_nn_ms", "sdnn_ms", "rmssd_ms", "pnn50")


@dataclass(frozen=True)
class SubjectScore:
    """One detection-performance row plus the subject's HRV index pair."""

    subject_id: str
    detected_total: int
    actual_total: int
    tp: int
    fp: int
    fn: int
    scg_hrv: HrvIndices | None
    ecg_hrv: HrvIndices | None

    @property
    def se(self) -> float:
        return sensitivity(self.tp, self.fn)

    @property
    def ppv(self) -> float:
        return ppv(self.tp, self.fp)


@dataclass
class PeakMatchReport:
    rows: list[SubjectScore]

    def totals(self) -> tuple[int, int, int, int, int]:
        detected = sum(r.detected_total for r in self.rows)
        actual = sum(r.actual_total for r in self.rows)
        tp = sum(r.tp for r in self.rows)
        fp = sum(r.fp for r in self.rows)
        fn = sum(r.fn for r in self.rows)
        return detected, actual, tp, fp, fn

    @property
    def total_se(self) -> float:
        _, _, tp, _, fn = self.totals()
        return sensitivity(tp, fn)

    @property
    def total_ppv(self) -> float:
        _, _, tp, fp, _ = self.totals()
        return ppv(tp, fp)

    def to_csv(self, path: str | Path) -> None:
        """Write per-subject rows plus a total row; Se/PPV at 2 decimals."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("subject,detected,actual,tp,fp,fn,se,ppv\n")
            for r in self.rows:
                fh.write(f"{r.subject_id},{r.detected_total},{r.actual_total},"
                         f"{r.tp},{r.fp},{r.fn},{_round2(r.se)},{_round2(r.ppv)}\n")
            detected, actual, tp, fp, fn = self.totals()
            fh.write(f"total,{detected},{actual},{tp},{fp},{fn},"
                     f"{_round2(self.total_se)},{_round2(self.total_ppv)}\n")


def _round2(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.2f}"


def window_predictor(model) -> Callable[[Window], np.ndarray]:
    """Adapt a model (or a plain window->waveform callable) to windows."""
    if hasattr(model, "predict"):
        return lambda window: model.predict(window.scg_seg)
    if callable(model):
        return model
    raise ValidationError("model must expose .predict or be callable on a window")


def merge_detections(hits: list[tuple[int, float]], min_gap: float) -> np.ndarray:
    """Deduplicate record-coordinate detections, keeping the deeper valley
    of any two closer than min_gap samples."""
    kept: list[int] = []
    for idx, _depth in sorted(hits, key=lambda h: (h[1], h[0])):
        if all(abs(idx - k) >= min_gap for k in kept):
            kept.append(idx)
    return np.asarray(sorted(kept), dtype=np.int64)


def evaluate_subject(model, test_windows: Sequence[Window], fs: float,
                     valley_params: ValleyParams = ValleyParams(),
                     tol_ms: float = DEFAULT_TOL_MS,
                     per_window: bool = False) -> SubjectScore:
    """Run the model over one subject's test windows and score detections.

    By default, detections and annotations from overlapping windows are
    mapped to record coordinates and deduplicated (detections within half
    the refractory period collapse to the deeper one) before a single
    matching pass. With ``per_window`` each window is matched separately
    and the counts summed. HRV indices always use the deduplicated,
    record-coordinate peak trains: model detections for the SCG side,
    annotations for the ECG side.
    """
    if not test_windows:
        raise ValidationError("no test windows given")
    subject = test_windows[0].subject_id
    predict = window_predictor(model)

    hits: list[tuple[int, float]] = []
    actual_all: list[int] = []
    tp = fp = fn = 0
    detected_total = actual_total = 0
    for window in test_windows:
        if window.rpeaks_local is None:
            raise ValidationError(
                f"window (subject={subject!r}, start={window.start}) has no annotations")
        pred = np.asarray(predict(window), dtype=np.float64).reshape(-1)
        if pred.size != window.length:
            raise ValidationError(
                f"prediction length {pred.size} != window length {window.length}")
        valleys = detect_valleys(pred, fs, valley_params)
        local_actual = np.asarray(window.rpeaks_local, dtype=np.int64)
        hits.extend((int(v + window.start), float(pred[v])) for v in valleys)
        actual_all.extend(int(a + window.start) for a in local_actual)
        if per_window:
            w_tp, w_fp, w_fn = match_peaks(valleys, local_actual, tol_ms, fs)
            tp += w_tp
            fp += w_fp
            fn += w_fn
            detected_total += valleys.size
            actual_total += local_actual.size

    min_gap = valley_params.refractory_ms * fs / 1000.0 / 2.0
    detected_merged = merge_detections(hits, min_gap)
    actual_merged = np.unique(np.asarray(actual_all, dtype=np.int64))

    if not per_window:
        tp, fp, fn = match_peaks(detected_merged, actual_merged, tol_ms, fs)
        detected_total = int(detected_merged.size)
        actual_total = int(actual_merged.size)

    return SubjectScore(
        subject_id=subject,
        detected_total=detected_total,
        actual_total=actual_total,
        tp=tp, fp=fp, fn=fn,
        scg_hrv=_indices_or_none(detected_merged, fs),
        ecg_hrv=_indices_or_none(actual_merged, fs),
    )


def _indices_or_none(peaks: np.ndarray, fs: float) -> HrvIndices | None:
    if peaks.size < 3:
        return None
    return hrv_indices(nn_intervals(peaks, fs))


def evaluate_split(model, test_windows: Sequence[Window], fs: float,
                   valley_params: ValleyParams = ValleyParams(),
                   tol_ms: float = DEFAULT_TOL_MS,
                   per_window: bool = False) -> PeakMatchReport:
    """Score every subject present in the given windows."""
    groups = group_by_subject(test_windows)
    rows = [
        evaluate_subject(model, windows, fs, valley_params, tol_ms, per_window)
        for windows in groups.values()
    ]
    return PeakMatchReport(rows)


def hrv_table(report: PeakMatchReport) -> list[tuple[str, str, HrvIndices]]:
    """(subject, source, indices) rows for both derivations."""
    rows = []
    for r in report.rows:
        if r.scg_hrv is not None:
            rows.append((r.subject_id, "scg", r.scg_hrv))
        if r.ecg_hrv is not None:
            rows.append((r.subject_id, "ecg", r.ecg_hrv))
    return rows


def write_hrv_csv(report: PeakMatchReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("subject,source,mean_nn_ms,sdnn_ms,rmssd_ms,pnn50\n")
        for subject, source, idx in hrv_table(report):
            fh.write(f"{subject},{source},{idx.mean_nn!r},{idx.sdnn!r},"
                     f"{idx.rmssd!r},{idx.pnn50!r}\n")


def agreement_by_index(report: PeakMatchReport) -> dict[str, "BlandAltmanStats"]:
    """Bland-Altman statistics of SCG-derived vs ECG-derived indices.

    One pair per subject with both derivations; indices with fewer than two
    such subjects are omitted.
    """
    stats = {}
    for name, attr in zip(HRV_INDEX_NAMES, ("mean_nn", "sdnn", "rmssd", "pnn50")):
        pairs = [
            (getattr(r.scg_hrv, attr), getattr(r.ecg_hrv, attr))
            for r in report.rows
            if r.scg_hrv is not None and r.ecg_hrv is not None
        ]
        if len(pairs) >= 2:
            stats[name] = bland_altman(pairs)
    return stats


def write_agreement_csv(report: PeakMatchReport, points_path: str | Path,
                        summary_path: str | Path) -> None:
    stats = agreement_by_index(report)
    with open(points_path, "w", encoding="utf-8") as fh:
        fh.write("index,mean,diff\n")
        for name, st in stats.items():
            for mean, diff in st.points:
                fh.write(f"{name},{mean!r},{diff!r}\n")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("index,mean_diff,sd_diff,loa_low,loa_high,loa_range,outliers\n")
        for name, st in stats.items():
            fh.write(f"{name},{st.mean_diff!r},{st.sd_diff!r},{st.loa_low!r},"
                     f"{st.loa_high!r},{st.loa_range!r},{len(st.outliers)}\n")
