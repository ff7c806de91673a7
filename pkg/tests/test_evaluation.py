"""Subject-level evaluation: fixed-point behavior, accounting, reports."""
import numpy as np
import pytest

from seismonet.detect import ValleyParams
from seismonet.errors import ValidationError
from seismonet.evaluation import (
    PeakMatchReport,
    SubjectScore,
    agreement_by_index,
    evaluate_split,
    evaluate_subject,
    hrv_table,
    merge_detections,
    write_agreement_csv,
    write_hrv_csv,
)
from seismonet.synth import SynthParams, synth_record
from seismonet.windows import labeled_only, segment_windows, split_dataset


def oracle_model(window):
    """Stub predictor that emits the exact distance transform."""
    return window.target_dt


def synthetic_test_windows(n_subjects=2, seed0=60):
    windows = []
    for i in range(n_subjects):
        record = synth_record(SynthParams(fs=100.0, duration_s=60.0,
                                          mean_hr_bpm=64.0 + 5 * i, hr_jitter=0.06,
                                          scg_noise_sigma=0.1, seed=seed0 + i),
                              subject_id=f"e{i}")
        windows.extend(labeled_only(segment_windows(record, 2.0, 1.0)))
    return split_dataset(windows, (0.6, 0.2, 0.2)).test


def test_exact_transform_fixed_point():
    test_windows = synthetic_test_windows()
    report = evaluate_split(oracle_model, test_windows, fs=100.0,
                            valley_params=ValleyParams(), tol_ms=90.0)
    assert report.total_se == 1.0
    assert report.total_ppv == 1.0
    for row in report.rows:
        assert row.fp == 0 and row.fn == 0


def test_exact_transform_fixed_point_per_window():
    # Per-window counting cannot see an annotation sitting exactly on a
    # window's first or last sample (no interior valley there); such
    # boundary hits are the only permissible misses.
    test_windows = synthetic_test_windows()
    boundary = sum(
        int(np.any(w.rpeaks_local == 0)) + int(np.any(w.rpeaks_local == w.length - 1))
        for w in test_windows)
    report = evaluate_split(oracle_model, test_windows, fs=100.0,
                            valley_params=ValleyParams(), tol_ms=90.0,
                            per_window=True)
    _, _, _, fp, fn = report.totals()
    assert fp == 0
    assert fn <= boundary


def test_row_accounting_identities():
    test_windows = synthetic_test_windows()

    def noisy_model(window):
        rng = np.random.default_rng(window.start)
        return window.target_dt + rng.normal(0, 3.0, window.target_dt.size)

    for per_window in (False, True):
        report = evaluate_split(noisy_model, test_windows, fs=100.0,
                                per_window=per_window)
        for row in report.rows:
            assert row.tp + row.fp == row.detected_total
            assert row.tp + row.fn == row.actual_total


def test_table_row_arithmetic():
    row = SubjectScore("1", 319, 323, 304, 15, 19, None, None)
    assert f"{row.se:.2f}" == "0.94"
    assert f"{row.ppv:.2f}" == "0.95"


def test_merge_detections_keeps_deeper():
    hits = [(100, 5.0), (104, 2.0), (300, 1.0)]
    merged = merge_detections(hits, min_gap=10.0)
    np.testing.assert_array_equal(merged, [104, 300])


def test_hrv_pair_produced_per_subject():
    test_windows = synthetic_test_windows()
    report = evaluate_split(oracle_model, test_windows, fs=100.0)
    for row in report.rows:
        assert row.scg_hrv is not None
        assert row.ecg_hrv is not None
        # the oracle detects exactly the annotations, so indices agree
        assert row.scg_hrv.mean_nn == pytest.approx(row.ecg_hrv.mean_nn)
    assert len(hrv_table(report)) == 2 * len(report.rows)


def test_agreement_stats_for_perfect_detector():
    test_windows = synthetic_test_windows(n_subjects=3)
    report = evaluate_split(oracle_model, test_windows, fs=100.0)
    stats = agreement_by_index(report)
    assert set(stats) == {"mean_nn_ms", "sdnn_ms", "rmssd_ms", "pnn50"}
    for st in stats.values():
        assert st.mean_diff == pytest.approx(0.0, abs=1e-9)
        assert st.loa_range == pytest.approx(0.0, abs=1e-9)


def test_report_csv_layout(tmp_path):
    rows = [SubjectScore("1", 319, 323, 304, 15, 19, None, None),
            SubjectScore("2", 317, 316, 309, 8, 7, None, None)]
    report = PeakMatchReport(rows)
    path = tmp_path / "report.csv"
    report.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "subject,detected,actual,tp,fp,fn,se,ppv"
    assert lines[1] == "1,319,323,304,15,19,0.94,0.95"
    assert lines[-1].startswith("total,636,639,613,23,26,")


def test_output_csv_files(tmp_path):
    test_windows = synthetic_test_windows(n_subjects=3)
    report = evaluate_split(oracle_model, test_windows, fs=100.0)
    write_hrv_csv(report, tmp_path / "hrv.csv")
    write_agreement_csv(report, tmp_path / "pts.csv", tmp_path / "sum.csv")
    hrv_lines = (tmp_path / "hrv.csv").read_text().strip().splitlines()
    assert hrv_lines[0] == "subject,source,mean_nn_ms,sdnn_ms,rmssd_ms,pnn50"
    assert len(hrv_lines) == 1 + 2 * 3
    sum_lines = (tmp_path / "sum.csv").read_text().strip().splitlines()
    assert sum_lines[0].startswith("index,mean_diff,sd_diff")
    assert len(sum_lines) == 5


def test_empty_windows_rejected():
    with pytest.raises(ValidationError):
        evaluate_subject(oracle_model, [], fs=100.0)


def test_prediction_length_mismatch_rejected():
    windows = synthetic_test_windows()[:1]

    def bad_model(window):
        return np.zeros(window.length - 1)

    with pytest.raises(ValidationError, match="length"):
        evaluate_subject(bad_model, windows, fs=100.0)
