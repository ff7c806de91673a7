"""Command-line interface wiring synthesis, training, inference, and scoring.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime or
numeric error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    InsufficientDataError,
    NumericError,
    RecordFormatError,
    SeismoNetError,
    ValidationError,
)
from .evaluation import (
    evaluate_split,
    write_agreement_csv,
    write_hrv_csv,
)
from .hrv import bland_altman, hrv_indices, nn_intervals
from .model import build_model
from .records import (
    Record,
    annotate_ecg_rpeaks,
    load_record,
    resample_record,
    write_record,
)
from .synth import synth_record
from .training import train
from .windows import labeled_only, segment_windows, split_dataset


def _load_records(cfg: RunConfig) -> list[Record]:
    data_dir = cfg.data_dir()
    paths = sorted(data_dir.glob("*.csv"))
    if not paths:
        raise ValidationError(f"no record CSV files found in {data_dir}")
    records = []
    for path in paths:
        record = load_record(path, fs=cfg["sampling.source_fs"])
        target_fs = cfg["sampling.target_fs"]
        if target_fs > 0 and target_fs != record.fs:
            record = resample_record(record, target_fs)
        records.append(record)
    return records


def _windows_split(cfg: RunConfig, records: list[Record]):
    windows = []
    for record in records:
        windows.extend(labeled_only(segment_windows(
            record, cfg["dataset.window_sec"], cfg["dataset.hop_sec"],
            dt_clip=cfg.dt_clip())))
    return split_dataset(windows, cfg.ratios(),
                         drop_boundary=cfg["dataset.drop_boundary"])


def cmd_synth(cfg: RunConfig) -> int:
    data_dir = cfg.data_dir()
    data_dir.mkdir(parents=True, exist_ok=True)
    n = cfg["synth.subjects"]
    for i in range(n):
        record = synth_record(cfg.synth_params(i), subject_id=f"subject{i + 1:02d}")
        write_record(record, data_dir / f"{record.subject_id}.csv")
    print(f"wrote {n} synthetic records to {data_dir}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    records = _load_records(cfg)
    split = _windows_split(cfg, records)
    if not split.train:
        raise InsufficientDataError("no labeled training windows")
    input_len = split.train[0].length
    model = build_model(cfg.model_config(input_len), seed=cfg["train.seed"])

    out_dir = cfg.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    model, history = train(model, split, cfg.train_config(), checkpoint_dir=out_dir)
    history.to_csv(out_dir / "history.csv")
    last = history.records[-1]
    print(f"trained {len(history)} epochs; final train loss {last.train_loss:.6f}, "
          f"val loss {last.val_loss:.6f}")
    print(f"checkpoint: {out_dir / 'model_final.smn'}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    model = load_checkpoint(cfg.checkpoint_path())
    records = _load_records(cfg)
    split = _windows_split(cfg, records)
    if not split.test:
        raise InsufficientDataError("test split is empty")
    fs = cfg.effective_fs()
    report = evaluate_split(model, split.test, fs, cfg.valley_params(),
                            tol_ms=cfg["eval.tol_ms"],
                            per_window=cfg["eval.per_window"])
    out_dir = cfg.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_csv(out_dir / "report.csv")
    write_hrv_csv(report, out_dir / "hrv.csv")
    write_agreement_csv(report, out_dir / "bland_altman_points.csv",
                        out_dir / "bland_altman_summary.csv")
    print(f"total Se {report.total_se:.2f}, PPV {report.total_ppv:.2f} "
          f"({len(report.rows)} subjects)")
    return 0


def cmd_infer(cfg: RunConfig, record_path: str) -> int:
    model = load_checkpoint(cfg.checkpoint_path())
    record = load_record(record_path, fs=cfg["sampling.source_fs"])
    target_fs = cfg["sampling.target_fs"]
    if target_fs > 0 and target_fs != record.fs:
        record = resample_record(record, target_fs)
    try:
        windows = segment_windows(record, cfg["dataset.window_sec"],
                                  cfg["dataset.hop_sec"])
    except InsufficientDataError:
        print(f"record {record.subject_id!r} is shorter than one window; "
              f"nothing to infer")
        return 0
    if windows[0].length != model.config.input_len:
        raise ValidationError(
            f"window length {windows[0].length} != model input length "
            f"{model.config.input_len}; adjust dataset.window_sec or sampling")

    from .detect import detect_valleys
    from .evaluation import merge_detections

    out_dir = cfg.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    params = cfg.valley_params()
    fs = record.fs
    hits = []
    pred_path = out_dir / f"pred_{record.subject_id}.csv"
    with open(pred_path, "w", encoding="utf-8") as fh:
        fh.write("window_start,offset,t_pred\n")
        for window in windows:
            pred = model.predict(window.scg_seg)
            for offset, value in enumerate(pred):
                fh.write(f"{window.start},{offset},{float(value)!r}\n")
            for v in detect_valleys(pred, fs, params):
                hits.append((int(v + window.start), float(pred[v])))
    merged = merge_detections(hits, params.refractory_ms * fs / 1000.0 / 2.0)
    peaks_path = out_dir / f"{record.subject_id}.peaks"
    with open(peaks_path, "w", encoding="utf-8") as fh:
        for idx in merged:
            fh.write(f"{int(idx)}\n")
    print(f"wrote {pred_path} and {peaks_path} ({merged.size} peaks)")
    return 0


def cmd_hrv(cfg: RunConfig) -> int:
    """HRV indices from record annotations (annotating from ECG if needed)."""
    records = _load_records(cfg)
    out_dir = cfg.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "hrv.csv"
    rows = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("subject,source,mean_nn_ms,sdnn_ms,rmssd_ms,pnn50\n")
        for record in records:
            peaks = record.rpeaks
            if peaks is None and record.ecg is not None:
                peaks = annotate_ecg_rpeaks(record.ecg, record.fs)
            if peaks is None or peaks.size < 3:
                print(f"skipping {record.subject_id!r}: fewer than 3 annotated peaks")
                continue
            idx = hrv_indices(nn_intervals(peaks, record.fs))
            fh.write(f"{record.subject_id},ecg,{idx.mean_nn!r},{idx.sdnn!r},"
                     f"{idx.rmssd!r},{idx.pnn50!r}\n")
            rows += 1
    print(f"wrote {rows} HRV rows to {path}")
    return 0


def cmd_agree(cfg: RunConfig, hrv_csv: str | None) -> int:
    """Bland-Altman agreement from an hrv.csv with scg and ecg rows."""
    path = Path(hrv_csv) if hrv_csv else cfg.out_dir() / "hrv.csv"
    if not path.exists():
        raise ValidationError(f"HRV table not found: {path}")
    by_subject: dict[str, dict[str, list[float]]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["subject", "source"]:
            raise RecordFormatError(f"{path}: expected an hrv.csv header")
        index_names = header[2:]
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(header):
                continue
            subject, source = parts[0], parts[1]
            by_subject.setdefault(subject, {})[source] = [float(v) for v in parts[2:]]

    out_dir = cfg.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    points_path = out_dir / "bland_altman_points.csv"
    summary_path = out_dir / "bland_altman_summary.csv"
    with open(points_path, "w", encoding="utf-8") as fh_p, \
            open(summary_path, "w", encoding="utf-8") as fh_s:
        fh_p.write("index,mean,diff\n")
        fh_s.write("index,mean_diff,sd_diff,loa_low,loa_high,loa_range,outliers\n")
        for col, name in enumerate(index_names):
            pairs = [
                (values["scg"][col], values["ecg"][col])
                for values in by_subject.values()
                if "scg" in values and "ecg" in values
            ]
            if len(pairs) < 2:
                continue
            st = bland_altman(pairs)
            for mean, diff in st.points:
                fh_p.write(f"{name},{mean!r},{diff!r}\n")
            fh_s.write(f"{name},{st.mean_diff!r},{st.sd_diff!r},{st.loa_low!r},"
                       f"{st.loa_high!r},{st.loa_range!r},{len(st.outliers)}\n")
            print(f"{name}: mean diff {st.mean_diff:.4f}, "
                  f"LoA [{st.loa_low:.4f}, {st.loa_high:.4f}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seismonet",
        description="SCG-to-R-peak pipeline: synthesize, train, infer, evaluate.")
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--seed", type=int, help="override train/synth seeds")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config entry (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", help="write synthetic records to the data dir")
    p_train = sub.add_parser("train", help="train a model on the data dir")
    p_train.add_argument("--epochs", type=int, help="override train.epochs")
    sub.add_parser("eval", help="score the test split with a checkpoint")
    p_infer = sub.add_parser("infer", help="predict waveform and peaks for a record")
    p_infer.add_argument("record", help="path to a record CSV")
    sub.add_parser("hrv", help="HRV indices from record annotations")
    p_agree = sub.add_parser("agree", help="Bland-Altman agreement from an hrv.csv")
    p_agree.add_argument("hrv_csv", nargs="?", help="HRV table (default: out/hrv.csv)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for override in args.set:
            if "=" not in override:
                raise ConfigError(f"--set expects key=value, got {override!r}")
            key, value = override.split("=", 1)
            cfg.set(key.strip(), value.strip())
        if args.seed is not None:
            cfg.set("train.seed", str(args.seed))
            cfg.set("synth.seed", str(args.seed))
        if args.command == "train" and args.epochs is not None:
            cfg.set("train.epochs", str(args.epochs))

        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "infer":
            return cmd_infer(cfg, args.record)
        if args.command == "hrv":
            return cmd_hrv(cfg)
        if args.command == "agree":
            return cmd_agree(cfg, args.hrv_csv)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValidationError, RecordFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except SeismoNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
