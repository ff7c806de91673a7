"""SeismoNet: R-peak detection from seismocardiograms.

A 1-D convolutional encoder-decoder regresses the distance transform of the
ECG's R-peak train from a raw SCG window; the valleys of the predicted
waveform locate the beats, from which HRV indices and agreement statistics
follow.
"""
from .checkpoint import load_checkpoint, save_checkpoint
from .detect import ValleyParams, detect_valleys, match_peaks, ppv, sensitivity
from .evaluation import (
    PeakMatchReport,
    SubjectScore,
    agreement_by_index,
    evaluate_split,
    evaluate_subject,
)
from .hrv import BlandAltmanStats, HrvIndices, bland_altman, hrv_indices, nn_intervals
from .model import ModelConfig, SeismoNet, build_model
from .records import (
    Record,
    annotate_ecg_rpeaks,
    load_record,
    resample,
    resample_record,
    write_record,
)
from .synth import SynthParams, synth_record
from .training import TrainConfig, TrainHistory, evaluate_loss, train
from .windows import (
    DatasetSplit,
    Window,
    distance_transform,
    labeled_only,
    segment_windows,
    split_dataset,
)

__version__ = "0.1.0"
