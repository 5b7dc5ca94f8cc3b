"""Facial-hair aware face verification evaluation."""

from hirsute._core import (
    CalibrationError,
    DataError,
    UsageError,
    categorize_pair,
    classify,
    eer,
    facial_hair_ratio,
    fmr_at,
    fnmr_at,
    inequity_ratio,
    iou,
    mask_for_ratio,
    run_cli,
    split_subjects,
    synth,
    threshold_for_fmr,
)

__all__ = [
    "CalibrationError",
    "DataError",
    "UsageError",
    "categorize_pair",
    "classify",
    "eer",
    "facial_hair_ratio",
    "fmr_at",
    "fnmr_at",
    "inequity_ratio",
    "iou",
    "mask_for_ratio",
    "run_cli",
    "split_subjects",
    "synth",
    "threshold_for_fmr",
]
