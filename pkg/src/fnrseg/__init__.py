"""Conformal calibration of segmentation thresholds with false-negative-rate control."""

from . import _backend
from .conformal import (
    CalibrationResult,
    ScoreSet,
    calibrate,
    collect_scores,
    conformal_quantile,
    guaranteed_compliance_bound,
)
from .errors import EmptyGroundTruthError, FnrsegError, ValidationError, VolumeFormatError
from .fnr import (
    CriticalScore,
    FnrLossValue,
    ThresholdParam,
    critical_threshold_bisect,
    critical_threshold_exact,
    fnr_loss,
    lesion_confidence_histogram,
    predict_mask,
)
from .harness import ExperimentConfig, TrialReport, run_trials, sweep_alpha, sweep_split_ratio
from .metrics import SplitMetrics, evaluate_split, fixed_threshold_baseline
from .synthgen import ConfMode, GeneratorConfig, generate, generate_to_disk
from .volume import (
    ConfidenceVolume,
    DatasetManifest,
    GridDims,
    LabelVolume,
    SamplePair,
    load_manifest,
    read_volume,
    write_volume,
)

__version__ = "0.1.0"


def kernel_backend():
    """Name of the active kernel backend, ``"compiled"`` or ``"python"``."""
    return _backend.name
