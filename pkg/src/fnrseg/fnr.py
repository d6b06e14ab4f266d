"""Thresholded masks, the false-negative loss and per-sample critical scores.

A voxel is predicted lesion when its confidence is at least ``1 - t``; larger
``t`` means a lower cut and a larger mask. The false-negative loss of a sample
is the fraction of its lesion voxels left outside the mask, a non-increasing
step function of ``t``. The critical score of a sample is the smallest ``t``
whose loss is within the tolerance.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import EmptyGroundTruthError, ValidationError
from .volume import LabelVolume

DEFAULT_BISECT_TOL = 1e-4


@dataclass(frozen=True)
class ThresholdParam:
    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValidationError(f"threshold parameter must lie in [0, 1], got {self.t!r}")
        object.__setattr__(self, "t", float(self.t))

    @property
    def cut(self):
        return decision_cut(self.t)


@dataclass(frozen=True)
class FnrLossValue:
    loss: float
    covered_lesion_voxels: int
    total_lesion_voxels: int


@dataclass(frozen=True)
class CriticalScore:
    sample_id: str
    t_i: float
    epsilon: float
    method: str  # "exact" or "bisection"


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    lesion: np.ndarray
    background: np.ndarray


def _t(thr):
    if isinstance(thr, ThresholdParam):
        return thr.t
    return ThresholdParam(thr).t


def _check_epsilon(epsilon):
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    return float(epsilon)


def decision_cut(t):
    """Confidence cut applied for threshold parameter ``t``."""
    return 1.0 - t


def loss_from_count(covered, total):
    return 1.0 - covered / total


def guarded_ceil(x):
    """Ceiling that does not round an exact integer up by float noise.

    ``x`` is nudged one ulp toward minus infinity first, so a product such as
    ``0.8 * 5`` that lands one ulp above 4 still gives 4.
    """
    return math.ceil(math.nextafter(x, -math.inf))


def guarded_floor(x):
    return math.floor(math.nextafter(x, math.inf))


def lesion_values(conf, label, sample_id=None):
    """Confidences at the positive voxels of ``label``, as contiguous float64."""
    if conf.dims != label.dims:
        raise ValidationError(
            f"mask dims {list(label.dims.shape)} differ from confidence dims {list(conf.dims.shape)}"
        )
    lesion = np.ascontiguousarray(conf.values[label.values.astype(bool)])
    if lesion.shape[0] == 0:
        raise EmptyGroundTruthError(sample_id)
    return lesion


def predict_mask(conf, thr):
    return LabelVolume(conf.dims, conf.values >= decision_cut(_t(thr)))


def fnr_loss(conf, label, thr, sample_id=None):
    lesion = lesion_values(conf, label, sample_id)
    covered = int(_backend.kernel("count_at_least")(lesion, decision_cut(_t(thr))))
    m = lesion.shape[0]
    return FnrLossValue(loss_from_count(covered, m), covered, m)


def required_coverage(m, epsilon):
    """Fewest covered lesion voxels, out of ``m``, with loss at most ``epsilon``.

    Starts from ``ceil((1 - epsilon) * m)`` and then settles on the count for
    which the float loss ``1 - k/m`` actually compares ``<= epsilon``, so the
    result agrees with :func:`fnr_loss` at every boundary.
    """
    k = min(max(guarded_ceil((1.0 - epsilon) * m), 0), m)
    while k < m and loss_from_count(k, m) > epsilon:
        k += 1
    while k > 0 and loss_from_count(k - 1, m) <= epsilon:
        k -= 1
    return k


def critical_from_lesion(lesion, epsilon):
    """Exact critical score from the lesion-voxel confidences of one sample."""
    m = lesion.shape[0]
    if m == 0:
        raise EmptyGroundTruthError()
    k = required_coverage(m, epsilon)
    if k == 0:
        return 0.0
    # k-th largest confidence
    c = float(np.partition(lesion, m - k)[m - k])
    return smallest_t_reaching(c)


def _bits(x):
    return struct.unpack("<q", struct.pack("<d", x))[0]


def _from_bits(b):
    return struct.unpack("<d", struct.pack("<q", b))[0]


def smallest_t_reaching(c):
    """Smallest float ``t`` in [0, 1] whose cut ``1 - t`` is at most ``c``.

    Bit patterns of non-negative doubles are ordered like their values, so a
    bisection over them takes at most 64 steps. Walking ulp by ulp can take
    ~2**52 steps when ``c`` is just below 1.
    """
    lo, hi = _bits(0.0), _bits(1.0)
    if decision_cut(0.0) <= c:
        return 0.0
    # invariant: cut(lo) > c >= cut(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if decision_cut(_from_bits(mid)) <= c:
            hi = mid
        else:
            lo = mid
    return _from_bits(hi)


def critical_threshold_exact(conf, label, epsilon, sample_id=""):
    epsilon = _check_epsilon(epsilon)
    lesion = lesion_values(conf, label, sample_id)
    return CriticalScore(sample_id, critical_from_lesion(lesion, epsilon), epsilon, "exact")


def critical_threshold_bisect(conf, label, epsilon, delta=DEFAULT_BISECT_TOL, sample_id=""):
    """Binary search for the critical score on the bracket [0, 1].

    The bracket shrinks by halving (infeasible midpoint raises the lower end,
    feasible lowers the upper end) until its width is at most ``delta``; the
    upper end, which is always feasible, is returned.
    """
    epsilon = _check_epsilon(epsilon)
    if not delta > 0:
        raise ValidationError(f"non-positive tolerance {delta!r}")
    lesion = lesion_values(conf, label, sample_id)
    t, _ = _backend.kernel("bisect_critical")(lesion, epsilon, float(delta))
    return CriticalScore(sample_id, float(t), epsilon, "bisection")


def lesion_confidence_histogram(conf, label, bins):
    """Equal-width histograms over [0, 1] for lesion and background voxels.

    A value of exactly 1.0 falls in the last bin.
    """
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins!r}")
    if conf.dims != label.dims:
        raise ValidationError("mask and confidence dims differ")
    idx = np.minimum((conf.values * bins).astype(np.int64), bins - 1)
    positive = label.values.astype(bool)
    return Histogram(
        edges=np.linspace(0.0, 1.0, bins + 1),
        lesion=np.bincount(idx[positive], minlength=bins),
        background=np.bincount(idx[~positive], minlength=bins),
    )
