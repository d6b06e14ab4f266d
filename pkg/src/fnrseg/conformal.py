"""Split-conformal calibration of the test-time threshold.

Calibration scores are sorted and the ``ceil((1 - alpha)(n + 1))``-th
smallest is taken. When that index exceeds ``n`` there is not enough data for
the requested risk level and the vacuous threshold ``t_hat = 1`` (predict
every voxel) is returned with ``degenerate`` set.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError, VolumeFormatError
from .fnr import CriticalScore, critical_threshold_exact, guarded_ceil


@dataclass(frozen=True)
class ScoreSet:
    epsilon: float
    scores: tuple

    def __post_init__(self):
        scores = tuple(self.scores)
        if not scores:
            raise ValidationError("score set is empty")
        for s in scores:
            if s.epsilon != self.epsilon:
                raise ValidationError(
                    f"score for {s.sample_id!r} was computed at epsilon {s.epsilon}, not {self.epsilon}"
                )
        object.__setattr__(self, "scores", scores)

    @property
    def n(self):
        return len(self.scores)

    def values(self):
        return np.array([s.t_i for s in self.scores], dtype=np.float64)


@dataclass(frozen=True)
class CalibrationResult:
    t_hat: float
    epsilon: float
    alpha: float
    n: int
    quantile_index: int
    degenerate: bool

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, doc):
        try:
            return cls(
                t_hat=float(doc["t_hat"]),
                epsilon=float(doc["epsilon"]),
                alpha=float(doc["alpha"]),
                n=int(doc["n"]),
                quantile_index=int(doc["quantile_index"]),
                degenerate=bool(doc["degenerate"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise VolumeFormatError(f"malformed calibration document ({exc})") from None

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise VolumeFormatError(f"{path}: calibration file is not valid JSON ({exc})") from None
        return cls.from_json(doc)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(alpha)


def quantile_index(n, alpha):
    """1-based rank ``ceil((1 - alpha)(n + 1))`` of the conformal quantile."""
    return guarded_ceil((1.0 - _check_alpha(alpha)) * (n + 1))


def conformal_order_statistic(scores, alpha):
    """Conformal quantile of a plain score array.

    Returns ``(value, k, degenerate)``; ``value`` is 1.0 when ``k > n``.
    Shared by the segmentation calibration and the classification baseline.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if n == 0:
        raise ValidationError("cannot calibrate on zero scores")
    k = quantile_index(n, alpha)
    if k > n:
        return 1.0, k, True
    return float(np.partition(scores, k - 1)[k - 1]), k, False


def collect_scores(samples, epsilon, threads=1):
    """Exact critical score for every sample, in input order."""

    def score(pair):
        return critical_threshold_exact(pair.confidence, pair.label, epsilon, sample_id=pair.id)

    if threads == 1 or len(samples) < 2:
        scores = [score(p) for p in samples]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            scores = list(pool.map(score, samples))
    return ScoreSet(float(epsilon), tuple(scores))


def conformal_quantile(scores, alpha):
    if not isinstance(scores, ScoreSet):
        raise TypeError("conformal_quantile expects a ScoreSet")
    t_hat, k, degenerate = conformal_order_statistic(scores.values(), alpha)
    return CalibrationResult(
        t_hat=t_hat,
        epsilon=scores.epsilon,
        alpha=float(alpha),
        n=scores.n,
        quantile_index=k,
        degenerate=degenerate,
    )


def guaranteed_compliance_bound(n, alpha):
    """Marginal compliance probability ``k / (n + 1)``; 1.0 when degenerate."""
    k = quantile_index(n, alpha)
    if k > n:
        return 1.0
    return k / (n + 1)


def calibrate(samples, epsilon, alpha, threads=1):
    return conformal_quantile(collect_scores(samples, epsilon, threads), alpha)


__all__ = [
    "CalibrationResult",
    "CriticalScore",
    "ScoreSet",
    "calibrate",
    "collect_scores",
    "conformal_order_statistic",
    "conformal_quantile",
    "guaranteed_compliance_bound",
    "quantile_index",
]
