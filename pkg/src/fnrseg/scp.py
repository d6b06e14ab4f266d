"""Split conformal prediction sets for K-class classification.

Calibration score of a row is one minus the probability of its true class;
the threshold ``q_hat`` comes from :func:`fnrseg.conformal.conformal_order_statistic`,
the same order statistic that calibrates segmentation thresholds. A test
row's prediction set holds every class whose score is at most ``q_hat``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .conformal import conformal_order_statistic
from .errors import ValidationError

NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class ClassifierOutput:
    probs: tuple
    true_label: object = None  # int for calibration rows, None for test rows

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if not probs:
            raise ValidationError("classifier output has no classes")
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValidationError("class probability outside [0, 1]")
        if abs(sum(probs) - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"class probabilities sum to {sum(probs)!r}, not 1")
        if self.true_label is not None:
            label = int(self.true_label)
            if label != self.true_label or not 0 <= label < len(probs):
                raise ValidationError(f"label {self.true_label!r} outside [0, {len(probs)})")
            object.__setattr__(self, "true_label", label)
        object.__setattr__(self, "probs", probs)

    @property
    def n_classes(self):
        return len(self.probs)


@dataclass(frozen=True)
class PredictionSet:
    included_labels: frozenset
    q_hat: float

    def to_json(self):
        return {"set": sorted(self.included_labels), "q_hat": self.q_hat}


def classification_scores(calib):
    scores = []
    for i, row in enumerate(calib):
        if row.true_label is None:
            raise ValidationError(f"calibration row {i} has no label")
        scores.append(1.0 - row.probs[row.true_label])
    return scores


def classification_quantile(calib, alpha):
    """``(q_hat, degenerate)`` from labelled calibration rows."""
    q_hat, _, degenerate = conformal_order_statistic(classification_scores(calib), alpha)
    return q_hat, degenerate


def classification_predict(test, q_hat):
    if not 0.0 <= q_hat <= 1.0:
        raise ValidationError(f"q_hat must lie in [0, 1], got {q_hat!r}")
    return PredictionSet(
        frozenset(y for y, p in enumerate(test.probs) if 1.0 - p <= q_hat),
        float(q_hat),
    )


def synthetic_outputs(n, n_classes, rng, temperature=1.0, width=1.0, noise=1.0):
    """Rows from a toy classifier: softmax of a noisy Gaussian bump at the true class.

    ``rng`` is a :class:`numpy.random.Generator`.
    """
    labels = rng.integers(0, n_classes, size=n)
    classes = np.arange(n_classes)
    bump = np.exp(-((classes[None, :] - labels[:, None]) ** 2) / (2.0 * width**2))
    logits = (bump + noise * rng.standard_normal((n, n_classes))) / temperature
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return [ClassifierOutput(tuple(p), int(y)) for p, y in zip(probs, labels)]


def read_outputs_csv(path, require_label):
    """Rows from a CSV with a header; a column named ``label`` holds the class.

    All other columns are class probabilities in class order.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            if require_label:
                raise ValidationError(f"{path}: empty calibration CSV")
            return []
        header = [h.strip() for h in header]
        label_col = header.index("label") if "label" in header else None
        if require_label and label_col is None:
            raise ValidationError(f"{path}: calibration CSV needs a 'label' column")
        prob_cols = [i for i in range(len(header)) if i != label_col]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                probs = [float(rec[i]) for i in prob_cols]
                label = int(rec[label_col]) if label_col is not None and rec[label_col].strip() else None
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if require_label and label is None:
                raise ValidationError(f"{path}:{lineno}: missing label")
            try:
                rows.append(ClassifierOutput(tuple(probs), label))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return rows
