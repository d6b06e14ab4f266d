"""Repeated random calibration/test splits and parameter sweeps.

Trial ``i`` shuffles the dataset with a xoshiro256** stream seeded by
``derive_seed(master_seed, i)``; the first ``floor(split_ratio * N)`` samples
calibrate and the rest are evaluated. Because the split depends only on the
seed and trial index, sweeps over alpha reuse identical splits.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .conformal import CalibrationResult, conformal_order_statistic, guaranteed_compliance_bound
from .errors import ValidationError
from .fnr import guarded_floor
from .metrics import evaluate_at, index_samples
from .rng import Xoshiro256, derive_seed

CSV_COLUMNS = (
    "trial_index",
    "alpha",
    "epsilon",
    "split_ratio",
    "t_hat",
    "ecr",
    "fnr_mean",
    "fnr_std",
    "pc_mean",
    "baseline_fnr_mean",
)


@dataclass(frozen=True)
class ExperimentConfig:
    epsilon: float
    alpha: float
    trials: int = 100
    split_ratio: float = 0.5
    master_seed: int = 0
    baseline_t: float = 0.5
    alphas: tuple = ()
    split_ratios: tuple = ()
    threads: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValidationError(f"split ratio must lie in (0, 1), got {self.split_ratio}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "split_ratios", tuple(self.split_ratios))

    def echo(self):
        doc = asdict(self)
        doc.pop("threads")
        doc["alphas"] = list(self.alphas)
        doc["split_ratios"] = list(self.split_ratios)
        return doc


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    seed: int
    calibration_ids: tuple
    calibration: CalibrationResult
    split_metrics: object
    baseline_metrics: object

    @property
    def t_hat(self):
        return self.calibration.t_hat


@dataclass(frozen=True)
class TrialReport:
    config: ExperimentConfig
    per_trial: tuple
    aggregates: dict

    def to_json(self):
        return {
            "config": self.config.echo(),
            "aggregates": self.aggregates,
            "per_trial": [
                {
                    "trial_index": r.trial_index,
                    "seed": r.seed,
                    "t_hat": r.t_hat,
                    "calibration": r.calibration.to_json(),
                    "calibration_ids": list(r.calibration_ids),
                    "split_metrics": r.split_metrics.to_json(),
                    "baseline_metrics": r.baseline_metrics.to_json(),
                }
                for r in self.per_trial
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=1) + "\n"

    def csv_rows(self):
        cfg = self.config
        for r in self.per_trial:
            m = r.split_metrics
            yield {
                "trial_index": r.trial_index,
                "alpha": cfg.alpha,
                "epsilon": cfg.epsilon,
                "split_ratio": cfg.split_ratio,
                "t_hat": r.t_hat,
                "ecr": m.ecr,
                "fnr_mean": m.fnr_mean,
                "fnr_std": m.fnr_std,
                "pc_mean": m.pc_mean,
                "baseline_fnr_mean": r.baseline_metrics.fnr_mean,
            }


def write_csv(reports, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for row in report.csv_rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def csv_text(reports):
    buf = io.StringIO()
    write_csv(reports, buf)
    return buf.getvalue()


def split_sizes(n_total, split_ratio):
    n_cal = guarded_floor(split_ratio * n_total)
    n_test = n_total - n_cal
    if n_cal < 1 or n_test < 1:
        raise ValidationError(
            f"split ratio {split_ratio} on {n_total} samples leaves "
            f"{n_cal} calibration and {n_test} test samples"
        )
    return n_cal, n_test


def trial_permutation(n_total, master_seed, trial_index):
    seed = derive_seed(master_seed, trial_index)
    return seed, Xoshiro256(seed).permutation(n_total)


def _pstd(xs):
    return float(np.std(np.asarray(xs, dtype=np.float64)))


def aggregate(per_trial, cfg, n_cal):
    ecrs = [r.split_metrics.ecr for r in per_trial]
    fnrs = [r.split_metrics.fnr_mean for r in per_trial]
    pcs = [r.split_metrics.pc_mean for r in per_trial]
    n_ok = sum(sum(s.compliant for s in r.split_metrics.per_sample) for r in per_trial)
    n_pooled = sum(r.split_metrics.n_test for r in per_trial)
    pooled = n_ok / n_pooled
    return {
        "ecr_mean": float(np.mean(ecrs)),
        "ecr_std": _pstd(ecrs),
        "ecr_min": float(min(ecrs)),
        "fnr_mean_of_means": float(np.mean(fnrs)),
        "fnr_std_across_trials": _pstd(fnrs),
        "fnr_std_within_trials_mean": float(np.mean([r.split_metrics.fnr_std for r in per_trial])),
        "pc_mean_of_means": float(np.mean(pcs)),
        "pc_std_across_trials": _pstd(pcs),
        "pc_std_within_trials_mean": float(np.mean([r.split_metrics.pc_std for r in per_trial])),
        "t_hat_mean": float(np.mean([r.t_hat for r in per_trial])),
        "baseline_fnr_mean_of_means": float(np.mean([r.baseline_metrics.fnr_mean for r in per_trial])),
        "baseline_ecr_mean": float(np.mean([r.baseline_metrics.ecr for r in per_trial])),
        "pooled_compliance": pooled,
        "pooled_count": n_pooled,
        "pooled_binomial_se": math.sqrt(pooled * (1.0 - pooled) / n_pooled),
        "compliance_bound": guaranteed_compliance_bound(n_cal, cfg.alpha),
        "degenerate_trials": sum(r.calibration.degenerate for r in per_trial),
        "n_calibration": n_cal,
        "n_test": per_trial[0].split_metrics.n_test,
    }


def _run_trial(indexes, cfg, n_cal, trial_index):
    seed, perm = trial_permutation(len(indexes), cfg.master_seed, trial_index)
    cal = [indexes[i] for i in perm[:n_cal]]
    test = [indexes[i] for i in perm[n_cal:]]
    scores = [idx.critical(cfg.epsilon) for idx in cal]
    t_hat, k, degenerate = conformal_order_statistic(scores, cfg.alpha)
    calib = CalibrationResult(t_hat, float(cfg.epsilon), float(cfg.alpha), n_cal, k, degenerate)
    return TrialResult(
        trial_index=trial_index,
        seed=seed,
        calibration_ids=tuple(idx.id for idx in cal),
        calibration=calib,
        split_metrics=evaluate_at(test, t_hat, cfg.epsilon),
        baseline_metrics=evaluate_at(test, cfg.baseline_t, cfg.epsilon),
    )


def run_trials(dataset, cfg):
    """Calibrate and evaluate on ``cfg.trials`` seeded random splits.

    ``dataset`` may hold :class:`~fnrseg.volume.SamplePair` objects or
    prebuilt :class:`~fnrseg.metrics.SampleIndex` objects (reused across
    sweeps). Output is identical for any ``cfg.threads``.
    """
    indexes = index_samples(dataset)
    n_cal, _ = split_sizes(len(indexes), cfg.split_ratio)
    trials = range(cfg.trials)
    if cfg.threads == 1:
        per_trial = [_run_trial(indexes, cfg, n_cal, i) for i in trials]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads or None) as pool:
            per_trial = list(pool.map(lambda i: _run_trial(indexes, cfg, n_cal, i), trials))
    return TrialReport(cfg, tuple(per_trial), aggregate(per_trial, cfg, n_cal))


def sweep_alpha(dataset, cfg, alphas=None):
    """One report per alpha, all on the same per-trial splits."""
    alphas = tuple(cfg.alphas if alphas is None else alphas)
    if not alphas:
        raise ValidationError("alpha sweep needs at least one alpha")
    indexes = index_samples(dataset)
    return [run_trials(indexes, replace(cfg, alpha=a, alphas=())) for a in alphas]


def sweep_split_ratio(dataset, cfg, ratios=None):
    """One report per calibration fraction."""
    ratios = tuple(cfg.split_ratios if ratios is None else ratios)
    if not ratios:
        raise ValidationError("split sweep needs at least one ratio")
    indexes = index_samples(dataset)
    for r in ratios:
        split_sizes(len(indexes), r)
    return [run_trials(indexes, replace(cfg, split_ratio=r, split_ratios=())) for r in ratios]
