"""Conformal FNR threshold calibration for segmentation volumes.

Exit codes: 0 on success, 1 on invalid flags or data, 2 on I/O and file
format errors.
"""

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, synthgen
from .conformal import CalibrationResult, calibrate, guaranteed_compliance_bound
from .errors import ValidationError, VolumeFormatError
from .fnr import predict_mask
from .scp import classification_predict, classification_quantile, read_outputs_csv
from .volume import ConfidenceVolume, GridDims, load_manifest, read_volume, write_volume

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _dims(text):
    try:
        parts = [int(p) for p in text.split(",")]
        return GridDims.of(parts)
    except (ValueError, ValidationError):
        raise argparse.ArgumentTypeError(f"--dims expects d,h,w positive integers, got {text!r}") from None


def _pair(text):
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected min,max, got {text!r}") from None
    return lo, hi


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def parse_range(text):
    """Values of an inclusive ``start:stop:step`` range."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"malformed range {text!r}, expected start:stop:step") from None
    if step <= 0:
        raise UsageError(f"range step must be positive, got {step}")
    if stop < start:
        raise UsageError(f"empty range {text!r}")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_list(text):
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"malformed list {text!r}") from None
    if not values:
        raise UsageError("empty list")
    return values


def build_parser():
    parser = _Parser(prog="fnrseg", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic dataset", allow_abbrev=False)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path, help="GeneratorConfig JSON; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--dims", type=_dims)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--lesion-conf", help="uniform01 or beta:a,b")
    p.add_argument("--background-conf", help="beta:a,b")
    p.add_argument("--radius", type=_pair, help="min,max lesion radius in voxels")
    p.add_argument("--force", action="store_true")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("calibrate", help="compute the conformal threshold", allow_abbrev=False)
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--epsilon", required=True, type=float)
    p.add_argument("--alpha", required=True, type=float)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("apply", help="threshold a confidence volume", allow_abbrev=False)
    p.add_argument("--confidence", required=True, type=Path)
    p.add_argument("--calibration", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    for name, help_ in (("evaluate", "random-split evaluation"), ("sweep", "alpha / split sweeps")):
        p = sub.add_parser(name, help=help_, allow_abbrev=False)
        p.add_argument("--manifest", required=True, type=Path)
        p.add_argument("--epsilon", required=True, type=float)
        p.add_argument("--alpha", type=float, required=name == "evaluate")
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--split", type=float, default=0.5)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--baseline-t", type=float, default=0.5)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--threads", type=int, default=1)
        if name == "sweep":
            p.add_argument("--alphas", help="start:stop:step, inclusive")
            p.add_argument("--splits", help="comma-separated calibration fractions")

    p = sub.add_parser("scp-classify", help="classification prediction sets", allow_abbrev=False)
    p.add_argument("--calib-csv", required=True, type=Path)
    p.add_argument("--test-csv", required=True, type=Path)
    p.add_argument("--alpha", required=True, type=float)
    return parser


def cmd_simulate(args):
    doc = {}
    if args.config is not None:
        doc = json.loads(args.config.read_text())
        if not isinstance(doc, dict):
            raise ValidationError("generator config must be a JSON object")
    overrides = {
        "n_samples": args.n,
        "dims": args.dims,
        "seed": args.seed,
        "lesion_conf_mode": args.lesion_conf,
        "background_conf_mode": args.background_conf,
        "radius_range": args.radius,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    cfg = synthgen.GeneratorConfig.from_json(doc)
    path = synthgen.generate_to_disk(cfg, args.out, force=args.force)
    print(path)


def cmd_calibrate(args):
    if not 0.0 < args.alpha < 1.0:
        raise ValidationError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if not 0.0 <= args.epsilon <= 1.0:
        raise ValidationError(f"--epsilon must lie in [0, 1], got {args.epsilon}")
    samples = load_manifest(args.manifest, context="calibration")
    result = calibrate(samples, args.epsilon, args.alpha, threads=args.threads)
    result.save(args.out)
    if result.degenerate:
        _warn(
            f"quantile index {result.quantile_index} exceeds n = {result.n}; "
            "using t_hat = 1 (every voxel predicted)"
        )
    print(f"t_hat={result.t_hat!r} n={result.n} quantile_index={result.quantile_index} "
          f"compliance_bound={guaranteed_compliance_bound(result.n, result.alpha)!r}")


def cmd_apply(args):
    calib = CalibrationResult.load(args.calibration)
    conf = read_volume(args.confidence)
    if not isinstance(conf, ConfidenceVolume):
        raise VolumeFormatError(f"{args.confidence}: not a confidence volume")
    write_volume(predict_mask(conf, calib.t_hat), args.out)
    print(args.out)


def _experiment(args, alpha):
    return harness.ExperimentConfig(
        epsilon=args.epsilon,
        alpha=alpha,
        trials=args.trials,
        split_ratio=args.split,
        master_seed=args.seed,
        baseline_t=args.baseline_t,
        threads=args.threads,
    )


def cmd_evaluate(args):
    cfg = _experiment(args, args.alpha)
    dataset = load_manifest(args.manifest, context="calibration")
    report = harness.run_trials(dataset, cfg)
    args.out.write_text(report.dumps())
    csv_path = args.out.with_suffix(".csv")
    csv_path.write_text(harness.csv_text([report]))
    agg = report.aggregates
    if agg["degenerate_trials"]:
        _warn(f"{agg['degenerate_trials']} trials had too few calibration samples (t_hat = 1)")
    print(f"ecr_mean={agg['ecr_mean']!r} pooled_compliance={agg['pooled_compliance']!r} "
          f"compliance_bound={agg['compliance_bound']!r} fnr_mean={agg['fnr_mean_of_means']!r} "
          f"baseline_fnr_mean={agg['baseline_fnr_mean_of_means']!r}")
    print(args.out)
    print(csv_path)


def cmd_sweep(args):
    if args.alphas is None and args.splits is None:
        raise UsageError("sweep needs --alphas and/or --splits")
    alphas = parse_range(args.alphas) if args.alphas is not None else None
    if alphas is None:
        if args.alpha is None:
            raise UsageError("--splits without --alphas needs --alpha")
        alphas = [args.alpha]
    ratios = parse_list(args.splits) if args.splits is not None else [args.split]
    dataset = load_manifest(args.manifest, context="calibration")
    base = _experiment(args, alphas[0])
    reports = []
    indexes = harness.index_samples(dataset)
    for ratio in ratios:
        cfg = replace(base, split_ratio=ratio)
        reports.extend(harness.sweep_alpha(indexes, cfg, alphas))
    args.out.write_text(harness.csv_text(reports))
    print(args.out)


def cmd_scp_classify(args):
    if not 0.0 < args.alpha < 1.0:
        raise ValidationError(f"--alpha must lie in (0, 1), got {args.alpha}")
    calib = read_outputs_csv(args.calib_csv, require_label=True)
    if not calib:
        raise ValidationError(f"{args.calib_csv}: no calibration rows")
    q_hat, degenerate = classification_quantile(calib, args.alpha)
    if degenerate:
        _warn(f"too few calibration rows ({len(calib)}) for alpha {args.alpha}; every class is included")
    for row in read_outputs_csv(args.test_csv, require_label=False):
        print(json.dumps(classification_predict(row, q_hat).to_json(), separators=(",", ":")))


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "apply": cmd_apply,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "scp-classify": cmd_scp_classify,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (VolumeFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
