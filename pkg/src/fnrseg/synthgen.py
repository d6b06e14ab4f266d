"""Synthetic exchangeable (confidence, mask) pairs.

Each sample is drawn independently from its own xoshiro256** stream, seeded
by ``derive_seed(seed, index)``: an axis-aligned ellipsoid lesion with
per-axis radii in ``radius_range``, lesion confidences from
``lesion_conf_mode`` and background confidences from ``background_conf_mode``.
Confidences go through inverse-transform sampling and are rounded to float32
so that a dataset written to disk reloads bit-identically.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import betaincinv

from .errors import ValidationError
from .rng import Xoshiro256, derive_seed
from .volume import (
    ConfidenceVolume,
    DatasetManifest,
    GridDims,
    LabelVolume,
    ManifestEntry,
    SamplePair,
    load_manifest,
    write_manifest,
    write_volume,
)

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ConfMode:
    """Confidence distribution: ``uniform01`` or ``beta(a, b)``."""

    kind: str
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform01", "beta"):
            raise ValidationError(f"unknown confidence mode {self.kind!r}")
        if not (self.a > 0 and self.b > 0):
            raise ValidationError(f"beta parameters must be positive, got ({self.a}, {self.b})")

    @classmethod
    def parse(cls, value):
        """Accept ``"uniform01"``, ``"beta:a,b"`` or ``{"beta": [a, b]}``."""
        if isinstance(value, ConfMode):
            return value
        if isinstance(value, dict) and set(value) == {"beta"}:
            a, b = value["beta"]
            return cls("beta", float(a), float(b))
        if isinstance(value, str):
            if value == "uniform01":
                return cls("uniform01")
            if value.startswith("beta:"):
                try:
                    a, b = (float(x) for x in value[5:].split(","))
                except ValueError:
                    raise ValidationError(f"malformed beta mode {value!r}, expected beta:a,b") from None
                return cls("beta", a, b)
        raise ValidationError(f"malformed confidence mode {value!r}")

    def __str__(self):
        return "uniform01" if self.kind == "uniform01" else f"beta:{self.a!r},{self.b!r}"

    def quantile(self, u):
        if self.kind == "uniform01":
            return u
        return betaincinv(self.a, self.b, u)


@dataclass(frozen=True)
class GeneratorConfig:
    dims: GridDims = GridDims(32, 32, 32)
    n_samples: int = 100
    radius_range: tuple = (3.0, 5.0)
    lesion_conf_mode: ConfMode = ConfMode("uniform01")
    background_conf_mode: ConfMode = ConfMode("beta", 1.0, 8.0)
    seed: int = 0
    lesion_shape: str = "ellipsoid"
    threads: int = field(default=1, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", GridDims.of(self.dims))
        object.__setattr__(self, "lesion_conf_mode", ConfMode.parse(self.lesion_conf_mode))
        object.__setattr__(self, "background_conf_mode", ConfMode.parse(self.background_conf_mode))
        if self.lesion_shape != "ellipsoid":
            raise ValidationError(f"unsupported lesion shape {self.lesion_shape!r}")
        if self.n_samples < 0:
            raise ValidationError("n_samples must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        try:
            rmin, rmax = (float(r) for r in self.radius_range)
        except (TypeError, ValueError):
            raise ValidationError(f"radius_range must be [min, max], got {self.radius_range!r}") from None
        if rmin < 1.0:
            raise ValidationError(f"radius {rmin} < 1 admits an empty lesion")
        if rmin > rmax:
            raise ValidationError(f"radius_range min {rmin} exceeds max {rmax}")
        limit = min(self.dims.shape) / 2 - 1
        if rmax > limit:
            raise ValidationError(f"radius max {rmax} exceeds {limit} for dims {list(self.dims.shape)}")
        object.__setattr__(self, "radius_range", (rmin, rmax))

    def to_json(self):
        return {
            "dims": list(self.dims.shape),
            "n_samples": self.n_samples,
            "lesion_shape": self.lesion_shape,
            "radius_range": list(self.radius_range),
            "lesion_conf_mode": str(self.lesion_conf_mode),
            "background_conf_mode": str(self.background_conf_mode),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc):
        known = {f for f in cls.__dataclass_fields__ if f != "threads"}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown generator config keys {sorted(unknown)}")
        kwargs = dict(doc)
        if "radius_range" in kwargs:
            kwargs["radius_range"] = tuple(kwargs["radius_range"])
        return cls(**kwargs)


def ellipsoid_mask(dims, center, radii):
    """Voxels whose integer coordinates fall inside the ellipsoid."""
    z, y, x = np.ogrid[: dims.d, : dims.h, : dims.w]
    inside = (
        ((z - center[0]) / radii[0]) ** 2
        + ((y - center[1]) / radii[1]) ** 2
        + ((x - center[2]) / radii[2]) ** 2
    ) <= 1.0
    return inside.reshape(-1)


def sample_id(index):
    return f"s{index:05d}"


def generate_one(cfg, index):
    rng = Xoshiro256(derive_seed(cfg.seed, index))
    rmin, rmax = cfg.radius_range
    u = rng.random(6)
    radii = rmin + (rmax - rmin) * u[:3]
    sizes = np.array(cfg.dims.shape, dtype=np.float64)
    # keep the whole ellipsoid inside the grid
    center = radii + (sizes - 1.0 - 2.0 * radii) * u[3:]
    mask = ellipsoid_mask(cfg.dims, center, radii)

    draws = rng.random(cfg.dims.size)
    conf = np.empty(cfg.dims.size, dtype=np.float64)
    conf[mask] = cfg.lesion_conf_mode.quantile(draws[mask])
    conf[~mask] = cfg.background_conf_mode.quantile(draws[~mask])
    conf = np.clip(conf.astype(np.float32).astype(np.float64), 0.0, 1.0)
    return SamplePair(
        sample_id(index),
        ConfidenceVolume(cfg.dims, conf),
        LabelVolume(cfg.dims, mask.astype(np.uint8)),
    )


def generate(cfg):
    """All samples of ``cfg``, in index order; deterministic in ``cfg.seed``."""
    indices = range(cfg.n_samples)
    if cfg.threads == 1:
        return [generate_one(cfg, i) for i in indices]
    with ThreadPoolExecutor(max_workers=cfg.threads or None) as pool:
        return list(pool.map(lambda i: generate_one(cfg, i), indices))


def generate_to_disk(cfg, out_dir, force=False):
    """Write the dataset under ``out_dir`` and return the manifest path.

    Raises :class:`FileExistsError` if a manifest is already there, unless
    ``force`` is set.
    """
    if cfg.n_samples == 0:
        raise ValidationError("empty dataset")
    out_dir = Path(out_dir)
    manifest_path = out_dir / MANIFEST_NAME
    if manifest_path.exists() and not force:
        raise FileExistsError(f"{manifest_path} exists (use force to overwrite)")
    (out_dir / "volumes").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(cfg.n_samples):
        pair = generate_one(cfg, i)
        conf_rel = f"volumes/{pair.id}_conf.bin"
        mask_rel = f"volumes/{pair.id}_mask.bin"
        write_volume(pair.confidence, out_dir / conf_rel)
        write_volume(pair.label, out_dir / mask_rel)
        entries.append(ManifestEntry(pair.id, conf_rel, mask_rel))
    (out_dir / "generator.json").write_text(json.dumps(cfg.to_json(), indent=1) + "\n")
    write_manifest(DatasetManifest(tuple(entries)), manifest_path)
    return manifest_path


def load_generated(out_dir):
    return load_manifest(Path(out_dir) / MANIFEST_NAME)
