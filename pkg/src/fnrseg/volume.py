"""Voxel grids and their on-disk formats.

A volume lives in two files: ``<name>.bin`` holds the raw little-endian
payload in (d, h, w) row-major order and ``<name>.meta.json`` holds the
header::

    {"dims": [d, h, w], "dtype": "f32" | "u8",
     "order": "dhw-row-major", "endianness": "little"}

Confidences are stored as float32 and widened to float64 on load; masks are
stored as single bytes.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyGroundTruthError, ValidationError, VolumeFormatError

ORDER = "dhw-row-major"
ENDIANNESS = "little"
_MAX_VOXELS = 2**64 - 1


@dataclass(frozen=True)
class GridDims:
    d: int
    h: int
    w: int

    def __post_init__(self):
        for axis in ("d", "h", "w"):
            v = getattr(self, axis)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"grid dimension {axis} must be a positive integer, got {v!r}")
            object.__setattr__(self, axis, int(v))
        if self.d * self.h * self.w > _MAX_VOXELS:
            raise ValidationError("voxel count overflows 64 bits")

    @property
    def size(self):
        return self.d * self.h * self.w

    @property
    def shape(self):
        return (self.d, self.h, self.w)

    def flat_index(self, d, h, w):
        return d * (self.h * self.w) + h * self.w + w

    @classmethod
    def of(cls, shape):
        if isinstance(shape, GridDims):
            return shape
        if len(shape) != 3:
            raise ValidationError(f"expected three dimensions, got {list(shape)!r}")
        return cls(*shape)


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConfidenceVolume:
    """Per-voxel lesion probabilities, flat in (d, h, w) row-major order."""

    dims: GridDims
    values: np.ndarray

    def __post_init__(self):
        dims = GridDims.of(self.dims)
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.shape[0] != dims.size:
            raise ValidationError(
                f"confidence has {values.shape[0]} values, dims {list(dims.shape)} need {dims.size}"
            )
        # NaN fails both comparisons
        if not np.all((values >= 0.0) & (values <= 1.0)):
            raise ValidationError("confidence out of range [0, 1]")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_grid(cls, grid):
        grid = np.asarray(grid)
        return cls(GridDims.of(grid.shape), grid.reshape(-1))

    def grid(self):
        return self.values.reshape(self.dims.shape)

    def at(self, d, h, w):
        return float(self.values[self.dims.flat_index(d, h, w)])

    def __eq__(self, other):
        if not isinstance(other, ConfidenceVolume):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Binary mask over a grid; values are 0/1 bytes."""

    dims: GridDims
    values: np.ndarray

    def __post_init__(self):
        dims = GridDims.of(self.dims)
        raw = np.asarray(self.values).ravel()
        if raw.shape[0] != dims.size:
            raise ValidationError(
                f"mask has {raw.shape[0]} values, dims {list(dims.shape)} need {dims.size}"
            )
        if raw.dtype != np.bool_ and not np.all((raw == 0) | (raw == 1)):
            raise ValidationError("mask value not in {0, 1}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", _frozen(raw.astype(np.uint8)))

    @classmethod
    def from_grid(cls, grid):
        grid = np.asarray(grid)
        return cls(GridDims.of(grid.shape), grid.reshape(-1))

    @property
    def positives(self):
        return int(np.count_nonzero(self.values))

    def grid(self):
        return self.values.reshape(self.dims.shape)

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class SamplePair:
    id: str
    confidence: ConfidenceVolume
    label: LabelVolume

    def __post_init__(self):
        if self.confidence.dims != self.label.dims:
            raise ValidationError(
                f"sample {self.id!r}: mask dims {list(self.label.dims.shape)} differ from "
                f"confidence dims {list(self.confidence.dims.shape)}"
            )

    def require_lesion(self):
        if self.label.positives == 0:
            raise EmptyGroundTruthError(self.id)
        return self


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    confidence: str
    label: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise ValidationError(f"duplicate sample id {e.id!r} in manifest")
            seen.add(e.id)
        object.__setattr__(self, "entries", tuple(self.entries))

    def to_json(self):
        return {
            "entries": [
                {"id": e.id, "confidence": e.confidence, "label": e.label} for e in self.entries
            ]
        }


def header_path(path):
    path = Path(path)
    stem = path.name[:-4] if path.name.endswith(".bin") else path.name
    return path.with_name(stem + ".meta.json")


def _payload_path(path):
    path = Path(path)
    return path if path.name.endswith(".bin") else path.with_name(path.name + ".bin")


def read_volume(path):
    """Load a ``.bin`` payload using its adjacent ``.meta.json`` header.

    Returns a :class:`ConfidenceVolume` for ``f32`` headers and a
    :class:`LabelVolume` for ``u8`` headers.
    """
    path = _payload_path(path)
    hpath = header_path(path)
    if not hpath.exists():
        raise VolumeFormatError(f"{path}: missing header {hpath.name}")
    try:
        header = json.loads(hpath.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeFormatError(f"{hpath}: header is not valid JSON ({exc})") from None
    if not isinstance(header, dict):
        raise VolumeFormatError(f"{hpath}: header must be a JSON object")
    try:
        dims = GridDims.of(header["dims"])
    except (KeyError, TypeError, ValidationError) as exc:
        raise VolumeFormatError(f"{hpath}: bad dims ({exc})") from None
    if header.get("order", ORDER) != ORDER:
        raise VolumeFormatError(f"{hpath}: unsupported order {header['order']!r}")
    if header.get("endianness", ENDIANNESS) != ENDIANNESS:
        raise VolumeFormatError(f"{hpath}: unsupported endianness {header['endianness']!r}")
    dtype = header.get("dtype")
    if dtype == "f32":
        np_dtype = np.dtype("<f4")
    elif dtype == "u8":
        np_dtype = np.dtype("u1")
    else:
        raise VolumeFormatError(f"{hpath}: unknown dtype {dtype!r}")

    payload = path.read_bytes()
    expected = dims.size * np_dtype.itemsize
    if len(payload) != expected:
        raise VolumeFormatError(
            f"{path}: payload is {len(payload)} bytes, dims {list(dims.shape)} need {expected}"
        )
    raw = np.frombuffer(payload, dtype=np_dtype)
    try:
        if dtype == "f32":
            return ConfidenceVolume(dims, raw.astype(np.float64))
        return LabelVolume(dims, raw)
    except ValidationError as exc:
        raise VolumeFormatError(f"{path}: {exc}") from None


def write_volume(vol, path):
    """Write ``vol`` as ``<name>.bin`` plus ``<name>.meta.json``.

    Confidences are rounded to the nearest float32; values that are already
    float32-representable round-trip bit-exactly.
    """
    path = _payload_path(path)
    if isinstance(vol, ConfidenceVolume):
        dtype, payload = "f32", vol.values.astype("<f4").tobytes()
    elif isinstance(vol, LabelVolume):
        dtype, payload = "u8", vol.values.astype("u1").tobytes()
    else:
        raise TypeError(f"cannot write {type(vol).__name__}")
    header = {
        "dims": list(vol.dims.shape),
        "dtype": dtype,
        "order": ORDER,
        "endianness": ENDIANNESS,
    }
    try:
        path.write_bytes(payload)
        header_path(path).write_text(json.dumps(header) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write volume: {exc.strerror}", str(path)) from exc


def read_manifest(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeFormatError(f"{path}: manifest is not valid JSON ({exc})") from None
    try:
        entries = [
            ManifestEntry(str(e["id"]), str(e["confidence"]), str(e["label"]))
            for e in doc["entries"]
        ]
    except (KeyError, TypeError) as exc:
        raise VolumeFormatError(f"{path}: malformed manifest entry ({exc})") from None
    return DatasetManifest(tuple(entries))


def write_manifest(manifest, path):
    Path(path).write_text(json.dumps(manifest.to_json(), indent=1) + "\n")


def load_manifest(path, context="calibration"):
    """Load every pair listed in a manifest, in manifest order.

    Parameters
    ----------
    path : path-like
        Manifest JSON; volume paths resolve relative to its directory.
    context : {"calibration", "test"}
        Under ``"calibration"`` a pair with an all-zero mask is rejected with
        :class:`EmptyGroundTruthError`. Under ``"test"`` such pairs load.
    """
    if context not in ("calibration", "test"):
        raise ValueError(f"unknown context {context!r}")
    path = Path(path)
    manifest = read_manifest(path)
    base = path.parent
    pairs = []
    for e in manifest.entries:
        conf = read_volume(base / e.confidence)
        label = read_volume(base / e.label)
        if not isinstance(conf, ConfidenceVolume):
            raise VolumeFormatError(f"sample {e.id!r}: {e.confidence} is not a confidence volume")
        if not isinstance(label, LabelVolume):
            raise VolumeFormatError(f"sample {e.id!r}: {e.label} is not a mask volume")
        pair = SamplePair(e.id, conf, label)
        if context == "calibration":
            pair.require_lesion()
        pairs.append(pair)
    return pairs


def relpath(target, start):
    return Path(os.path.relpath(target, start)).as_posix()
