"""File formats and run configuration.

Point sets are ``{"dim": d, "points": [[...], ...]}`` (a bare list of rows is
accepted too); pairs are ``{"source": <points>, "image": <points>}``.  Floats
are written with Python's shortest round-trip repr, so a write/parse cycle is
bitwise lossless.
"""

import json
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .errors import MetricExtError, SchemaError
from .geometry import MappedPairs, PointSet
from .jl import DEFAULT_C_JL


@dataclass(frozen=True)
class Config:
    seed: int = 0
    c_jl: float = DEFAULT_C_JL
    solver_tol: float = 1e-8
    continuity_tol: float = 1e-9
    precision: int = 17

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise MetricExtError("seed must be a 64-bit unsigned integer")
        for name in ("c_jl", "solver_tol", "continuity_tol", "precision"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise MetricExtError(f"config field {name} must be positive, got {v}")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        return cls(
            int(obj.get("seed", 0)), float(obj.get("c_jl", DEFAULT_C_JL)),
            float(obj.get("solver_tol", 1e-8)), float(obj.get("continuity_tol", 1e-9)),
            int(obj.get("precision", 17)),
        )


def provenance(command, config: Config, **extra):
    out = {"tool": "metric-ext", "version": __version__, "command": command, "config": config.to_json(),
           "seed": config.seed}
    out.update(extra)
    return out


def _load(path):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SchemaError(path, "<file>", "no such file") from None
    except json.JSONDecodeError as e:
        raise SchemaError(path, "<json>", f"malformed JSON: {e}") from None


def _points(obj, path, field):
    try:
        if isinstance(obj, dict):
            if "points" not in obj:
                raise SchemaError(path, field, "missing 'points'")
            rows, dim = obj["points"], obj.get("dim")
        else:
            rows, dim = obj, None
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim == 1 and arr.size == 0 and dim is not None:
            arr = arr.reshape(0, int(dim))
        if arr.ndim != 2:
            raise SchemaError(path, field, f"expected a list of equal-length rows, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != int(dim):
            raise SchemaError(path, field, f"rows have {arr.shape[1]} coordinates but dim = {dim}")
        return PointSet(arr, int(dim) if dim is not None else None)
    except SchemaError:
        raise
    except (ValueError, TypeError) as e:
        raise SchemaError(path, field, str(e)) from None


def parse_pointset(path) -> PointSet:
    return _points(_load(path), path, "points")


def parse_pairs(path) -> MappedPairs:
    obj = _load(path)
    if not isinstance(obj, dict) or "source" not in obj or "image" not in obj:
        raise SchemaError(path, "<root>", "expected an object with 'source' and 'image'")
    src = _points(obj["source"], path, "source")
    img = _points(obj["image"], path, "image")
    try:
        return MappedPairs(src, img)
    except MetricExtError as e:
        raise SchemaError(path, "source/image", str(e)) from None


def _plain(value):
    if isinstance(value, (PointSet, MappedPairs)):
        return value.to_json()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "to_json"):
        return _plain(value.to_json())
    return value


def dumps(value) -> str:
    try:
        return json.dumps(_plain(value), allow_nan=False, indent=1) + "\n"
    except ValueError as e:
        raise MetricExtError(f"refusing to write non-finite value: {e}") from None


def write_json(value, path):
    text = dumps(value)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
