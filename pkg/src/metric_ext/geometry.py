"""Point sets, finite maps between them, and their bi-Lipschitz distortion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InfiniteDistortion, MetricExtError, PointAlreadyMapped


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


class PointSet:
    """An ordered, immutable list of points in R^dim.

    ``points`` is a read-only ``(n, dim)`` float64 array.  An empty set needs an
    explicit ``dim``.
    """

    __slots__ = ("points", "dim")

    def __init__(self, points, dim=None):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim == 1:
            if dim is None and arr.size:
                raise MetricExtError("1-d input is ambiguous; pass dim or a 2-d array")
            arr = arr.reshape(-1, dim if dim else 0)
        if arr.ndim != 2:
            raise MetricExtError(f"points must be a 2-d array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise MetricExtError(f"points have {arr.shape[1]} coordinates, expected dim={dim}")
        if arr.shape[1] < 1:
            raise MetricExtError("dim must be positive")
        bad = ~np.isfinite(arr).all(axis=1)
        if bad.any():
            raise MetricExtError(f"non-finite coordinate in point {int(np.argmax(bad))}")
        object.__setattr__(self, "points", _frozen(arr))
        object.__setattr__(self, "dim", int(arr.shape[1]))

    def __setattr__(self, name, value):
        raise AttributeError("PointSet is immutable")

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"PointSet(n={len(self)}, dim={self.dim})"

    def __eq__(self, other):
        return (
            isinstance(other, PointSet)
            and self.dim == other.dim
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None

    def to_json(self):
        return {"dim": self.dim, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["points"], dtype=np.float64).reshape(-1, int(obj["dim"])), int(obj["dim"]))


class MappedPairs:
    """A finite injective map ``source[i] -> image[i]``."""

    __slots__ = ("source", "image")

    def __init__(self, source, image):
        source = source if isinstance(source, PointSet) else PointSet(source)
        image = image if isinstance(image, PointSet) else PointSet(image)
        if len(source) != len(image):
            raise MetricExtError("source/image length mismatch")
        if len(source) < 1:
            raise MetricExtError("a map needs at least one point")
        if len(np.unique(source.points, axis=0)) != len(source):
            raise MetricExtError("duplicate source points")
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "image", image)

    def __setattr__(self, name, value):
        raise AttributeError("MappedPairs is immutable")

    def __len__(self):
        return len(self.source)

    def __repr__(self):
        return f"MappedPairs(n={len(self)}, {self.source.dim} -> {self.image.dim})"

    @property
    def X(self):
        return self.source.points

    @property
    def Y(self):
        return self.image.points

    def to_json(self):
        return {"source": self.source.to_json(), "image": self.image.to_json()}

    @classmethod
    def from_json(cls, obj):
        return cls(PointSet.from_json(obj["source"]), PointSet.from_json(obj["image"]))


@dataclass(frozen=True)
class DistortionReport:
    lipschitz: float
    inverse_lipschitz: float
    distortion: float
    witness_expand: tuple | None
    witness_contract: tuple | None


def ratio_extremes(src, img):
    """Raw ``(rmax, (i, j), rmin, (k, l))`` of image/source distance ratios."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    img = np.ascontiguousarray(img, dtype=np.float64)
    rmax, i, j, rmin, k, l = kernels.pair_ratio_extremes(src, img)
    return float(rmax), (int(i), int(j)), float(rmin), (int(k), int(l))


def distortion_report(pairs: MappedPairs) -> DistortionReport:
    """Exact pairwise scan of expansion and contraction.

    A one-point map has distortion 1 and no witnesses.  Two source points with
    the same image give ``inverse_lipschitz = distortion = inf``.
    """
    if len(pairs) < 2:
        return DistortionReport(0.0, 0.0, 1.0, None, None)
    rmax, wexp, rmin, wcon = ratio_extremes(pairs.X, pairs.Y)
    inv = np.inf if rmin == 0.0 else 1.0 / rmin
    dist = np.inf if rmin == 0.0 else rmax / rmin
    return DistortionReport(rmax, inv, dist, wexp, wcon)


def smallest_eps(pairs: MappedPairs) -> float:
    """Smallest eps with ``distortion(pairs) <= 1 + eps`` (after optimal rescaling)."""
    rep = distortion_report(pairs)
    if not np.isfinite(rep.distortion):
        raise InfiniteDistortion(rep.witness_contract)
    return max(rep.distortion - 1.0, 0.0)


@dataclass(frozen=True)
class NormalizationRecord:
    """Affine frame change used before one-point extension.

    Normalized coordinates are ``(x - source_shift) / scale`` on the source side
    and ``(y - image_shift) / scale`` on the image side.
    """

    source_shift: np.ndarray
    image_shift: np.ndarray
    scale: float
    nearest_index: int

    def to_source(self, p):
        return np.asarray(p) * self.scale + self.source_shift

    def to_image(self, y):
        """Undo the image normalization; extra trailing coordinates get no shift."""
        y = np.asarray(y, dtype=np.float64) * self.scale
        m = self.image_shift.shape[0]
        y[..., :m] += self.image_shift
        return y


def normalize_for_extension(pairs: MappedPairs, u):
    """Move the nearest source point to ``u`` and its image to the origin, and scale so ``|u| = 1``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (pairs.source.dim,):
        raise MetricExtError(f"query has shape {u.shape}, expected ({pairs.source.dim},)")
    d = np.sqrt(((pairs.X - u) ** 2).sum(axis=1))
    near = int(np.argmin(d))
    if d[near] == 0.0:
        raise PointAlreadyMapped(near)
    s = float(d[near])
    x0 = pairs.X[near].copy()
    y0 = pairs.Y[near].copy()
    rec = NormalizationRecord(_frozen(x0), _frozen(y0), s, near)
    Xn = (pairs.X - x0) / s
    Yn = (pairs.Y - y0) / s
    Xn[near] = 0.0
    Yn[near] = 0.0
    return MappedPairs(PointSet(Xn), PointSet(Yn)), (u - x0) / s, rec
