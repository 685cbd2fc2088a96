"""Prioritized dimension reduction.

Points are consumed in priority order through a nested family of prefixes
``S_0 < S_1 < ... < S_T``.  Each level extends the previous embedding to the
new prefix with the whole-space outer extension, then JL-compresses the block
of coordinates the extension added.  Earlier points keep their images (padded
with zeros), so a high-priority point uses few coordinates and sees little
distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import JLRetriesExhausted, MetricExtError
from .geometry import MappedPairs, PointSet, distortion_report
from .jl import DEFAULT_C_JL, jl_dim, jl_embed
from .outer import build_outer_extension

BASE_DIM = 3
LEVEL_SEED_STRIDE = 7919


@dataclass(frozen=True)
class PriorityRanking:
    """``order[r]`` is the index of the point with priority rank ``r + 1``."""

    order: tuple

    def __post_init__(self):
        o = tuple(int(i) for i in self.order)
        if sorted(o) != list(range(len(o))):
            raise MetricExtError("ranking must be a permutation of 0..N-1")
        object.__setattr__(self, "order", o)

    def __len__(self):
        return len(self.order)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(n)))


@dataclass(frozen=True)
class Variant:
    kind: str  # "loglog" or "fixed_k"
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("loglog", "fixed_k"):
            raise MetricExtError(f"unknown variant {self.kind!r}")
        if self.kind == "fixed_k" and (self.k is None or int(self.k) < 2):
            raise MetricExtError("fixed_k variant needs an integer k > 1")

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text == "loglog":
            return cls("loglog")
        if text.startswith("k="):
            return cls("fixed_k", int(text[2:]))
        raise MetricExtError(f"variant must be 'loglog' or 'k=K', got {text!r}")

    def __str__(self):
        return "loglog" if self.kind == "loglog" else f"k={self.k}"


def _pow2_ceil(exponent, n):
    """``min(ceil(2**exponent), n)`` without overflowing."""
    if exponent >= math.log2(n) or exponent > 62:
        return n
    return min(math.ceil(2.0**exponent), n)


def level_sizes(n, eps, variant: Variant):
    """Raw (unclamped) prefix sizes for levels ``0..T``, as the formulas give them."""
    if variant.kind == "loglog":
        C = 3.0 + eps
        lll = math.log2(math.log2(n)) if n > 2 else 0.0
        T = math.ceil(math.log(lll, C)) if lll > 1.0 else 0
        return [_pow2_ceil(2.0 ** (C**i), n) for i in range(T + 1)]
    k = int(variant.k)
    lg = math.log2(n) if n > 1 else 0.0
    sizes = [_pow2_ceil(lg ** (i / k), n) if lg > 0 else 1 for i in range(k + 1)]
    sizes[-1] = n
    return sizes


def clamp_sizes(raw, n):
    """Ceilings clamped to ``[previous + 1, N]``; non-increasing repeats dropped."""
    out = []
    for s in raw:
        s = min(max(int(s), 1), n)
        if out and s <= out[-1]:
            continue
        out.append(s)
    if not out or out[-1] != n:
        out.append(n)
    return out


@dataclass(frozen=True)
class Level:
    size: int
    dim: int
    distortion: float
    bound: float
    compressed: bool


@dataclass(frozen=True)
class PrioritizedEmbedding:
    points: PointSet
    ranking: PriorityRanking
    eps: float
    variant: Variant
    seed: int
    c_jl: float
    levels: tuple
    images: np.ndarray = field(repr=False)  # rank order, (N, d_T)
    level_images: tuple = field(default=(), repr=False)  # f_i on S_i, rank order

    @property
    def C(self):
        return 3.0 + self.eps

    @property
    def final_dim(self):
        return self.levels[-1].dim

    def level_of(self, j):
        """Index of the first level whose prefix contains rank ``j`` (1-based)."""
        for i, lv in enumerate(self.levels):
            if j <= lv.size:
                return i
        raise MetricExtError(f"rank {j} out of range")

    def image_of_rank(self, j):
        return self.images[j - 1]

    def final_images(self):
        """Images in the original point order."""
        out = np.empty_like(self.images)
        out[np.asarray(self.ranking.order)] = self.images
        return PointSet(out)

    def level_table(self):
        return [
            {"level": i, "size": lv.size, "dim": lv.dim, "distortion": lv.distortion,
             "bound": lv.bound, "compressed": lv.compressed}
            for i, lv in enumerate(self.levels)
        ]


def _base_isometry(P):
    """Exact isometry of at most four points into R^3 via QR of the differences."""
    out = np.zeros((len(P), BASE_DIM))
    if len(P) > 1:
        D = P[1:] - P[0]
        Q, R = np.linalg.qr(D.T, mode="reduced")
        coords = D @ Q
        out[1:, : coords.shape[1]] = coords
    return out


def build_prioritized(points, ranking, eps, variant="loglog", seed=0, c_jl=DEFAULT_C_JL,
                      max_retries=3, tol=1e-9, consistency="auto"):
    """Build the level-by-level embedding.

    At level ``i`` the outer extension of the level-``(i-1)`` map is evaluated on
    the new points of ``S_i``; its first block reproduces the previous images
    and its second block ``h2`` (source-dimension wide, zero on ``S_{i-1}``) is
    compressed by a JL map at accuracy ``eps / 3``.  If the JL target dimension
    would not be smaller than the block, the block is kept as is.
    """
    if not isinstance(points, PointSet):
        points = PointSet(points)
    n = len(points)
    if n < 1:
        raise MetricExtError("need at least one point")
    if not 0.0 < eps <= 1.0:
        raise MetricExtError("eps must lie in (0, 1]")
    if not isinstance(ranking, PriorityRanking):
        ranking = PriorityRanking(tuple(ranking))
    if len(ranking) != n:
        raise MetricExtError("ranking length differs from the number of points")
    if isinstance(variant, str):
        variant = Variant.parse(variant)
    P = points.points[np.asarray(ranking.order)]
    sizes = clamp_sizes(level_sizes(n, eps, variant), n)
    C = 3.0 + eps
    if sizes[0] > 4:
        raise MetricExtError("base level larger than 4 points")

    s0 = sizes[0]
    F = _base_isometry(P[:s0])
    levels = [Level(s0, BASE_DIM, distortion_report(MappedPairs(P[:s0], F)).distortion, 1.0, False)]
    maps = [F]
    for i, s in enumerate(sizes[1:], start=1):
        prev = levels[-1]
        ext = build_outer_extension(MappedPairs(P[: prev.size], F), tol=tol)
        new = ext.evaluate_many(P[prev.size: s], consistency=consistency)
        h1 = np.vstack([F, new[:, : F.shape[1]]])
        h2 = np.zeros((s, points.dim))
        h2[prev.size:] = new[:, F.shape[1]:]
        target = jl_dim(max(s - prev.size + 1, 1), eps / 3.0, c_jl) if eps / 3.0 < 0.5 else None
        if target is None or target >= points.dim:
            block, compressed = h2, False
        else:
            # h2 vanishes on the old prefix, so compress {0} plus the new rows; linear => g(0) = 0
            uniq = np.vstack([np.zeros((1, points.dim)), h2[prev.size:]])
            try:
                proj, _ = jl_embed(PointSet(uniq), eps / 3.0, seed + LEVEL_SEED_STRIDE * i, max_retries, c_jl)
            except JLRetriesExhausted as e:
                raise JLRetriesExhausted(e.report, e.attempts, level=i) from e
            block = proj.apply(h2)
            block[: prev.size] = 0.0
            compressed = True
        F = np.hstack([h1, block])
        dist = distortion_report(MappedPairs(P[:s], F)).distortion
        levels.append(Level(s, F.shape[1], dist, C**i, compressed))
        maps.append(F)

    d_T = levels[-1].dim
    images = np.zeros((n, d_T))
    images[:, : F.shape[1]] = F
    return PrioritizedEmbedding(points, ranking, float(eps), variant, int(seed), float(c_jl),
                                tuple(levels), images, tuple(maps))


def prefix_distortion(emb: PrioritizedEmbedding, j: int) -> float:
    """Exact distortion of the embedding restricted to the ``j`` highest-priority points."""
    if not 1 <= j <= len(emb.ranking):
        raise MetricExtError("j out of range")
    for lv in emb.levels:
        if lv.size == j:
            return lv.distortion
    P = emb.points.points[np.asarray(emb.ranking.order[:j])]
    return distortion_report(MappedPairs(P, emb.images[:j])).distortion


def nonzero_prefix_dim(emb: PrioritizedEmbedding, j: int) -> int:
    return emb.levels[emb.level_of(j)].dim
