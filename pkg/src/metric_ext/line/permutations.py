"""Permutations of 1D maps, forbidden patterns and laminar flip decompositions.

Permutations are 1-based tuples: ``values[k-1]`` is the index of the source
point whose image is the k-th smallest.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ForbiddenPattern, MetricExtError
from ..geometry import MappedPairs
from ..kernels import forbidden_pattern_scan

PATTERNS = ((3, 1, 4, 2), (2, 4, 1, 3))


@dataclass(frozen=True)
class Permutation:
    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if sorted(vals) != list(range(1, len(vals) + 1)):
            raise MetricExtError(f"not a permutation of 1..{len(vals)}: {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return len(self.values)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(1, n + 1)))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        """1-based access, ``perm[k] = pi(k)``."""
        return self.values[k - 1]


@dataclass(frozen=True)
class PatternWitness:
    positions: tuple  # 1-based, increasing
    pattern: tuple


@dataclass(frozen=True)
class FlipSequence:
    flips: tuple = ()

    def __post_init__(self):
        flips = tuple((int(a), int(b)) for a, b in self.flips)
        for a, b in flips:
            if not 1 <= a < b:
                raise MetricExtError(f"invalid flip ({a}, {b})")
        object.__setattr__(self, "flips", flips)

    def __len__(self):
        return len(self.flips)

    def __iter__(self):
        return iter(self.flips)

    def is_laminar(self):
        """Later segments are disjoint from or strictly inside earlier ones."""
        for t1, (a1, b1) in enumerate(self.flips):
            for a2, b2 in self.flips[t1 + 1:]:
                disjoint = b2 < a1 or a2 > b1
                inside = a1 <= a2 and b2 <= b1 and (a1, b1) != (a2, b2)
                if not (disjoint or inside):
                    return False
        return True


def map_permutation(pairs: MappedPairs) -> Permutation:
    """Order of the images, with source points indexed left to right."""
    if pairs.source.dim != 1 or pairs.image.dim != 1:
        raise MetricExtError("map_permutation needs one-dimensional source and image")
    x, fx = pairs.X[:, 0], pairs.Y[:, 0]
    order = np.argsort(x, kind="stable")
    fx = fx[order]
    if len(np.unique(fx)) != len(fx):
        raise MetricExtError("image values repeat: the map is not injective")
    return Permutation(tuple(int(i) + 1 for i in np.argsort(fx, kind="stable")))


def contains_forbidden_pattern(perm: Permutation):
    """First occurrence of (3 1 4 2) or (2 4 1 3) in lexicographic position order, or None."""
    vals = np.asarray(perm.values, dtype=np.int64)
    i, j, k, l, p = forbidden_pattern_scan(vals)
    if p < 0:
        return None
    return PatternWitness((int(i) + 1, int(j) + 1, int(k) + 1, int(l) + 1), PATTERNS[int(p)])


class _Split(Exception):
    pass


def _decompose(vals, offset, out):
    n = len(vals)
    if n <= 1:
        return
    ranks = list(np.argsort(np.argsort(vals)) + 1)
    u, v = ranks.index(1) + 1, ranks.index(n) + 1
    if u > v:
        out.append((offset + 1, offset + n))
        # a flip reverses positions, so what is left to realize is the value complement
        ranks = [n + 1 - r for r in ranks]
        u, v = v, u
    if u == 1:
        _decompose(ranks[1:], offset + 1, out)
        return
    top = max(ranks[:u])
    w = next(k for k in range(1, n + 1) if ranks[k - 1] > top)
    if min(ranks[w - 1:]) < top:
        raise _Split
    _decompose(ranks[: w - 1], offset, out)
    _decompose(ranks[w - 1:], offset + w - 1, out)


def flip_decomposition(perm: Permutation) -> FlipSequence:
    """Laminar flips realizing ``perm`` from the identity (recursive split on the
    positions of the smallest and largest values)."""
    out = []
    try:
        _decompose(list(perm.values), 0, out)
    except _Split:
        raise ForbiddenPattern(contains_forbidden_pattern(perm)) from None
    return FlipSequence(tuple(out))


def apply_flips(flips, n) -> Permutation:
    vals = list(range(1, n + 1))
    for a, b in flips:
        if not 1 <= a < b <= n:
            raise MetricExtError(f"flip ({a}, {b}) outside 1..{n}")
        vals[a - 1: b] = vals[a - 1: b][::-1]
    return Permutation(tuple(vals))
