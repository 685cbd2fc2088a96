"""Continuous near-isometric extensions of 1D maps into the plane."""

from dataclasses import dataclass

import numpy as np

from ..errors import MetricExtError, PortalOverlap
from ..geometry import MappedPairs
from .permutations import flip_decomposition, map_permutation
from .spiral import conjugated_spiral, portal_tolerance

MAX_EPS = 2.0 ** -8
RATIO_SLACK = 3.0


@dataclass(frozen=True)
class Portals:
    t: int
    u: int  # 1-based source indices, left to right
    v: int
    delta: float
    src: tuple  # alpha, beta, gamma, delta
    img: tuple  # alpha', beta', gamma', delta'
    orientation: float = 1.0


@dataclass(frozen=True)
class Piece:
    """One piece of the curve on ``[lo, hi]``.

    ``kind`` is ``"linear"`` (first coordinate interpolates ``v_lo`` to ``v_hi``),
    ``"shift"`` (slope one ray through ``(anchor, v_anchor)``) or ``"spiral"``
    (a section of ``spiral``, the conjugated spiral of flip ``flip``).
    """

    kind: str
    lo: float
    hi: float
    v_lo: float = 0.0
    v_hi: float = 0.0
    flip: int = -1

    def eval(self, t, spirals):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "spiral":
            return spirals[self.flip](t)
        out = np.zeros(t.shape + (2,))
        if self.kind == "shift":
            if np.isfinite(self.lo):
                out[..., 0] = self.v_lo + (t - self.lo)
            else:
                out[..., 0] = self.v_hi + (t - self.hi)
        else:
            w = (t - self.lo) / (self.hi - self.lo)
            out[..., 0] = (1.0 - w) * self.v_lo + w * self.v_hi
        return out


@dataclass(frozen=True)
class LineExtensionMap:
    pairs: MappedPairs
    eps: float
    flips: tuple
    portals: tuple
    spirals: tuple
    breakpoints: np.ndarray  # finite piece boundaries, increasing
    pieces: tuple  # len(breakpoints) + 1, the first and last unbounded

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = np.searchsorted(self.breakpoints, t, side="right")
        out = np.empty(t.shape + (2,))
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.pieces[k].eval(t[sel], self.spirals)
        return out[0] if scalar else out

    @property
    def interval(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def continuity_gaps(self):
        """Left/right value mismatch at every breakpoint."""
        gaps = np.empty(len(self.breakpoints))
        for k, b in enumerate(self.breakpoints):
            left = self.pieces[k].eval(b, self.spirals)
            right = self.pieces[k + 1].eval(b, self.spirals)
            gaps[k] = np.linalg.norm(left - right)
        return gaps

    def to_json(self):
        return {
            "kind": "line_extension",
            "eps": self.eps,
            "source": self.pairs.X[:, 0].tolist(),
            "image": self.pairs.Y[:, 0].tolist(),
            "flips": [list(f) for f in self.flips],
            "breakpoints": self.breakpoints.tolist(),
            "pieces": [
                {"kind": p.kind, "lo": _num(p.lo), "hi": _num(p.hi), "v_lo": p.v_lo, "v_hi": p.v_hi, "flip": p.flip}
                for p in self.pieces
            ],
        }


def _num(x):
    return x if np.isfinite(x) else None


def line_eval(m: LineExtensionMap, t):
    return m(t)


def _ratio_check(x, fx, eps):
    dx = np.abs(x[:, None] - x[None, :])
    df = np.abs(fx[:, None] - fx[None, :])
    iu = np.triu_indices(len(x), 1)
    if len(iu[0]) == 0:
        return
    r = df[iu] / dx[iu]
    lo, hi = 1.0 - RATIO_SLACK * eps, 1.0 + RATIO_SLACK * eps
    if r.min() < lo or r.max() > hi:
        raise MetricExtError(
            f"pair ratios span [{r.min():.6g}, {r.max():.6g}], outside [{lo:.6g}, {hi:.6g}]; "
            "the spiral construction needs |f(x) - f(y)| within 1 +- 3 eps of |x - y|"
        )


def build_line_extension(pairs: MappedPairs, eps: float) -> LineExtensionMap:
    """Extend a near-isometry of the line to a continuous map into the plane.

    Each flip of the image order gets two spiral sections at the portal scales
    ``|delta| / eps^(1/3)`` and ``|delta| / eps^(2/3)``; the curve is linear
    between the constructed values and a unit-speed shift on both rays.
    """
    if pairs.source.dim != 1 or pairs.image.dim != 1:
        raise MetricExtError("build_line_extension needs one-dimensional source and image")
    eps = float(eps)
    if not 0.0 < eps <= MAX_EPS:
        raise MetricExtError(
            f"eps = {eps:g} exceeds {MAX_EPS:g}; the spiral assembly is only valid for small eps "
            "(use the whole-space extension instead)"
        )
    order = np.argsort(pairs.X[:, 0], kind="stable")
    x, fx = pairs.X[order, 0], pairs.Y[order, 0]
    _ratio_check(x, fx, eps)
    perm = map_permutation(pairs)
    flips = flip_decomposition(perm)

    # nodes: position -> image value; spiral intervals: (lo, hi, flip)
    nodes = {float(a): float(b) for a, b in zip(x, fx)}
    owner = {float(a): ("point", k + 1) for k, a in enumerate(x)}
    intervals, portals, spirals = [], [], []
    cur = list(range(1, len(x) + 1))
    for t, (a, b) in enumerate(flips):
        u, v = cur[a - 1], cur[b - 1]
        p, q = x[u - 1], x[v - 1]
        # slope sign of the curve around the block: -1 inside an odd number of flips
        orient = 1.0 if (fx[u - 1] - fx[v - 1]) * (q - p) > 0 else -1.0
        sp = conjugated_spiral(p, q, fx[u - 1], fx[v - 1], eps, ratio_tol=RATIO_SLACK * eps, orientation=orient)
        src, img = sp.src, sp.img
        portals.append(Portals(t + 1, u, v, q - p, src, img, orient))
        spirals.append(sp)
        targets = (img[0], img[2], img[1], img[3])
        for pos, val in zip(src, targets):
            if pos in owner:
                raise PortalOverlap(
                    f"portal of flip {t + 1} coincides with {owner[pos][0]} {owner[pos][1]}; "
                    "flipped blocks must be separated from other points by order |delta| / eps"
                )
            nodes[float(pos)] = float(val)
            owner[float(pos)] = ("portal of flip", t + 1)
        for lo, hi in ((src[0], src[1]), (src[2], src[3])):
            intervals.append((min(lo, hi), max(lo, hi), t))
        cur[a - 1: b] = cur[a - 1: b][::-1]

    bps = np.array(sorted(nodes))
    for lo, hi, t in intervals:
        inside = bps[(bps > lo) & (bps < hi)]
        if len(inside):
            kind, who = owner[float(inside[0])]
            raise PortalOverlap(
                f"spiral interval [{lo:.6g}, {hi:.6g}] of flip {t + 1} contains {kind} {who}; "
                "flipped blocks must be separated from other points by order |delta| / eps"
            )
    spiral_at = {(lo, hi): t for lo, hi, t in intervals}
    pieces = [Piece("shift", -np.inf, bps[0], v_hi=nodes[bps[0]])]
    for lo, hi in zip(bps[:-1], bps[1:]):
        if (lo, hi) in spiral_at:
            pieces.append(Piece("spiral", lo, hi, nodes[lo], nodes[hi], spiral_at[(lo, hi)]))
        else:
            pieces.append(Piece("linear", lo, hi, nodes[lo], nodes[hi]))
    pieces.append(Piece("shift", bps[-1], np.inf, v_lo=nodes[bps[-1]]))

    m = LineExtensionMap(pairs, eps, flips.flips, tuple(portals), tuple(spirals), bps, tuple(pieces))
    gaps = m.continuity_gaps()
    # 1e-9, scaled by |delta| next to spiral sections and floored at double resolution
    tol = np.empty(len(bps))
    for k, b in enumerate(bps):
        delta = max([abs(portals[pc.flip].delta) for pc in pieces[k: k + 2] if pc.kind == "spiral"] + [1.0])
        tol[k] = portal_tolerance(delta, max(abs(b), abs(nodes[b])))
    if len(gaps) and (gaps > tol).any():
        k = int(np.argmax(gaps / tol))
        raise MetricExtError(f"curve is discontinuous at {bps[k]:.17g} (gap {gaps[k]:.3e})")
    at_points = m(x)
    err = np.abs(at_points[:, 0] - fx) + np.abs(at_points[:, 1])
    tol_pts = np.array([portal_tolerance(1.0, max(abs(a), abs(b))) for a, b in zip(x, fx)])
    if (err > tol_pts).any():
        raise MetricExtError(f"curve misses the input images by {err.max():.3e}")
    return m
