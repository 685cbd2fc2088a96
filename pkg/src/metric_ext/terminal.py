"""Terminal dimension reduction.

Terminals are embedded once with a JL projection at accuracy ``eps^2``; every
other point gets its own one-point extension of that embedding, so distances
from any point to every terminal are kept within ``1 + O(eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MetricExtError, SolverDidNotConverge
from .geometry import DistortionReport, PointSet, distortion_report, MappedPairs
from .jl import DEFAULT_C_JL, jl_embed
from .outer import OnePointParams, solve_normalized

LAMBDA_NUDGE = 1e-9
CONTRACTION_TOL = 1e-9


@dataclass(frozen=True)
class QueryResult:
    point: np.ndarray
    nearest: int
    min_ratio: float
    max_ratio: float
    is_terminal: bool = False

    @property
    def contracts(self):
        return self.min_ratio < 1.0 - CONTRACTION_TOL


class _Frame:
    """Orthonormal coordinates for the span of a set of images, plus their report."""

    def __init__(self, terminals, images):
        self.T = np.ascontiguousarray(terminals)
        self.images = images
        self.Q, _ = np.linalg.qr(images.T, mode="reduced")
        self.Z = images @ self.Q
        self.report = distortion_report(MappedPairs(terminals, images)) if len(terminals) > 1 else None
        self.lam_n = self.report.inverse_lipschitz if self.report else 1.0
        self.lookup = {row.tobytes(): i for i, row in enumerate(self.T)}

    def solve(self, p, params):
        """Extend to ``p``; returns ``(coords, lift, nearest, scale, ratios)`` in frame units."""
        d = np.sqrt(((self.T - p) ** 2).sum(axis=1))
        near = int(np.argmin(d))
        s = float(d[near])
        Xn = (self.T - self.T[near]) / s
        Xn[near] = 0.0
        un = (p - self.T[near]) / s
        C = (self.Z - self.Z[near]) * (self.lam_n / s)
        C[near] = 0.0
        y, _ = solve_normalized(Xn, C, un, params)
        lift = math.sqrt(max(0.0, 1.0 - float(y @ y)))
        # ratios against every terminal, computed in span coordinates
        diff = self.Z[near] - self.Z + (s / self.lam_n) * y
        out2 = (diff * diff).sum(axis=1) + (s * lift / self.lam_n) ** 2
        ratios = np.sqrt(out2) / d
        return y, lift, near, s, ratios

    def point(self, y, lift, near, s):
        body = self.images[near] + (s / self.lam_n) * (self.Q @ y)
        return np.append(body, (s / self.lam_n) * lift)


@dataclass(frozen=True)
class TerminalEmbedder:
    terminals: PointSet
    images: PointSet
    lam: float
    eps: float
    eps_effective: float
    one_point_params: OnePointParams
    seed: int
    jl_seed: int
    c_jl: float
    frame: _Frame = field(repr=False, compare=False, default=None)

    @property
    def output_dim(self):
        return self.images.dim + 1

    def to_json(self):
        return {
            "terminals": self.terminals.to_json(),
            "images": self.images.to_json(),
            "lambda": self.lam,
            "eps": self.eps,
            "eps_effective": self.eps_effective,
            "seed": self.seed,
            "jl_seed": self.jl_seed,
            "c_jl": self.c_jl,
        }

    @classmethod
    def from_json(cls, obj):
        T = PointSet.from_json(obj["terminals"])
        I = PointSet.from_json(obj["images"])
        eps_eff = float(obj["eps_effective"])
        return cls(
            T, I, float(obj["lambda"]), float(obj["eps"]), eps_eff, _params(eps_eff),
            int(obj["seed"]), int(obj["jl_seed"]), float(obj["c_jl"]), _Frame(T.points, I.points),
        )


def _params(eps_eff):
    # hard non-contraction in the refinement; the Lemma's constraints still apply
    return OnePointParams(eps=min(max(eps_eff, 1e-12), 0.999), contraction_weight=np.inf)


def default_calibration_queries(terminals, n, seed):
    """Gaussian sample matching the terminals' per-coordinate mean and spread."""
    T = terminals.points if isinstance(terminals, PointSet) else np.asarray(terminals)
    rng = np.random.default_rng([int(seed), 1])
    mu = T.mean(axis=0)
    sd = T.std(axis=0) if len(T) > 1 else np.ones(T.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return mu + sd * rng.standard_normal((int(n), T.shape[1]))


def calibrate_lambda(terminals, images_raw, eps, sample_queries, seed=0, params=None):
    """Global rescale making sampled queries non-contracting.

    Runs the one-point extension for each sample query, takes the worst
    contraction ratio ``r_min`` over (query, terminal) pairs and over terminal
    pairs, and returns ``(1 / r_min) (1 + 1e-9)``.  An empty sample gives 1.
    ``seed`` is accepted for interface symmetry; the solver is deterministic.
    """
    T = terminals.points if isinstance(terminals, PointSet) else np.asarray(terminals, dtype=np.float64)
    I = images_raw.points if isinstance(images_raw, PointSet) else np.asarray(images_raw, dtype=np.float64)
    Qs = np.asarray(sample_queries, dtype=np.float64).reshape(-1, T.shape[1])
    if len(Qs) == 0:
        return 1.0
    frame = _Frame(T, I)
    rmin = 1.0 / frame.lam_n if frame.report else 1.0
    if params is None:
        params = _params(frame.report.distortion - 1.0 if frame.report else eps**2)
    for q in Qs:
        if q.tobytes() in frame.lookup:
            continue
        _, _, _, _, ratios = frame.solve(q, params)
        rmin = min(rmin, float(ratios.min()))
    if not rmin > 0:
        return 1.0
    return (1.0 / rmin) * (1.0 + LAMBDA_NUDGE)


def build_terminal_embedder(
    terminals,
    eps,
    seed,
    c_jl=DEFAULT_C_JL,
    max_retries=3,
    n_calibration=64,
    calibration_queries=None,
):
    """JL-embed the terminals at ``eps^2`` and calibrate the global rescale."""
    if not isinstance(terminals, PointSet):
        terminals = PointSet(terminals)
    if not 0.0 < eps < 0.5:
        raise MetricExtError("eps must lie in (0, 1/2)")
    proj, raw = jl_embed(terminals, eps**2, seed, max_retries, c_jl)
    if calibration_queries is None:
        calibration_queries = default_calibration_queries(terminals, n_calibration, seed)
    lam = calibrate_lambda(terminals, raw, eps, calibration_queries, seed)
    images = PointSet(raw.points * lam, raw.dim)
    frame = _Frame(terminals.points, images.points)
    eps_eff = frame.report.distortion - 1.0 if frame.report else 0.0
    return TerminalEmbedder(
        terminals, images, lam, eps, eps_eff, _params(eps_eff), int(seed), proj.seed, c_jl, frame
    )


def embed_query_result(emb: TerminalEmbedder, p) -> QueryResult:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (emb.terminals.dim,):
        raise MetricExtError(f"query has shape {p.shape}, expected ({emb.terminals.dim},)")
    hit = emb.frame.lookup.get(p.tobytes())
    if hit is not None:
        return QueryResult(np.append(emb.images.points[hit], 0.0), hit, 1.0, 1.0, True)
    try:
        y, lift, near, s, ratios = emb.frame.solve(p, emb.one_point_params)
    except SolverDidNotConverge as e:
        raise SolverDidNotConverge(f"query {p.tolist()}: {e}", e.best, e.residual) from e
    return QueryResult(emb.frame.point(y, lift, near, s), near, float(ratios.min()), float(ratios.max()))


def embed_query(emb: TerminalEmbedder, p) -> np.ndarray:
    """Image of ``p`` in R^{d'+1}; terminals map to their stored image plus a zero."""
    return embed_query_result(emb, p).point


@dataclass(frozen=True)
class QueryBatchStats:
    n_queries: int
    min_ratio: float
    max_ratio: float
    violations: int


def embed_queries(emb: TerminalEmbedder, points, keep_points=True):
    """Embed many queries; returns ``(points or None, QueryBatchStats)``.

    Queries are independent, so nothing about the embedder changes; contraction
    violations (ratio below ``1 - 1e-9``) are counted in the stats.
    """
    P = np.asarray(points, dtype=np.float64)
    out = np.empty((len(P), emb.output_dim)) if keep_points else None
    lo, hi, bad = np.inf, 0.0, 0
    for i, p in enumerate(P):
        r = embed_query_result(emb, p)
        if keep_points:
            out[i] = r.point
        lo, hi = min(lo, r.min_ratio), max(hi, r.max_ratio)
        bad += r.contracts
    return out, QueryBatchStats(len(P), lo, hi, bad)
