"""Kirszbraun extension of a finite Lipschitz map, evaluated pointwise.

The value at ``z`` is any ``y`` in the intersection of the balls
``B(f(x), L |z - x|)``; Kirszbraun's theorem says the intersection is nonempty.
We find such a point by minimizing the convex function
``F(y) = max_x |y - f(x)| - L |z - x|`` until ``F(y) <= tolerance``.
"""

from __future__ import annotations

from dataclasses import dataclass

import clarabel
import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from . import kernels
from .errors import MetricExtError, SolverDidNotConverge
from .geometry import MappedPairs, distortion_report

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200_000
LIPSCHITZ_SLACK = 1e-12
# relative slack for consistent batch evaluation; keeps ball intersections from being tangent
BATCH_LIPSCHITZ_SLACK = 1e-9


def lipschitz_constant(pairs: MappedPairs) -> float:
    """Exact ``max |f(x) - f(y)| / |x - y|``; 0 for a single point."""
    return distortion_report(pairs).lipschitz


def _diameter(points):
    if len(points) < 2:
        return 1.0
    lo, hi = points.min(axis=0), points.max(axis=0)
    d = float(np.sqrt(((hi - lo) ** 2).sum()))
    return d if d > 0 else 1.0


@dataclass(frozen=True)
class KirszbraunProblem:
    """A finite map plus the Lipschitz bound ``L`` its extension must respect.

    ``check=True`` verifies ``L >= lipschitz_constant(pairs) - tolerance`` (an
    O(n^2) scan); callers that just computed the constant can skip it.
    """

    pairs: MappedPairs
    lipschitz_bound: float
    tolerance: float = DEFAULT_TOL
    max_iterations: int = DEFAULT_MAX_ITER
    check: bool = True

    def __post_init__(self):
        if not self.lipschitz_bound > 0 or not self.tolerance > 0 or self.max_iterations < 1:
            raise MetricExtError("lipschitz_bound and tolerance must be positive, max_iterations >= 1")
        if self.check:
            lc = lipschitz_constant(self.pairs)
            if self.lipschitz_bound < lc - self.tolerance:
                raise MetricExtError(
                    f"lipschitz_bound {self.lipschitz_bound} below the map's constant {lc}"
                )

    @property
    def step_scale(self):
        return _diameter(self.pairs.Y)


def kirszbraun_residual(problem: KirszbraunProblem, z, y) -> float:
    """``F(y) = max_x |y - f(x)| - L |z - x|`` for the problem's anchors."""
    X, Y = problem.pairs.X, problem.pairs.Y
    dz = np.sqrt(((X - np.asarray(z)) ** 2).sum(axis=1))
    dy = np.sqrt(((Y - np.asarray(y)) ** 2).sum(axis=1))
    return float((dy - problem.lipschitz_bound * dz).max())


_EMPTY = np.zeros(0)
FALLBACK_ITERS = 20_000


def socp_min_max(centers, radii):
    """Exact ``argmin_y max_a |y - centers[a]| - radii[a]`` as a second-order cone program.

    Fallback for nearly tangent ball intersections, where subgradient steps
    crawl.  Returns ``(y, value)`` or ``None`` if the solver fails.
    """
    k, m = centers.shape
    rows, cols, vals, b = [], [], [], np.empty(k * (m + 1))
    for a in range(k):
        base = a * (m + 1)
        rows.append(base)
        cols.append(m)
        vals.append(-1.0)
        b[base] = radii[a]
        rows.extend(range(base + 1, base + m + 1))
        cols.extend(range(m))
        vals.extend([-1.0] * m)
        b[base + 1: base + m + 1] = -centers[a]
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(k * (m + 1), m + 1))
    q = np.zeros(m + 1)
    q[-1] = 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = settings.tol_feas = 1e-12
    sol = clarabel.DefaultSolver(
        sparse.csc_matrix((m + 1, m + 1)), q, A, b, [clarabel.SecondOrderConeT(m + 1)] * k, settings
    ).solve()
    if sol.status not in (clarabel.SolverStatus.Solved, clarabel.SolverStatus.AlmostSolved):
        return None
    y = np.asarray(sol.x[:m], dtype=np.float64)
    return y, float((np.sqrt(((centers - y) ** 2).sum(axis=1)) - radii).max())


def _kernel(z, src, img, idx, L, n_exact, pad, r0, tol, max_iter, y0, depth):
    """Subgradient kernel with an exact cone-program fallback when it stalls."""
    budget = min(max_iter, FALLBACK_ITERS)
    y, F, iters = kernels.kirszbraun_solve(z, src, img, idx, L, n_exact, pad, r0, tol, budget, y0, depth)
    # iters == 0 with F > tol: z is an anchor and its value is forced
    if F <= tol or budget == max_iter or iters == 0:
        return np.asarray(y), float(F)
    rad = L * np.sqrt(((src[idx] - z) ** 2).sum(axis=1)) + np.where(idx >= n_exact, pad, 0.0)
    res = socp_min_max(img[idx], rad)
    if res is not None and res[1] < F:
        y, F = res
        if F > tol:
            # polish from the cone-program answer with the remaining budget
            y2, F2, _ = kernels.kirszbraun_solve(z, src, img, idx, L, n_exact, pad, r0, tol,
                                                 max_iter - budget, np.ascontiguousarray(y), 0)
            if F2 < F:
                y, F = y2, F2
    return np.asarray(y), float(F)


def _solve(z, src, img, universe, n_exact, L, pad, r0, tol, max_iter, depth, active=None):
    """Solve over the anchors ``universe``, optionally via an active set.

    With ``active`` given, the kernel only sees those anchors; the answer is
    then checked against the whole universe and the worst violators are added
    until ``F <= tol`` holds for every anchor.  Returns ``(y, F over universe)``.
    """
    if active is None:
        return _kernel(z, src, img, universe, L, n_exact, pad, r0, tol, max_iter, _EMPTY, depth)
    rad = L * np.sqrt(((src[universe] - z) ** 2).sum(axis=1)) + np.where(universe >= n_exact, pad, 0.0)
    targets = img[universe]
    y0 = _EMPTY
    while True:
        y, F = _kernel(z, src, img, active, L, n_exact, pad, r0, tol, max_iter, y0, depth)
        if F > tol:
            return y, F
        viol = np.sqrt(((targets - y) ** 2).sum(axis=1)) - rad
        over = np.flatnonzero(viol > tol)
        if len(over) == 0:
            return y, float(viol.max())
        # add the worst violators, at most doubling the active set per round
        cap = max(ACTIVE_GROWTH, len(active))
        if len(over) > cap:
            over = over[np.argpartition(-viol[over], cap)[:cap]]
        grown = np.union1d(active, universe[over]).astype(np.int64)
        if len(grown) == len(active):
            return y, float(viol.max())
        active, y0 = grown, y


ACTIVE_THRESHOLD = 256
ACTIVE_START = 32
ACTIVE_GROWTH = 16
DEPTH_ITERS = 30
BATCH_PAD = 1.0
# batch solves may settle for the exact cone-program optimum up to this many tolerances
BATCH_ACCEPT = 1000.0


def kirszbraun_eval(problem: KirszbraunProblem, z) -> np.ndarray:
    """Value of the extension at ``z``; ``f(z)`` itself when ``z`` is a source point.

    The solver aims a little inside the ball intersection when it can (see
    :func:`metric_ext.kernels.numpy_impl.kirszbraun_solve`), so the residual
    is usually negative.  Large anchor sets are handled through an active set
    seeded with the anchors nearest to ``z``; the returned point is always
    verified against every anchor.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.shape != (problem.pairs.source.dim,):
        raise MetricExtError(f"query has shape {z.shape}, expected ({problem.pairs.source.dim},)")
    X = np.ascontiguousarray(problem.pairs.X)
    Y = np.ascontiguousarray(problem.pairs.Y)
    n = len(X)
    universe = np.arange(n, dtype=np.int64)
    active = None
    if n > ACTIVE_THRESHOLD:
        _, nb = cKDTree(X).query(z, k=ACTIVE_START)
        active = np.sort(np.asarray(nb, dtype=np.int64))
    y, F = _solve(
        z, X, Y, universe, n, float(problem.lipschitz_bound), 0.0, problem.step_scale,
        float(problem.tolerance), int(problem.max_iterations), DEPTH_ITERS, active,
    )
    if F > problem.tolerance:
        raise SolverDidNotConverge("Kirszbraun solver hit its iteration cap", y, F)
    return y


CONSISTENCY_MODES = ("full", "local", "none")
LOCAL_CELLS = 3
LOCAL_BUCKET_CAP = 256


def _earlier_neighbours(buckets, cells, Q, z, k):
    """Up to ``k`` nearest earlier queries among those filed under ``cells``.

    Each bucket contributes its ``LOCAL_BUCKET_CAP`` most recent entries, which
    bounds the work per query when the base map has few points.
    """
    cand = [buckets[c][-LOCAL_BUCKET_CAP:] for c in map(int, cells) if c in buckets]
    if not cand:
        return np.zeros(0, dtype=np.int64)
    cand = np.unique(np.concatenate(cand)).astype(np.int64)
    d = ((Q[cand] - z) ** 2).sum(axis=1)
    if len(cand) > k:
        keep = np.argpartition(d, k)[:k]
        cand = cand[keep]
    return np.sort(cand)


def kirszbraun_eval_many(problem: KirszbraunProblem, queries, consistency="full", neighbors=16, stats=None):
    """Evaluate the extension at many points so the outputs stay mutually Lipschitz.

    Pointwise evaluation only constrains each output against the original
    anchors, so two outputs can violate the bound between themselves.  Here
    queries are processed in order and each solved output joins the anchor set:

    * ``"full"``: every earlier output is an anchor (exact, O(q^2) work);
    * ``"local"``: only the ``neighbors`` nearest earlier queries are anchors,
      searched among earlier queries that share one of the ``LOCAL_CELLS``
      nearest original anchors;
    * ``"none"``: independent pointwise evaluation.

    Anchors added this way get an additive ``tolerance`` on their radius, which
    absorbs the residual the previous solve was allowed to leave.  When the
    anchors are nearly tangent (an isometric base map, say) those residuals
    can leave the exact problem infeasible by a few tolerances; the exact
    cone-program optimum is then accepted as long as its residual stays below
    ``BATCH_ACCEPT * tolerance``.  In ``"local"`` mode the neighbouring outputs
    are not mutually consistent, so an infeasible solve drops the most violated
    neighbour and retries (the original anchors alone are always feasible).
    ``stats`` (a dict) receives the worst residual, the number of relaxed
    solves and the number of dropped neighbours.
    """
    if consistency not in CONSISTENCY_MODES:
        raise MetricExtError(f"consistency must be one of {CONSISTENCY_MODES}")
    Q = np.ascontiguousarray(np.asarray(queries, dtype=np.float64))
    if Q.ndim != 2 or Q.shape[1] != problem.pairs.source.dim:
        raise MetricExtError("queries must be an (n, source_dim) array")
    X, Y = problem.pairs.X, problem.pairs.Y
    n0, q = len(X), len(Q)
    src = np.ascontiguousarray(np.vstack([X, Q]))
    img = np.zeros((n0 + q, Y.shape[1]))
    img[:n0] = Y
    base = np.arange(n0, dtype=np.int64)
    use_active = n0 > ACTIVE_THRESHOLD and consistency != "full"
    base_tree = cKDTree(X) if use_active else None
    cells = buckets = None
    if consistency == "local" and q > 1:
        # earlier queries are found through their nearest base anchors (a kd-tree over the
        # queries themselves is close to brute force in 10+ dimensions)
        _, cells = (base_tree if base_tree is not None else cKDTree(X)).query(Q, k=min(LOCAL_CELLS, n0))
        cells = np.asarray(cells).reshape(q, -1)
        buckets = {}
    L = float(problem.lipschitz_bound)
    tol = float(problem.tolerance)
    r0 = problem.step_scale
    worst, relaxed, dropped = -np.inf, 0, 0
    for i in range(q):
        z = src[n0 + i]
        if consistency == "full":
            universe = np.arange(n0 + i, dtype=np.int64)
        elif consistency == "none" or i == 0:
            universe = base
        else:
            nb = _earlier_neighbours(buckets, cells[i], Q, z, neighbors)
            universe = np.concatenate([base, n0 + nb])
        active = None
        if use_active:
            _, nbb = base_tree.query(z, k=min(ACTIVE_START, n0))
            active = np.union1d(np.atleast_1d(nbb), universe[universe >= n0]).astype(np.int64)
        y, F = _solve(z, src, img, universe, n0, L, BATCH_PAD * tol, r0, tol, int(problem.max_iterations), DEPTH_ITERS, active)
        while consistency == "local" and F > BATCH_ACCEPT * tol and (universe >= n0).any():
            # neighbouring outputs need not be consistent with each other; drop the worst one
            extra = universe[universe >= n0]
            d = np.sqrt(((src[extra] - z) ** 2).sum(axis=1))
            viol = np.sqrt(((img[extra] - y) ** 2).sum(axis=1)) - L * d
            universe = universe[universe != extra[np.argmax(viol)]]
            if active is not None:
                active = active[np.isin(active, universe)]
            dropped += 1
            y, F = _solve(z, src, img, universe, n0, L, BATCH_PAD * tol, r0, tol, int(problem.max_iterations), DEPTH_ITERS, active)
        if F > tol:
            relaxed += 1
            if F > BATCH_ACCEPT * tol:
                raise SolverDidNotConverge(f"Kirszbraun solver hit its iteration cap at query {i}", y, F)
        worst = max(worst, F)
        img[n0 + i] = y
        if buckets is not None:
            buckets.setdefault(int(cells[i][0]), []).append(i)
    if stats is not None:
        stats["max_residual"] = max(stats.get("max_residual", -np.inf), worst)
        stats["relaxed"] = stats.get("relaxed", 0) + relaxed
        stats["dropped"] = stats.get("dropped", 0) + dropped
    return img[n0:].copy()
