"""Outer bi-Lipschitz extensions.

Two constructions live here:

* :func:`build_outer_extension` extends a finite map with distortion ``D`` to
  all of R^n, landing in R^{m+n}, with distortion at most ``3 D``.
* :func:`one_point_extend` adds a single point to a near-isometry (distortion
  ``1 + eps``), landing in R^{m+1}, with distortion ``1 + O(sqrt(eps))``.
  :func:`one_point_extend_barycentric` is an alternative construction of the
  same extension; :func:`one_point_oracle` is a brute-force reference for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import clarabel
from scipy import sparse
from scipy.optimize import minimize

from . import kernels
from .errors import InfiniteDistortion, MetricExtError, SolverDidNotConverge
from .geometry import (
    MappedPairs,
    NormalizationRecord,
    PointSet,
    distortion_report,
    normalize_for_extension,
)
from .lipschitz import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    BATCH_LIPSCHITZ_SLACK,
    LIPSCHITZ_SLACK,
    KirszbraunProblem,
    kirszbraun_eval,
    kirszbraun_eval_many,
)

ONE_POINT_CONSTANT = 45.0
FEASIBILITY_CONSTANT = 3.0
ISOMETRY_TOL = 1e-12


def quadratic_minimum(c0, c1, c2):
    """Minimizer and minimum of ``c0 + c1 r + c2 r^2`` (``c2 > 0``)."""
    if not c2 > 0:
        raise MetricExtError("quadratic must be strictly convex")
    r = -c1 / (2.0 * c2)
    return r, c0 + c1 * r + c2 * r * r


# --------------------------------------------------------------------------
# Whole-space extension with distortion <= 3D
# --------------------------------------------------------------------------


def _inverse(pairs):
    return MappedPairs(pairs.image, pairs.source)


class OuterExtensionMap:
    """``x -> f~(x) (+) (g~(f~(x)) - x) / (sqrt(2) alpha)``.

    ``f~`` is a Kirszbraun extension of ``f`` with constant ``forward_L`` and
    ``g~`` one of ``f^{-1}`` with constant ``alpha``.  Output dimension is
    ``m + n``; on source points the value is ``f(x)`` followed by ``n`` zeros.
    """

    def __init__(self, pairs: MappedPairs, tol=DEFAULT_TOL, max_iterations=DEFAULT_MAX_ITER):
        """Exact isometries (distortion within 1e-12 of 1) use the affine extensions
        ``f~ = A o P`` and ``g~ = A^T o P'`` (``P``, ``P'`` orthogonal projections
        onto the affine hulls); their inverse-side ball intersections are
        degenerate, which the convex solver cannot resolve stably.
        """
        rep = distortion_report(pairs)
        if not np.isfinite(rep.distortion):
            raise InfiniteDistortion(rep.witness_contract)
        self.pairs = pairs
        self.report = rep
        self.source_dim = pairs.source.dim
        self.image_dim = pairs.image.dim
        self.tolerance = float(tol)
        if len(pairs) == 1:
            self.forward_L, self.alpha = 1.0, 1.0
        else:
            self.forward_L, self.alpha = rep.lipschitz, rep.inverse_lipschitz
        self.f_problem = KirszbraunProblem(
            pairs, self.forward_L * (1 + LIPSCHITZ_SLACK), tol, max_iterations, check=False
        )
        self.g_problem = KirszbraunProblem(
            _inverse(pairs), self.alpha * (1 + LIPSCHITZ_SLACK), tol, max_iterations, check=False
        )
        self.affine = None
        if len(pairs) >= 2 and rep.distortion - 1.0 <= ISOMETRY_TOL:
            x0, y0 = pairs.X[0], pairs.Y[0]
            Bs, _ = np.linalg.qr((pairs.X - x0).T, mode="reduced")
            M = np.linalg.lstsq((pairs.X - x0) @ Bs, pairs.Y - y0, rcond=None)[0].T
            self.affine = (x0, y0, Bs, M)
        self._batch = (
            KirszbraunProblem(pairs, self.forward_L * (1 + BATCH_LIPSCHITZ_SLACK), tol, max_iterations, check=False),
            KirszbraunProblem(_inverse(pairs), self.alpha * (1 + BATCH_LIPSCHITZ_SLACK), tol, max_iterations, check=False),
        )

    @property
    def output_dim(self):
        return self.image_dim + self.source_dim

    @property
    def distortion_bound(self):
        return 3.0 * self.report.distortion

    def _assemble(self, x, y, w):
        return np.concatenate([y, (w - x) / (math.sqrt(2.0) * self.alpha)], axis=-1)

    def _affine_eval(self, P):
        x0, y0, Bs, M = self.affine
        Y = y0 + ((P - x0) @ Bs) @ M.T
        W = x0 + ((Y - y0) @ M) @ Bs.T
        # keep the extension property bitwise on source points
        for i, p in enumerate(P):
            hit = np.flatnonzero((self.pairs.X == p).all(axis=1))
            if len(hit):
                Y[i], W[i] = self.pairs.Y[hit[0]], self.pairs.X[hit[0]]
        return Y, W

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.affine is not None:
            y, w = self._affine_eval(x[None, :])
            return self._assemble(x, y[0], w[0])
        y = kirszbraun_eval(self.f_problem, x)
        w = kirszbraun_eval(self.g_problem, y)
        return self._assemble(x, y, w)

    def evaluate_many(self, points, consistency="auto", neighbors=16, stats=None):
        """Evaluate at many points, keeping outputs mutually consistent.

        ``consistency`` is passed to :func:`kirszbraun_eval_many` for both
        ``f~`` and ``g~``; ``"auto"`` picks ``"full"`` up to 4096 anchors and
        ``"local"`` beyond.  Only ``"full"`` carries the 3D guarantee between
        pairs of new points; ``"local"`` carries it for near pairs.  Both
        Lipschitz bounds get a relative slack of 1e-9 here so the incremental
        ball intersections keep some interior.
        """
        P = np.asarray(points, dtype=np.float64)
        if consistency == "auto":
            consistency = "full" if len(P) + len(self.pairs) <= 4096 else "local"
        if self.affine is not None:
            return self._assemble(P, *self._affine_eval(P))
        fp, gp = self._batch
        Y = kirszbraun_eval_many(fp, P, consistency, neighbors, stats)
        W = kirszbraun_eval_many(gp, Y, consistency, neighbors, stats)
        return self._assemble(P, Y, W)


def build_outer_extension(pairs: MappedPairs, tol=DEFAULT_TOL, max_iterations=DEFAULT_MAX_ITER):
    return OuterExtensionMap(pairs, tol, max_iterations)


# --------------------------------------------------------------------------
# One-point extension of a near-isometry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OnePointParams:
    """Parameters of the one-point extension.

    eps: near-isometry parameter of the map, in (0, 1).
    feasibility_slack: multiplier on the ``3 sqrt(eps) (|v|^2 + 1)`` constraint bound.
    refine: after reaching feasibility, minimize the worst relative
        squared-distance error subject to the same constraints (a second-order cone program).
    contraction_weight: in the refinement, contraction errors are allowed
        ``1 / contraction_weight`` of the expansion budget; ``inf`` forbids
        contraction entirely (falls back to 1 if that is infeasible).
    radius, alpha_cap: barycentric strategy only (``radius`` defaults to
        ``1 / sqrt(eps)``).
    """

    eps: float
    feasibility_slack: float = 1.0
    tolerance: float = 1e-12
    max_iterations: int = 100_000
    strategy: str = "feasibility"
    refine: bool = True
    contraction_weight: float = 1.0
    contraction_margin: float = 1e-7
    radius: float | None = None
    alpha_cap: float = 1e6

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise MetricExtError("eps must lie in (0, 1); use the whole-space extension for larger distortion")
        if self.strategy not in ("feasibility", "barycentric"):
            raise MetricExtError(f"unknown strategy {self.strategy!r}")
        if not self.feasibility_slack > 0 or not self.contraction_weight > 0:
            raise MetricExtError("feasibility_slack and contraction_weight must be positive")


@dataclass(frozen=True)
class OnePointResult:
    """Extended image of ``u`` plus diagnostics measured in the normalized frame.

    ``sq_error_ratio`` is ``max_v | |f'(u) - f'(v)|^2 - |u - v|^2 | / |u - v|^2``
    and ``bound`` is the guaranteed ceiling for it.  ``residual`` is the final
    constraint violation ``G`` (feasibility) or 0 (barycentric).
    """

    point: np.ndarray
    strategy: str
    residual: float
    sq_error_ratio: float
    bound: float
    min_ratio: float = 1.0
    max_ratio: float = 1.0
    alpha_l1: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def within_bound(self):
        return self.sq_error_ratio <= self.bound


def _refine_socp(C, a, c, t, w, K, margin):
    """Second-order cone refinement of the one-point solution.

    minimize s subject to
        t_v - C_v y <= s w_v                (expansion)
        C_v y - t_v <= s w_v / K            (contraction; K = inf -> <= -margin w_v)
        |C_v y - a_v| <= c_v                (the Lemma's constraints)
        |y| <= 1
    where ``2 (t_v - C_v y)`` is the squared-distance error at ``v``.  Returns
    ``y`` or ``None`` when the problem is infeasible or the solver fails.
    """
    nv, r = C.shape
    zc = np.zeros((nv, 1))
    hard = not np.isfinite(K)
    # the nearest point sits at the origin on both sides and has error 0 by construction
    mvec = np.where((C == 0).all(axis=1), 0.0, margin * w)
    A = np.vstack([
        np.hstack([-C, -w[:, None]]),
        np.hstack([C, zc if hard else -(w / K)[:, None]]),
        np.hstack([C, zc]),
        np.hstack([-C, zc]),
        np.zeros((1, r + 1)),
        np.hstack([-np.eye(r), np.zeros((r, 1))]),
    ])
    b = np.concatenate([-t, t - (mvec if hard else 0.0), a + c, c - a, [1.0], np.zeros(r)])
    q = np.zeros(r + 1)
    q[-1] = 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    solver = clarabel.DefaultSolver(
        sparse.csc_matrix((r + 1, r + 1)), q, sparse.csc_matrix(A), b,
        [clarabel.NonnegativeConeT(4 * nv), clarabel.SecondOrderConeT(r + 1)], settings,
    )
    sol = solver.solve()
    if sol.status not in (clarabel.SolverStatus.Solved, clarabel.SolverStatus.AlmostSolved):
        return None
    y = np.asarray(sol.x[:r], dtype=np.float64)
    nrm = np.linalg.norm(y)
    return y / nrm if nrm > 1.0 else y


def _normalized_errors(Xn, C, un, y):
    """Squared distances from ``(y, sqrt(1-|y|^2))`` to each ``C_v`` vs ``|u - v|^2``."""
    w = ((Xn - un) ** 2).sum(axis=1)
    ny2 = min(float(y @ y), 1.0)
    d2 = ((C - y) ** 2).sum(axis=1) + (1.0 - ny2)
    return d2, w


def solve_normalized(Xn, C, un, params: OnePointParams):
    """Core of the feasibility strategy in the normalized, rescaled frame.

    ``Xn`` are the source points with the nearest one at the origin and
    ``|un| = 1``; ``C`` are image coordinates (any orthonormal frame) of a map
    whose pairwise ratios lie in ``[1, 1 + eps]``.  Returns ``(y, G(y))`` with
    ``|y| <= 1``; the extended point is ``(y, sqrt(1 - |y|^2))``.
    """
    eps = params.eps
    a = Xn @ un
    sqn = (Xn * Xn).sum(axis=1)
    c = FEASIBILITY_CONSTANT * math.sqrt(eps) * params.feasibility_slack * (sqn + 1.0)
    y0 = np.linalg.lstsq(C, a, rcond=None)[0] if C.shape[1] else np.zeros(0)
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    y, G, _ = kernels.one_point_feasibility(
        np.ascontiguousarray(C), a, c, y0, float(params.tolerance), int(params.max_iterations)
    )
    y = np.array(y)
    if G > params.tolerance:
        raise SolverDidNotConverge(
            "one-point constraints could not be satisfied (eps too small for this map?)", y, float(G)
        )
    if params.refine and len(Xn) > 1 and C.shape[1] > 0:
        w = ((Xn - un) ** 2).sum(axis=1)
        t = a + ((C * C).sum(axis=1) - sqn) / 2.0
        K = params.contraction_weight
        y_lp = _refine_socp(C, a, c, t, w, K, params.contraction_margin)
        if y_lp is None and not np.isfinite(K):
            y_lp = _refine_socp(C, a, c, t, w, 1.0, params.contraction_margin)
        if y_lp is not None:
            d2_old, _ = _normalized_errors(Xn, C, un, y)
            d2_new, _ = _normalized_errors(Xn, C, un, y_lp)
            score = lambda d2: (np.abs(d2 - w) / w).max()
            g_new = (np.abs(C @ y_lp - a) - c).max()
            if g_new <= params.tolerance + 1e-9 and (
                score(d2_new) <= score(d2_old) or not np.isfinite(K)
            ):
                y, G = y_lp, float(g_new)
    return y, float(G)


def _check_near_isometry(rep, eps):
    if np.isfinite(rep.distortion) and rep.distortion - 1.0 > eps * (1 + 1e-6) + 1e-12:
        raise MetricExtError(
            f"map distortion {rep.distortion:.9g} exceeds 1 + eps = {1 + eps:.9g}; "
            "pass a larger eps (see smallest_eps)"
        )
    if not np.isfinite(rep.distortion):
        raise InfiniteDistortion(rep.witness_contract)


def _trivial(pairs, u):
    hit = np.flatnonzero((pairs.X == u).all(axis=1))
    if len(hit):
        return np.append(pairs.Y[hit[0]], 0.0)
    return None


def one_point_extend(pairs: MappedPairs, u, params: OnePointParams, report=None) -> OnePointResult:
    """Extend a near-isometry ``f`` to ``X + {u}``, adding one output coordinate.

    The map is first normalized (nearest source point and its image at the
    origin, ``|u| = 1``) and its images rescaled so the smallest pairwise ratio
    is 1.  A point ``y`` of the unit ball with
    ``|<y, f(v)> - <u, v>| <= 3 sqrt(eps) slack (|v|^2 + 1)`` for every ``v`` is
    found by projected subgradient steps; ``u`` maps to ``(y, sqrt(1-|y|^2))``.
    With ``params.refine`` the worst relative squared-distance error is then
    minimized under the same constraints.

    ``report`` may carry a precomputed :func:`distortion_report` of ``pairs``.
    """
    if params.strategy == "barycentric":
        return one_point_extend_barycentric(pairs, u, params)
    u = np.asarray(u, dtype=np.float64)
    hit = _trivial(pairs, u)
    if hit is not None:
        return OnePointResult(hit, "feasibility", 0.0, 0.0, _bound(params), 1.0, 1.0)
    rep = report if report is not None else distortion_report(pairs)
    _check_near_isometry(rep, params.eps)
    Pn, un, rec = normalize_for_extension(pairs, u)
    lam = rep.inverse_lipschitz if len(pairs) > 1 else 1.0
    Fn = Pn.Y * lam
    if Fn.shape[1] > len(Fn):
        Q, _ = np.linalg.qr(Fn.T)
        C = Fn @ Q
    else:
        Q, C = None, Fn
    y, G = solve_normalized(Pn.X, C, un, params)
    return _finish(Pn.X, C, un, y, G, Q, lam, rec, params, Fn.shape[1])


def _bound(params):
    return ONE_POINT_CONSTANT * params.feasibility_slack * math.sqrt(params.eps)


def _finish(Xn, C, un, y, G, Q, lam, rec, params, m):
    d2, w = _normalized_errors(Xn, C, un, y)
    ratios = np.sqrt(d2 / w)
    lift = math.sqrt(max(0.0, 1.0 - float(y @ y)))
    body = Q @ y if Q is not None else y
    if body.shape[0] < m:
        body = np.concatenate([body, np.zeros(m - body.shape[0])])
    point = rec.to_image(np.append(body, lift) / lam)
    return OnePointResult(
        point=point,
        strategy="feasibility",
        residual=G,
        sq_error_ratio=float((np.abs(d2 - w) / w).max()),
        bound=_bound(params),
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
    )


def one_point_extend_barycentric(pairs: MappedPairs, u, params: OnePointParams, normalize=True) -> OnePointResult:
    """One-point extension through a barycentric representation of ``u``.

    In the (normalized) frame, ``u`` is split as ``u_par + u_perp`` with
    ``u_par = sum_x alpha_x x`` the least-squares projection onto the span of
    the source points within ``radius`` of the origin; the image is
    ``sum_x alpha_x f(x)`` followed by ``|u_perp|``.  ``alpha`` is the
    minimum-norm solution of the ridge-regularized normal equations.

    Images are rescaled by the geometric mean of the extreme ratios, so the map
    being extended is ``(1 +- eps)``-close to an isometry in both directions.
    """
    u = np.asarray(u, dtype=np.float64)
    hit = _trivial(pairs, u)
    if hit is not None:
        return OnePointResult(hit, "barycentric", 0.0, 0.0, _bound(params), alpha_l1=0.0)
    rep = distortion_report(pairs)
    _check_near_isometry(rep, params.eps)
    if normalize:
        Pn, un, rec = normalize_for_extension(pairs, u)
        X, F = Pn.X, Pn.Y
    else:
        X, F, un = pairs.X, pairs.Y, u
        rec = NormalizationRecord(np.zeros(pairs.source.dim), np.zeros(pairs.image.dim), 1.0, -1)
    lam = math.sqrt(rep.inverse_lipschitz / rep.lipschitz) if len(pairs) > 1 else 1.0
    F = F * lam
    R = params.radius if params.radius is not None else 1.0 / math.sqrt(params.eps)
    keep = np.sqrt((X * X).sum(axis=1)) <= R
    P, FP = X[keep], F[keep]
    gram = P @ P.T
    ridge = 1e-12 * max(np.trace(gram) / max(len(P), 1), 1e-300)
    alpha = np.linalg.solve(gram + ridge * np.eye(len(P)), P @ un)
    l1 = float(np.abs(alpha).sum())
    if l1 > params.alpha_cap:
        raise MetricExtError(
            f"barycentric weights have l1 norm {l1:.3g} > cap {params.alpha_cap:.3g}; "
            "use the feasibility strategy"
        )
    perp = un - P.T @ alpha
    body = FP.T @ alpha
    out_n = np.append(body, np.linalg.norm(perp))
    # diagnostics against every source point, in the rescaled frame
    Fp = np.hstack([F, np.zeros((len(F), 1))])
    d2 = ((Fp - out_n) ** 2).sum(axis=1)
    w = ((X - un) ** 2).sum(axis=1)
    ratios = np.sqrt(d2 / w)
    return OnePointResult(
        point=rec.to_image(out_n / lam),
        strategy="barycentric",
        residual=0.0,
        sq_error_ratio=float((np.abs(d2 - w) / w).max()),
        bound=math.sqrt(params.eps) * R * (1.0 + l1),
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        alpha_l1=l1,
    )


# --------------------------------------------------------------------------
# Brute-force reference
# --------------------------------------------------------------------------


def extension_distortion(pairs: MappedPairs, u, y, report=None):
    """Distortion of ``f`` extended by ``u -> y`` (images zero-padded to ``len(y)``)."""
    rep = report if report is not None else distortion_report(pairs)
    y = np.asarray(y, dtype=np.float64)
    Yp = np.zeros((len(pairs), len(y)))
    Yp[:, : pairs.image.dim] = pairs.Y
    r = np.sqrt(((Yp - y) ** 2).sum(axis=1)) / np.sqrt(((pairs.X - u) ** 2).sum(axis=1))
    if len(pairs) > 1:
        hi, lo = max(rep.lipschitz, r.max()), min(1.0 / rep.inverse_lipschitz, r.min())
    else:
        hi, lo = r.max(), r.min()
    return np.inf if lo == 0 else float(hi / lo)


def nelder_mead_multistart(objective, starts, xatol=1e-10, fatol=1e-12, polish=3, maxiter=None):
    """Run Nelder-Mead from each start (re-polishing a few times) and keep the best."""
    best_x, best_f = None, np.inf
    for x0 in starts:
        x = np.asarray(x0, dtype=np.float64)
        dim = len(x)
        step = max(1e-3, 0.1 * float(np.abs(x).max()) if dim else 1e-3)
        for _ in range(polish):
            simplex = np.vstack([x, x + step * np.eye(dim)])
            res = minimize(
                objective, x, method="Nelder-Mead",
                options={
                    "initial_simplex": simplex, "xatol": xatol, "fatol": fatol,
                    "maxiter": maxiter or 4000 * dim, "maxfev": maxiter or 4000 * dim,
                    "adaptive": dim > 4,
                },
            )
            if res.fun <= objective(x):
                x = res.x
            step *= 0.1
        fx = float(objective(x))
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def one_point_oracle(pairs: MappedPairs, u, extra_dims=1, restarts=16, seed=0):
    """Best placement of ``u``'s image found by multistart Nelder-Mead.

    Minimizes the distortion of the extended map over ``y`` in
    ``R^{m + extra_dims}``.  Restart ``i`` draws its start from child ``i`` of
    ``SeedSequence(seed)``, so more restarts never give a worse result.
    """
    u = np.asarray(u, dtype=np.float64)
    rep = distortion_report(pairs)
    m = pairs.image.dim + int(extra_dims)
    d = np.sqrt(((pairs.X - u) ** 2).sum(axis=1))
    near = int(np.argmin(d))
    base = np.zeros(m)
    base[: pairs.image.dim] = pairs.Y[near]

    def obj(y):
        return extension_distortion(pairs, u, y, rep)

    starts = []
    for child in np.random.SeedSequence(seed).spawn(int(restarts)):
        rng = np.random.default_rng(child)
        v = rng.standard_normal(m)
        starts.append(base + v / np.linalg.norm(v) * d[near] * rng.uniform(0.5, 1.5))
    y, val = nelder_mead_multistart(obj, starts)
    return y, val
