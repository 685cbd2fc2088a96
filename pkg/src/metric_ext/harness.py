"""Distortion measurement for continuous maps and numeric lower-bound checks."""

from dataclasses import dataclass

import numpy as np

from .errors import MetricExtError
from .geometry import MappedPairs
from .line.extension import build_line_extension
from .line.spiral import spiral_eval
from .outer import nelder_mead_multistart, one_point_oracle

MIN_RELATIVE_GAP = 1e-6
MAX_BREAKPOINTS = 256


@dataclass(frozen=True)
class SampledDistortion:
    n_samples: int
    max_expansion: float
    max_contraction: float  # max |s - t| / |h(s) - h(t)|
    distortion: float
    worst_expansion_pair: tuple
    worst_contraction_pair: tuple
    seed: int


def _evaluate(evaluator, t):
    out = np.asarray(evaluator(t), dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    return out


def sample_pairs(interval, n, seed, breakpoints=()):
    """Endpoint/breakpoint pairs plus three seeded strata of ``n`` pairs each.

    Strata: uniform pairs; local pairs (uniform centre, log-uniform gap down to
    ``1e-6`` of the span); log-radial pairs (both points at log-uniform
    distance from 0 on either side, where spirals concentrate their turning).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise MetricExtError(f"empty interval [{lo}, {hi}]")
    span = hi - lo
    rng = np.random.default_rng(seed)
    bp = np.asarray([b for b in np.atleast_1d(breakpoints) if lo <= b <= hi] + [lo, hi], dtype=np.float64)
    bp = np.unique(bp)
    if len(bp) > MAX_BREAKPOINTS:
        bp = bp[np.linspace(0, len(bp) - 1, MAX_BREAKPOINTS).round().astype(int)]
    i, j = np.triu_indices(len(bp), 1)
    s, t = [bp[i]], [bp[j]]
    s.append(rng.uniform(lo, hi, n))
    t.append(rng.uniform(lo, hi, n))
    c = rng.uniform(lo, hi, n)
    r = np.exp(rng.uniform(np.log(MIN_RELATIVE_GAP * span), np.log(span), n))
    s.append(c)
    t.append(np.clip(c + rng.choice([-1.0, 1.0], n) * r, lo, hi))
    reach = max(abs(lo), abs(hi))
    floor = MIN_RELATIVE_GAP * span
    for _ in range(2):
        mag = np.exp(rng.uniform(np.log(floor), np.log(reach), n))
        (s if _ == 0 else t).append(np.clip(rng.choice([-1.0, 1.0], n) * mag, lo, hi))
    s, t = np.concatenate(s), np.concatenate(t)
    keep = np.abs(s - t) >= floor * 1e-3
    return s[keep], t[keep]


def sampled_distortion(evaluator, interval, n=100_000, seed=0) -> SampledDistortion:
    """Distortion of ``evaluator`` (vectorized, R -> R^k) on sampled pairs of ``interval``."""
    s, t = sample_pairs(interval, int(n), seed, getattr(evaluator, "breakpoints", ()))
    d = np.sqrt(((_evaluate(evaluator, s) - _evaluate(evaluator, t)) ** 2).sum(axis=1))
    r = d / np.abs(s - t)
    ie, ic = int(np.argmax(r)), int(np.argmin(r))
    expansion = float(r[ie])
    contraction = float(np.inf if r[ic] == 0 else 1.0 / r[ic])
    return SampledDistortion(
        len(r), expansion, contraction, expansion * contraction,
        (float(s[ie]), float(t[ie])), (float(s[ic]), float(t[ic])), int(seed),
    )


def triangle_bound(a_img, b_img, c_img) -> float:
    """Distortion forced on a collinear triple with ``b`` the midpoint of ``a``, ``c``,
    from the angle at ``a_img`` between the images of ``b`` and ``c``."""
    a, b, c = (np.asarray(v, dtype=np.float64) for v in (a_img, b_img, c_img))
    u, w = b - a, c - a
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if nu == 0 or nw == 0:
        return np.inf
    cos = float(np.clip(u @ w / (nu * nw), -1.0, 1.0))
    angle = np.arccos(cos)
    if angle <= np.pi / 4:
        return 1.0 / cos
    if angle < np.pi / 2:
        return float(np.sqrt(2.0))
    return 2.0


def one_point_instance(eps):
    """0, eps, 1 -> 0, -eps, 1 and the extension point sqrt(eps)."""
    pairs = MappedPairs([[0.0], [eps], [1.0]], [[0.0], [-eps], [1.0]])
    return pairs, np.array([np.sqrt(eps)])


def one_point_lb_check(eps, restarts=32, seed=0) -> float:
    """Smallest distortion found for placing the image of sqrt(eps) in the plane."""
    eps = float(eps)
    if not 0.0 < eps <= 1.0 / 9.0:
        raise MetricExtError("one_point_lb_check needs 0 < eps <= 1/9")
    pairs, u = one_point_instance(eps)
    _, val = one_point_oracle(pairs, u, extra_dims=1, restarts=restarts, seed=seed)
    return val


def spiral_instance(k):
    """Points -eps, 0, 1 = x_0, x_1 .. x_k (x_i = 2^-i) with eps = 2^-k, and fixed images."""
    eps = 2.0 ** -k
    xs = 2.0 ** -np.arange(1, k + 1)
    fixed_t = np.array([-eps, 0.0, 1.0])
    fixed_y = np.array([[eps, 0.0], [0.0, 0.0], [1.0, 0.0]])
    return eps, fixed_t, fixed_y, xs


def spiral_lb_objective(k):
    eps, ft, fy, xs = spiral_instance(k)
    t = np.concatenate([ft, xs])
    i, j = np.triu_indices(len(t), 1)
    dt = np.abs(t[i] - t[j])

    def obj(v):
        y = np.vstack([fy, v.reshape(-1, 2)])
        r = np.sqrt(((y[i] - y[j]) ** 2).sum(axis=1)) / dt
        lo = r.min()
        return np.inf if lo == 0 else float(r.max() / lo)

    return obj, xs, eps


SPIRAL_NM_ITERS_PER_DIM = 500


def spiral_lb_check(k, restarts=32, seed=0, return_point=False, iters_per_dim=SPIRAL_NM_ITERS_PER_DIM):
    """Smallest distortion found for placing the images of ``x_1 .. x_k`` in the plane.

    Restart 0 starts from the spiral, restart 1 from the line-extension curve
    (the spiral again when ``k < 8``, outside the curve's eps range);
    later restarts perturb one of them by child ``i`` of ``SeedSequence(seed)``,
    so more restarts never give a worse result.  Each Nelder-Mead pass gets
    ``iters_per_dim * 2k`` iterations.
    """
    k = int(k)
    if not 3 <= k <= 16:
        raise MetricExtError("spiral_lb_check needs 3 <= k <= 16")
    obj, xs, eps = spiral_lb_objective(k)
    spiral = spiral_eval(xs, eps).ravel()
    try:
        curve = build_line_extension(MappedPairs([[-eps], [0.0], [1.0]], [[eps], [0.0], [1.0]]), eps)
        line = curve(xs).ravel()
    except MetricExtError:
        # eps above the assembly's range (k < 8): the spiral is the only structured start
        line = spiral
    starts = [spiral, line][: max(1, int(restarts))]
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(max(0, int(restarts) - 2))):
        rng = np.random.default_rng(child)
        base = (spiral, line)[i % 2]
        scale = np.repeat(xs, 2)
        starts.append(base + 0.1 * scale * rng.standard_normal(len(base)))
    best, val = None, np.inf
    for x0 in starts:
        x, fx = nelder_mead_multistart(
            obj, [x0], xatol=1e-10, fatol=1e-8, polish=2, maxiter=iters_per_dim * len(x0)
        )
        if fx < val:
            best, val = x, fx
    return (val, best.reshape(-1, 2)) if return_point else val
