"""Pure-numpy versions of the hot kernels.

These mirror :mod:`metric_ext.kernels.numba_impl` one for one.  They are the
fallback when numba is missing or ``METRIC_EXT_DISABLE_JIT=1`` is set, and the
reference the benchmark and the backend-agreement tests compare against.
"""

import itertools
import math

import numpy as np


TINY_SQ = 1e-280  # below this the squared sum may have underflowed


def _row_dists(A, b):
    """``|A_r - b|`` per row, rescaling rows whose squared sum may have underflowed."""
    D = A - b
    sq = (D**2).sum(axis=1)
    out = np.sqrt(sq)
    tiny = np.flatnonzero(sq < TINY_SQ)
    if len(tiny):
        m = np.abs(D[tiny]).max(axis=1)
        safe = np.where(m > 0, m, 1.0)
        out[tiny] = m * np.sqrt(((D[tiny] / safe[:, None]) ** 2).sum(axis=1))
    return out


def pair_ratio_extremes(src, img):
    """Largest and smallest ratio ``|img_i - img_j| / |src_i - src_j|`` over i < j.

    Returns ``(rmax, imax, jmax, rmin, imin, jmin)``; indices are -1 when there
    are fewer than two points.  Ties keep the lexicographically first pair.
    """
    n = src.shape[0]
    rmax, imax, jmax = -np.inf, -1, -1
    rmin, imin, jmin = np.inf, -1, -1
    for i in range(n - 1):
        ds = _row_dists(src[i + 1:], src[i])
        di = _row_dists(img[i + 1:], img[i])
        r = di / ds
        a = int(np.argmax(r))
        if r[a] > rmax:
            rmax, imax, jmax = float(r[a]), i, i + 1 + a
        b = int(np.argmin(r))
        if r[b] < rmin:
            rmin, imin, jmin = float(r[b]), i, i + 1 + b
    if n < 2:
        rmax, rmin = 0.0, 0.0
    return rmax, imax, jmax, rmin, imin, jmin


def kirszbraun_solve(z, src, img, idx, L, n_exact, pad, r0, tol, max_iter, y0, depth_iters):
    """Minimize ``F(y) = max_a |y - img[a]| - (L |z - src[a]| + pad_a)``.

    Anchors are ``idx``; anchors with index ``>= n_exact`` get the additive
    ``pad`` on their radius.  Subgradient steps use the Polyak length toward a
    target ``-tau``, capped by ``r0 / sqrt(k + 1)``.  The target starts at a
    quarter of the smallest radius and shrinks tenfold every ``depth_iters``
    iterations until it falls below ``tol``, after which the target is 0; the
    solve stops as soon as ``F <= -tau``.  This lands strictly inside the ball
    intersection when there is room, which keeps later solves well
    conditioned.  The start is ``y0`` if it has the image dimension, else the
    image of the nearest anchor.  Returns ``(y, F(y), iterations)`` for the
    best iterate.  An exact hit on an anchor returns its image unchanged, with
    ``F`` measured over the other anchors (positive if they are inconsistent).
    """
    S = src[idx]
    P = img[idx]
    dz = np.sqrt(((S - z) ** 2).sum(axis=1))
    near = int(np.argmin(dz))
    radius = L * dz + np.where(idx >= n_exact, pad, 0.0)
    if dz[near] == 0.0:
        # the value is forced; report how far the other anchors are from allowing it
        y = P[near].copy()
        return y, float((np.sqrt(((P - y) ** 2).sum(axis=1)) - radius).max()), 0
    y = y0.copy() if y0.shape[0] == P.shape[1] else P[near].copy()
    tau = 0.25 * float(radius.min()) if depth_iters > 0 else 0.0
    left = depth_iters
    best_y, best_F = y.copy(), np.inf
    for k in range(max_iter):
        dy = np.sqrt(((P - y) ** 2).sum(axis=1))
        val = dy - radius
        a = int(np.argmax(val))
        F = float(val[a])
        if F < best_F:
            best_F = F
            best_y[:] = y
        if F <= -tau or (tau == 0.0 and F <= tol):
            return best_y, best_F, k
        if tau > 0.0:
            left -= 1
            if left == 0:
                tau *= 0.1
                left = depth_iters
                if tau < tol:
                    tau = 0.0
        if best_F <= tol and tau == 0.0:
            return best_y, best_F, k
        step = min(F + tau, r0 / math.sqrt(k + 1.0))
        y = y - step * (y - P[a]) / dy[a]
    return best_y, best_F, max_iter


def one_point_feasibility(C, a, c, y0, tol, max_iter):
    """Drive ``G(y) = max_v |C_v . y - a_v| - c_v`` to ``<= tol`` on the unit ball.

    Projected Polyak steps toward target 0.  Returns ``(y, G(y), iterations)``
    for the best iterate.
    """
    y = y0.copy()
    nrm = np.sqrt((y * y).sum())
    if nrm > 1.0:
        y /= nrm
    sq = (C * C).sum(axis=1)
    best_y, best_G = y.copy(), np.inf
    for k in range(max_iter):
        r = C @ y - a
        val = np.abs(r) - c
        v = int(np.argmax(val))
        G = float(val[v])
        if G < best_G:
            best_G = G
            best_y[:] = y
        if G <= tol or sq[v] == 0.0:
            return best_y, best_G, k
        s = 1.0 if r[v] > 0 else -1.0
        y = y - (G / sq[v]) * s * C[v]
        nrm = np.sqrt((y * y).sum())
        if nrm > 1.0:
            y /= nrm
    return best_y, best_G, max_iter


_P3142 = (2, 0, 3, 1)
_P2413 = (1, 3, 0, 2)


def forbidden_pattern_scan(values):
    """First (i, j, k, l, pattern) in lexicographic order, pattern 0 = 3142, 1 = 2413.

    Returns ``(-1, -1, -1, -1, -1)`` if the permutation avoids both.
    """
    v = np.asarray(values)
    for q in itertools.combinations(range(len(v)), 4):
        ranks = tuple(np.argsort(np.argsort(v[list(q)])))
        if ranks == _P3142:
            return q + (0,)
        if ranks == _P2413:
            return q + (1,)
    return (-1, -1, -1, -1, -1)
