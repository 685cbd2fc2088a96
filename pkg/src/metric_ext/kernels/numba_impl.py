"""numba-compiled versions of the hot kernels (same contracts as numpy_impl)."""

import math

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _sqdist(a, b):
    s = 0.0
    for t in range(a.shape[0]):
        d = a[t] - b[t]
        s += d * d
    return s


TINY_SQ = 1e-280  # below this the squared sum may have underflowed


@njit(cache=True)
def _scaled_dist(a, b):
    m = 0.0
    for t in range(a.shape[0]):
        m = max(m, abs(a[t] - b[t]))
    if m == 0.0:
        return 0.0
    s = 0.0
    for t in range(a.shape[0]):
        d = (a[t] - b[t]) / m
        s += d * d
    return m * math.sqrt(s)


@njit(cache=True)
def pair_ratio_extremes(src, img):
    n = src.shape[0]
    rmax, imax, jmax = -np.inf, -1, -1
    rmin, imin, jmin = np.inf, -1, -1
    for i in range(n - 1):
        for j in range(i + 1, n):
            sx, sy = _sqdist(src[i], src[j]), _sqdist(img[i], img[j])
            dx = math.sqrt(sx) if sx >= TINY_SQ else _scaled_dist(src[i], src[j])
            dy = math.sqrt(sy) if sy >= TINY_SQ else _scaled_dist(img[i], img[j])
            r = dy / dx
            if r > rmax:
                rmax, imax, jmax = r, i, j
            if r < rmin:
                rmin, imin, jmin = r, i, j
    if n < 2:
        rmax, rmin = 0.0, 0.0
    return rmax, imax, jmax, rmin, imin, jmin


@njit(cache=True)
def kirszbraun_solve(z, src, img, idx, L, n_exact, pad, r0, tol, max_iter, y0, depth_iters):
    k_anchor = idx.shape[0]
    m = img.shape[1]
    radius = np.empty(k_anchor)
    near, dnear = 0, np.inf
    rmin = np.inf
    for a in range(k_anchor):
        d = math.sqrt(_sqdist(z, src[idx[a]]))
        radius[a] = L * d + (pad if idx[a] >= n_exact else 0.0)
        rmin = min(rmin, radius[a])
        if d < dnear:
            near, dnear = a, d
    if dnear == 0.0:
        # the value is forced; report how far the other anchors are from allowing it
        y = img[idx[near]].copy()
        F = -np.inf
        for a in range(k_anchor):
            F = max(F, math.sqrt(_sqdist(y, img[idx[a]])) - radius[a])
        return y, F, 0
    y = y0.copy() if y0.shape[0] == m else img[idx[near]].copy()
    tau = 0.25 * rmin if depth_iters > 0 else 0.0
    left = depth_iters
    best_y = y.copy()
    best_F = np.inf
    for k in range(max_iter):
        F, arg, argd = -np.inf, 0, 0.0
        for a in range(k_anchor):
            dy = math.sqrt(_sqdist(y, img[idx[a]]))
            val = dy - radius[a]
            if val > F:
                F, arg, argd = val, a, dy
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
        p = img[idx[arg]]
        for t in range(m):
            y[t] -= step * (y[t] - p[t]) / argd
    return best_y, best_F, max_iter


@njit(cache=True)
def one_point_feasibility(C, a, c, y0, tol, max_iter):
    nv, r = C.shape
    y = y0.copy()
    nrm = math.sqrt(np.sum(y * y))
    if nrm > 1.0:
        y /= nrm
    sq = np.empty(nv)
    for v in range(nv):
        sq[v] = np.sum(C[v] * C[v])
    best_y = y.copy()
    best_G = np.inf
    for k in range(max_iter):
        G, arg, sgn = -np.inf, 0, 1.0
        for v in range(nv):
            dot = 0.0
            for t in range(r):
                dot += C[v, t] * y[t]
            res = dot - a[v]
            val = abs(res) - c[v]
            if val > G:
                G, arg, sgn = val, v, (1.0 if res > 0 else -1.0)
        if G < best_G:
            best_G = G
            best_y[:] = y
        if G <= tol or sq[arg] == 0.0:
            return best_y, best_G, k
        coef = G / sq[arg] * sgn
        for t in range(r):
            y[t] -= coef * C[arg, t]
        nrm = math.sqrt(np.sum(y * y))
        if nrm > 1.0:
            y /= nrm
    return best_y, best_G, max_iter


@njit(cache=True)
def forbidden_pattern_scan(values):
    n = values.shape[0]
    for i in range(n):
        vi = values[i]
        for j in range(i + 1, n):
            vj = values[j]
            for k in range(j + 1, n):
                vk = values[k]
                # 3 1 4 2: vj < vl < vi < vk
                # 2 4 1 3: vk < vi < vl < vj
                if vj < vi < vk or vk < vi < vj:
                    for l in range(k + 1, n):
                        vl = values[l]
                        if vj < vl < vi < vk:
                            return i, j, k, l, 0
                        if vk < vi < vl < vj:
                            return i, j, k, l, 1
    return -1, -1, -1, -1, -1
