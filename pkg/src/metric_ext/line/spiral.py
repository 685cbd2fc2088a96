"""The planar spiral that realizes a sign flip, and its conjugated version."""

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFlip, MetricExtError

PORTAL_TOL = 1e-9


def portal_tolerance(delta, magnitude):
    """1e-9 scaled by ``max(1, |delta|)``, floored at 64 ulp of the coordinates
    involved (far from the origin 1e-9 is below double resolution)."""
    return max(PORTAL_TOL * max(1.0, abs(delta)), 64.0 * np.spacing(float(magnitude)))


def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise MetricExtError(f"eps must lie in (0, 1), got {eps}")


def spiral_angle(t, eps):
    """pi ln(1/|t|) / ln(1/eps)."""
    _check_eps(eps)
    return np.pi * np.log(1.0 / np.abs(t)) / np.log(1.0 / eps)


def spiral_eval(t, eps):
    """(t, 0) outside [-1, 1], (-t, 0) inside (-eps, eps), the log spiral between.

    Accepts scalars or arrays; returns shape ``(..., 2)``.
    """
    _check_eps(eps)
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    out = np.zeros(t.shape + (2,))
    outer = a > 1.0
    inner = a < eps
    mid = ~(outer | inner)
    out[..., 0] = np.where(outer, t, -t)
    tm = t[mid]
    phi = np.pi * np.log(1.0 / np.abs(tm)) / np.log(1.0 / eps)
    out[mid, 0] = tm * np.cos(phi)
    out[mid, 1] = tm * np.sin(phi)
    # the formula misses the endpoints by rounding only; pin them
    out[a == 1.0] = np.stack([t[a == 1.0], np.zeros(int((a == 1.0).sum()))], axis=-1)
    out[a == eps] = np.stack([-t[a == eps], np.zeros(int((a == eps).sum()))], axis=-1)
    return out


def portal_positions(p, q, p_img, q_img, eps, orientation=1.0):
    """Source portals (alpha, beta, gamma, delta) and image portals (alpha', ..., delta').

    ``p``/``q`` are the first/last source points of the flipped block and
    ``p_img``/``q_img`` their images; the image side is measured from ``q_img``
    on the alpha side and from ``p_img`` on the delta side.  ``orientation`` is
    the slope sign of the curve around the block (-1 inside an odd number of
    enclosing flips); image offsets follow it.
    """
    d = q - p
    e1, e2 = eps ** (1.0 / 3.0), eps ** (2.0 / 3.0)
    src = (p - d / e2, p - d / e1, q + d / e1, q + d / e2)
    di = orientation * d
    img = (q_img - di / e2, q_img - di / e1, p_img + di / e1, p_img + di / e2)
    return src, img


@dataclass(frozen=True)
class ConjugatedSpiral:
    """Spiral conjugated to send alpha, beta, gamma, delta to alpha', gamma', beta', delta'.

    A piecewise-linear pre-map ``h`` translates the outer rays and stretches
    ``[beta, gamma]`` onto ``[beta', gamma']``; the unit spiral with inner
    radius ``eps_inner`` is then scaled by ``lam`` around ``m'``.  Negative
    ``delta`` is handled by reflecting both axes, and ``orient = -1`` (a block
    inside a reversed region) by reflecting the image line.
    """

    p: float
    q: float
    p_img: float
    q_img: float
    eps: float
    sign: float
    src: tuple
    img: tuple
    eta: float
    eps_inner: float
    lam: float
    m: float
    m_img: float
    orient: float = 1.0

    @property
    def delta(self):
        return self.q - self.p

    def premap(self, t):
        s, o = self.sign, self.orient
        a, b, g, _ = (s * v for v in self.src)
        a_, b_, g_, _ = (s * o * v for v in self.img)
        u = s * np.asarray(t, dtype=np.float64)
        m, mi = s * self.m, s * o * self.m_img
        return o * s * np.where(u <= b, a_ + u - a, np.where(u >= g, g_ + u - g, mi + self.eta * (u - m)))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        s, o = self.sign, self.orient
        u = s * o * (self.premap(t) - self.m_img) / self.lam
        g0 = spiral_eval(u, self.eps_inner)
        out = np.empty(t.shape + (2,))
        out[..., 0] = self.m_img + o * s * self.lam * g0[..., 0]
        out[..., 1] = self.lam * g0[..., 1]
        return out

    def portal_errors(self):
        a, b, g, d = self.src
        a_, b_, g_, d_ = self.img
        want = np.array([a_, g_, b_, d_])
        got = self(np.array([a, b, g, d]))
        return np.abs(got[:, 0] - want), np.abs(got[:, 1])


def conjugated_spiral(p, q, p_img, q_img, eps, ratio_tol=None, orientation=1.0) -> ConjugatedSpiral:
    """Build the conjugated spiral for the flip ``p -> p_img``, ``q -> q_img``.

    Requires ``orientation * (p_img - q_img)`` to be within a factor
    ``1 +- ratio_tol`` (default ``eps``) of ``q - p``.  The portal identities are checked to 1e-9 relative
    to ``max(1, |q - p|)``.
    """
    _check_eps(eps)
    p, q, p_img, q_img = float(p), float(q), float(p_img), float(q_img)
    d = q - p
    if d == 0.0:
        raise DegenerateFlip()
    tol = eps if ratio_tol is None else ratio_tol
    o = 1.0 if orientation > 0 else -1.0
    ratio = o * (p_img - q_img) / d
    if not (1.0 - tol <= ratio <= 1.0 + tol):
        raise MetricExtError(
            f"flip images are not within 1 +- {tol:g} of the flipped source gap (ratio {ratio:.6g})"
        )
    src, img = portal_positions(p, q, p_img, q_img, eps, o)
    s = 1.0 if d > 0 else -1.0
    m, m_img = 0.5 * (p + q), 0.5 * (p_img + q_img)
    # slope that makes the middle piece meet the translated rays at beta and gamma
    eta = o * (img[2] - img[1]) / (src[2] - src[1])
    lam = s * o * (m_img - img[0])
    eps_inner = s * o * (m_img - img[1]) / lam
    if not 0.0 < eps_inner < 1.0:
        raise MetricExtError(f"inner spiral radius {eps_inner:g} outside (0, 1); eps too large")
    sp = ConjugatedSpiral(p, q, p_img, q_img, eps, s, src, img, eta, eps_inner, lam, m, m_img, o)
    ex, ey = sp.portal_errors()
    if max(ex.max(), ey.max()) > portal_tolerance(d, max(abs(v) for v in src + img)):
        raise MetricExtError(f"portal identities fail by {max(ex.max(), ey.max()):.3e}")
    return sp


@dataclass(frozen=True)
class Spiral:
    """``spiral_eval`` as an evaluator object exposing its breakpoints."""

    eps: float

    def __post_init__(self):
        _check_eps(self.eps)

    @property
    def breakpoints(self):
        return np.array([-1.0, -self.eps, self.eps, 1.0])

    def __call__(self, t):
        return spiral_eval(t, self.eps)
