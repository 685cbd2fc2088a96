import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metric_ext import MetricExtError
from metric_ext.errors import DegenerateFlip
from metric_ext.line import Spiral, conjugated_spiral, portal_positions, spiral_angle, spiral_eval


def test_angle_facts():
    eps = 2.0**-10
    assert spiral_angle(np.sqrt(eps), eps) == pytest.approx(np.pi / 2, rel=1e-14)
    assert spiral_angle(1.0, eps) == 0.0
    assert spiral_angle(eps, eps) == pytest.approx(np.pi)


def test_spiral_pieces():
    eps = 2.0**-8
    np.testing.assert_array_equal(spiral_eval(np.array([3.0, -1.5]), eps), [[3.0, 0.0], [-1.5, 0.0]])
    np.testing.assert_array_equal(spiral_eval(np.array([eps / 2, 1.0, eps]), eps), [[-eps / 2, 0.0], [1.0, 0.0], [-eps, 0.0]])
    assert spiral_eval(0.0, eps).tolist() == [0.0, 0.0]


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 2.0), st.integers(4, 20))
def test_spiral_is_norm_preserving(t, k):
    eps = 2.0**-k
    for s in (t, -t):
        assert np.linalg.norm(spiral_eval(s, eps)) == pytest.approx(abs(s), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.integers(4, 16))
def test_spiral_expansion_within_arc_bound(s, t, k):
    eps = 2.0**-k
    if abs(s - t) < 1e-9:
        return
    r = np.linalg.norm(spiral_eval(s, eps) - spiral_eval(t, eps)) / abs(s - t)
    assert r <= np.sqrt(1 + (np.pi / np.log(1 / eps)) ** 2) + 1e-9


def test_spiral_object():
    sp = Spiral(2.0**-6)
    assert list(sp.breakpoints) == [-1.0, -(2.0**-6), 2.0**-6, 1.0]
    np.testing.assert_array_equal(sp(np.array([0.5])), spiral_eval(np.array([0.5]), 2.0**-6))


@pytest.mark.parametrize("k", [8, 12, 16])
@pytest.mark.parametrize("flip", [(0.0, 1.0, 1.0, 0.0), (5.0, 5.5, 2.25, 1.75), (3.0, 2.0, 10.0, 11.0)])
def test_portal_identities(k, flip):
    eps = 2.0**-k
    p, q, pi, qi = flip
    sp = conjugated_spiral(p, q, pi, qi, eps, ratio_tol=0.1)
    ex, ey = sp.portal_errors()
    assert max(ex.max(), ey.max()) <= 1e-9 * max(1.0, abs(q - p))
    a, b, g, d = sp.src
    assert a < b < g < d or a > b > g > d
    # the curve is the identity-shifted map outside the outer portals
    t = np.array([a - 1.0, d + 1.0]) if a < d else np.array([a + 1.0, d - 1.0])
    out = sp(t)
    np.testing.assert_allclose(out[:, 1], 0.0, atol=1e-12)


def test_portal_positions_midpoints():
    src, img = portal_positions(0.0, 1.0, 1.0, 0.0, 2.0**-9)
    assert (img[0] + img[3]) / 2 == pytest.approx((img[1] + img[2]) / 2)
    assert (src[0] + src[3]) / 2 == pytest.approx(0.5)


def test_conjugated_spiral_rejects():
    with pytest.raises(DegenerateFlip):
        conjugated_spiral(1.0, 1.0, 0.0, 1.0, 2.0**-9)
    with pytest.raises(MetricExtError):
        conjugated_spiral(0.0, 1.0, 0.0, 1.0, 2.0**-9)
    with pytest.raises(MetricExtError):
        spiral_eval(0.5, 1.5)
