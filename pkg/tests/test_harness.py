import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metric_ext import MetricExtError
from metric_ext.harness import (
    one_point_lb_check,
    sample_pairs,
    sampled_distortion,
    spiral_lb_check,
    spiral_lb_objective,
    triangle_bound,
)
from metric_ext.line import build_line_extension, spiral_eval
from metric_ext import MappedPairs


def test_identity_and_scaling():
    assert sampled_distortion(lambda t: t, (-1.0, 1.0), 2000).distortion == pytest.approx(1.0)
    assert sampled_distortion(lambda t: 2 * t, (0.0, 5.0), 2000).distortion == pytest.approx(1.0)


def test_bad_interval():
    with pytest.raises(MetricExtError):
        sampled_distortion(lambda t: t, (1.0, 1.0), 10)


def test_sampling_is_seeded_and_hits_breakpoints():
    a = sample_pairs((-2, 2), 100, 3, breakpoints=(-1.0, 0.5))
    b = sample_pairs((-2, 2), 100, 3, breakpoints=(-1.0, 0.5))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert ((a[0] == -1.0) & (a[1] == 0.5)).any()


def test_distortion_is_product():
    sd = sampled_distortion(lambda t: spiral_eval(t, 2.0**-8), (-2, 2), 5000, seed=2)
    assert sd.distortion == pytest.approx(sd.max_expansion * sd.max_contraction)
    assert sd.distortion >= 1 - 1e-12


@pytest.mark.parametrize(
    "angle, want",
    [(0.0, 1.0), (np.pi / 4, np.sqrt(2)), (np.pi / 3, np.sqrt(2)), (2 * np.pi / 3, 2.0), (np.pi / 2, 2.0)],
)
def test_triangle_branches(angle, want):
    b = np.array([1.0, 0.0])
    c = 2 * np.array([np.cos(angle), np.sin(angle)])
    assert triangle_bound([0.0, 0.0], b, c) == pytest.approx(want)


def test_triangle_degenerate():
    assert triangle_bound([0, 0], [0, 0], [1, 0]) == np.inf


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.05, 3.0))
def test_triangle_invariant_under_similarity(theta, scale, shift, angle):
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    pts = [np.zeros(2), np.array([1.0, 0.0]), np.array([np.cos(angle), np.sin(angle)]) * 1.7]
    moved = [scale * (R @ p) + shift for p in pts]
    assert triangle_bound(*moved) == pytest.approx(triangle_bound(*pts), rel=1e-9)


def test_one_point_lb_small_eps_range():
    with pytest.raises(MetricExtError):
        one_point_lb_check(0.5)


def test_one_point_lb_above_bound():
    eps = 1e-2
    assert one_point_lb_check(eps, restarts=8) >= 1 + np.sqrt(eps) / 2 - 1e-6


def test_spiral_lb_monotone_in_restarts():
    vals = [spiral_lb_check(4, restarts=r, seed=1) for r in (1, 2, 4)]
    assert vals[0] >= vals[1] >= vals[2]


def test_spiral_lb_below_constructions():
    k = 8
    obj, xs, eps = spiral_lb_objective(k)
    val = spiral_lb_check(k, restarts=2)
    assert val <= obj(spiral_eval(xs, eps).ravel()) + 1e-12
    curve = build_line_extension(MappedPairs([[-eps], [0.0], [1.0]], [[eps], [0.0], [1.0]]), eps)
    assert val <= obj(curve(xs).ravel()) + 1e-12


def test_spiral_lb_precondition():
    with pytest.raises(MetricExtError):
        spiral_lb_check(2)
