import json

import numpy as np
import pytest

from metric_ext import MappedPairs, MetricExtError
from metric_ext.errors import ForbiddenPattern
from metric_ext.harness import sampled_distortion
from metric_ext.line import build_line_extension, line_eval, map_permutation


def three_point(eps):
    return MappedPairs([[0.0], [eps], [1.0]], [[0.0], [-eps], [1.0]])


def six_point(eps):
    """Two separated blocks, (3 1 2) then (1 3 2), with gaps of order delta / eps."""
    s = 1.0
    x1, x2, x3 = 0.0, s, s + s / eps
    g = 4 * (x3 - x1) / eps
    x4 = x3 + g
    x5 = x4 + g
    x6 = x5 + s
    c = x1 + x3
    X = [x1, x2, x3, x4, x5, x6]
    F = [c - x2, c - x1, c - x3, x4, x6, x5]
    return MappedPairs(np.array(X)[:, None], np.array(F)[:, None])


@pytest.mark.parametrize("k", [8, 12, 16])
def test_three_point_agrees_on_source(k):
    eps = 2.0**-k
    m = build_line_extension(three_point(eps), eps)
    out = line_eval(m, np.array([0.0, eps, 1.0]))
    np.testing.assert_allclose(out, [[0.0, 0.0], [-eps, 0.0], [1.0, 0.0]], atol=1e-9)
    assert m.continuity_gaps().max() <= 1e-9


@pytest.mark.parametrize("k", [8, 12, 16])
def test_six_point_instance(k):
    eps = 2.0**-k
    pairs = six_point(eps)
    assert map_permutation(pairs).values == (3, 1, 2, 4, 6, 5)
    m = build_line_extension(pairs, eps)
    assert tuple(m.flips) == ((1, 3), (2, 3), (5, 6))
    out = m(pairs.X[:, 0])
    scale = np.abs(pairs.Y).max()
    np.testing.assert_allclose(out[:, 0], pairs.Y[:, 0], atol=1e-9 * scale)
    np.testing.assert_allclose(out[:, 1], 0.0, atol=1e-9 * scale)
    lo, hi = m.interval
    sd = sampled_distortion(m, (lo - (hi - lo), hi + (hi - lo)), 20_000, seed=1)
    # measured constant is about 62; the envelope leaves room for sampling
    assert sd.distortion <= 1 + 80 / np.log(1 / eps) ** 2


def test_identity_map_is_the_identity_line():
    pairs = MappedPairs([[0.0], [1.0], [3.0]], [[0.0], [1.0], [3.0]])
    m = build_line_extension(pairs, 2.0**-10)
    t = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(m(t), np.stack([t, 0 * t], axis=1), atol=1e-12)


def test_reversal_of_whole_set():
    eps = 2.0**-12
    pairs = MappedPairs([[0.0], [1.0], [2.0]], [[2.0], [1.0], [0.0]])
    m = build_line_extension(pairs, eps)
    np.testing.assert_allclose(m(pairs.X[:, 0])[:, 0], [2.0, 1.0, 0.0], atol=1e-9)


def test_rejects_forbidden_and_bad_eps():
    eps = 2.0**-12
    with pytest.raises(MetricExtError):
        build_line_extension(three_point(eps), 0.5)
    X = np.array([0.0, 1.0, 2.0, 3.0]) * 1e6
    F = X[[1, 3, 0, 2]]
    with pytest.raises((ForbiddenPattern, MetricExtError)):
        build_line_extension(MappedPairs(X[:, None], F[:, None]), eps)


def test_rejects_distorted_map():
    with pytest.raises(MetricExtError):
        build_line_extension(MappedPairs([[0.0], [1.0], [2.0]], [[0.0], [1.5], [2.0]]), 2.0**-12)


def test_json_is_finite_and_complete():
    eps = 2.0**-10
    m = build_line_extension(three_point(eps), eps)
    obj = json.loads(json.dumps(m.to_json(), allow_nan=False))
    assert obj["kind"] == "line_extension"
    assert obj["flips"] == [[1, 2]]
    assert obj["eps"] == eps and len(obj["pieces"]) > 0
