import numpy as np
import pytest

from metric_ext import MappedPairs, MetricExtError, distortion_report
from metric_ext.prioritized import (
    PriorityRanking,
    Variant,
    build_prioritized,
    clamp_sizes,
    level_sizes,
    nonzero_prefix_dim,
    prefix_distortion,
)


@pytest.fixture(scope="module")
def emb():
    X = np.random.default_rng(0).standard_normal((600, 10))
    order = tuple(np.random.default_rng(1).permutation(600).tolist())
    return build_prioritized(X, PriorityRanking(order), 0.5, "k=2", seed=3)


def test_variant_parse():
    assert Variant.parse("loglog") == Variant.parse("loglog")
    with pytest.raises(MetricExtError):
        Variant.parse("k=0")


def test_level_sizes_grow_and_end_at_n():
    for v in ("loglog", "k=2", "k=3"):
        s = clamp_sizes(level_sizes(65536, 0.5, Variant.parse(v)), 65536)
        assert s[-1] == 65536
        assert all(a < b for a, b in zip(s, s[1:]))


def test_ranking_validation():
    with pytest.raises(MetricExtError):
        PriorityRanking((0, 0, 1))


def test_levels_respect_bounds(emb):
    for lv in emb.levels:
        assert lv.distortion <= lv.bound * (1 + 1e-9)


def test_prefix_images_are_zero_padded(emb):
    for lv in emb.levels:
        assert not emb.images[: lv.size, lv.dim:].any()


def test_prefix_distortion_matches_direct(emb):
    for j in (2, 3, 50, 600):
        P = emb.points.points[np.asarray(emb.ranking.order[:j])]
        d = distortion_report(MappedPairs(P, emb.images[:j])).distortion
        assert prefix_distortion(emb, j) == pytest.approx(d, rel=1e-12)
        assert np.count_nonzero(np.abs(emb.images[:j]).sum(axis=0)) <= nonzero_prefix_dim(emb, j)


def test_final_images_in_original_order(emb):
    fi = emb.final_images().points
    k = emb.ranking.order[5]
    assert fi[k].tobytes() == emb.image_of_rank(6).tobytes()


def test_reproducible():
    X = np.random.default_rng(5).standard_normal((80, 6))
    a = build_prioritized(X, PriorityRanking.identity(80), 0.5, "loglog", seed=2)
    b = build_prioritized(X, PriorityRanking.identity(80), 0.5, "loglog", seed=2)
    assert a.images.tobytes() == b.images.tobytes()


def test_later_levels_extend_earlier_ones(emb):
    for prev, cur in zip(emb.level_images, emb.level_images[1:]):
        s, d = prev.shape
        assert cur[:s, :d].tobytes() == prev.tobytes()
        assert not cur[:s, d:].any()
    assert emb.images[:, : emb.level_images[-1].shape[1]].tobytes() == emb.level_images[-1].tobytes()
