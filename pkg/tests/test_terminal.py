import numpy as np
import pytest

from metric_ext import MetricExtError, PointSet
from metric_ext.jl import jl_dim
from metric_ext.terminal import (
    TerminalEmbedder,
    build_terminal_embedder,
    embed_queries,
    embed_query,
    embed_query_result,
)


@pytest.fixture(scope="module")
def small():
    T = np.random.default_rng(2).standard_normal((20, 12))
    return T, build_terminal_embedder(PointSet(T), 0.3, seed=5, n_calibration=16)


def test_dimension(small):
    T, emb = small
    assert emb.output_dim == jl_dim(20, 0.09) + 1


def test_terminals_map_to_images(small):
    T, emb = small
    for i in (0, 7):
        out = embed_query(emb, T[i])
        assert out[-1] == 0.0
        assert out[:-1].tobytes() == emb.images.points[i].tobytes()


def test_queries_never_contract(small):
    T, emb = small
    Q = np.random.default_rng(9).standard_normal((25, 12))
    pts, stats = embed_queries(emb, Q)
    assert stats.violations == 0
    ext = np.hstack([emb.images.points, np.zeros((len(T), 1))])
    for q, y in zip(Q, pts):
        r = np.linalg.norm(ext - y, axis=1) / np.linalg.norm(T - q, axis=1)
        assert r.min() >= 1 - 1e-9
        assert r.max() <= 1 + 5 * emb.eps


def test_query_result_fields(small):
    T, emb = small
    r = embed_query_result(emb, T[3] + 0.01)
    assert r.nearest == 3 and not r.is_terminal


def test_bad_query_shape(small):
    _, emb = small
    with pytest.raises(MetricExtError):
        embed_query(emb, np.zeros(3))


def test_json_roundtrip(small):
    T, emb = small
    back = TerminalEmbedder.from_json(emb.to_json())
    q = np.random.default_rng(4).standard_normal(12)
    assert embed_query(back, q).tobytes() == embed_query(emb, q).tobytes()


def test_eps_range():
    with pytest.raises(MetricExtError):
        build_terminal_embedder(PointSet(np.eye(3)), 0.7, seed=0)
