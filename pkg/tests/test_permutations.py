import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metric_ext import MappedPairs, MetricExtError
from metric_ext.errors import ForbiddenPattern
from metric_ext.line import (
    FlipSequence,
    Permutation,
    apply_flips,
    contains_forbidden_pattern,
    flip_decomposition,
    map_permutation,
)


def brute_contains(vals):
    for q in itertools.combinations(range(len(vals)), 4):
        r = tuple(np.argsort(np.argsort([vals[i] for i in q])) + 1)
        if r in ((3, 1, 4, 2), (2, 4, 1, 3)):
            return True
    return False


def test_worked_example():
    perm = Permutation((3, 1, 2, 4, 6, 5))
    assert flip_decomposition(perm).flips == ((1, 3), (2, 3), (5, 6))


def test_forbidden_example():
    with pytest.raises(ForbiddenPattern) as e:
        flip_decomposition(Permutation((2, 4, 1, 3)))
    assert e.value.witness.pattern == (2, 4, 1, 3)
    w = contains_forbidden_pattern(Permutation((3, 1, 4, 2)))
    assert w.positions == (1, 2, 3, 4) and w.pattern == (3, 1, 4, 2)


def test_identity_needs_no_flips():
    assert len(flip_decomposition(Permutation.identity(6))) == 0


def test_full_reversal_is_one_flip_then_fixups():
    fs = flip_decomposition(Permutation((5, 4, 3, 2, 1)))
    assert apply_flips(fs, 5).values == (5, 4, 3, 2, 1)
    assert fs.flips[0] == (1, 5)


@settings(max_examples=200, deadline=None)
@given(st.permutations(list(range(1, 9))))
def test_characterization(p):
    perm = Permutation(tuple(p))
    has = contains_forbidden_pattern(perm) is not None
    assert has == brute_contains(p)
    if has:
        with pytest.raises(ForbiddenPattern):
            flip_decomposition(perm)
    else:
        fs = flip_decomposition(perm)
        assert fs.is_laminar()
        assert apply_flips(fs, len(p)) == perm


def test_laminarity_detector():
    assert FlipSequence(((1, 5), (2, 3))).is_laminar()
    assert not FlipSequence(((1, 3), (2, 5))).is_laminar()
    assert not FlipSequence(((1, 3), (1, 3))).is_laminar()


def test_flip_validation():
    with pytest.raises(MetricExtError):
        FlipSequence(((3, 3),))
    with pytest.raises(MetricExtError):
        apply_flips(FlipSequence(((1, 9),)), 4)
    with pytest.raises(MetricExtError):
        Permutation((1, 1, 2))


def test_map_permutation_convention():
    # pi(k) is the index of the point with the k-th smallest image
    pairs = MappedPairs([[2.0], [0.0], [1.0]], [[5.0], [7.0], [6.0]])
    assert map_permutation(pairs).values == (3, 2, 1)
    with pytest.raises(MetricExtError):
        map_permutation(MappedPairs([[0.0], [1.0]], [[1.0], [1.0]]))
