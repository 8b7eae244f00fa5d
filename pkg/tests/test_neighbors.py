import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from noisyloop.neighbors import NeighborError, build, pairwise_distances


def test_line_k1():
    idx = build([0.0, 1.0, 2.0, 3.0], 1)
    assert idx.k_distance(0) == 1.0
    assert idx.neighbors(0)[0].tolist() == [1]


def test_ties_included():
    idx = build([0.0, 1.0, 2.0, 3.0], 1)
    # point 1 has two neighbours at distance 1
    assert sorted(idx.neighbors(1)[0].tolist()) == [0, 2]


def test_duplicates_zero_kdist():
    idx = build([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]], 1)
    assert idx.k_distance(0) == 0.0


def test_errors():
    with pytest.raises(NeighborError):
        build([[0.0], [1.0]], 2)
    with pytest.raises(NeighborError):
        build([[0.0], [np.nan], [1.0]], 1)
    with pytest.raises(NeighborError):
        build([[0.0], [1.0]], 1).neighbors(5)


def test_matches_oracle_random():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((50, 3))
    idx = build(pts, 5)
    ref = oracles.knn(pts.tolist(), 5)
    for i, (kd, members) in enumerate(ref):
        assert idx.k_distance(i) == pytest.approx(kd, rel=1e-12)
        assert sorted(idx.neighbors(i)[0].tolist()) == sorted(members)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 40), d=st.integers(1, 4), seed=st.integers(0, 2**31), data=st.data(),
       grid=st.booleans())
def test_neighborhood_invariants(n, d, seed, data, grid):
    rng = np.random.default_rng(seed)
    # integer grids force plenty of exact ties
    pts = rng.integers(0, 3, (n, d)).astype(float) if grid else rng.standard_normal((n, d))
    k = data.draw(st.integers(1, n - 1))
    idx = build(pts, k)
    D = pairwise_distances(pts)
    for i in range(n):
        nb, dist = idx.neighbors(i)
        assert i not in nb
        assert len(nb) >= k
        assert np.all(np.diff(dist) >= 0)
        assert np.all(dist <= idx.k_distance(i))
        others = np.setdiff1d(np.arange(n), np.append(nb, i))
        assert np.all(D[i, others] > idx.k_distance(i))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((25, 2))
    perm = rng.permutation(25)
    a, b = build(pts, 4), build(pts[perm], 4)
    assert np.array_equal(a.kdist[perm], b.kdist)
    assert np.array_equal(a.members[np.ix_(perm, perm)], b.members)
