import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from noisyloop.losses import Similarity, similarity
from noisyloop.pairing import Pair, PairingError, candidate_pairs, hard_mine


def test_pre_detection_dissimilar_is_cross_class():
    labels = np.array([0, 0, 1, 1])
    sim, dis = candidate_pairs(np.zeros(4, bool), labels)
    a, b = np.nonzero(dis)
    assert np.all(labels[a] != labels[b])
    a, b = np.nonzero(sim)
    assert np.all(labels[a] == labels[b])


def test_noisy_sample_dissimilar_to_every_clean():
    noisy = np.array([True, False, False, False])
    labels = np.array([0, 0, 1, 0])
    sim, dis = candidate_pairs(noisy, labels)
    assert dis[0, 1:].all() and not sim[0].any()


def test_two_noisy_no_pair():
    sim, dis = candidate_pairs(np.ones(2, bool), np.zeros(2, int))
    assert not sim.any() and not dis.any()


def test_most_distant_similar():
    F = np.array([[0.0], [1.0], [5.0]])
    pb = hard_mine(F, np.zeros(3, bool), np.zeros(3, int), budget=2, similar_fraction=0.5)
    assert pb.n_similar == 1 and pb.n_dissimilar == 0
    assert {int(pb.first[0]), int(pb.second[0])} == {0, 2}


def test_closest_dissimilar_to_noisy():
    F = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 0.0]])
    noisy = np.array([False, False, False, True])
    pb = hard_mine(F, noisy, np.zeros(4, int), budget=2, similar_fraction=0.0)
    assert pb.pairs()[0] == Pair(2, 3, 0)
    assert pb.pairs() == [Pair(2, 3, 0), Pair(1, 3, 0)]


def test_errors():
    with pytest.raises(PairingError):
        hard_mine(np.zeros((3, 1)), np.zeros(3, bool), np.zeros(3, int), 1)
    with pytest.raises(PairingError):
        hard_mine(np.zeros((3, 1)), np.zeros(3, bool), np.zeros(3, int), 4, similar_fraction=2)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 25), budget=st.integers(2, 40),
       frac=st.sampled_from([0.0, 0.25, 0.5, 1.0]), grid=st.booleans())
def test_mining_matches_exhaustive_oracle(seed, n, budget, frac, grid):
    rng = np.random.default_rng(seed)
    F = rng.integers(0, 3, (n, 2)).astype(float) if grid else rng.standard_normal((n, 2))
    noisy = rng.random(n) < 0.3
    labels = rng.integers(0, 2, n)
    ids = rng.permutation(1000)[:n]
    pb = hard_mine(F, noisy, labels, budget, frac, ids=ids)
    n_sim = int(round(budget * frac))
    sim, dis = oracles.all_pairs_mine(F.tolist(), noisy, labels, ids, n_sim, budget - n_sim)
    got = sorted((min(ids[a], ids[b]), max(ids[a], ids[b]), int(y)) for a, b, y in zip(pb.first, pb.second, pb.y))
    ref = sorted([(*k, 1) for _, k in sim] + [(*k, 0) for _, k in dis])
    assert got == ref
    for a, b, y in zip(pb.first, pb.second, pb.y):
        assert a != b
        assert not (noisy[a] and noisy[b])
        s = similarity(noisy[a], noisy[b], labels[a], labels[b])
        assert s is not Similarity.UNDEFINED and int(s) == y
    assert np.allclose(pb.distance, np.linalg.norm(F[pb.first] - F[pb.second], axis=1))
