import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from noisyloop.detection import (EPS, DetectionError, DetectionState, accumulate, classify, detect,
                                 gaussian_probability, load_detection_csv, lof_scores, lrd, lrd_all,
                                 pclof, reach_dist, save_detection_csv)
from noisyloop.neighbors import build


def polygon(m, r=1.0):
    t = 2 * np.pi * np.arange(m) / m
    return np.c_[r * np.cos(t), r * np.sin(t)]


def test_reach_dist_examples():
    idx = build([0.0, 1.0, 1.1], 1)
    assert reach_dist(idx, 0, 1) == pytest.approx(1.0)
    assert reach_dist(idx, 2, 1) == pytest.approx(0.1)


def test_circle_lrd_equal_and_lof_one():
    idx = build(polygon(12), 2)
    dens = lrd_all(idx)
    assert np.allclose(dens, dens[0], rtol=1e-12)
    assert np.allclose(lof_scores(polygon(12), 2), 1.0, rtol=0, atol=1e-12)


def test_regular_simplex_lof_one():
    assert np.allclose(lof_scores(np.eye(5), 2), 1.0, atol=1e-12)


def test_identical_points():
    idx = build(np.zeros((6, 2)), 2)
    assert np.all(lrd_all(idx) == 1 / EPS)
    assert np.allclose(lof_scores(np.zeros((6, 2)), 2), 1.0)


def test_lrd_matches_oracle():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((50, 3))
    idx = build(pts, 4)
    nn = oracles.knn(pts.tolist(), 4)
    for i in range(50):
        assert lrd(idx, i) == pytest.approx(oracles.lrd(pts.tolist(), nn, i), rel=1e-12)


def test_isolated_point_has_largest_lof():
    rng = np.random.default_rng(1)
    cluster = rng.uniform(-1, 1, (10, 2))
    radius = np.linalg.norm(cluster, axis=1).max()
    pts = np.vstack([cluster, [[100 * radius, 0.0]]])
    ref = oracles.lof(pts.tolist(), 3)
    got = lof_scores(pts, 3)
    assert np.allclose(got, ref, rtol=1e-9)
    assert np.all(got[-1] > got[:-1])


def test_accumulate():
    s = accumulate(DetectionState.fresh(3), [1, 1, 2])
    assert s.cumulative.tolist() == [1, 1, 2] and s.iterations == 1
    for _ in range(2):
        s = accumulate(s, [1, 1, 2])
    assert s.cumulative.tolist() == [3, 3, 6] and s.iterations == 3
    with pytest.raises(DetectionError):
        accumulate(s, [1, 2])


def test_pclof_degenerate_and_mean():
    s = accumulate(DetectionState.fresh(4), [2.0, 2.0, 2.0, 2.0])
    assert np.all(pclof(s) == 0)
    s = accumulate(DetectionState.fresh(3), [1.0, 2.0, 3.0])
    assert pclof(s)[1] == 0.0
    with pytest.raises(DetectionError):
        pclof(DetectionState.fresh(3))


def test_pclof_three_sigma():
    # score exactly mean + 3 sd (sample sd) within its population
    base = np.array([-1.0, 0.0, 1.0] * 50)
    # solve for x so that x sits at +3 sd of the population including x
    lo, hi = 0.0, 100.0
    for _ in range(200):
        x = (lo + hi) / 2
        s = np.append(base, x)
        z = (x - s.mean()) / s.std(ddof=1)
        lo, hi = (x, hi) if z < 3 else (lo, x)
    p = gaussian_probability(np.append(base, x))[-1]
    assert p == pytest.approx(math.erf(3 / math.sqrt(2)), abs=1e-9)
    assert p == pytest.approx(0.9973, abs=5e-5)


def _state_with(p):
    p = np.asarray(p, float)
    return DetectionState(np.zeros(p.size), 1, p, np.zeros(p.size, bool), np.ones(p.size))


@pytest.mark.parametrize("p, noisy, gamma", [(0.3, False, 1.0), (0.8, True, 0.2), (0.5, False, 1.0)])
def test_threshold_rules(p, noisy, gamma, monkeypatch):
    import noisyloop.detection as det
    monkeypatch.setattr(det, "pclof", lambda state, groups=None, mask=None: np.array([p]))
    s = det.classify(_state_with([p]))
    assert bool(s.noisy[0]) is noisy
    assert s.gamma[0] == pytest.approx(gamma)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.5, 5.0), min_size=3, max_size=60))
def test_pclof_range_and_monotone(scores):
    s = accumulate(DetectionState.fresh(len(scores)), scores)
    p = pclof(s)
    assert np.all((p >= 0) & (p <= 1))
    order = np.argsort(scores, kind="stable")
    assert np.all(np.diff(p[order]) >= -1e-15)
    c = classify(s)
    assert np.array_equal(c.noisy, c.pclof > 0.5)
    assert np.all((c.gamma > 0) & (c.gamma <= 1))
    assert np.array_equal(c.gamma == 1, ~c.noisy)
    # recomputing without accumulate is idempotent
    again = classify(c)
    assert np.array_equal(again.noisy, c.noisy) and np.array_equal(again.gamma, c.gamma)


def test_pclof_matches_oracle():
    rng = np.random.default_rng(5)
    scores = rng.gamma(2.0, 1.0, 80)
    assert np.allclose(gaussian_probability(scores), oracles.pclof(scores.tolist()), atol=1e-12)


def test_detect_per_class_flags_outliers():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((60, 2))
    b = rng.standard_normal((60, 2)) + [20, 0]
    X = np.vstack([a, [[8.0, 8.0]], b, [[28.0, -8.0]]])
    y = np.array([0] * 61 + [1] * 61)
    s = detect(X, y, DetectionState.fresh(122))
    assert s.iterations == 1
    assert s.noisy[60] and s.noisy[121]
    # statistics are per class: a shift of class 1 does not change class 0 results
    X2 = X.copy()
    X2[61:] += 1000
    s2 = detect(X2, y, DetectionState.fresh(122))
    assert np.allclose(s.pclof, s2.pclof)


def test_detect_inactive_frozen():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 2))
    y = np.repeat([0, 1], 15)
    s = detect(X, y, DetectionState.fresh(30))
    active = np.ones(30, bool)
    active[:3] = False
    s2 = detect(X, y, s, active=active)
    assert np.array_equal(s2.cumulative[:3], s.cumulative[:3])
    assert np.array_equal(s2.pclof[:3], s.pclof[:3])
    with pytest.raises(DetectionError):
        detect(X[:4], np.array([0, 0, 1, 1]), DetectionState.fresh(4))


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    s = detect(rng.standard_normal((20, 2)), np.repeat([0, 1], 10), DetectionState.fresh(20))
    save_detection_csv(s, np.arange(20) + 100, np.repeat([0, 1], 10), tmp_path / "d.csv")
    ids, labels, back = load_detection_csv(tmp_path / "d.csv")
    assert ids.tolist() == list(range(100, 120))
    for f in ("cumulative", "pclof", "noisy", "gamma"):
        assert np.array_equal(getattr(back, f), getattr(s, f))
    assert back.iterations == 1
