import numpy as np
import pytest

from noisyloop.dataset import BenchmarkConfig, make_benchmark
from noisyloop.evaluation import (EvaluationError, accuracy, accuracy_from_logits, detection_metrics,
                                  export_features, load_features)
from noisyloop.model import forward, init_params
from noisyloop.neighbors import pairwise_distances


def test_perfect_and_chance_accuracy():
    labels = np.repeat([0, 1], 500)
    assert accuracy_from_logits(np.eye(2)[labels] * 50, labels) == 1.0
    rng = np.random.default_rng(0)
    assert accuracy_from_logits(rng.standard_normal((1000, 2)), labels) == pytest.approx(0.5, abs=0.05)
    with pytest.raises(EvaluationError):
        accuracy_from_logits(np.zeros((0, 2)), np.array([], int))


def test_detection_metrics_basic():
    truth = np.array([1, 1, 0, 0, 0], bool)
    r = detection_metrics(truth, truth)
    assert (r.tpr, r.fpr, r.precision) == (1.0, 0.0, 1.0)
    r = detection_metrics(np.zeros(5, bool), truth)
    assert r.tpr == 0.0 and r.precision == 0.0 and r.total == 5
    with pytest.raises(EvaluationError):
        detection_metrics(truth, None)


def test_random_detector_tpr_near_detected_fraction():
    rng = np.random.default_rng(1)
    truth = np.zeros(20000, bool)
    truth[:8000] = True
    det = rng.random(20000) < 0.3
    r = detection_metrics(det, truth)
    assert r.tpr == pytest.approx(0.3, abs=0.02)
    assert r.tp + r.fp + r.fn + r.tn == 20000


def test_export_reproduces_feature_distances(tmp_path):
    train, _ = make_benchmark(BenchmarkConfig(per_class=40, seed=2))
    p = init_params([2, 8, 4, 2], 0)
    p.set_input_normalization(train.features)
    noisy = train.truth_noisy.copy()
    export_features(p, train, tmp_path / "f.csv", noisy)
    back = load_features(tmp_path / "f.csv")
    assert np.array_equal(back["ids"], train.ids)
    assert np.array_equal(back["noisy"], noisy)
    F = forward(p, train.features).features
    assert np.array_equal(pairwise_distances(back["features"]), pairwise_distances(F))


def test_accuracy_counts_extra_unit():
    _, test = make_benchmark(BenchmarkConfig(per_class=20, seed=0))
    p = init_params([2, 4, 3], 0)
    p.weights[-1][...] = 0
    p.biases[-1][...] = [0.0, 0.0, 1.0]   # always predicts the extra class
    assert accuracy(p, test) == 0.0
