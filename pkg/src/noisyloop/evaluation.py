"""Test accuracy, detection quality against ground truth, and feature export."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .model import NetworkParams, forward


class EvaluationError(ValueError):
    pass


def predict(params: NetworkParams, X) -> np.ndarray:
    return np.argmax(forward(params, X).logits, axis=1)


def accuracy_from_logits(logits, labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EvaluationError("empty test set")
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def accuracy(params: NetworkParams, test_ds: Dataset) -> float:
    """Fraction of argmax-correct predictions over every network output (an extra
    "unknown" unit counts as a wrong answer on clean test data)."""
    return accuracy_from_logits(forward(params, test_ds.features).logits, test_ds.labels)


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class DetectionReport:
    tp: int
    fp: int
    fn: int
    tn: int
    per_class_tpr: dict = field(default_factory=dict)

    @property
    def tpr(self) -> float:
        return _rate(self.tp, self.tp + self.fn)

    @property
    def fpr(self) -> float:
        return _rate(self.fp, self.fp + self.tn)

    @property
    def precision(self) -> float:
        return _rate(self.tp, self.tp + self.fp)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return dict(tp=self.tp, fp=self.fp, fn=self.fn, tn=self.tn, tpr=self.tpr, fpr=self.fpr,
                    precision=self.precision, per_class_tpr=self.per_class_tpr)


def detection_metrics(detected_noisy, truth_noisy, labels=None) -> DetectionReport:
    """Confusion counts of detected vs ground-truth noise; rates with an empty
    denominator are reported as 0."""
    if truth_noisy is None:
        raise EvaluationError("ground-truth noise flags are required")
    d = np.asarray(detected_noisy, bool)
    t = np.asarray(truth_noisy, bool)
    if d.shape != t.shape:
        raise EvaluationError("detected and truth flags must have the same length")
    per_class = {}
    if labels is not None:
        labels = np.asarray(labels)
        for c in np.unique(labels):
            sel = labels == c
            per_class[int(c)] = _rate(int(np.sum(d & t & sel)), int(np.sum(t & sel)))
    return DetectionReport(int(np.sum(d & t)), int(np.sum(d & ~t)), int(np.sum(~d & t)),
                           int(np.sum(~d & ~t)), per_class)


def export_features(params: NetworkParams, ds: Dataset, path, noisy=None) -> None:
    """CSV ``id,label,truth_noisy,status,phi0..`` of the feature-layer output."""
    F = forward(params, ds.features).features
    noisy = np.zeros(len(ds), bool) if noisy is None else np.asarray(noisy, bool)
    if noisy.shape != (len(ds),):
        raise EvaluationError("need one status per sample")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "truth_noisy", "status"] + [f"phi{j}" for j in range(F.shape[1])])
        for i in range(len(ds)):
            writer.writerow([int(ds.ids[i]), int(ds.labels[i]), int(ds.truth_noisy[i]),
                             "noisy" if noisy[i] else "clean"] + [repr(float(v)) for v in F[i]])


def load_features(path) -> dict:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    if not header or header[:4] != ["id", "label", "truth_noisy", "status"]:
        raise EvaluationError(f"{path}: not a feature export")
    return dict(
        ids=np.array([int(r[0]) for r in rows]),
        labels=np.array([int(r[1]) for r in rows]),
        truth_noisy=np.array([r[2] == "1" for r in rows]),
        noisy=np.array([r[3] == "noisy" for r in rows]),
        features=np.array([[float(v) for v in r[4:]] for r in rows]).reshape(len(rows), len(header) - 4),
    )
