"""Noisy-label detection with probabilistic cumulative LOF (pcLOF).

LOF scores are computed per class on learned features, summed over detection
rounds, standardized within each class and squashed through a clamped erf.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import erf

from .neighbors import NeighborIndex, build

EPS = 1e-12
MIN_CLASS_SIZE = 3


class DetectionError(ValueError):
    pass


def reach_dist(idx: NeighborIndex, i: int, j: int) -> float:
    idx._check(i)
    idx._check(j)
    return max(float(idx.kdist[j]), float(idx.distances[i, j]))


def reach_dist_matrix(idx: NeighborIndex) -> np.ndarray:
    return np.maximum(idx.kdist[None, :], idx.distances)


def lrd_all(idx: NeighborIndex) -> np.ndarray:
    sizes = idx.sizes()
    mean_reach = np.where(idx.members, reach_dist_matrix(idx), 0.0).sum(axis=1) / sizes
    # duplicates can make every reach-dist zero
    return 1.0 / np.maximum(mean_reach, EPS)


def lrd(idx: NeighborIndex, i: int) -> float:
    idx._check(i)
    return float(lrd_all(idx)[i])


def lof_from_index(idx: NeighborIndex) -> np.ndarray:
    dens = lrd_all(idx)
    neighbor_mean = (idx.members.astype(np.float64) @ dens) / idx.sizes()
    return neighbor_mean / dens


def lof_scores(points, k: int) -> np.ndarray:
    return lof_from_index(build(points, k))


def gaussian_probability(scores) -> np.ndarray:
    """max(0, erf(z / sqrt 2)) of each score's z-value within the population.

    Uses the sample standard deviation; a population without spread maps to zero.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.size < 2:
        return np.zeros_like(s)
    sd = s.std(ddof=1)
    if not sd > 0:
        return np.zeros_like(s)
    z = (s - s.mean()) / (sd * math.sqrt(2.0))
    return np.clip(erf(z), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class DetectionState:
    cumulative: np.ndarray      # S_i, summed LOF over detection rounds
    iterations: int             # M
    pclof: np.ndarray
    noisy: np.ndarray
    gamma: np.ndarray

    @classmethod
    def fresh(cls, n: int) -> "DetectionState":
        return cls(np.zeros(n), 0, np.zeros(n), np.zeros(n, bool), np.ones(n))

    def __len__(self) -> int:
        return self.cumulative.size


def accumulate(state: DetectionState, lof, mask=None) -> DetectionState:
    lof = np.asarray(lof, dtype=np.float64)
    if lof.shape != state.cumulative.shape:
        raise DetectionError(f"LOF vector has length {lof.size}, state has {len(state)} samples")
    add = lof if mask is None else np.where(mask, lof, 0.0)
    return replace(state, cumulative=state.cumulative + add, iterations=state.iterations + 1)


def pclof(state: DetectionState, groups=None, mask=None) -> np.ndarray:
    """pcLOF per sample, normalizing within each group (class) of ``groups``.

    Samples outside ``mask`` keep their previous value.
    """
    if state.iterations == 0:
        raise DetectionError("pcLOF is undefined before the first accumulate (M = 0)")
    n = len(state)
    groups = np.zeros(n, np.int64) if groups is None else np.asarray(groups)
    mask = np.ones(n, bool) if mask is None else np.asarray(mask, bool)
    out = state.pclof.copy()
    for g in np.unique(groups[mask]):
        sel = mask & (groups == g)
        out[sel] = gaussian_probability(state.cumulative[sel])
    return out


def classify(state: DetectionState, groups=None, mask=None, threshold: float = 0.5) -> DetectionState:
    p = pclof(state, groups, mask)
    noisy = p > threshold
    return replace(state, pclof=p, noisy=noisy, gamma=np.where(noisy, 1.0 - p, 1.0))


def half_class_k(class_size: int) -> int:
    return class_size // 2


def detect(features, labels, state: DetectionState, threshold: float = 0.5,
           active=None, k_rule=half_class_k) -> DetectionState:
    """One detection round: per-class LOF, accumulate, pcLOF, status and weights.

    ``active`` restricts the populations (samples removed from training are
    frozen); k is recomputed from the current class size.
    """
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    if labels.shape != (n,) or len(state) != n:
        raise DetectionError("features, labels and state must describe the same samples")
    active = np.ones(n, bool) if active is None else np.asarray(active, bool)
    lof = np.zeros(n)
    for c in np.unique(labels[active]):
        members = np.flatnonzero(active & (labels == c))
        if members.size < MIN_CLASS_SIZE:
            raise DetectionError(f"class {c} has {members.size} samples; detection needs >= {MIN_CLASS_SIZE}")
        lof[members] = lof_scores(X[members], k_rule(members.size))
    state = accumulate(state, lof, mask=active)
    return classify(state, labels, active, threshold)


def save_detection_csv(state: DetectionState, ids, labels, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "class", "S", "M", "pclof", "status", "gamma"])
        for i in range(len(state)):
            writer.writerow([int(ids[i]), int(labels[i]), repr(float(state.cumulative[i])), state.iterations,
                             repr(float(state.pclof[i])), "noisy" if state.noisy[i] else "clean",
                             repr(float(state.gamma[i]))])


def load_detection_csv(path) -> tuple[np.ndarray, np.ndarray, DetectionState]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DetectionError(f"{path}: no rows")
    try:
        ids = np.array([int(r["id"]) for r in rows])
        labels = np.array([int(r["class"]) for r in rows])
        state = DetectionState(
            np.array([float(r["S"]) for r in rows]),
            int(rows[0]["M"]),
            np.array([float(r["pclof"]) for r in rows]),
            np.array([r["status"] == "noisy" for r in rows]),
            np.array([float(r["gamma"]) for r in rows]),
        )
    except (KeyError, ValueError) as exc:
        raise DetectionError(f"{path}: malformed detection snapshot ({exc})") from None
    return ids, labels, state
