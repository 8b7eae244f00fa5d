"""Similar/dissimilar pair candidates from detection statuses, and hard example mining."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neighbors import pairwise_distances


class PairingError(ValueError):
    pass


@dataclass(frozen=True)
class Pair:
    i: int
    j: int
    y: int


@dataclass(frozen=True, eq=False)
class PairBatch:
    """Mined pairs as positions into the mining pool, plus the pool's sample ids."""
    first: np.ndarray
    second: np.ndarray
    y: np.ndarray
    distance: np.ndarray
    ids: np.ndarray

    @property
    def n_similar(self) -> int:
        return int(np.sum(self.y == 1))

    @property
    def n_dissimilar(self) -> int:
        return int(np.sum(self.y == 0))

    def __len__(self) -> int:
        return self.y.size

    def pairs(self) -> list[Pair]:
        return [Pair(int(self.ids[a]), int(self.ids[b]), int(y))
                for a, b, y in zip(self.first, self.second, self.y)]


def candidate_pairs(noisy, labels) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangular masks (similar, dissimilar) over all i < j.

    Before any detection every sample is clean, so dissimilar pairs are exactly
    the cross-class ones. Noisy-noisy pairs are in neither mask.
    """
    noisy = np.asarray(noisy, bool)
    labels = np.asarray(labels)
    clean = ~noisy
    upper = np.triu(np.ones((noisy.size, noisy.size), bool), k=1)
    defined = upper & ~(noisy[:, None] & noisy[None, :])
    similar = defined & clean[:, None] & clean[None, :] & (labels[:, None] == labels[None, :])
    return similar, defined & ~similar


def _select(dist: np.ndarray, ids_a: np.ndarray, ids_b: np.ndarray, count: int, largest: bool) -> np.ndarray:
    """Positions of the ``count`` best candidates, ties broken by (id_i, id_j)."""
    if count <= 0 or dist.size == 0:
        return np.empty(0, np.int64)
    key = -dist if largest else dist
    if count < key.size:
        cut = np.partition(key, count - 1)[count - 1]
        pool = np.flatnonzero(key <= cut)
    else:
        pool = np.arange(key.size)
    order = np.lexsort((ids_b[pool], ids_a[pool], key[pool]))
    return pool[order[:count]]


def hard_mine(features, noisy, labels, budget: int, similar_fraction: float = 0.5, ids=None) -> PairBatch:
    """Closest dissimilar pairs and most distant similar pairs among all candidates.

    Emits fewer pairs when a kind has too few candidates.
    """
    if budget < 2:
        raise PairingError("pair budget must be at least 2")
    if not 0.0 <= similar_fraction <= 1.0:
        raise PairingError("similar_fraction must be in [0, 1]")
    F = np.asarray(features, dtype=np.float64)
    n = F.shape[0]
    ids = np.arange(n) if ids is None else np.asarray(ids)
    similar, dissimilar = candidate_pairs(noisy, labels)
    D = pairwise_distances(F)
    n_sim = int(round(budget * similar_fraction))
    picked = []
    for mask, count, y, largest in ((similar, n_sim, 1, True), (dissimilar, budget - n_sim, 0, False)):
        a, b = np.nonzero(mask)
        lo, hi = np.minimum(ids[a], ids[b]), np.maximum(ids[a], ids[b])
        sel = _select(D[a, b], lo, hi, count, largest)
        picked.append((a[sel], b[sel], np.full(sel.size, y)))
    first = np.concatenate([p[0] for p in picked])
    second = np.concatenate([p[1] for p in picked])
    return PairBatch(first, second, np.concatenate([p[2] for p in picked]), D[first, second], ids)
