"""Exact k-nearest-neighbour index with LOF tie semantics.

Every point at exactly the k-distance is a neighbour, so a neighbourhood can hold
more than k points. Distances are Euclidean and computed as the norm of the
coordinate difference (no dot-product expansion) so that ties stay exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ROW_BLOCK = 256


class NeighborError(ValueError):
    pass


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, _ROW_BLOCK):
        diff = points[start:start + _ROW_BLOCK, None, :] - points[None, :, :]
        out[start:start + _ROW_BLOCK] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


@dataclass(frozen=True, eq=False)
class NeighborIndex:
    points: np.ndarray
    k: int
    distances: np.ndarray       # full (n, n) distance matrix
    kdist: np.ndarray           # (n,) distance to the k-th nearest neighbour
    members: np.ndarray         # (n, n) bool, members[i, j] <=> j in N_k(i)

    def __len__(self) -> int:
        return self.points.shape[0]

    def _check(self, i: int) -> None:
        if not 0 <= i < len(self):
            raise NeighborError(f"index {i} out of range for {len(self)} points")

    def k_distance(self, i: int) -> float:
        self._check(i)
        return float(self.kdist[i])

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour indices of point ``i`` sorted by (distance, index), with their distances."""
        self._check(i)
        idx = np.flatnonzero(self.members[i])
        d = self.distances[i, idx]
        order = np.lexsort((idx, d))
        return idx[order], d[order]

    def sizes(self) -> np.ndarray:
        return self.members.sum(axis=1)


def build(points, k: int) -> NeighborIndex:
    points = np.array(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise NeighborError("points must be a 2-D array")
    n = points.shape[0]
    if k < 1:
        raise NeighborError("k must be positive")
    if n < k + 1:
        raise NeighborError(f"need at least k+1={k + 1} points, got {n}")
    if not np.all(np.isfinite(points)):
        raise NeighborError("points contain NaN or infinite coordinates")
    D = pairwise_distances(points)
    # self is excluded by pushing the diagonal to +inf before ranking
    np.fill_diagonal(D, np.inf)
    kdist = np.partition(D, k - 1, axis=1)[:, k - 1]
    members = D <= kdist[:, None]
    np.fill_diagonal(D, 0.0)
    points.flags.writeable = False
    for arr in (D, kdist, members):
        arr.flags.writeable = False
    return NeighborIndex(points, k, D, kdist, members)
