"""Reweighted softmax loss, pairwise contrastive loss and their combination, with gradients."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.special import log_softmax


class LossError(ValueError):
    pass


class Similarity(IntEnum):
    UNDEFINED = -1
    DISSIMILAR = 0
    SIMILAR = 1


def similarity(noisy_i: bool, noisy_j: bool, label_i: int, label_j: int) -> Similarity:
    if noisy_i and noisy_j:
        return Similarity.UNDEFINED
    if not noisy_i and not noisy_j and label_i == label_j:
        return Similarity.SIMILAR
    return Similarity.DISSIMILAR


def contrastive(f_i, f_j, y, alpha: float = 1.0, squared_hinge: bool = False):
    """Contrastive loss for one pair or a stack of pairs (rows).

    Returns ``(loss, grad_f_i, grad_f_j)``; for stacked input the loss is per row.
    Similar pairs (y=1) cost D^2/2; dissimilar ones (y=0) cost max(0, alpha - D)/2,
    or max(0, alpha - D)^2/2 with ``squared_hinge``. At D=0 and at D=alpha the
    dissimilar term has zero (sub)gradient.
    """
    if alpha <= 0:
        raise LossError("margin alpha must be positive")
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise LossError(f"feature shapes differ: {f_i.shape} vs {f_j.shape}")
    single = f_i.ndim == 1
    fi, fj = np.atleast_2d(f_i), np.atleast_2d(f_j)
    y = np.atleast_1d(np.asarray(y))
    if y.shape != (fi.shape[0],):
        raise LossError("need one indicator per pair")
    if np.any((y != 0) & (y != 1)):
        raise LossError("similarity indicator must be 0 or 1 (undefined pairs cannot be scored)")
    diff = fi - fj
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    sim = y == 1
    gap = np.maximum(alpha - dist, 0.0)
    active = ~sim & (gap > 0) & (dist > 0)
    if squared_hinge:
        loss = np.where(sim, 0.5 * dist ** 2, 0.5 * gap ** 2)
        coef = np.where(active, -gap / np.where(dist > 0, dist, 1.0), 0.0)
    else:
        loss = np.where(sim, 0.5 * dist ** 2, 0.5 * gap)
        coef = np.where(active, -0.5 / np.where(dist > 0, dist, 1.0), 0.0)
    coef = np.where(sim, 1.0, coef)
    grad = coef[:, None] * diff
    if single:
        return float(loss[0]), grad[0], -grad[0]
    return loss, grad, -grad


def reweighted_softmax(logits, labels, gammas):
    """Mean of gamma-weighted negative log-likelihoods over the batch, and d/dlogits.

    Clean samples carry gamma = 1; the denominator counts every row (clean and noisy).
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    gammas = np.asarray(gammas, dtype=np.float64)
    n, c = logits.shape
    if labels.shape != (n,) or gammas.shape != (n,):
        raise LossError("need one label and one gamma per row")
    if labels.min() < 0 or labels.max() >= c:
        raise LossError(f"label out of range for {c} outputs")
    if not np.all(np.isfinite(logits)):
        raise LossError("non-finite logits")
    if np.any((gammas < 0) | (gammas > 1)):
        raise LossError("gammas must lie in [0, 1]")
    logp = log_softmax(logits, axis=1)
    rows = np.arange(n)
    loss = -float(np.dot(gammas, logp[rows, labels])) / n
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    grad *= (gammas / n)[:, None]
    return loss, grad


def cross_entropy(logits, labels) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    return -float(np.mean(log_softmax(logits, axis=1)[np.arange(len(labels)), labels]))


@dataclass(frozen=True)
class LossBreakdown:
    rsl: float
    cl: float
    eta: float

    @property
    def total(self) -> float:
        return self.rsl + self.eta * self.cl


def combined(rsl: float, cl: float, eta: float) -> LossBreakdown:
    if eta <= 0:
        raise LossError("eta must be positive")
    return LossBreakdown(rsl, cl, eta)
