"""Iterative training loop: reweighted softmax + contrastive loss with periodic pcLOF detection.

Each epoch runs minibatch SGD on ``RSL + eta * CL``. At the end of the warm-up
epoch, and every ``detect_every`` epochs after it, the whole training set is
passed through a frozen snapshot of the network and pcLOF detection refreshes
the clean/noisy statuses (which drive pair mining) and the softmax weights.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, TextIO

import numpy as np

from .dataset import Dataset
from .detection import DetectionState, detect
from .evaluation import accuracy_from_logits, detection_metrics
from .losses import contrastive, reweighted_softmax
from .model import (NetworkParams, OptimizerState, StepSchedule, add_output_unit, backward,
                    forward, init_params, lr_at, sgd_step)
from .pairing import hard_mine

log = logging.getLogger(__name__)

ABLATIONS = {
    "none": "none",
    "a1": "a1", "a1_gamma1": "a1",
    "a2": "a2", "a2_gamma0": "a2",
    "b1": "b1", "b1_remove": "b1",
    "b2": "b2", "b2_new_class": "b2",
    "c1": "c1", "c1_detect_once": "c1",
    "c2": "c2", "c2_no_detection": "c2",
}


class ConfigError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    warmup_epochs: int = 2
    detect_every: int = 10
    eta: float = 1.0
    alpha: float = 1.0
    squared_hinge: bool = False
    threshold: float = 0.5
    lr: float = 0.01
    lr_milestones: tuple[int, ...] = (40, 80)
    lr_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 128
    hidden: tuple[int, ...] = (32, 16)
    pair_budget: int = 64
    similar_fraction: float = 0.25
    mining_pool: int = 256
    linear_features: bool = True
    warmup_contrastive: bool = False   # CL starts once detection has produced statuses
    seed: int = 0
    ablation: str = "none"

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}; choose from {sorted(set(ABLATIONS.values()))}")
        object.__setattr__(self, "ablation", ABLATIONS[self.ablation])
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "lr_milestones", tuple(int(m) for m in self.lr_milestones))
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 1 <= self.warmup_epochs <= self.epochs:
            raise ConfigError("warmup_epochs must be in [1, epochs]")
        if self.detect_every < 1:
            raise ConfigError("detect_every must be >= 1")
        if self.eta <= 0 or self.alpha <= 0:
            raise ConfigError("eta and alpha must be positive")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must be in (0, 1)")
        if self.batch_size < 1 or self.mining_pool < 2 or self.pair_budget < 2:
            raise ConfigError("batch_size >= 1, mining_pool >= 2 and pair_budget >= 2 required")
        if not self.hidden:
            raise ConfigError("need at least one hidden layer")

    @property
    def schedule(self) -> StepSchedule:
        return StepSchedule(self.lr, self.lr_milestones, self.lr_factor)

    @property
    def uses_contrastive(self) -> bool:
        return self.ablation not in ("b1", "b2")

    def detection_epochs(self) -> list[int]:
        """1-based epochs after which detection runs (pure warm-up runs have none)."""
        if self.ablation == "c2" or self.warmup_epochs >= self.epochs:
            return []
        epochs = list(range(self.warmup_epochs, self.epochs + 1, self.detect_every))
        return epochs[:1] if self.ablation == "c1" else epochs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["lr_milestones"] = list(self.lr_milestones)
        return d


def apply_ablation(config: TrainConfig, mode: str) -> TrainConfig:
    return replace(config, ablation=mode)


@dataclass
class TrainHistory:
    epochs: list[dict] = field(default_factory=list)
    detections: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    sink: TextIO | None = None

    def add(self, record: dict) -> None:
        (self.epochs if record["kind"] == "epoch" else self.detections).append(record)
        self.records.append(record)
        if self.sink is not None:
            self.sink.write(json.dumps(record, sort_keys=True) + "\n")
            self.sink.flush()

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "TrainHistory":
        h = cls()
        for line in text.splitlines():
            if line.strip():
                h.add(json.loads(line))
        return h


@dataclass
class TrainResult:
    params: NetworkParams
    state: DetectionState
    history: TrainHistory
    active: np.ndarray          # samples still in the training set (b1 removes detected ones)
    train_labels: np.ndarray    # labels used by the softmax at the end (b2 relabels to class C)


class _TrainingView:
    """Everything the optimization path may read; ground-truth noise flags are not here."""
    __slots__ = ("ids", "X", "y", "num_classes")

    def __init__(self, ds: Dataset):
        self.ids, self.X, self.y, self.num_classes = ds.ids, ds.features, ds.labels, ds.num_classes


def effective_gammas(state: DetectionState, mode: str) -> np.ndarray:
    if mode == "a1":
        return np.ones(len(state))
    if mode == "a2":
        return np.where(state.noisy, 0.0, 1.0)
    return state.gamma.copy()


def _minibatch_step(cfg, params, opt, view, batch, pool, labels, gammas, noisy):
    rows = batch if pool is None else np.concatenate([batch, pool])
    with np.errstate(over="ignore", invalid="ignore"):
        trace = forward(params, view.X[rows])
    if not np.all(np.isfinite(trace.logits)):
        return float("nan"), float("nan"), None
    nb = batch.size
    rsl, dlog = reweighted_softmax(trace.logits[:nb], labels[batch], gammas[batch])
    dlogits = np.zeros_like(trace.logits)
    dlogits[:nb] = dlog
    cl, dfeat = 0.0, None
    if pool is not None:
        F = trace.features[nb:]
        pairs = hard_mine(F, noisy[pool], view.y[pool], cfg.pair_budget, cfg.similar_fraction, ids=view.ids[pool])
        if len(pairs):
            loss, gi, gj = contrastive(F[pairs.first], F[pairs.second], pairs.y, cfg.alpha, cfg.squared_hinge)
            cl = float(loss.mean())
            scale = cfg.eta / len(pairs)
            dfeat = np.zeros_like(trace.features)
            np.add.at(dfeat, nb + pairs.first, scale * gi)
            np.add.at(dfeat, nb + pairs.second, scale * gj)
    return rsl, cl, backward(trace, dlogits, dfeat)


def train(config: TrainConfig, train_ds: Dataset, test_ds: Dataset | None = None,
          log_sink: TextIO | None = None,
          on_epoch_end: Callable[[int, NetworkParams, DetectionState], None] | None = None) -> TrainResult:
    cfg = config
    view = _TrainingView(train_ds)
    n, C = view.X.shape[0], view.num_classes
    init_seed, loop_seed, extra_seed = np.random.SeedSequence(cfg.seed).generate_state(3)
    params = init_params([view.X.shape[1], *cfg.hidden, C], int(init_seed))
    params.set_input_normalization(view.X)
    params.linear_features = cfg.linear_features
    opt = OptimizerState.for_params(params, cfg.lr, cfg.momentum, cfg.weight_decay)
    rng = np.random.default_rng(loop_seed)
    state = DetectionState.fresh(n)
    active = np.ones(n, bool)
    labels = view.y.copy()
    detect_at = set(cfg.detection_epochs())
    history = TrainHistory(sink=log_sink)

    for epoch in range(cfg.epochs):
        opt.lr = lr_at(epoch, cfg.schedule)
        gammas = effective_gammas(state, cfg.ablation)
        pool_from = np.flatnonzero(active)
        order = rng.permutation(pool_from)
        sums = np.zeros(3)
        n_batches = 0
        for b, start in enumerate(range(0, order.size, cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            pool = None
            if cfg.uses_contrastive and (cfg.warmup_contrastive or state.iterations > 0 or cfg.ablation == "c2"):
                pool = rng.choice(pool_from, size=min(cfg.mining_pool, pool_from.size), replace=False)
            rsl, cl, grads = _minibatch_step(cfg, params, opt, view, batch, pool, labels, gammas, state.noisy)
            total = rsl + cfg.eta * cl
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch + 1}, batch {b}: rsl={rsl}, cl={cl}, "
                    f"parameter norms={params.norms()}")
            sgd_step(params, opt, grads)
            sums += (rsl, cl, total)
            n_batches += 1
        done = epoch + 1
        rsl, cl, total = (float(v) for v in sums / n_batches)
        record = dict(kind="epoch", epoch=done, lr=float(opt.lr), rsl=rsl, cl=cl, total=total,
                      n_train=int(active.sum()))
        if test_ds is not None:
            record["test_accuracy"] = accuracy_from_logits(forward(params, test_ds.features).logits, test_ds.labels)
        history.add(record)

        if done in detect_at:
            if cfg.ablation == "b2" and state.iterations == 0:
                add_output_unit(params, opt, int(extra_seed))
            snapshot = params.copy()
            features = forward(snapshot, view.X).features
            state = detect(features, view.y, state, cfg.threshold, active=active)
            if cfg.ablation == "b1":
                active &= ~state.noisy
            elif cfg.ablation == "b2":
                labels = np.where(state.noisy, C, view.y)
            history.add(_detection_record(done, state, cfg, active, view, train_ds))
            log.debug("epoch %d detection %d: %d flagged", done, state.iterations, int(state.noisy.sum()))
        if on_epoch_end is not None:
            on_epoch_end(done, params, state)

    return TrainResult(params, state, history, active, labels)


def _detection_record(epoch, state, cfg, active, view, train_ds) -> dict:
    gammas = effective_gammas(state, cfg.ablation)
    # ground truth enters only here, for monitoring
    report = detection_metrics(state.noisy, train_ds.truth_noisy, view.y)
    per_class = [int(np.sum(state.noisy & (view.y == c))) for c in range(view.num_classes)]
    return dict(kind="detection", epoch=epoch, iteration=state.iterations,
                detected_per_class=per_class, n_detected=int(state.noisy.sum()),
                n_active=int(active.sum()),
                tpr=report.tpr, fpr=report.fpr, precision=report.precision,
                gamma_min=float(gammas.min()), gamma_max=float(gammas.max()),
                gamma_mean=float(gammas.mean()))
