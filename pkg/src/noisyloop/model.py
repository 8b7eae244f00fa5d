"""Fully connected ReLU network with hand-written backprop and SGD with momentum.

Weights are stored as (fan_in, fan_out) matrices so a batch ``X`` of shape
(n, fan_in) maps to ``X @ W + b``. The feature layer is the activation of the
last hidden layer; logits come from one linear layer on top of it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass
class NetworkParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    # fixed input transform (x - shift) / scale, not trained
    input_shift: np.ndarray | None = None
    input_scale: float = 1.0
    linear_features: bool = False

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or len(self.weights) < 2:
            raise ModelError("need at least one hidden layer and matching weight/bias lists")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ModelError(f"layer {l}: weight {W.shape} and bias {b.shape} disagree")
            if l and W.shape[0] != self.weights[l - 1].shape[1]:
                raise ModelError(f"layer {l}: input dim {W.shape[0]} != previous output dim")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def feature_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def num_outputs(self) -> int:
        return self.weights[-1].shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def copy(self) -> "NetworkParams":
        shift = None if self.input_shift is None else self.input_shift.copy()
        return NetworkParams([W.copy() for W in self.weights], [b.copy() for b in self.biases],
                             shift, self.input_scale, self.linear_features)

    def set_input_normalization(self, X) -> None:
        """Center each input coordinate and divide by one global std (keeps geometry isotropic)."""
        X = np.asarray(X, dtype=np.float64)
        self.input_shift = X.mean(axis=0)
        sd = float(np.sqrt(np.mean((X - self.input_shift) ** 2)))
        self.input_scale = sd if sd > 0 else 1.0

    def norms(self) -> list[float]:
        return [float(np.linalg.norm(a)) for a in self.arrays()]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]


@dataclass
class ForwardTrace:
    params: NetworkParams
    activations: list[np.ndarray]     # inputs to each layer: X, h1, ..., h_last
    preacts: list[np.ndarray]         # hidden pre-activations z1, ..., z_last
    logits: np.ndarray

    @property
    def features(self) -> np.ndarray:
        return self.activations[-1]


def init_params(layer_dims: Sequence[int], seed: int) -> NetworkParams:
    """He-normal weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 3:
        raise ModelError(f"layer dims {dims}: need input, at least one hidden layer and output")
    if any(d < 1 for d in dims):
        raise ModelError(f"layer dims {dims}: all widths must be positive")
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((a, b)) * np.sqrt(2.0 / a) for a, b in zip(dims[:-1], dims[1:])]
    return NetworkParams(weights, [np.zeros(b) for b in dims[1:]])


def forward(params: NetworkParams, X) -> ForwardTrace:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.dims[0]:
        raise ModelError(f"batch of shape {X.shape} does not match input dim {params.dims[0]}")
    if not np.all(np.isfinite(X)):
        raise ModelError("NaN or infinite value in inputs")
    if params.input_shift is not None or params.input_scale != 1.0:
        shift = 0.0 if params.input_shift is None else params.input_shift
        X = (X - shift) / params.input_scale
    acts, pre = [X], []
    h = X
    last = len(params.weights) - 2
    for l, (W, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        z = h @ W + b
        h = z if (l == last and params.linear_features) else np.maximum(z, 0.0)
        pre.append(z)
        acts.append(h)
    logits = h @ params.weights[-1] + params.biases[-1]
    return ForwardTrace(params, acts, pre, logits)


def backward(trace: ForwardTrace, dlogits, dfeatures=None) -> Gradients:
    """Parameter gradients given upstream gradients at the logits and at the features.

    Both paths meet at the feature layer, where their gradients are summed.
    """
    params = trace.params
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != trace.logits.shape:
        raise ModelError(f"dlogits shape {dlogits.shape} != logits shape {trace.logits.shape}")
    if dfeatures is not None:
        dfeatures = np.asarray(dfeatures, dtype=np.float64)
        if dfeatures.shape != trace.features.shape:
            raise ModelError(f"dfeatures shape {dfeatures.shape} != features shape {trace.features.shape}")
    L = len(params.weights)
    gW: list[np.ndarray] = [None] * L
    gb: list[np.ndarray] = [None] * L
    gW[-1] = trace.activations[-1].T @ dlogits
    gb[-1] = dlogits.sum(axis=0)
    dh = dlogits @ params.weights[-1].T
    if dfeatures is not None:
        dh = dh + dfeatures
    for l in range(L - 2, -1, -1):
        dz = dh if (l == L - 2 and params.linear_features) else dh * (trace.preacts[l] > 0)
        gW[l] = trace.activations[l].T @ dz
        gb[l] = dz.sum(axis=0)
        if l:
            dh = dz @ params.weights[l].T
    return Gradients(gW, gb)


@dataclass
class OptimizerState:
    velocity: list[np.ndarray]
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4

    @classmethod
    def for_params(cls, params: NetworkParams, lr=0.01, momentum=0.9, weight_decay=1e-4) -> "OptimizerState":
        return cls([np.zeros_like(a) for a in params.arrays()], lr, momentum, weight_decay)


def sgd_step(params: NetworkParams, opt: OptimizerState, grads: Gradients) -> NetworkParams:
    """In-place update: v <- momentum*v + (g + wd*w); w <- w - lr*v."""
    arrays, garrays = params.arrays(), grads.arrays()
    if len(garrays) != len(arrays) or len(opt.velocity) != len(arrays):
        raise ModelError("gradient / velocity structure does not match parameters")
    for w, g, v in zip(arrays, garrays, opt.velocity):
        if g.shape != w.shape or v.shape != w.shape:
            raise ModelError(f"shape mismatch: param {w.shape}, grad {g.shape}, velocity {v.shape}")
        if not np.all(np.isfinite(g)):
            raise ModelError("non-finite gradient")
    for w, g, v in zip(arrays, garrays, opt.velocity):
        v *= opt.momentum
        v += g + opt.weight_decay * w
        w -= opt.lr * v
    return params


@dataclass(frozen=True)
class StepSchedule:
    base_lr: float = 0.01
    milestones: tuple[int, ...] = (40, 80)
    factor: float = 0.1


def lr_at(epoch: int, schedule: StepSchedule = StepSchedule()) -> float:
    """Learning rate for 0-based ``epoch``."""
    if epoch < 0:
        raise ModelError("epoch must be non-negative")
    drops = sum(epoch >= m for m in schedule.milestones)
    return schedule.base_lr * schedule.factor ** drops


def add_output_unit(params: NetworkParams, opt: OptimizerState | None, seed: int) -> None:
    """Grow the output layer by one class in place (new unit initialized like the rest)."""
    rng = np.random.default_rng(seed)
    fan_in = params.feature_dim
    col = rng.standard_normal((fan_in, 1)) * np.sqrt(2.0 / fan_in)
    params.weights[-1] = np.hstack([params.weights[-1], col])
    params.biases[-1] = np.append(params.biases[-1], 0.0)
    if opt is not None:
        opt.velocity[-2] = np.hstack([opt.velocity[-2], np.zeros((fan_in, 1))])
        opt.velocity[-1] = np.append(opt.velocity[-1], 0.0)


def save_checkpoint(path, params: NetworkParams, manifest: dict) -> None:
    """npz with W0, b0, W1, b1, ... and a JSON manifest (format version, dims, seed, epoch...)."""
    meta = dict(manifest, format_version=CHECKPOINT_VERSION, layer_dims=params.dims,
                input_scale=params.input_scale, linear_features=params.linear_features)
    arrays = {}
    if params.input_shift is not None:
        arrays["input_shift"] = params.input_shift
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{l}"] = W
        arrays[f"b{l}"] = b
    with Path(path).open("wb") as fh:
        np.savez(fh, manifest=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[NetworkParams, dict]:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"checkpoint {path} not found")
    with np.load(path, allow_pickle=False) as data:
        if "manifest" not in data:
            raise ModelError(f"{path}: not a checkpoint (no manifest)")
        meta = json.loads(str(data["manifest"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ModelError(f"{path}: unsupported checkpoint version {meta.get('format_version')}")
        n_layers = len(meta["layer_dims"]) - 1
        try:
            weights = [data[f"W{l}"] for l in range(n_layers)]
            biases = [data[f"b{l}"] for l in range(n_layers)]
        except KeyError as exc:
            raise ModelError(f"{path}: missing array {exc}") from None
        shift = data["input_shift"] if "input_shift" in data else None
    params = NetworkParams(weights, biases, shift, float(meta.get("input_scale", 1.0)),
                           bool(meta.get("linear_features", False)))
    if params.dims != meta["layer_dims"]:
        raise ModelError(f"{path}: stored dims {params.dims} disagree with manifest {meta['layer_dims']}")
    return params, meta
