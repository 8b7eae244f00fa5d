"""Labeled feature-vector datasets, synthetic blob generation and label-noise injection.

Ground-truth noise flags (``truth_noisy``) ride along with every dataset so that
detection quality can be scored, but nothing on the training path reads them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    label: int
    truth_noisy: bool


@dataclass(frozen=True, eq=False)
class Dataset:
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    truth_noisy: np.ndarray
    num_classes: int

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        t = np.asarray(self.truth_noisy, dtype=bool)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        n = X.shape[0]
        if n == 0:
            raise DatasetError("no samples")
        if not (ids.shape == y.shape == t.shape == (n,)):
            raise DatasetError("ids, labels and truth_noisy must match the number of rows")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features must be finite")
        if len(np.unique(ids)) != n:
            raise DatasetError("sample ids must be unique")
        if y.min() < 0 or y.max() >= self.num_classes:
            raise DatasetError(f"labels must lie in [0, {self.num_classes})")
        missing = set(range(self.num_classes)) - set(np.unique(y).tolist())
        if missing:
            raise DatasetError(f"classes without samples: {sorted(missing)}")
        for name, arr in (("ids", ids), ("features", X), ("labels", y), ("truth_noisy", t)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.truth_noisy, other.truth_noisy)
        )

    def samples(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield Sample(int(self.ids[i]), self.features[i], int(self.labels[i]), bool(self.truth_noisy[i]))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, mask_or_index) -> "Dataset":
        return Dataset(self.ids[mask_or_index], self.features[mask_or_index],
                       self.labels[mask_or_index], self.truth_noisy[mask_or_index],
                       self.num_classes)

    def replace(self, **changes) -> "Dataset":
        fields = dict(ids=self.ids, features=self.features, labels=self.labels,
                      truth_noisy=self.truth_noisy, num_classes=self.num_classes)
        fields.update(changes)
        return Dataset(**fields)


@dataclass(frozen=True)
class OutlierGenerator:
    """Distribution that open-set noise is drawn from.

    ``blob``: isotropic Gaussian at ``center`` with std ``sigma`` (a class that is
    never in the label set). ``uniform``: uniform over the box ``[low, high]^d``.
    ``damaged``: the replaced sample itself plus Gaussian noise of mean ``shift``
    and std ``sigma``.
    """
    kind: str = "blob"
    center: tuple[float, ...] | None = None
    sigma: float = 1.0
    low: float = -10.0
    high: float = 10.0
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ("blob", "uniform", "damaged"):
            raise DatasetError(f"unknown outlier generator {self.kind!r}")
        if self.kind == "blob" and self.center is None:
            raise DatasetError("blob outlier generator needs a center")
        if self.sigma < 0:
            raise DatasetError("sigma must be non-negative")
        if self.kind == "uniform" and not self.high > self.low:
            raise DatasetError("uniform box needs high > low")

    def draw(self, rng: np.random.Generator, originals: np.ndarray) -> np.ndarray:
        n, d = originals.shape
        if self.kind == "blob":
            center = np.asarray(self.center, dtype=np.float64)
            if center.shape != (d,):
                raise DatasetError(f"outlier center has dim {center.size}, dataset has dim {d}")
            return center + self.sigma * rng.standard_normal((n, d))
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=(n, d))
        return originals + self.shift + self.sigma * rng.standard_normal((n, d))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    rate: float
    seed: int
    outlier: OutlierGenerator | None = None

    def __post_init__(self):
        if self.kind not in ("open_set", "closed_set"):
            raise DatasetError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise DatasetError(f"noise rate must be in [0, 1), got {self.rate}")
        if self.kind == "open_set" and self.outlier is None:
            raise DatasetError("open-set noise requires an outlier generator")


def generate_blobs(num_classes: int, per_class_count: int, dim: int,
                   centers: Sequence[Sequence[float]], sigma: float, seed: int) -> Dataset:
    if per_class_count < 1:
        raise DatasetError("per_class_count must be >= 1")
    if sigma < 0:
        raise DatasetError("sigma must be non-negative")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] != num_classes:
        raise DatasetError(f"need {num_classes} centers, got array of shape {centers.shape}")
    if centers.shape[1] != dim:
        raise DatasetError(f"centers have dim {centers.shape[1]}, expected {dim}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(num_classes), per_class_count)
    X = centers[labels] + sigma * rng.standard_normal((labels.size, dim))
    return Dataset(np.arange(labels.size), X, labels, np.zeros(labels.size, bool), num_classes)


def _noise_count(rate: float, count: int) -> int:
    # guard against 0.4 * 100 landing at 39.999...
    return int(math.floor(rate * count + 1e-9))


def inject_open_set_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    if spec.kind != "open_set":
        raise DatasetError("inject_open_set_noise needs an open_set NoiseSpec")
    rng = np.random.default_rng(spec.seed)
    X = ds.features.copy()
    truth = ds.truth_noisy.copy()
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        n_noisy = _noise_count(spec.rate, members.size)
        if n_noisy == 0:
            continue
        chosen = np.sort(rng.choice(members, size=n_noisy, replace=False))
        X[chosen] = spec.outlier.draw(rng, X[chosen])
        truth[chosen] = True
    return ds.replace(features=X, truth_noisy=truth)


def inject_closed_set_noise(ds: Dataset, rate: float, seed: int) -> Dataset:
    if ds.num_classes < 2:
        raise DatasetError("closed-set noise needs at least 2 classes")
    NoiseSpec("closed_set", rate, seed)  # validates rate
    rng = np.random.default_rng(seed)
    y = ds.labels.copy()
    truth = ds.truth_noisy.copy()
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        n_noisy = _noise_count(rate, members.size)
        if n_noisy == 0:
            continue
        chosen = np.sort(rng.choice(members, size=n_noisy, replace=False))
        # offset in [1, C) guarantees a different label
        offsets = rng.integers(1, ds.num_classes, size=n_noisy)
        y[chosen] = (c + offsets) % ds.num_classes
        truth[chosen] = True
    return ds.replace(labels=y, truth_noisy=truth)


def inject_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    if spec.kind == "open_set":
        return inject_open_set_noise(ds, spec)
    return inject_closed_set_noise(ds, spec.rate, spec.seed)


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; both halves keep the original row order."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    is_test = np.zeros(len(ds), bool)
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        n_test = int(round(test_fraction * members.size))
        if n_test == 0 or n_test == members.size:
            raise DatasetError(f"class {c} with {members.size} samples is too small to stratify")
        is_test[rng.choice(members, size=n_test, replace=False)] = True
    return ds.subset(~is_test), ds.subset(is_test)


def ring_centers(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """Class centers on a circle in the first two coordinates, neighbours ``separation`` apart."""
    if dim < 2 and num_classes > 2:
        raise DatasetError("more than 2 classes need dim >= 2")
    centers = np.zeros((num_classes, dim))
    if dim == 1:
        centers[:, 0] = np.arange(num_classes) * separation
        return centers
    radius = separation / (2 * math.sin(math.pi / num_classes))
    angles = math.pi + 2 * math.pi * np.arange(num_classes) / num_classes
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return np.round(centers, 12)


def default_outlier_center(centers: np.ndarray, separation: float) -> np.ndarray:
    """A held-out center ``separation`` away from the nearest class center, off the class ring."""
    dim = centers.shape[1]
    out = np.zeros(dim)
    if dim == 1:
        out[0] = centers[:, 0].max() + separation
        return out
    # first class sits at angle pi, so the ring's far side above the origin is free for C=2
    radius = np.linalg.norm(centers[0, :2])
    out[1] = radius + separation * math.sqrt(3) / 2 if len(centers) > 2 else separation * math.sqrt(3) / 2
    return out


@dataclass(frozen=True)
class BenchmarkConfig:
    num_classes: int = 2
    per_class: int = 500
    dim: int = 2
    separation: float = 6.0
    sigma: float = 1.0
    noise: str = "open"            # open | closed | none
    rate: float = 0.4
    outlier: str = "blob"          # blob | uniform | damaged
    outlier_sigma: float = 1.0
    outlier_distance: float = 2.0  # held-out center distance, in units of the class separation
    test_fraction: float = 0.2
    seed: int = 0


def make_benchmark(cfg: BenchmarkConfig) -> tuple[Dataset, Dataset]:
    """Blobs, stratified split, then noise injected into the training half only."""
    centers = ring_centers(cfg.num_classes, cfg.dim, cfg.separation * cfg.sigma)
    ds = generate_blobs(cfg.num_classes, cfg.per_class, cfg.dim, centers, cfg.sigma, cfg.seed)
    train, test = split(ds, cfg.test_fraction, cfg.seed + 1)
    if cfg.noise == "none" or cfg.rate == 0:
        return train, test
    if cfg.noise == "open":
        if cfg.outlier == "blob":
            gen = OutlierGenerator("blob", tuple(default_outlier_center(centers, cfg.outlier_distance * cfg.separation * cfg.sigma)),
                                   sigma=cfg.outlier_sigma * cfg.sigma)
        elif cfg.outlier == "uniform":
            span = np.abs(centers).max() + 3 * cfg.separation * cfg.sigma
            gen = OutlierGenerator("uniform", low=-span, high=span)
        else:
            gen = OutlierGenerator("damaged", sigma=cfg.outlier_sigma * cfg.separation * cfg.sigma,
                                   shift=0.2 * cfg.separation * cfg.sigma)
        train = inject_open_set_noise(train, NoiseSpec("open_set", cfg.rate, cfg.seed + 2, gen))
    elif cfg.noise == "closed":
        train = inject_closed_set_noise(train, cfg.rate, cfg.seed + 2)
    else:
        raise DatasetError(f"unknown noise kind {cfg.noise!r}")
    return train, test


def save_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "truth_noisy"] + [f"f{j}" for j in range(ds.dim)])
        for i in range(len(ds)):
            writer.writerow([int(ds.ids[i]), int(ds.labels[i]), int(ds.truth_noisy[i])]
                            + [repr(float(v)) for v in ds.features[i]])


def load_csv(path, num_classes: int | None = None) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: no samples")
    header, body = rows[0], [r for r in rows[1:] if r]
    if header[:3] != ["id", "label", "truth_noisy"] or len(header) < 4:
        raise DatasetError(f"{path}: malformed header {header[:4]}")
    dim = len(header) - 3
    if header[3:] != [f"f{j}" for j in range(dim)]:
        raise DatasetError(f"{path}: feature columns must be f0..f{dim - 1}")
    if not body:
        raise DatasetError(f"{path}: no samples")
    ids, labels, truth = [], [], []
    X = np.empty((len(body), dim))
    for r, row in enumerate(body, start=2):
        if len(row) != dim + 3:
            raise DatasetError(f"{path}:{r}: expected {dim + 3} fields, got {len(row)}")
        try:
            ids.append(int(row[0]))
            labels.append(int(row[1]))
            if row[2] not in ("0", "1"):
                raise ValueError(row[2])
            truth.append(row[2] == "1")
            X[r - 2] = [float(v) for v in row[3:]]
        except ValueError as exc:
            raise DatasetError(f"{path}:{r}: non-numeric field ({exc})") from None
    if num_classes is None:
        num_classes = max(labels) + 1
    return Dataset(np.array(ids), X, np.array(labels), np.array(truth), num_classes)
