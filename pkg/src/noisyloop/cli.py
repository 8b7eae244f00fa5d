"""Command-line entry point.

    noisyloop gen   --out RUN --seed 1 [--rate 0.4 ...]
    noisyloop train --out RUN [--ablation c2 --eta 0.5 ...]
    noisyloop eval  --out RUN [--export-features feats.csv]
    noisyloop sweep --out SWEEP --seed 1 --etas 0.5,1.0,1.5 --rates 0.2,0.4
    noisyloop rerun --manifest RUN/manifest.json --out RUN2

Settings resolve as flags > ``--config`` file > built-in defaults. The config
file holds ``key = value`` lines (``#`` comments allowed) whose keys are the
field names of BenchmarkConfig / TrainConfig. Every run directory gets a
``manifest.json`` holding the fully resolved settings, data hashes and the
package version; ``rerun`` rebuilds a run from it bit for bit.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import BenchmarkConfig, DatasetError, load_csv, make_benchmark, save_csv
from .detection import load_detection_csv, save_detection_csv
from .evaluation import accuracy, detection_metrics, export_features
from .model import ModelError, load_checkpoint, save_checkpoint
from .trainer import ABLATIONS, TrainConfig, train

MANIFEST = "manifest.json"
GEN_FIELDS = {f.name: f for f in dataclasses.fields(BenchmarkConfig)}
TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


class CliError(Exception):
    pass


# ---- config resolution ----

def _convert(field: dataclasses.Field, raw):
    """Coerce a string (or JSON value) to the type of a dataclass field's default."""
    default = field.default
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(default, tuple) else raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise CliError(f"bad value {raw!r} for {field.name}") from None
    return raw


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CliError(f"config file {path} not found")
    out = {}
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in GEN_FIELDS and key not in TRAIN_FIELDS:
            raise CliError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(cls, fields: dict, file_values: dict, flags: dict):
    """Build ``cls`` from defaults, then config-file values, then flags (later wins)."""
    values = {}
    for source in (file_values, flags):
        for key, raw in source.items():
            if key in fields and raw is not None:
                values[key] = _convert(fields[key], raw)
    try:
        return cls(**values)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_manifest(out: Path) -> dict:
    p = out / MANIFEST
    return json.loads(p.read_text()) if p.exists() else {}


def _write_manifest(out: Path, **sections) -> dict:
    manifest = _read_manifest(out)
    manifest.update(sections, version=__version__)
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---- subcommands ----

def _gen_into(out: Path, cfg: BenchmarkConfig) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = make_benchmark(cfg)
    save_csv(train_ds, out / "train.csv")
    save_csv(test_ds, out / "test.csv")
    return dict(config=dataclasses.asdict(cfg), seed=cfg.seed,
                files={"train": "train.csv", "test": "test.csv"},
                sha256={"train": _sha256(out / "train.csv"), "test": _sha256(out / "test.csv")})


def cmd_gen(args) -> int:
    cfg = resolve(BenchmarkConfig, GEN_FIELDS, args.file_values, args.flags)
    out = Path(args.out)
    gen = _gen_into(out, cfg)
    _write_manifest(out, gen=gen)
    print(f"train={out / 'train.csv'}")
    print(f"test={out / 'test.csv'}")
    return 0


def _load_split(out: Path, name: str, num_classes=None):
    path = out / f"{name}.csv"
    if not path.exists():
        raise CliError(f"{path} not found (run `gen` first)")
    return load_csv(path, num_classes)


def _train_into(out: Path, cfg: TrainConfig) -> dict:
    train_ds = _load_split(out, "train")
    test_ds = _load_split(out, "test", train_ds.num_classes)
    with (out / "history.jsonl").open("w") as sink:
        result = train(cfg, train_ds, test_ds, log_sink=sink)
    save_checkpoint(out / "checkpoint.npz", result.params,
                    dict(seed=cfg.seed, epochs=cfg.epochs, ablation=cfg.ablation,
                         num_classes=train_ds.num_classes))
    save_detection_csv(result.state, train_ds.ids, train_ds.labels, out / "detection.csv")
    return dict(config=cfg.to_dict(), seed=cfg.seed,
                data_sha256={"train": _sha256(out / "train.csv"), "test": _sha256(out / "test.csv")},
                files={"history": "history.jsonl", "checkpoint": "checkpoint.npz",
                       "detection": "detection.csv"})


def cmd_train(args) -> int:
    cfg = resolve(TrainConfig, TRAIN_FIELDS, args.file_values, args.flags)
    out = Path(args.out)
    if not out.is_dir():
        raise CliError(f"run directory {out} does not exist")
    _write_manifest(out, train=_train_into(out, cfg))
    last = json.loads((out / "history.jsonl").read_text().splitlines()[-1])
    print(f"history={out / 'history.jsonl'}")
    print(f"checkpoint={out / 'checkpoint.npz'}")
    if "test_accuracy" in last:
        print(f"accuracy={last['test_accuracy']:.6f}")
    return 0


def evaluate_run(out: Path, checkpoint=None, export=None) -> dict:
    ckpt = Path(checkpoint) if checkpoint else out / "checkpoint.npz"
    if not ckpt.exists():
        raise CliError(f"checkpoint {ckpt} not found")
    params, meta = load_checkpoint(ckpt)
    test_ds = _load_split(out, "test")
    if test_ds.dim != params.dims[0]:
        raise CliError(f"checkpoint expects {params.dims[0]}-d inputs but {out / 'test.csv'} is {test_ds.dim}-d")
    if params.num_outputs < test_ds.num_classes:
        raise CliError(f"checkpoint has {params.num_outputs} outputs, test set has {test_ds.num_classes} classes")
    report = {"accuracy": accuracy(params, test_ds)}
    noisy = None
    det_path = out / "detection.csv"
    if det_path.exists() and (out / "train.csv").exists():
        train_ds = _load_split(out, "train")
        ids, _, state = load_detection_csv(det_path)
        if not np.array_equal(ids, train_ds.ids):
            raise CliError(f"{det_path} does not match {out / 'train.csv'}")
        noisy = state.noisy
        m = detection_metrics(noisy, train_ds.truth_noisy, train_ds.labels)
        report.update(tpr=m.tpr, fpr=m.fpr, precision=m.precision, n_detected=int(noisy.sum()),
                      detection_iterations=int(state.iterations))
        if export is not None:
            export_features(params, train_ds, out / export, noisy)
    elif export is not None:
        export_features(params, test_ds, out / export)
    return report


def cmd_eval(args) -> int:
    report = evaluate_run(Path(args.out), args.checkpoint, args.export_features)
    for key, value in report.items():
        print(f"{key}={value:.6f}" if isinstance(value, float) else f"{key}={value}")
    return 0


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    root = Path(args.out)
    for rate in args.rates:
        gen_flags = dict(args.flags, rate=rate)
        gen_cfg = resolve(BenchmarkConfig, GEN_FIELDS, args.file_values, gen_flags)
        for eta in args.etas:
            cell = root / f"rate{rate:g}_eta{eta:g}"
            train_cfg = resolve(TrainConfig, TRAIN_FIELDS, args.file_values, dict(args.flags, eta=eta))
            gen = _gen_into(cell, gen_cfg)
            _write_manifest(cell, gen=gen, train=_train_into(cell, train_cfg))
            rep = evaluate_run(cell)
            print(f"cell={cell.name} rate={rate:g} eta={eta:g} accuracy={rep['accuracy']:.6f} "
                  f"tpr={rep.get('tpr', 0.0):.6f} fpr={rep.get('fpr', 0.0):.6f}")
    return 0


def cmd_rerun(args) -> int:
    src = Path(args.manifest)
    if not src.exists():
        raise CliError(f"manifest {src} not found")
    manifest = json.loads(src.read_text())
    if "gen" not in manifest:
        raise CliError(f"{src} has no data-generation section to rebuild from")
    out = Path(args.out)
    gen_cfg = resolve(BenchmarkConfig, GEN_FIELDS, {}, manifest["gen"]["config"])
    gen = _gen_into(out, gen_cfg)
    if gen["sha256"] != manifest["gen"]["sha256"]:
        raise CliError("regenerated data differs from the manifest's hashes")
    sections = dict(gen=gen)
    if "train" in manifest:
        sections["train"] = _train_into(out, resolve(TrainConfig, TRAIN_FIELDS, {}, manifest["train"]["config"]))
    _write_manifest(out, **sections)
    print(f"rerun={out}")
    return 0


# ---- parser ----

def _rate(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"rate must be in [0, 1), got {v}")
    return v


GEN_FLAGS = [
    ("--classes", "num_classes", int), ("--per-class", "per_class", int), ("--dim", "dim", int),
    ("--separation", "separation", float), ("--sigma", "sigma", float),
    ("--noise", "noise", str), ("--outlier", "outlier", str),
    ("--outlier-sigma", "outlier_sigma", float), ("--outlier-distance", "outlier_distance", float),
    ("--test-fraction", "test_fraction", float),
]
TRAIN_FLAGS = [
    ("--epochs", "epochs", int), ("--warmup", "warmup_epochs", int), ("--detect-every", "detect_every", int),
    ("--eta", "eta", float), ("--alpha", "alpha", float), ("--threshold", "threshold", float),
    ("--lr", "lr", float), ("--batch-size", "batch_size", int), ("--hidden", "hidden", str),
    ("--pair-budget", "pair_budget", int), ("--similar-fraction", "similar_fraction", float),
]


def _add(p, flags):
    for flag, dest, typ in flags:
        p.add_argument(flag, dest=dest, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisyloop", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate train/test CSVs")
    g.add_argument("--out", required=True)
    g.add_argument("--config")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--rate", type=_rate, default=None)
    _add(g, GEN_FLAGS)
    g.set_defaults(func=cmd_gen, flag_names=["seed", "rate"] + [d for _, d, _ in GEN_FLAGS])

    t = sub.add_parser("train", help="train on RUN/train.csv")
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--ablation", choices=sorted(ABLATIONS), default=None)
    _add(t, TRAIN_FLAGS)
    t.set_defaults(func=cmd_train, flag_names=["seed", "ablation"] + [d for _, d, _ in TRAIN_FLAGS])

    e = sub.add_parser("eval", help="accuracy and detection metrics for a trained run")
    e.add_argument("--out", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--export-features", dest="export_features")
    e.set_defaults(func=cmd_eval, flag_names=[])

    s = sub.add_parser("sweep", help="grid over eta and noise rate, one run directory per cell")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--etas", type=_floats, default=[0.5, 0.7, 0.9, 1.0, 1.3, 1.5])
    s.add_argument("--rates", type=_floats, default=[0.4])
    s.add_argument("--ablation", choices=sorted(ABLATIONS), default=None)
    _add(s, GEN_FLAGS)
    _add(s, [f for f in TRAIN_FLAGS if f[1] != "eta"])
    s.set_defaults(func=cmd_sweep, flag_names=["seed", "ablation"] + [d for _, d, _ in GEN_FLAGS]
                   + [d for _, d, _ in TRAIN_FLAGS if d != "eta"])

    r = sub.add_parser("rerun", help="rebuild a run from its manifest")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rerun, flag_names=[])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "command", None) == "sweep" and any(not 0 <= r < 1 for r in args.rates):
            parser.error("rates must be in [0, 1)")
        args.flags = {k: getattr(args, k) for k in args.flag_names}
        args.file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
        return args.func(args)
    except (CliError, DatasetError, ModelError, ValueError, OSError) as exc:
        print(f"noisyloop {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
