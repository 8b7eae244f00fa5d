"""Feature-layer CSV snapshots across training, for plotting how clean and noisy
samples separate. Uses a 2-unit feature layer so no embedding step is needed.

    python scripts/feature_snapshots.py --out snapshots --epochs-at 2,42,100
"""
import argparse
from pathlib import Path

from noisyloop.dataset import BenchmarkConfig, make_benchmark
from noisyloop.evaluation import export_features
from noisyloop.trainer import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs-at", default="2,12,42,100")
    ap.add_argument("--hidden", default="32,2")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    at = {int(v) for v in args.epochs_at.split(",")}
    tr, te = make_benchmark(BenchmarkConfig(seed=args.seed))
    cfg = TrainConfig(seed=args.seed, epochs=max(at), hidden=tuple(int(h) for h in args.hidden.split(",")))

    def snap(epoch, params, state):
        if epoch in at:
            path = out / f"features_epoch{epoch:03d}.csv"
            export_features(params, tr, path, state.noisy)
            print(path)

    train(cfg, tr, te, on_epoch_end=snap)


if __name__ == "__main__":
    main()
