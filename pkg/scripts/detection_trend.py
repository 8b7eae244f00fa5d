"""Detection TPR/FPR per detection round, averaged over seeds (the "detection improves
over iterations" trend). Also prints the single-pass pcLOF ceiling on input coordinates.

    python scripts/detection_trend.py --seeds 5 --outlier-distance 2.0
"""
import argparse

import numpy as np

from noisyloop.dataset import BenchmarkConfig, make_benchmark
from noisyloop.detection import DetectionState, detect
from noisyloop.trainer import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--outlier-distance", type=float, default=BenchmarkConfig.outlier_distance)
    ap.add_argument("--similar-fraction", type=float, default=TrainConfig.similar_fraction)
    ap.add_argument("--warmup-contrastive", action="store_true")
    args = ap.parse_args()

    tpr, fpr, ceiling = [], [], []
    for s in range(args.seeds):
        tr, te = make_benchmark(BenchmarkConfig(seed=s, outlier_distance=args.outlier_distance))
        once = detect(tr.features, tr.labels, DetectionState.fresh(len(tr)))
        ceiling.append(np.sum(once.noisy & tr.truth_noisy) / tr.truth_noisy.sum())
        cfg = TrainConfig(seed=s, epochs=args.epochs, similar_fraction=args.similar_fraction,
                          warmup_contrastive=args.warmup_contrastive)
        dets = train(cfg, tr, te).history.detections
        tpr.append([d["tpr"] for d in dets])
        fpr.append([d["fpr"] for d in dets])
    epochs = TrainConfig(epochs=args.epochs).detection_epochs()
    print(f"input-space single pass TPR: {np.mean(ceiling):.3f}")
    print("epoch  tpr_mean  tpr_sd  fpr_mean")
    for i, ep in enumerate(epochs):
        col = np.array([t[i] for t in tpr])
        print(f"{ep:5d}  {col.mean():8.3f}  {col.std():6.3f}  {np.mean([f[i] for f in fpr]):8.3f}")


if __name__ == "__main__":
    main()
