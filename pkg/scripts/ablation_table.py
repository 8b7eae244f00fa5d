"""Clean-test accuracy of the full model and every ablation, mean and std over seeds.

    python scripts/ablation_table.py --seeds 5 [--rate 0.4 --noise open]
"""
import argparse

import numpy as np

from noisyloop.dataset import BenchmarkConfig, make_benchmark
from noisyloop.trainer import TrainConfig, train

MODES = ["none", "a1", "a2", "b1", "b2", "c1", "c2"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--rate", type=float, default=0.4)
    ap.add_argument("--noise", default="open", choices=["open", "closed"])
    ap.add_argument("--outlier-distance", type=float, default=BenchmarkConfig.outlier_distance)
    args = ap.parse_args()
    data = [make_benchmark(BenchmarkConfig(seed=s, rate=args.rate, noise=args.noise,
                                           outlier_distance=args.outlier_distance))
            for s in range(args.seeds)]
    print("mode  acc_mean  acc_sd   final_tpr  final_fpr")
    for mode in MODES:
        acc, tpr, fpr = [], [], []
        for s, (tr, te) in enumerate(data):
            h = train(TrainConfig(seed=s, epochs=args.epochs, ablation=mode), tr, te).history
            acc.append(h.epochs[-1]["test_accuracy"])
            if h.detections:
                tpr.append(h.detections[-1]["tpr"])
                fpr.append(h.detections[-1]["fpr"])
        t = f"{np.mean(tpr):9.3f}  {np.mean(fpr):9.3f}" if tpr else f"{'-':>9}  {'-':>9}"
        print(f"{mode:4}  {np.mean(acc):8.4f}  {np.std(acc, ddof=1):6.4f}  {t}")


if __name__ == "__main__":
    main()
