"""Accuracy and final detection TPR across the contrastive weight eta and the noise rate.

    python scripts/eta_sweep.py --etas 0.5,0.7,0.9,1.0,1.3,1.5 --rates 0.2,0.4
"""
import argparse

import numpy as np

from noisyloop.dataset import BenchmarkConfig, make_benchmark
from noisyloop.trainer import TrainConfig, train


def floats(text):
    return [float(v) for v in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--etas", type=floats, default=[0.5, 0.7, 0.9, 1.0, 1.3, 1.5])
    ap.add_argument("--rates", type=floats, default=[0.2, 0.4])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=100)
    args = ap.parse_args()
    print("rate  eta   acc_mean  tpr_mean")
    for rate in args.rates:
        data = [make_benchmark(BenchmarkConfig(seed=s, rate=rate)) for s in range(args.seeds)]
        for eta in args.etas:
            acc, tpr = [], []
            for s, (tr, te) in enumerate(data):
                h = train(TrainConfig(seed=s, eta=eta, epochs=args.epochs), tr, te).history
                acc.append(h.epochs[-1]["test_accuracy"])
                tpr.append(h.detections[-1]["tpr"])
            print(f"{rate:4.2f}  {eta:4.2f}  {np.mean(acc):8.4f}  {np.mean(tpr):8.3f}")


if __name__ == "__main__":
    main()
