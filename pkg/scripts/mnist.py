"""MNIST clustering run with the default settings (D=50, L=15, eta=0.04,
lambda=0.75, |S|=2000, batch 256, lr 0.001).

Point --root at a directory holding the IDX files (train-* and/or t10k-*,
optionally gzipped). --n draws a random subset, e.g. 10000 for the
desk-scale check; leave it unset for the full 70,000 images.

    python scripts/mnist.py --root ~/data/mnist --n 10000 --epochs 25 --seeds 0 1 2
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from mixmate import metrics
from mixmate.dataio import load_idx
from mixmate.init import initialize
from mixmate.model import Dataset, HyperParams
from mixmate.objective import cluster_dataset
from mixmate.trainer import TrainConfig, train


def load(root):
    parts = []
    for split in ("train", "t10k"):
        for suffix in ("", ".gz"):
            images = root / f"{split}-images-idx3-ubyte{suffix}"
            labels = root / f"{split}-labels-idx1-ubyte{suffix}"
            if images.exists() and labels.exists():
                parts.append(load_idx(images, labels))
                break
    if not parts:
        raise SystemExit(f"no MNIST IDX files under {root}")
    return Dataset(np.concatenate([d.X for d in parts]), np.concatenate([d.labels for d in parts]))


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--method", default="ssc_lite", choices=["kmeans", "spectral", "ssc_lite"])
    p.add_argument("--eval-every", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="mnist_runs.csv")
    args = p.parse_args()

    full = load(args.root)
    rows = []
    with threadpool_limits(args.threads):
        for seed in args.seeds:
            data = full
            if args.n:
                data = full.subset(np.random.default_rng(seed).choice(full.n, args.n, replace=False))
            hyper = HyperParams(K=10, M=data.M, D=50, lam=0.75, eta=0.04, L=15)
            model, _, _ = initialize(data, hyper, 2000, args.method, seed)
            init = metrics.report(cluster_dataset(data, model).labels, data.labels)
            t0 = time.time()
            model, hist = train(data, model, TrainConfig(epochs=args.epochs, batch_size=256, lr=0.001,
                                                         seed=seed, eval_every=args.eval_every))
            final = metrics.report(cluster_dataset(data, model).labels, data.labels)
            print(f"seed {seed}: init ACC {init['acc']:.4f} -> ACC {final['acc']:.4f} NMI {final['nmi']:.4f} "
                  f"ARI {final['ari']:.4f} ({time.time() - t0:.0f}s)")
            rows.append({"seed": seed, "n": data.n, **{f"init_{k}": v for k, v in init.items()}, **final})
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
