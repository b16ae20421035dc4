"""Sweep the sparsity penalty on the planted-model setup and write a CSV
of mean ACC per lambda (data is always drawn with lambda = 1).

    python scripts/lambda_sweep.py --out sweep.csv --lambdas 0.01 0.1 1 10 100
"""
import argparse

import numpy as np

from mixmate.synthetic import SyntheticSetup, run


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.01, 0.1, 1.0, 10.0, 100.0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--method", default="kmeans", choices=["kmeans", "spectral", "ssc_lite"])
    p.add_argument("--out", default="lambda_sweep.csv")
    args = p.parse_args()

    setup = SyntheticSetup(method=args.method)
    with open(args.out, "w") as f:
        f.write("lambda,acc_mean,acc_std\n")
        for lam in args.lambdas:
            accs = [run(setup, seed, lam=lam).acc for seed in args.seeds]
            f.write(f"{lam!r},{float(np.mean(accs))!r},{float(np.std(accs))!r}\n")
            print(f"lambda {lam:g}: ACC {np.mean(accs):.3f} +- {np.std(accs):.3f}")


if __name__ == "__main__":
    main()
