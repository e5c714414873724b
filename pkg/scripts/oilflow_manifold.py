"""Manifold error and 1-NN test error of plain versus robust KPCA on noisy
copies of a labeled data set (e.g. the 12-dimensional oil flow data).

Inputs are CSV files with one sample per row and the class label last.

    python scripts/oilflow_manifold.py train.csv test.csv --sigmas 0.2 0.3 0.4
"""
import argparse

import numpy as np

from nldreg.cfsolver import ShrinkageParams, robust_kpca, truncated_kpca
from nldreg.io import load_labeled
from nldreg.kernelcore import KernelModel, kernel_matrix
from nldreg.metrics import LabeledData, knn_classify, manifold_error


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--gamma", type=float, default=0.075)
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.2, 0.3, 0.4])
    p.add_argument("--max-rank", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    train, test = load_labeled(args.train), load_labeled(args.test)
    kernel = KernelModel.rbf(args.gamma)
    K_gt = kernel_matrix(train.data, kernel)
    rng = np.random.default_rng(args.seed)
    print(f"{'sigma':>5} {'KPCA err':>9} {'rank':>5} {'ours err':>9} {'tau':>8} {'KPCA 1NN':>9} {'ours 1NN':>9}")
    for sigma in args.sigmas:
        noisy = LabeledData(train.data + sigma * rng.normal(size=train.data.shape), train.labels)
        K = kernel_matrix(noisy.data, kernel)
        err = lambda b: manifold_error(b.gram(), K_gt, normalized=True)  # noqa: E731
        kpca = [(err(b), r, b) for r in range(1, args.max_rank + 1) for b in [truncated_kpca(K, r)]]
        ours = [(err(b), t, b) for t in np.logspace(-3, 2, 41) for b in [robust_kpca(K, ShrinkageParams(t))]]
        e_k, rank, b_k = min(kpca, key=lambda x: x[0])
        e_o, tau, b_o = min(ours, key=lambda x: x[0])
        c_k = knn_classify(b_k, noisy, test.data, kernel, test.labels, K).error_rate
        c_o = knn_classify(b_o, noisy, test.data, kernel, test.labels, K).error_rate
        print(f"{sigma:5.2f} {e_k:9.4f} {rank:5d} {e_o:9.4f} {tau:8.3g} {c_k:9.1%} {c_o:9.1%}", flush=True)


if __name__ == "__main__":
    main()
