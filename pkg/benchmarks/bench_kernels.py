#!/usr/bin/env python3
"""Throughput of the compiled dual coordinate descent epoch vs the
pure-Python twin, across one-vs-rest problem shapes.

Run:  python benchmarks/bench_kernels.py [--epochs 30]
"""

import argparse
import time

import numpy as np

from vortex._kernels import _dualcd_py

try:
    from vortex._kernels import _dualcd
except ImportError:
    _dualcd = None

SHAPES = [
    (200, 25),     # desk-scale synthetic descriptors
    (2000, 65),    # mid-size descriptor sets
    (680, 769),    # one class of a 680-image, 768-feature run
    (4000, 769),   # larger split, same width
]


def make_problem(n_samples, dim, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_samples, dim - 1))
    x = np.ascontiguousarray(np.hstack([x, np.ones((n_samples, 1))]))
    y = np.where(rng.random(n_samples) < 0.5, 1.0, -1.0)
    qii = np.einsum("ij,ij->i", x, x)
    return x, y, qii


def run(epoch_fn, x, y, qii, epochs, seed=1):
    rng = np.random.default_rng(seed)
    alpha = np.zeros(x.shape[0])
    w = np.zeros(x.shape[1])
    started = time.perf_counter()
    for _ in range(epochs):
        order = rng.permutation(x.shape[0]).astype(np.intp)
        epoch_fn(x, y, qii, alpha, w, order, 1.0)
    elapsed = time.perf_counter() - started
    hinge = np.maximum(0.0, 1.0 - y * (x @ w)).sum()
    objective = 0.5 * w @ w + hinge
    return elapsed, objective


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=30)
    args = parser.parse_args()

    print(f"{'samples':>8} {'dim':>5} {'python ep/s':>12} {'compiled ep/s':>14} {'speedup':>8}  objective drift")
    for n_samples, dim in SHAPES:
        x, y, qii = make_problem(n_samples, dim)
        py_time, py_obj = run(_dualcd_py.dual_cd_epoch, x, y, qii, args.epochs)
        if _dualcd is None:
            print(f"{n_samples:>8} {dim:>5} {args.epochs / py_time:>12.1f} {'n/a':>14}")
            continue
        cy_time, cy_obj = run(_dualcd.dual_cd_epoch, x, y, qii, args.epochs)
        drift = abs(py_obj - cy_obj) / max(1.0, abs(py_obj))
        print(
            f"{n_samples:>8} {dim:>5} {args.epochs / py_time:>12.1f} "
            f"{args.epochs / cy_time:>14.1f} {py_time / cy_time:>7.1f}x  {drift:.2e}"
        )
    if _dualcd is None:
        print("compiled kernel unavailable (extension not built)")


if __name__ == "__main__":
    main()
