"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each row is the best of ``--repeat`` runs; outputs of both backends are
checked for equality before timing.
"""
import argparse
import timeit

import numpy as np

from czoom import _kernels_py

try:
    from czoom import _ckernels
except ImportError:
    _ckernels = None


def random_boxes(rng, n, span=2000.0, lo=8.0, hi=60.0):
    xy = rng.uniform(0, span, size=(n, 2))
    return np.hstack([xy, xy + rng.uniform(lo, hi, size=(n, 2))])


def cases(rng):
    clustered = random_boxes(rng, 400, span=300.0)
    conn = _kernels_py.pairwise_iou(clustered + np.array([-20, -20, 20, 20])) > 0.1
    np.fill_diagonal(conn, False)

    dets = random_boxes(rng, 2000, span=600.0)
    order = np.argsort(-rng.random(2000), kind="stable").astype(np.intp)
    labels = rng.integers(1, 4, 2000).astype(np.int64)

    d, g = random_boxes(rng, 500, span=800.0), random_boxes(rng, 200, span=800.0)
    ious = _kernels_py.iou_matrix(d, g)
    ignore = rng.random(200) < 0.1
    thresholds = np.round(0.5 + 0.05 * np.arange(10), 2)

    return [
        ("pairwise_iou 1000 boxes", "pairwise_iou", (random_boxes(rng, 1000),)),
        ("star_cover 400 nodes", "star_cover", (conn, 1)),
        ("nms_keep 2000 dets", "nms_keep", (dets, order, labels, 0.5)),
        ("greedy_match 500x200 x10", "greedy_match", (ious, ignore, ignore & (rng.random(200) < 0.5), thresholds)),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, list):
        return a == b
    return np.array_equal(a, b)


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if _ckernels is None:
        parser.exit(1, "compiled kernels are not built; run `pip install -e . --no-build-isolation` first\n")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for label, name, call_args in cases(rng):
        py_fn, c_fn = getattr(_kernels_py, name), getattr(_ckernels, name)
        if not same(py_fn(*call_args), c_fn(*call_args)):
            raise SystemExit(f"{name}: backends disagree")
        t_py = min(timeit.repeat(lambda: py_fn(*call_args), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: c_fn(*call_args), number=1, repeat=args.repeat))
        print(f"{label:<28}{1e3 * t_py:>12.2f}{1e3 * t_c:>12.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
