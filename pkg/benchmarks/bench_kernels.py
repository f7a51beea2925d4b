"""Benchmark the hot kernels: numba-compiled vs interpreted fallback.

Grows a real-vs-shuffled forest and extracts subtree depth statistics on
a planted table under both backends, confirming bit-identical outputs
along the way. The interpreted path is what you get with
FOUNDMINE_DISABLE_NUMBA=1 (or without numba installed).

Usage:
    python benchmarks/bench_kernels.py [--rows 2000] [--trees 50] [--attrs 6]
"""

import argparse
import time

import numpy as np

from foundmine import _kernels, synthgen, urf


def time_backend(backend, table, cfg, repeats):
    _kernels.set_backend(backend)
    # pay JIT compilation outside the timed region
    _kernels.kernels()["warmup"]()
    grow_times = []
    stat_times = []
    forest = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        forest = urf.grow_forest(table, cfg)
        t1 = time.perf_counter()
        stats = urf.depth_statistics(forest)
        t2 = time.perf_counter()
        grow_times.append(t1 - t0)
        stat_times.append(t2 - t1)
    return min(grow_times), min(stat_times), forest, stats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--attrs", type=int, default=6)
    parser.add_argument("--trees", type=int, default=50)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--python-trees", type=int, default=None,
                        help="tree count for the interpreted run (defaults to --trees)")
    args = parser.parse_args()

    table, _ = synthgen.plant_latent_dims(
        args.rows, args.attrs, 3, args.attrs // 2, seed=1
    )
    if "numba" not in _kernels.available_backends():
        print("numba backend unavailable; nothing to compare")
        return

    cfg = urf.ForestConfig(n_trees=args.trees, mtry=args.attrs, seed=9)
    nb_grow, nb_stat, nb_forest, nb_stats = time_backend("numba", table, cfg, args.repeats)

    py_trees = args.python_trees or args.trees
    py_cfg = urf.ForestConfig(n_trees=py_trees, mtry=args.attrs, seed=9)
    py_grow, py_stat, py_forest, py_stats = time_backend("python", table, py_cfg, 1)
    # normalize to per-tree cost before comparing
    nb_per_tree = nb_grow / args.trees
    py_per_tree = py_grow / py_trees

    identical = all(
        np.array_equal(a.attr, b.attr)
        and np.array_equal(a.mask, b.mask)
        and np.array_equal(a.size, b.size)
        for a, b in zip(nb_forest.trees, py_forest.trees)
    )

    print(f"table: {args.rows} rows x {args.attrs} attrs; forest of {args.trees} trees")
    print(f"{'phase':<22}{'numba':>12}{'python':>12}{'speedup':>10}")
    print(
        f"{'grow (per tree)':<22}{nb_per_tree * 1e3:>10.2f}ms{py_per_tree * 1e3:>10.2f}ms"
        f"{py_per_tree / nb_per_tree:>9.1f}x"
    )
    print(
        f"{'depth stats (forest)':<22}{nb_stat * 1e3:>10.2f}ms{py_stat * 1e3:>10.2f}ms"
        f"{py_stat / nb_stat:>9.1f}x"
    )
    print(f"outputs bit-identical across backends: {identical}")
    _kernels.set_backend("numba")


if __name__ == "__main__":
    main()
