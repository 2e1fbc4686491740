"""Time the numba kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--trees 100]

Both paths are always importable; the ``FPMECH_DISABLE_NUMBA`` flag only
changes which one the package calls by default. Every row also checks that
the two paths agree (trees and forest predictions must be bit-identical).
"""

import argparse
import time

import numpy as np

from fpmech import _kernels as K
from fpmech.synthetic import gfp_like_structure


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation on the numba path
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def distance_case(rng):
    s = gfp_like_structure(rng, n_residues=230)
    coords = [r.coords for r in s.residues]
    offsets = np.concatenate([[0], np.cumsum([len(c) for c in coords])]).astype(np.int64)
    return (np.concatenate(coords), offsets)


def propagate_case(rng, n=400, degree=12):
    src = np.repeat(np.arange(n), degree).astype(np.int64)
    dst = rng.integers(0, n, size=src.size).astype(np.int64)
    w = rng.uniform(0, 1, size=src.size)
    return (rng.normal(size=(n, 19)), src, dst, w, rng.uniform(0, 1, size=n), 2, 0.1)


def forest_case(rng, n=200, k=25):
    X = rng.normal(size=(n, k))
    y = X[:, 0] - 0.5 * X[:, 1] + 0.3 * rng.normal(size=n)
    return X, y


def build_forest(builder, X, y, n_trees):
    return [builder(X, y, i, X.shape[1], 2) for i in range(n_trees)]


def pack(trees):
    offs, parts = 0, []
    roots = []
    for f, t, l, r, v in trees:
        parts.append((f, t, np.where(l >= 0, l + offs, -1), np.where(r >= 0, r + offs, -1), v))
        roots.append(offs)
        offs += len(f)
    return [np.concatenate([p[i] for p in parts]) for i in range(5)] + [np.asarray(roots, dtype=np.int64)]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not K.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)

    rows = []
    dc = distance_case(rng)
    same = np.array_equal(K.min_residue_distances_numba(*dc), K.min_residue_distances_numpy(*dc))
    rows.append(("min residue distances (230 res)",
                 best_of(lambda: K.min_residue_distances_numba(*dc), args.repeat),
                 best_of(lambda: K.min_residue_distances_numpy(*dc), args.repeat), same))

    pc = propagate_case(rng)
    diff = np.max(np.abs(K.propagate_numba(*pc) - K.propagate_numpy(*pc)))
    rows.append(("propagate (400 nodes, T=2)",
                 best_of(lambda: K.propagate_numba(*pc), args.repeat),
                 best_of(lambda: K.propagate_numpy(*pc), args.repeat), diff < 1e-12))

    X, y = forest_case(rng)
    nb_trees = build_forest(K.build_tree_numba, X, y, args.trees)
    np_trees = build_forest(K.build_tree_numpy, X, y, args.trees)
    same = all(all(np.array_equal(a, b) for a, b in zip(ta, tb)) for ta, tb in zip(nb_trees, np_trees))
    rows.append((f"build {args.trees} trees (n=200, k=25)",
                 best_of(lambda: build_forest(K.build_tree_numba, X, y, args.trees), args.repeat),
                 best_of(lambda: build_forest(K.build_tree_numpy, X, y, args.trees), args.repeat), same))

    packed = pack(nb_trees)
    Xq = rng.normal(size=(1000, X.shape[1]))
    same = np.array_equal(K.predict_forest_numba(*packed, Xq), K.predict_forest_numpy(*packed, Xq))
    rows.append((f"predict 1000 rows x {args.trees} trees",
                 best_of(lambda: K.predict_forest_numba(*packed, Xq), args.repeat),
                 best_of(lambda: K.predict_forest_numpy(*packed, Xq), args.repeat), same))

    print(f"{'kernel':<38s} {'numba (s)':>10s} {'numpy (s)':>10s} {'speed-up':>9s}  agree")
    for name, t_nb, t_np, ok in rows:
        print(f"{name:<38s} {t_nb:10.5f} {t_np:10.5f} {t_np / t_nb:8.1f}x  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
