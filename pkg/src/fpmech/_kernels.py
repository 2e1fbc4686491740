"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``FPMECH_DISABLE_NUMBA=1`` before import to force the numpy path. Both
implementations of every kernel are importable by name (``*_numba`` and
``*_numpy``) so they can be compared directly; the unsuffixed names are the
ones the rest of the package calls.

The tree builder draws its randomness from a splitmix64 stream implemented
identically in both paths and accumulates every sum in the same sequential
order, so a given seed grows bit-identical trees on either path.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.spatial.distance import cdist

_FLAG = os.environ.get("FPMECH_DISABLE_NUMBA", "").strip().lower()
try:  # pragma: no cover - import guard
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in {"1", "true", "yes", "on"}

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0


def _njit(fn):
    if numba is None:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# residue-residue minimum atom distance


def _min_residue_distances_loop(coords, offsets):
    m = offsets.shape[0] - 1
    out = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            best = np.inf
            for i in range(offsets[a], offsets[a + 1]):
                xi = coords[i, 0]
                yi = coords[i, 1]
                zi = coords[i, 2]
                for j in range(offsets[b], offsets[b + 1]):
                    dx = xi - coords[j, 0]
                    dy = yi - coords[j, 1]
                    dz = zi - coords[j, 2]
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 < best:
                        best = d2
            d = np.sqrt(best)
            out[a, b] = d
            out[b, a] = d
    return out


def min_residue_distances_numpy(coords: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Pairwise min-atom distances between residues packed as ``coords[offsets[k]:offsets[k+1]]``."""
    m = len(offsets) - 1
    if m == 0:
        return np.zeros((0, 0))
    full = cdist(coords, coords, "sqeuclidean")
    starts = np.asarray(offsets[:-1])
    per_row = np.minimum.reduceat(full, starts, axis=0)
    block = np.minimum.reduceat(per_row, starts, axis=1)
    out = np.sqrt(block)
    np.fill_diagonal(out, 0.0)
    return out


min_residue_distances_numba = _njit(_min_residue_distances_loop)


# ---------------------------------------------------------------------------
# chromophore-local propagation


def _propagate_loop(h0, src, dst, w, alpha, steps, damping):
    n, f = h0.shape
    h = h0.copy()
    for _ in range(steps):
        acc = np.zeros((n, f))
        wsum = np.zeros(n)
        for e in range(src.shape[0]):
            u = src[e]
            v = dst[e]
            we = w[e]
            wsum[u] += we
            wsum[v] += we
            for k in range(f):
                acc[u, k] += we * h[v, k]
                acc[v, k] += we * h[u, k]
        nxt = np.empty((n, f))
        for u in range(n):
            den = 1.0 + damping * alpha[u] * wsum[u]
            for k in range(f):
                nxt[u, k] = (h[u, k] + alpha[u] * acc[u, k]) / den
        h = nxt
    return h


def propagate_numpy(h0, src, dst, w, alpha, steps=2, damping=0.1):
    """Synchronous update ``h' = (h + a_u sum_v w_uv h_v) / (1 + damping a_u sum_v w_uv)``.

    Edges are undirected and given once as ``(src[e], dst[e], w[e])``.
    """
    n = h0.shape[0]
    W = np.zeros((n, n))
    np.add.at(W, (src, dst), w)
    np.add.at(W, (dst, src), w)
    wsum = W.sum(axis=1)
    den = 1.0 + damping * alpha * wsum
    h = np.array(h0, dtype=np.float64, copy=True)
    for _ in range(steps):
        h = (h + alpha[:, None] * (W @ h)) / den[:, None]
    return h


propagate_numba = _njit(_propagate_loop)


# ---------------------------------------------------------------------------
# extremely randomized regression trees


def _splitmix_py(state):
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z ^= z >> 31
    return state, (z >> 11) * _INV53


if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _splitmix_nb(state):
        state = state + np.uint64(_GOLDEN)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        return state, float(z >> np.uint64(11)) * _INV53

    @numba.njit(cache=True, nogil=True)
    def _build_tree_nb(X, y, seed, max_features, min_samples_split):
        n, k = X.shape
        cap = 2 * n + 1
        feature = np.full(cap, -1, dtype=np.int64)
        threshold = np.zeros(cap)
        left = np.full(cap, -1, dtype=np.int64)
        right = np.full(cap, -1, dtype=np.int64)
        value = np.zeros(cap)
        idx = np.arange(n)
        buf = np.empty(n, dtype=np.int64)
        lo = np.empty(k)
        hi = np.empty(k)
        nonconst = np.empty(k, dtype=np.int64)
        stack_node = np.empty(cap, dtype=np.int64)
        stack_start = np.empty(cap, dtype=np.int64)
        stack_end = np.empty(cap, dtype=np.int64)
        state = np.uint64(seed)
        n_nodes = 1
        top = 0
        stack_node[0] = 0
        stack_start[0] = 0
        stack_end[0] = n
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            s = stack_start[top]
            e = stack_end[top]
            m = e - s
            ymin = y[idx[s]]
            ymax = ymin
            for t in range(s + 1, e):
                yt = y[idx[t]]
                if yt < ymin:
                    ymin = yt
                if yt > ymax:
                    ymax = yt
            if ymin == ymax:
                value[node] = ymin
                continue
            total = 0.0
            for t in range(s, e):
                total += y[idx[t]]
            if m < min_samples_split:
                value[node] = total / m
                continue
            n_nc = 0
            for f in range(k):
                a = X[idx[s], f]
                b = a
                for t in range(s + 1, e):
                    xv = X[idx[t], f]
                    if xv < a:
                        a = xv
                    if xv > b:
                        b = xv
                lo[f] = a
                hi[f] = b
                if b > a:
                    nonconst[n_nc] = f
                    n_nc += 1
            if n_nc == 0:
                value[node] = total / m
                continue
            n_cand = n_nc if max_features >= n_nc else max_features
            if n_cand < n_nc:
                for t in range(n_cand):
                    state, u = _splitmix_nb(state)
                    j = t + int(u * (n_nc - t))
                    tmp = nonconst[t]
                    nonconst[t] = nonconst[j]
                    nonconst[j] = tmp
            best_score = -np.inf
            best_f = -1
            best_cut = 0.0
            for c in range(n_cand):
                f = nonconst[c]
                state, u = _splitmix_nb(state)
                cut = lo[f] + u * (hi[f] - lo[f])
                if cut >= hi[f]:
                    cut = lo[f]
                sl = 0.0
                nl = 0
                for t in range(s, e):
                    if X[idx[t], f] <= cut:
                        sl += y[idx[t]]
                        nl += 1
                sr = total - sl
                nr = m - nl
                score = sl * sl / nl + sr * sr / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_cut = cut
            nl = 0
            nr = 0
            for t in range(s, e):
                i = idx[t]
                if X[i, best_f] <= best_cut:
                    idx[s + nl] = i
                    nl += 1
                else:
                    buf[nr] = i
                    nr += 1
            for t in range(nr):
                idx[s + nl + t] = buf[t]
            feature[node] = best_f
            threshold[node] = best_cut
            lch = n_nodes
            rch = n_nodes + 1
            n_nodes += 2
            left[node] = lch
            right[node] = rch
            stack_node[top] = rch
            stack_start[top] = s + nl
            stack_end[top] = e
            top += 1
            stack_node[top] = lch
            stack_start[top] = s
            stack_end[top] = s + nl
            top += 1
        return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]

    @numba.njit(cache=True, nogil=True)
    def _predict_forest_nb(feature, threshold, left, right, value, roots, X):
        n = X.shape[0]
        n_trees = roots.shape[0]
        out = np.empty(n)
        for i in range(n):
            ref = 0.0
            acc = 0.0
            for t in range(n_trees):
                node = roots[t]
                while left[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                if t == 0:
                    ref = value[node]
                else:
                    acc += value[node] - ref
            out[i] = ref + acc / n_trees
        return out

else:  # pragma: no cover
    _build_tree_nb = None
    _predict_forest_nb = None


def build_tree_numpy(X, y, seed, max_features, min_samples_split):
    """Grow one extremely randomized regression tree (numpy path).

    Returns ``(feature, threshold, left, right, value)`` node arrays; leaves
    have ``left == -1``. Samples with ``x <= threshold`` go left.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, k = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    state = int(seed) & _MASK64
    root = new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        ymin = yn.min()
        if ymin == yn.max():
            value[node] = float(ymin)
            continue
        m = len(idx)
        # sequential sums (cumsum) keep every score bit-identical to the numba loop
        total = float(np.cumsum(yn)[-1])
        if m < min_samples_split:
            value[node] = total / m
            continue
        Xn = X[idx]
        lo = Xn.min(axis=0)
        hi = Xn.max(axis=0)
        nonconst = np.flatnonzero(hi > lo)
        n_nc = len(nonconst)
        if n_nc == 0:
            value[node] = total / m
            continue
        n_cand = min(n_nc, max_features)
        if n_cand < n_nc:
            nonconst = nonconst.copy()
            for t in range(n_cand):
                state, u = _splitmix_py(state)
                j = t + int(u * (n_nc - t))
                nonconst[t], nonconst[j] = nonconst[j], nonconst[t]
        cand = nonconst[:n_cand]
        draws = np.empty(n_cand)
        for c in range(n_cand):
            state, draws[c] = _splitmix_py(state)
        cuts = lo[cand] + draws * (hi[cand] - lo[cand])
        cuts = np.where(cuts >= hi[cand], lo[cand], cuts)
        go_left = Xn[:, cand] <= cuts
        nl = go_left.sum(axis=0)
        sl = np.cumsum(np.where(go_left, yn[:, None], 0.0), axis=0)[-1]
        sr = total - sl
        scores = sl * sl / nl + sr * sr / (m - nl)
        best = int(np.argmax(scores))
        f = int(cand[best])
        mask = go_left[:, best]
        feature[node] = f
        threshold[node] = float(cuts[best])
        lch = new_node()
        rch = new_node()
        left[node] = lch
        right[node] = rch
        stack.append((rch, idx[~mask]))
        stack.append((lch, idx[mask]))
    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


def build_tree_numba(X, y, seed, max_features, min_samples_split):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _build_tree_nb(X, y, np.uint64(int(seed) & _MASK64), int(max_features), int(min_samples_split))


def predict_forest_numpy(feature, threshold, left, right, value, roots, X):
    """Mean of tree outputs, accumulated tree by tree relative to the first tree."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    rows = np.arange(n)
    ref = None
    acc = np.zeros(n)
    for t, root in enumerate(roots):
        node = np.full(n, root, dtype=np.int64)
        active = left[node] >= 0
        while active.any():
            cur = node[active]
            go_left = X[rows[active], feature[cur]] <= threshold[cur]
            node[active] = np.where(go_left, left[cur], right[cur])
            active = left[node] >= 0
        leaf = value[node]
        if t == 0:
            ref = leaf
        else:
            acc += leaf - ref
    return ref + acc / len(roots)


def predict_forest_numba(feature, threshold, left, right, value, roots, X):
    return _predict_forest_nb(
        feature, threshold, left, right, value, np.asarray(roots, dtype=np.int64),
        np.ascontiguousarray(X, dtype=np.float64),
    )


if USE_NUMBA:
    min_residue_distances = min_residue_distances_numba
    propagate = propagate_numba
    build_tree = build_tree_numba
    predict_forest = predict_forest_numba
else:
    min_residue_distances = min_residue_distances_numpy
    propagate = propagate_numpy
    build_tree = build_tree_numpy
    predict_forest = predict_forest_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
