"""Gini CART trees for binary targets.

Training uses per-feature presorted row orders that are shared across all
trees of a forest; a bootstrap resample is represented by integer row
weights, which yields exactly the splits a materialized resample would.
Thresholds are midpoints between consecutive distinct values; ties between
candidate splits go to the lowest feature index, then the lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _splitmix(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _randbelow(state, bound):
    return np.int64(_splitmix(state) % np.uint64(bound))


@njit(cache=True, nogil=True)
def build_tree(X, y, w, presorted, max_depth, min_split, min_leaf, max_features, seed):
    n, F = X.shape
    m = 0
    for i in range(n):
        if w[i] > 0:
            m += 1
    S = np.empty((F, m), dtype=np.int64)
    for f in range(F):
        k = 0
        for t in range(n):
            r = presorted[f, t]
            if w[r] > 0:
                S[f, k] = r
                k += 1

    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    weight = np.zeros(cap)
    impurity = np.zeros(cap)
    n_rows = np.zeros(cap, dtype=np.int64)
    depth_of = np.zeros(cap, dtype=np.int64)

    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m
    sp = 1
    n_nodes = 1

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.arange(F)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(m, dtype=np.int64)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        nw = 0.0
        pw = 0.0
        for k in range(lo, hi):
            r = S[0, k]
            nw += w[r]
            pw += w[r] * y[r]
        p = pw / nw
        value[node] = p
        weight[node] = nw
        impurity[node] = 2.0 * p * (1.0 - p)
        n_rows[node] = hi - lo
        depth = depth_of[node]
        if depth >= max_depth or nw < min_split or nw < 2 * min_leaf or pw <= 0.0 or pw >= nw:
            continue

        parent_crit = pw * (nw - pw) / nw
        best_crit = parent_crit
        best_f = -1
        best_k = -1
        for f in range(F):
            perm[f] = f
        visited = 0
        drawn = 0
        while drawn < F and visited < max_features:
            j = drawn + _randbelow(state, F - drawn)
            tmp = perm[drawn]
            perm[drawn] = perm[j]
            perm[j] = tmp
            f = perm[drawn]
            drawn += 1
            if X[S[f, lo], f] >= X[S[f, hi - 1], f]:
                continue
            visited += 1
            wl = 0.0
            pl = 0.0
            for k in range(lo, hi - 1):
                r = S[f, k]
                wl += w[r]
                pl += w[r] * y[r]
                if X[S[f, k + 1], f] <= X[r, f]:
                    continue
                wr = nw - wl
                if wl < min_leaf or wr < min_leaf:
                    continue
                pr = pw - pl
                crit = pl * (wl - pl) / wl + pr * (wr - pr) / wr
                if crit < best_crit or (crit == best_crit and best_f >= 0 and f < best_f):
                    best_crit = crit
                    best_f = f
                    best_k = k
        if best_f < 0:
            continue

        xv = X[S[best_f, best_k], best_f]
        xn = X[S[best_f, best_k + 1], best_f]
        thr = 0.5 * (xv + xn)
        if thr >= xn or thr < xv:
            thr = xv
        mid = best_k + 1
        for k in range(lo, hi):
            goes_left[S[best_f, k]] = k < mid
        for f in range(F):
            if f == best_f:
                continue
            a = 0
            b = mid - lo
            for k in range(lo, hi):
                r = S[f, k]
                if goes_left[r]:
                    buf[a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for k in range(lo, hi):
                S[f, k] = buf[k - lo]

        feature[node] = best_f
        threshold[node] = thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        depth_of[lc] = depth + 1
        depth_of[rc] = depth + 1
        st_node[sp] = rc
        st_lo[sp] = mid
        st_hi[sp] = hi
        sp += 1
        st_node[sp] = lc
        st_lo[sp] = lo
        st_hi[sp] = mid
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), weight[:n_nodes].copy(),
            impurity[:n_nodes].copy(), n_rows[:n_nodes].copy(), depth_of[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_tree(X, feature, threshold, left, right, value, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass
class DecisionTree:
    """Flattened node arrays; ``feature == -1`` marks a leaf whose ``value`` is the positive fraction."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    impurity: np.ndarray
    n_rows: np.ndarray
    depth: np.ndarray

    FIELDS = ("feature", "threshold", "left", "right", "value", "weight", "impurity", "n_rows", "depth")

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max()) if len(self.depth) else 0

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.zeros(len(X))
        predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value, out)
        return out

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def same_structure(self, other: "DecisionTree") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.FIELDS)


def gini(p) -> float:
    """Binary Gini impurity of a node with positive fraction ``p``."""
    return 2.0 * p * (1.0 - p)


def fit_tree(X, y, weights, presorted, max_depth, min_split, min_leaf, max_features, seed) -> DecisionTree:
    arrays = build_tree(X, y, weights, presorted, int(max_depth), float(min_split), float(min_leaf),
                        int(max_features), np.uint64(seed))
    return DecisionTree(*arrays)
