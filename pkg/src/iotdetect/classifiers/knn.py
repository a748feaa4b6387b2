"""k nearest neighbors on a kd-tree, with an exact linear scan twin.

The tree is built over the distinct training rows (duplicates are collapsed
into groups of original indices) and every node stores its bounding box, so
the pruning bound is the distance from the query to the box: path
independent, never an overestimate, and tight enough to keep queries fast.

Neighbor selection is exact and fully deterministic: candidates are ranked
by (squared distance, original row index) lexicographically, and a subtree
is only skipped when its bound strictly exceeds the current kth best
distance, so distance ties are always resolved toward smaller indices.
linear_scan_neighbors implements the same ranking by brute force; the two
routes must agree query for query, which the test suite exercises.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, ArityMismatch, TooFewRows
from ..features import fit_scaler

LEAF_SIZE = 32
_HUGE_IDX = np.iinfo(np.int64).max


def _build_tree(U: np.ndarray, leaf_size: int = LEAF_SIZE):
    """Median split kd-tree over unique rows, stored as flat arrays."""
    u, d = U.shape
    perm = np.arange(u, dtype=np.int64)

    dims, splits, lefts, rights, los, his = [], [], [], [], [], []
    box_lo, box_hi = [], []

    def new_node():
        dims.append(-1)
        splits.append(0.0)
        lefts.append(-1)
        rights.append(-1)
        los.append(0)
        his.append(0)
        box_lo.append(None)
        box_hi.append(None)
        return len(dims) - 1

    stack = [(0, u, new_node())]
    while stack:
        lo, hi, node = stack.pop()
        pts = U[perm[lo:hi]]
        box_lo[node] = pts.min(axis=0)
        box_hi[node] = pts.max(axis=0)
        m = hi - lo
        spread = box_hi[node] - box_lo[node]
        if m <= leaf_size or float(spread.max()) == 0.0:
            los[node] = lo
            his[node] = hi
            continue
        # median cut; both sides stay non-empty whatever the duplicate
        # structure, and pruning uses child boxes, not the cut value
        dim = int(np.argmax(spread))
        mid = m // 2
        vals = U[perm[lo:hi], dim]
        part = np.argpartition(vals, mid)
        perm[lo:hi] = perm[lo:hi][part]
        split = float(U[perm[lo + mid], dim])
        dims[node] = dim
        splits[node] = split
        left = new_node()
        right = new_node()
        lefts[node] = left
        rights[node] = right
        stack.append((lo + mid, hi, right))
        stack.append((lo, lo + mid, left))

    return (
        np.array(dims, dtype=np.int64),
        np.array(splits, dtype=np.float64),
        np.array(lefts, dtype=np.int64),
        np.array(rights, dtype=np.int64),
        np.array(los, dtype=np.int64),
        np.array(his, dtype=np.int64),
        np.vstack(box_lo).astype(np.float64),
        np.vstack(box_hi).astype(np.float64),
        perm,
    )


@njit(cache=True)
def _box_dist(box_lo, box_hi, node, q):
    acc = 0.0
    for dd in range(q.shape[0]):
        v = q[dd]
        lo = box_lo[node, dd]
        hi = box_hi[node, dd]
        if v < lo:
            diff = lo - v
            acc += diff * diff
        elif v > hi:
            diff = v - hi
            acc += diff * diff
    return acc


@njit(cache=True)
def _query_one(dims, splits, lefts, rights, los, his, box_lo, box_hi,
               perm, U, goff, gidx, q, out_d, out_i, stack_node, stack_dist):
    k = out_d.shape[0]
    for j in range(k):
        out_d[j] = np.inf
        out_i[j] = _HUGE_IDX

    stack_node[0] = 0
    stack_dist[0] = _box_dist(box_lo, box_hi, 0, q)
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        if stack_dist[top] > out_d[k - 1]:
            continue
        while dims[node] >= 0:
            left = lefts[node]
            right = rights[node]
            dl = _box_dist(box_lo, box_hi, left, q)
            dr = _box_dist(box_lo, box_hi, right, q)
            if dl <= dr:
                near, dn, far, df = left, dl, right, dr
            else:
                near, dn, far, df = right, dr, left, dl
            if df <= out_d[k - 1]:
                stack_node[top] = far
                stack_dist[top] = df
                top += 1
            if dn > out_d[k - 1]:
                break
            node = near
        if dims[node] >= 0:
            continue
        for ii in range(los[node], his[node]):
            upt = perm[ii]
            d2 = 0.0
            for dd in range(q.shape[0]):
                diff = q[dd] - U[upt, dd]
                d2 += diff * diff
            if d2 > out_d[k - 1]:
                continue
            g0 = goff[upt]
            g1 = goff[upt + 1]
            cnt = g1 - g0
            if cnt > k:
                cnt = k
            for c in range(cnt):
                cand = gidx[g0 + c]
                worst_d = out_d[k - 1]
                if d2 < worst_d or (d2 == worst_d and cand < out_i[k - 1]):
                    pos = k - 1
                    while pos > 0 and (
                        out_d[pos - 1] > d2 or (out_d[pos - 1] == d2 and out_i[pos - 1] > cand)
                    ):
                        out_d[pos] = out_d[pos - 1]
                        out_i[pos] = out_i[pos - 1]
                        pos -= 1
                    out_d[pos] = d2
                    out_i[pos] = cand
                else:
                    break  # group indices ascend, later candidates only lose


@njit(cache=True)
def _query_many(dims, splits, lefts, rights, los, his, box_lo, box_hi,
                perm, U, goff, gidx, Q, k):
    n = Q.shape[0]
    out_d = np.empty((n, k), dtype=np.float64)
    out_i = np.empty((n, k), dtype=np.int64)
    stack_node = np.empty(4096, dtype=np.int64)
    stack_dist = np.empty(4096, dtype=np.float64)
    for i in range(n):
        _query_one(dims, splits, lefts, rights, los, his, box_lo, box_hi,
                   perm, U, goff, gidx, Q[i], out_d[i], out_i[i],
                   stack_node, stack_dist)
    return out_d, out_i


def linear_scan_neighbors(X: np.ndarray, q: np.ndarray, k: int):
    """Exact k nearest rows of X to q, ranked by (distance², row index).

    Brute force reference for the kd-tree path. Returns (indices, d²).
    """
    diff = X - q
    d2 = np.einsum("ij,ij->i", diff, diff)
    kth = np.partition(d2, k - 1)[k - 1]
    cand = np.flatnonzero(d2 <= kth)
    sel = cand[np.argsort(d2[cand], kind="stable")][:k]
    return sel, d2[sel]


class KNeighborsClassifier:
    """kd-tree k nearest neighbors vote on standardized features."""

    kind = "kn"

    def __init__(self, k: int = 5):
        self.k = k
        self.scaler = None
        self._X = None
        self._y = None
        self._tree = None
        self._goff = None
        self._gidx = None
        self._U = None

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int8)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows vs {y.shape[0]} labels")
        if X.shape[0] < self.k:
            raise TooFewRows(f"need at least k={self.k} training rows, got {X.shape[0]}")
        self.scaler = fit_scaler(X)
        self._X = np.ascontiguousarray(self.scaler.transform(X))
        self._y = y
        self._index()
        return self

    def fit_scaled_arrays(self, Xs, y, scaler):
        """Rebuild the index from persisted state (standardized rows + scaler)."""
        self.scaler = scaler
        self._X = np.ascontiguousarray(Xs, dtype=np.float64)
        self._y = np.ascontiguousarray(y, dtype=np.int8)
        self._index()
        return self

    def _index(self):
        U, inv = np.unique(self._X, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        order = np.argsort(inv, kind="stable")
        counts = np.bincount(inv, minlength=U.shape[0])
        goff = np.zeros(U.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=goff[1:])
        self._U = np.ascontiguousarray(U)
        self._gidx = order.astype(np.int64)
        self._goff = goff
        self._tree = _build_tree(self._U)

    def _scaled_queries(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self._X.shape[1]:
            raise ArityMismatch(f"model trained on {self._X.shape[1]} features, got {X.shape[1]}")
        return np.ascontiguousarray(self.scaler.transform(X))

    def neighbors(self, X) -> np.ndarray:
        """Indices of the k nearest training rows per query (kd-tree path)."""
        Q = self._scaled_queries(X)
        _, idx = _query_many(*self._tree, self._U, self._goff, self._gidx, Q, self.k)
        return idx

    def neighbors_linear(self, X) -> np.ndarray:
        """Same contract as neighbors, via exhaustive scan."""
        Q = self._scaled_queries(X)
        out = np.empty((Q.shape[0], self.k), dtype=np.int64)
        for i in range(Q.shape[0]):
            out[i], _ = linear_scan_neighbors(self._X, Q[i], self.k)
        return out

    def predict_score(self, X) -> np.ndarray:
        return self._y[self.neighbors(X)].mean(axis=1)

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) > 0.5).astype(np.int8)

    def predict_linear(self, X) -> np.ndarray:
        return (self._y[self.neighbors_linear(X)].mean(axis=1) > 0.5).astype(np.int8)
