"""CART style decision tree grown on Gini impurity.

Split search is exhaustive: every feature, every midpoint between adjacent
distinct sorted values. Nodes are grown depth first to purity with no depth
cap; a node needs at least two samples and two classes to be considered
for splitting. Ties between candidate splits are broken toward the lowest
feature index, then the smallest threshold, which together with the use of
pure count arithmetic makes the grown tree independent of row order.

The hot loops are compiled with numba. Trees are stored as flat parallel
arrays (feature, threshold, left, right, value) rather than node objects,
which keeps prediction cheap and makes persistence trivial.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, EmptyNode, ArityMismatch


def gini_impurity(counts) -> float:
    """Gini impurity of a node given its per class counts."""
    c = np.asarray(counts, dtype=np.float64)
    n = c.sum()
    if n <= 0:
        raise EmptyNode("gini impurity of an empty node is undefined")
    p = c / n
    return float(1.0 - np.sum(p * p))


@njit(cache=True)
def _best_split(X, y, idx, lo, hi, feats):
    """Exhaustive best split for the node holding idx[lo:hi].

    Returns (feature, threshold, n_left, attack_left, total_attack);
    feature is -1 when no candidate feature admits a valid split.
    The score being minimized is sum(n_side * gini_side), computed from
    integer counts so equal splits score bit-identically and the
    ascending scan realizes the tie break rule.
    """
    n = hi - lo
    total_attack = 0
    for i in range(lo, hi):
        total_attack += y[idx[i]]

    best_feat = -1
    best_thresh = 0.0
    best_score = 1e300
    best_nl = 0
    best_al = 0
    vals = np.empty(n, dtype=np.float64)
    for k in range(feats.shape[0]):
        f = feats[k]
        for i in range(n):
            vals[i] = X[idx[lo + i], f]
        order = np.argsort(vals, kind="quicksort")
        acc = 0
        for i in range(n - 1):
            acc += y[idx[lo + order[i]]]
            va = vals[order[i]]
            vb = vals[order[i + 1]]
            if va == vb:
                continue
            nl = i + 1
            al = acc
            nr = n - nl
            ar = total_attack - al
            bl = nl - al
            br = nr - ar
            score = (nl - (al * al + bl * bl) / nl) + (nr - (ar * ar + br * br) / nr)
            if score < best_score:
                best_score = score
                best_feat = f
                t = 0.5 * (va + vb)
                if t <= va:
                    t = vb  # adjacent floats can round the midpoint down
                best_thresh = t
                best_nl = nl
                best_al = al
    return best_feat, best_thresh, best_nl, best_al, total_attack


@njit(cache=True)
def _partition(X, idx, lo, hi, feat, thresh, buf):
    """Stable in place partition of idx[lo:hi] by X[., feat] < thresh."""
    w = lo
    k = 0
    for i in range(lo, hi):
        j = idx[i]
        if X[j, feat] < thresh:
            idx[w] = j
            w += 1
        else:
            buf[k] = j
            k += 1
    for i in range(k):
        idx[w + i] = buf[i]
    return w


@njit(cache=True)
def _predict_leaf_values(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.float64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _gini_from_counts(attack, total):
    if total == 0:
        return 0.0
    p = attack / total
    return 2.0 * p * (1.0 - p)


class DecisionTreeClassifier:
    """Binary CART tree. Labels are 0 (normal) / 1 (attack)."""

    kind = "dt"

    def __init__(self):
        self.n_features = 0
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.value = None
        self.node_samples = None
        self._importance_raw = None

    def fit(self, X, y, feature_groups=None):
        """Grow the tree on (X, y).

        feature_groups, when given, yields the candidate feature arrays to
        try at each node (first group with a valid split wins); the forest
        uses this hook for per node feature subsampling. Default is all
        features at every node.
        """
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows vs {y.shape[0]} labels")
        if X.shape[0] == 0:
            raise EmptyNode("cannot grow a tree on zero rows")
        n, d = X.shape
        self.n_features = d
        all_feats = np.arange(d, dtype=np.int64)
        if feature_groups is None:
            feature_groups = lambda: (all_feats,)

        idx = np.arange(n, dtype=np.int64)
        buf = np.empty(n, dtype=np.int64)

        feature = []
        threshold = []
        left = []
        right = []
        value = []
        node_samples = []
        imp_raw = np.zeros(d, dtype=np.float64)

        # preorder DFS; stack holds (lo, hi, attack_count, parent, is_left)
        root_attack = int(y.sum())
        stack = [(0, n, root_attack, -1, False)]
        while stack:
            lo, hi, attack, parent, is_left = stack.pop()
            node_id = len(feature)
            if parent >= 0:
                if is_left:
                    left[parent] = node_id
                else:
                    right[parent] = node_id
            count = hi - lo
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(attack / count)
            node_samples.append(count)

            if count < 2 or attack == 0 or attack == count:
                continue

            feat = -1
            for feats in feature_groups():
                feat, thresh, nl, al, _ = _best_split(X, y, idx, lo, hi, feats)
                if feat >= 0:
                    break
            if feat < 0:
                continue  # duplicate rows with mixed labels: stays a leaf

            mid = _partition(X, idx, lo, hi, feat, thresh, buf)
            nl = mid - lo
            nr = hi - mid
            ar = attack - al
            g = _gini_from_counts(attack, count)
            gl = _gini_from_counts(al, nl)
            gr = _gini_from_counts(ar, nr)
            imp_raw[feat] += count * g - nl * gl - nr * gr

            feature[node_id] = feat
            threshold[node_id] = thresh
            # push right first so the left child is materialized next (preorder)
            stack.append((mid, hi, ar, node_id, False))
            stack.append((lo, mid, al, node_id, True))

        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=np.float64)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value, dtype=np.float64)
        self.node_samples = np.array(node_samples, dtype=np.int64)
        self._importance_raw = imp_raw / n
        return self

    def _check_arity(self, X):
        if X.shape[1] != self.n_features:
            raise ArityMismatch(f"tree trained on {self.n_features} features, got {X.shape[1]}")

    def predict_score(self, X) -> np.ndarray:
        """Attack fraction of the leaf each row lands in."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        self._check_arity(X)
        return _predict_leaf_values(self.feature, self.threshold, self.left, self.right, self.value, X)

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) > 0.5).astype(np.int8)

    def feature_importances(self) -> np.ndarray:
        """Impurity decrease per feature, normalized to sum to one."""
        total = self._importance_raw.sum()
        if total <= 0:
            return np.zeros_like(self._importance_raw)
        return self._importance_raw / total

    def node_count(self) -> int:
        return len(self.feature)
