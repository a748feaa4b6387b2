"""Random forest: bagged CART trees with per node feature subsampling.

Each tree sees a bootstrap resample of the training rows and, at every
node, a fresh random draw of candidate features. When every feature in the
draw is constant within the node, the next disjoint chunk of the shuffled
feature list is tried, so a splittable node is never forced into a leaf by
an unlucky draw. Per tree randomness comes from independent child seeds of
the forest seed, making the whole ensemble reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, ArityMismatch
from .tree import DecisionTreeClassifier


class RandomForestClassifier:
    kind = "rf"

    def __init__(self, n_trees: int = 10, features_per_split: int = 3, bootstrap: bool = True, seed: int = 0):
        self.n_trees = n_trees
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees: list[DecisionTreeClassifier] = []
        self.n_features = 0

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows vs {y.shape[0]} labels")
        n, d = X.shape
        self.n_features = d
        m = min(self.features_per_split, d)

        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees = []
        for t in range(self.n_trees):
            rng = np.random.Generator(np.random.PCG64(seeds[t]))
            if self.bootstrap:
                rows = rng.integers(0, n, size=n)
                Xt, yt = X[rows], y[rows]
            else:
                Xt, yt = X, y

            def groups():
                perm = rng.permutation(d)
                for s in range(0, d, m):
                    yield np.sort(perm[s : s + m]).astype(np.int64)

            tree = DecisionTreeClassifier()
            tree.fit(Xt, yt, feature_groups=groups)
            self.trees.append(tree)
        return self

    def _check_arity(self, X):
        if X.shape[1] != self.n_features:
            raise ArityMismatch(f"forest trained on {self.n_features} features, got {X.shape[1]}")

    def predict_score(self, X) -> np.ndarray:
        """Mean leaf attack fraction across the trees."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        self._check_arity(X)
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_score(X)
        return acc / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) > 0.5).astype(np.int8)

    def feature_importances(self) -> np.ndarray:
        """Average of the per tree normalized importances, renormalized."""
        acc = np.zeros(self.n_features, dtype=np.float64)
        for tree in self.trees:
            acc += tree.feature_importances()
        total = acc.sum()
        if total <= 0:
            return acc
        return acc / total
