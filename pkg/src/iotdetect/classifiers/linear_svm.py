"""Linear soft margin SVM trained by stochastic subgradient descent.

Minimizes lam/2 ||w||^2 + mean hinge loss with the classic 1/(lam*t) step
schedule and an L2 ball projection after every update; lam comes from the
usual C parametrization as 1/(C*n). The intercept rides along as an
augmented constant feature, so it shares the step schedule and the
projection instead of taking unbounded early steps. Features are
standardized internally. The per epoch objective history lets callers
check that optimization actually made progress.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, DegenerateLabels, ArityMismatch
from ..features import fit_scaler


@njit(cache=True)
def _sgd_epoch(X, ysign, w, lam, t, perm, cap):
    d = w.shape[0] - 1
    for ii in range(perm.shape[0]):
        i = perm[ii]
        t += 1.0
        eta = 1.0 / (lam * t)
        margin = w[d]  # constant feature
        for k in range(d):
            margin += w[k] * X[i, k]
        margin *= ysign[i]
        scale = 1.0 - 1.0 / t  # (1 - eta*lam)
        for k in range(d + 1):
            w[k] *= scale
        if margin < 1.0:
            step = eta * ysign[i]
            for k in range(d):
                w[k] += step * X[i, k]
            w[d] += step
        nrm2 = 0.0
        for k in range(d + 1):
            nrm2 += w[k] * w[k]
        if nrm2 > cap * cap:
            shrink = cap / np.sqrt(nrm2)
            for k in range(d + 1):
                w[k] *= shrink
    return t


@njit(cache=True)
def _objective(X, ysign, w, lam):
    n = X.shape[0]
    d = w.shape[0] - 1
    hinge = 0.0
    for i in range(n):
        margin = w[d]
        for k in range(d):
            margin += w[k] * X[i, k]
        margin *= ysign[i]
        if margin < 1.0:
            hinge += 1.0 - margin
    reg = 0.0
    for k in range(d + 1):
        reg += w[k] * w[k]
    return 0.5 * lam * reg + hinge / n


class LinearSVMClassifier:
    kind = "lsvm"

    def __init__(self, c: float = 1.0, epochs: int = 20, seed: int = 0):
        self.c = c
        self.epochs = epochs
        self.seed = seed
        self.scaler = None
        self.w = None  # feature weights, without the intercept
        self.b = 0.0
        self.loss_history = None

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows vs {y.shape[0]} labels")
        if np.unique(y).size < 2:
            raise DegenerateLabels("hinge loss training needs both classes present")

        self.scaler = fit_scaler(X)
        Xs = np.ascontiguousarray(self.scaler.transform(X))
        ysign = np.where(y > 0, 1.0, -1.0)

        n, d = Xs.shape
        lam = 1.0 / (self.c * n)
        cap = 1.0 / np.sqrt(lam)
        wa = np.zeros(d + 1, dtype=np.float64)
        t = 0.0
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        history = [float(_objective(Xs, ysign, wa, lam))]
        for _ in range(self.epochs):
            perm = rng.permutation(n)
            t = _sgd_epoch(Xs, ysign, wa, lam, t, perm, cap)
            history.append(float(_objective(Xs, ysign, wa, lam)))
        self.w = wa[:d].copy()
        self.b = float(wa[d])
        self.loss_history = np.array(history, dtype=np.float64)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self.w.shape[0]:
            raise ArityMismatch(f"model trained on {self.w.shape[0]} features, got {X.shape[1]}")
        return self.scaler.transform(X) @ self.w + self.b

    def predict_score(self, X) -> np.ndarray:
        # logistic squash of the margin, just to put scores on (0, 1)
        z = self.decision_function(X)
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0.0).astype(np.int8)
