"""Small dense neural network for binary packet classification.

Architecture: three ReLU hidden layers and a single logistic output, each
hidden layer the same width (11 to mirror the feature count). Trained with
Adam on binary cross entropy in float64, mini batches drawn from a seeded
shuffle each epoch.

Parameters live in one packed vector, which keeps the numba kernels simple
and lets the finite difference gradient check iterate over every parameter
without knowing the layer structure. The loss is computed in the softplus
form log(1+e^z) - y*z, which is the numerically safe version of cross
entropy on logits.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, DegenerateLabels, ArityMismatch
from ..features import fit_scaler


def _theta_size(d0: int, w: int) -> int:
    return d0 * w + w + 2 * (w * w + w) + w + 1


@njit(cache=True)
def _views(theta, d0, w):
    o = 0
    W0 = theta[o : o + d0 * w].reshape(d0, w); o += d0 * w
    b0 = theta[o : o + w]; o += w
    W1 = theta[o : o + w * w].reshape(w, w); o += w * w
    b1 = theta[o : o + w]; o += w
    W2 = theta[o : o + w * w].reshape(w, w); o += w * w
    b2 = theta[o : o + w]; o += w
    W3 = theta[o : o + w].reshape(w, 1); o += w
    b3 = theta[o : o + 1]
    return W0, b0, W1, b1, W2, b2, W3, b3


@njit(cache=True)
def _forward(theta, d0, w, Xb):
    W0, b0, W1, b1, W2, b2, W3, b3 = _views(theta, d0, w)
    H1 = np.maximum(Xb @ W0 + b0, 0.0)
    H2 = np.maximum(H1 @ W1 + b1, 0.0)
    H3 = np.maximum(H2 @ W2 + b2, 0.0)
    Z = (H3 @ W3).ravel() + b3[0]
    return H1, H2, H3, Z


@njit(cache=True)
def _loss(theta, d0, w, Xb, yb):
    _, _, _, Z = _forward(theta, d0, w, Xb)
    total = 0.0
    for i in range(Z.shape[0]):
        z = Z[i]
        if z > 0.0:
            sp = z + np.log1p(np.exp(-z))
        else:
            sp = np.log1p(np.exp(z))
        total += sp - yb[i] * z
    return total / Z.shape[0]


@njit(cache=True)
def _backward(theta, d0, w, Xb, yb, grad):
    """Analytic gradient of _loss into grad; returns the loss."""
    W0, b0, W1, b1, W2, b2, W3, b3 = _views(theta, d0, w)
    H1, H2, H3, Z = _forward(theta, d0, w, Xb)
    n = Xb.shape[0]

    loss = 0.0
    dZ = np.empty((n, 1), dtype=np.float64)
    for i in range(n):
        z = Z[i]
        if z > 0.0:
            sig = 1.0 / (1.0 + np.exp(-z))
            loss += z + np.log1p(np.exp(-z)) - yb[i] * z
        else:
            ez = np.exp(z)
            sig = ez / (1.0 + ez)
            loss += np.log1p(ez) - yb[i] * z
        dZ[i, 0] = (sig - yb[i]) / n
    loss /= n

    gW0, gb0, gW1, gb1, gW2, gb2, gW3, gb3 = _views(grad, d0, w)

    gW3[:, :] = H3.T @ dZ
    gb3[0] = dZ.sum()
    dH3 = dZ @ W3.T
    dA3 = dH3 * (H3 > 0.0)

    gW2[:, :] = H2.T @ dA3
    for j in range(w):
        s = 0.0
        for i in range(n):
            s += dA3[i, j]
        gb2[j] = s
    dA2 = (dA3 @ W2.T) * (H2 > 0.0)

    gW1[:, :] = H1.T @ dA2
    for j in range(w):
        s = 0.0
        for i in range(n):
            s += dA2[i, j]
        gb1[j] = s
    dA1 = (dA2 @ W1.T) * (H1 > 0.0)

    gW0[:, :] = Xb.T @ dA1
    for j in range(w):
        s = 0.0
        for i in range(n):
            s += dA1[i, j]
        gb0[j] = s
    return loss


@njit(cache=True)
def _adam_step(theta, grad, m, v, t, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for j in range(theta.shape[0]):
        g = grad[j]
        m[j] = beta1 * m[j] + (1.0 - beta1) * g
        v[j] = beta2 * v[j] + (1.0 - beta2) * g * g
        theta[j] -= lr * (m[j] / c1) / (np.sqrt(v[j] / c2) + eps)


@njit(cache=True)
def _train_epoch(theta, d0, w, X, y, batch, m, v, t, lr, beta1, beta2, eps, grad):
    n = X.shape[0]
    start = 0
    while start < n:
        end = min(start + batch, n)
        _backward(theta, d0, w, X[start:end], y[start:end], grad)
        t += 1.0
        _adam_step(theta, grad, m, v, t, lr, beta1, beta2, eps)
        start = end
    return t


class NeuralNetClassifier:
    kind = "nn"

    def __init__(self, epochs: int = 100, batch: int = 32, lr: float = 0.001,
                 width: int = 11, seed: int = 0):
        self.epochs = epochs
        self.batch = batch
        self.lr = lr
        self.width = width
        self.seed = seed
        self.scaler = None
        self.theta = None
        self.d0 = 0
        self._rng = None

    def _init_theta(self, d0, rng):
        w = self.width
        theta = np.zeros(_theta_size(d0, w), dtype=np.float64)
        o = 0
        for fan_in, fan_out in ((d0, w), (w, w), (w, w), (w, 1)):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            theta[o : o + fan_in * fan_out] = rng.uniform(-lim, lim, size=fan_in * fan_out)
            o += fan_in * fan_out + fan_out  # biases stay zero
        return theta

    def initialize(self, X, y):
        """Fit the scaler and draw initial weights without training.

        Split out of fit so optimizer diagnostics (gradient checks, step
        experiments) can start from the untrained state.
        """
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows vs {y.shape[0]} labels")
        if np.unique(y).size < 2:
            raise DegenerateLabels("cross entropy training needs both classes present")
        self.scaler = fit_scaler(X)
        self.d0 = X.shape[1]
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        self.theta = self._init_theta(self.d0, self._rng)
        return self

    def fit(self, X, y):
        self.initialize(X, y)
        X = np.ascontiguousarray(X, dtype=np.float64)
        Xs = np.ascontiguousarray(self.scaler.transform(X))
        y = np.asarray(y, dtype=np.float64)
        n = Xs.shape[0]

        m = np.zeros_like(self.theta)
        v = np.zeros_like(self.theta)
        grad = np.empty_like(self.theta)
        t = 0.0
        for _ in range(self.epochs):
            perm = self._rng.permutation(n)
            Xp = np.ascontiguousarray(Xs[perm])
            yp = np.ascontiguousarray(y[perm])
            t = _train_epoch(self.theta, self.d0, self.width, Xp, yp, self.batch,
                             m, v, t, self.lr, 0.9, 0.999, 1e-8, grad)
        return self

    def train_steps(self, X, y, steps: int):
        """Run a few more Adam steps on the given rows (already fitted model).

        Used to probe optimizer behavior mid stream; X is raw feature space.
        """
        Xs = np.ascontiguousarray(self.scaler.transform(np.asarray(X, dtype=np.float64)))
        y = np.asarray(y, dtype=np.float64)
        m = np.zeros_like(self.theta)
        v = np.zeros_like(self.theta)
        grad = np.empty_like(self.theta)
        t = 0.0
        for s in range(steps):
            start = (s * self.batch) % max(1, Xs.shape[0] - self.batch + 1)
            xb = Xs[start : start + self.batch]
            yb = y[start : start + self.batch]
            _backward(self.theta, self.d0, self.width, xb, yb, grad)
            t += 1.0
            _adam_step(self.theta, grad, m, v, t, self.lr, 0.9, 0.999, 1e-8)
        return self

    def _scaled(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self.d0:
            raise ArityMismatch(f"model trained on {self.d0} features, got {X.shape[1]}")
        return np.ascontiguousarray(self.scaler.transform(X))

    def predict_score(self, X) -> np.ndarray:
        _, _, _, Z = _forward(self.theta, self.d0, self.width, self._scaled(X))
        return 1.0 / (1.0 + np.exp(-np.clip(Z, -500, 500)))

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) > 0.5).astype(np.int8)


def gradient_check(model: NeuralNetClassifier, X, y, h: float = 1e-5) -> float:
    """Max relative error between analytic and central difference gradients.

    Exercises the same compiled forward/backward code the training loop
    uses, over every parameter in the network, on the given (raw space)
    batch. Healthy float64 backprop lands around 1e-8.
    """
    Xs = np.ascontiguousarray(model.scaler.transform(np.asarray(X, dtype=np.float64)))
    yb = np.asarray(y, dtype=np.float64)
    theta = model.theta.copy()
    grad = np.empty_like(theta)
    _backward(theta, model.d0, model.width, Xs, yb, grad)

    worst = 0.0
    for j in range(theta.size):
        orig = theta[j]
        theta[j] = orig + h
        lp = _loss(theta, model.d0, model.width, Xs, yb)
        theta[j] = orig - h
        lm = _loss(theta, model.d0, model.width, Xs, yb)
        theta[j] = orig
        numeric = (lp - lm) / (2.0 * h)
        denom = max(abs(grad[j]), abs(numeric))
        if denom > 1e-12:
            err = abs(grad[j] - numeric) / denom
            if err > worst:
                worst = err
    return worst
