"""Linear max-margin classifier and a one-hidden-layer network."""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LinearSVM:
    """Hinge loss + L2, full-batch subgradient descent with a 1/sqrt(t) step.

    The score is the sigmoid of the margin, so score >= 0.5 exactly when the
    margin is non-negative.
    """

    kind = "linear"

    def __init__(self, l2=1e-3, epochs=1000, learning_rate=5.0):
        self.l2 = l2
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.w = None
        self.b = 0.0

    def fit(self, X, y, rng=None):
        ys = 2.0 * np.asarray(y, dtype=float) - 1.0
        n, p = X.shape
        w = np.zeros(p)
        b = 0.0
        w_avg = np.zeros(p)
        b_avg = 0.0
        for t in range(self.epochs):
            margin = ys * (X @ w + b)
            active = margin < 1.0
            gw = self.l2 * w - (ys[active, None] * X[active]).sum(axis=0) / n
            gb = -ys[active].sum() / n
            step = self.learning_rate / np.sqrt(t + 1.0)
            w = w - step * gw
            b = b - step * gb
            # averaged iterate over the second half damps subgradient oscillation
            if t >= self.epochs // 2:
                k = t - self.epochs // 2 + 1
                w_avg += (w - w_avg) / k
                b_avg += (b - b_avg) / k
        self.w, self.b = w_avg, float(b_avg)
        return self

    def decision_function(self, X):
        return X @ self.w + self.b

    def scores(self, X):
        return _sigmoid(self.decision_function(X))

    def hyperparams(self):
        return {"l2": self.l2, "epochs": self.epochs, "learning_rate": self.learning_rate}

    def to_config(self):
        return {"hyperparams": self.hyperparams(), "w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_config(cls, c):
        m = cls(**c["hyperparams"])
        m.w = np.asarray(c["w"], dtype=float)
        m.b = float(c["b"])
        return m


class MLP:
    """ReLU hidden layer, sigmoid output, mean binary cross-entropy.

    Parameters are kept as one flat vector laid out as
    [W1 (hidden x p), b1 (hidden), w2 (hidden), b2].
    """

    kind = "neural"

    def __init__(self, hidden=16, epochs=200, learning_rate=0.05, momentum=0.9,
                 batch_size=32, l2=0.0):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.l2 = l2
        self.n_inputs = None
        self.params = None

    def n_params(self, p):
        return self.hidden * p + 2 * self.hidden + 1

    def unpack(self, theta, p):
        h = self.hidden
        W1 = theta[: h * p].reshape(h, p)
        b1 = theta[h * p: h * p + h]
        w2 = theta[h * p + h: h * p + 2 * h]
        b2 = theta[-1]
        return W1, b1, w2, b2

    def init_params(self, p, rng):
        h = self.hidden
        W1 = rng.normal(0.0, np.sqrt(2.0 / p), size=(h, p))
        b1 = np.full(h, 0.01)
        w2 = rng.normal(0.0, np.sqrt(1.0 / h), size=h)
        return np.concatenate([W1.ravel(), b1, w2, [0.0]])

    def loss_and_grad(self, theta, X, y):
        """Mean cross-entropy (+ L2 on weights) and its analytic gradient."""
        n, p = X.shape
        W1, b1, w2, b2 = self.unpack(theta, p)
        z1 = X @ W1.T + b1
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ w2 + b2
        # log(1 + e^z) - y z, computed stably
        loss = np.mean(np.logaddexp(0.0, z2) - y * z2)
        loss += 0.5 * self.l2 * (np.sum(W1 ** 2) + np.sum(w2 ** 2))
        dz2 = (_sigmoid(z2) - y) / n
        g_w2 = a1.T @ dz2 + self.l2 * w2
        g_b2 = dz2.sum()
        dz1 = np.outer(dz2, w2) * (z1 > 0)
        g_W1 = dz1.T @ X + self.l2 * W1
        g_b1 = dz1.sum(axis=0)
        grad = np.concatenate([g_W1.ravel(), g_b1, g_w2, [g_b2]])
        return float(loss), grad

    def fit(self, X, y, rng):
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        self.n_inputs = p
        theta = self.init_params(p, rng)
        velocity = np.zeros_like(theta)
        bs = self.batch_size or n
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, bs):
                batch = order[start:start + bs]
                _, g = self.loss_and_grad(theta, X[batch], y[batch])
                velocity = self.momentum * velocity - self.learning_rate * g
                theta = theta + velocity
        self.params = theta
        return self

    def decision_function(self, X):
        W1, b1, w2, b2 = self.unpack(self.params, X.shape[1])
        return np.maximum(X @ W1.T + b1, 0.0) @ w2 + b2

    def scores(self, X):
        return _sigmoid(self.decision_function(X))

    def hyperparams(self):
        return {"hidden": self.hidden, "epochs": self.epochs, "learning_rate": self.learning_rate,
                "momentum": self.momentum, "batch_size": self.batch_size, "l2": self.l2}

    def to_config(self):
        return {"hyperparams": self.hyperparams(), "n_inputs": self.n_inputs,
                "params": self.params.tolist()}

    @classmethod
    def from_config(cls, c):
        m = cls(**c["hyperparams"])
        m.n_inputs = c["n_inputs"]
        m.params = np.asarray(c["params"], dtype=float)
        return m
