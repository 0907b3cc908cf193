"""A small sigmoid feedforward network trained with mini-batch gradient descent.

One hidden layer, sigmoid activations throughout, binary cross-entropy
loss. Written directly in numpy so gradients can be checked against finite
differences and training is bit-reproducible from a seed.
"""

from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class SigmoidNet:
    """input -> hidden (sigmoid) -> 1 output (sigmoid)."""

    def __init__(self, n_in: int, n_hidden: int, seed):
        rng = np.random.default_rng(seed)
        r1 = 1.0 / np.sqrt(n_in)
        r2 = 1.0 / np.sqrt(n_hidden)
        self.W1 = rng.uniform(-r1, r1, size=(n_hidden, n_in))
        self.b1 = np.zeros(n_hidden)
        self.W2 = rng.uniform(-r2, r2, size=(1, n_hidden))
        self.b2 = np.zeros(1)

    @classmethod
    def from_params(cls, W1, b1, W2, b2) -> "SigmoidNet":
        net = cls.__new__(cls)
        net.W1 = np.asarray(W1, dtype=np.float64)
        net.b1 = np.asarray(b1, dtype=np.float64)
        net.W2 = np.asarray(W2, dtype=np.float64)
        net.b2 = np.asarray(b2, dtype=np.float64)
        return net

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def forward(self, X: np.ndarray):
        a1 = sigmoid(X @ self.W1.T + self.b1)
        p = sigmoid(a1 @ self.W2.T + self.b2).ravel()
        return p, a1

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[0]

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        p = np.clip(self.predict(X), 1e-12, 1 - 1e-12)
        return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray):
        """BCE loss and analytic gradients for one batch."""
        n = X.shape[0]
        p, a1 = self.forward(X)
        pc = np.clip(p, 1e-12, 1 - 1e-12)
        loss = float(-np.mean(y * np.log(pc) + (1 - y) * np.log(1 - pc)))
        dz2 = ((p - y) / n)[:, None]
        grads = {
            "W2": dz2.T @ a1,
            "b2": dz2.sum(axis=0),
        }
        da1 = dz2 @ self.W2
        dz1 = da1 * a1 * (1.0 - a1)
        grads["W1"] = dz1.T @ X
        grads["b1"] = dz1.sum(axis=0)
        return loss, grads

    def train(
        self,
        X: np.ndarray,
        y: np.ndarray,
        epochs: int = 200,
        batch_size: int = 32,
        lr: float = 0.01,
        shuffle_seed=0,
    ) -> np.ndarray:
        """Mini-batch gradient descent; returns the per-epoch full-set loss."""
        n = X.shape[0]
        rng = np.random.default_rng(shuffle_seed)
        history = np.empty(epochs)
        for epoch in range(epochs):
            perm = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = perm[start : start + batch_size]
                _, grads = self.loss_and_grads(X[idx], y[idx])
                self.W1 -= lr * grads["W1"]
                self.b1 -= lr * grads["b1"]
                self.W2 -= lr * grads["W2"]
                self.b2 -= lr * grads["b2"]
            history[epoch] = self.loss(X, y)
        return history


def numeric_gradients(net: SigmoidNet, X: np.ndarray, y: np.ndarray, eps: float = 1e-4):
    """Central finite-difference gradients of the batch loss, for checking."""
    grads = {}
    for name, param in net.params.items():
        g = np.zeros_like(param)
        flat = param.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = net.loss(X, y)
            flat[i] = orig - eps
            lo = net.loss(X, y)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads[name] = g
    return grads
