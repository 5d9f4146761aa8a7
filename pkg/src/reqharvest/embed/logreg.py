"""L2-regularized logistic regression trained by SGD."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..corpus import Label


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float

    def proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return _sigmoid(X @ self.weights + self.bias)

    def predict(self, X) -> list[Label]:
        return [Label.REQUIREMENT if p > 0.5 else Label.NON_REQUIREMENT for p in self.proba(X)]


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _targets(labels) -> np.ndarray:
    return np.array([
        (1.0 if lab is Label.REQUIREMENT else 0.0) if isinstance(lab, Label) else float(lab > 0)
        for lab in labels
    ])


def loss_and_grad(weights, bias, X, t, l2: float) -> tuple[float, np.ndarray, float]:
    """Mean negative log-likelihood plus ``l2/2 * |w|^2`` and its gradient.

    `t` holds 0/1 targets. The bias is not regularized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z = X @ weights + bias
    # log(1 + exp(z)) - t*z, computed stably
    nll = np.logaddexp(0.0, z) - t * z
    loss = float(nll.mean() + 0.5 * l2 * weights @ weights)
    r = (_sigmoid(z) - t) / len(t)
    return loss, X.T @ r + l2 * weights, float(r.sum())


def train_logreg(X, labels, l2: float = 1e-2, lr: float = 0.1, epochs: int = 20, seed: int = 0) -> LogRegModel:
    """SGD over shuffled examples with a linearly decaying step.

    The L2 term is applied as a proximal shrink ``w / (1 + lr * l2)`` after
    each data step, which stays stable for arbitrarily strong regularization.
    """
    X = np.asarray(X, dtype=np.float64)
    t = _targets(labels)
    n, dim = X.shape
    if n == 0:
        raise ValueError("no training examples")
    if l2 < 0 or not lr > 0 or epochs < 1:
        raise ValueError("need l2 >= 0, lr > 0, epochs >= 1")
    rng = np.random.default_rng(seed)
    w = np.zeros(dim)
    b = 0.0
    total = epochs * n
    step = 0
    for _ in range(epochs):
        for k in rng.permutation(n):
            eta = lr * (1.0 - step / total)
            step += 1
            z = float(X[k] @ w + b)
            r = (1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))) - t[k]
            w = (w - eta * r * X[k]) / (1.0 + eta * l2)
            b -= eta * r
        loss, _, _ = loss_and_grad(w, b, X, t, l2)
        if not math.isfinite(loss):
            raise FloatingPointError("logistic regression loss became non-finite")
    return LogRegModel(w, b)
