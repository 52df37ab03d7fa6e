"""Softmax regression and one-vs-rest linear SVM trained by mini-batch gradient descent."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError

KINDS = ("logistic", "hinge_svm")


@dataclass(frozen=True)
class LinearModelConfig:
    kind: str = "logistic"
    l2: float = 1e-4
    epochs: int = 100
    lr: float = 0.05
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.epochs < 1 or self.batch_size < 1 or not self.lr > 0:
            raise ConfigError("epochs, batch_size and lr must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LinearModel:
    weights: np.ndarray  # [d, K]
    bias: np.ndarray     # [K]
    config: LinearModelConfig
    loss_history: list

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)

    def predict_proba(self, X) -> np.ndarray:
        z = self.decision_function(X)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "config": self.config.to_dict(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "LinearModel":
        return cls(np.asarray(d["weights"], dtype=np.float64), np.asarray(d["bias"], dtype=np.float64),
                   LinearModelConfig(**d["config"]), [])


def _softmax_grad(Xb, yb, W, b):
    z = Xb @ W + b
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    rows = np.arange(len(yb))
    loss = -np.log(np.maximum(p[rows, yb], 1e-300)).mean()
    p[rows, yb] -= 1.0
    p /= len(yb)
    return loss, Xb.T @ p, p.sum(axis=0)


def _hinge_grad(Xb, yb, W, b):
    K = W.shape[1]
    sign = np.where(np.arange(K)[None, :] == yb[:, None], 1.0, -1.0)
    margin = sign * (Xb @ W + b)
    active = margin < 1.0
    loss = np.maximum(0.0, 1.0 - margin).sum(axis=1).mean()
    g = -(sign * active) / len(yb)
    return loss, Xb.T @ g, g.sum(axis=0)


def linear_train(X, y, cfg: LinearModelConfig = LinearModelConfig(), n_classes: int | None = None) -> LinearModel:
    """Minimise mean loss + ``l2/2 * ||W||^2``; the bias is not penalised.

    The penalty is applied as a proximal shrink ``W /= 1 + lr*l2`` after each
    gradient step, which stays stable for arbitrarily large ``l2``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    K = max(K, 2)
    n, d = X.shape
    W = np.zeros((d, K))
    b = np.zeros(K)
    rng = np.random.default_rng(cfg.seed)
    grad_fn = _softmax_grad if cfg.kind == "logistic" else _hinge_grad
    shrink = 1.0 / (1.0 + cfg.lr * cfg.l2)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gW, gb = grad_fn(X[idx], y[idx], W, b)
            total += loss * len(idx)
            W -= cfg.lr * gW
            W *= shrink
            b -= cfg.lr * gb
        history.append(total / n)
    return LinearModel(W, b, cfg, history)
