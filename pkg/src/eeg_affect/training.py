"""Losses, AdamW, the warm-up + cosine schedule, gradient clipping and the epoch loop."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import ConfigError, DivergedLoss
from .evaluation import ConfusionMatrix, confusion, metrics, multilabel_metrics

TASKS = ("binary", "categorical", "multilabel")
N_GROUPS = 4


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.005
    epochs: int = 100
    batch_size: int = 32
    weight_decay: float = 1e-4
    clip_norm: float = 1.0
    dropout_p: float = 0.3
    warmup_epochs: int = 5
    eta_min: float = 1e-6
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    multilabel_loss: str = "bce"  # or "group_ce"
    dtype: str = "float32"

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0 or self.eta_min < 0:
            raise ConfigError("lr, weight_decay and eta_min must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigError("warmup_epochs must lie in [0, epochs)")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")
        b1, b2 = self.betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ConfigError("betas must lie in [0, 1)")
        if self.multilabel_loss not in ("bce", "group_ce"):
            raise ConfigError("multilabel_loss must be 'bce' or 'group_ce'")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        object.__setattr__(self, "betas", tuple(self.betas))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


# ----------------------------------------------------------------------------
# tasks and losses


def head_dim(task: str, n_bins: int = 10) -> int:
    return {"binary": 1, "categorical": N_GROUPS, "multilabel": N_GROUPS * n_bins}[task]


def n_classes(task: str, n_bins: int = 10) -> int:
    return {"binary": 2, "categorical": N_GROUPS, "multilabel": n_bins}[task]


def loss_ce(logits: Tensor, target_class) -> Tensor:
    return ad.cross_entropy(logits, target_class)


def loss_bce(logits: Tensor, multihot) -> Tensor:
    return ad.bce_with_logits(logits, multihot)


def _binary_two_way(logits: Tensor) -> Tensor:
    # [0, z] under softmax gives P(positive) = sigmoid(z)
    zeros = Tensor(np.zeros(logits.shape, dtype=logits.dtype))
    return ad.concat([zeros, logits], axis=-1)


def task_loss(logits: Tensor, targets: np.ndarray, task: str, n_bins: int = 10,
              multilabel_loss: str = "bce") -> Tensor:
    if task == "binary":
        return loss_ce(_binary_two_way(logits), targets)
    if task == "categorical":
        return loss_ce(logits, targets)
    bins = np.asarray(targets)
    if multilabel_loss == "bce":
        onehot = np.zeros(bins.shape + (n_bins,), dtype=logits.dtype)
        np.put_along_axis(onehot, bins[..., None], 1, axis=-1)
        return loss_bce(logits, onehot.reshape(len(bins), -1))
    total = None
    for g in range(N_GROUPS):
        part = loss_ce(logits[:, g * n_bins:(g + 1) * n_bins], bins[:, g])
        total = part if total is None else total + part
    return total * (1.0 / N_GROUPS)


def predict_from_logits(logits: np.ndarray, task: str, n_bins: int = 10) -> np.ndarray:
    z = np.asarray(logits)
    if task == "binary":
        return (z[:, 0] > 0).astype(np.intp)
    if task == "categorical":
        return z.argmax(axis=1)
    return z.reshape(len(z), N_GROUPS, n_bins).argmax(axis=-1)


def score_predictions(y_true, y_pred, task: str, n_bins: int = 10):
    """``(MetricReport, ConfusionMatrix)``; multi-label pools the four group matrices."""
    if task == "multilabel":
        report = multilabel_metrics(y_true, y_pred, n_bins)
        cm = ConfusionMatrix(sum(confusion(y_true[:, g], y_pred[:, g], n_bins).counts for g in range(N_GROUPS)))
        return report, cm
    cm = confusion(y_true, y_pred, n_classes(task, n_bins))
    return metrics(cm), cm


# ----------------------------------------------------------------------------
# optimisation


@dataclass
class OptimizerState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Parameter]) -> "OptimizerState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params], 0)


def adamw_update(theta, grad, m, v, step: int, lr: float, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay: float = 0.0):
    """One AdamW update for a single array; returns ``(theta, m, v)``.

    ``step`` is the 1-based step count used for bias correction.
    """
    b1, b2 = betas
    m = b1 * m + (1 - b1) * grad
    v = b2 * v + (1 - b2) * grad * grad
    m_hat = m / (1 - b1 ** step)
    v_hat = v / (1 - b2 ** step)
    theta = theta - lr * (m_hat / (np.sqrt(v_hat) + eps)) - lr * weight_decay * theta
    return theta, m, v


def adamw_step(params: Sequence[Parameter], state: OptimizerState, lr: float, cfg: TrainConfig) -> OptimizerState:
    """In-place AdamW over ``params`` using their ``.grad``; biases skip decay."""
    state.step += 1
    for i, p in enumerate(params):
        wd = cfg.weight_decay if p.decay else 0.0
        new, state.m[i], state.v[i] = adamw_update(
            p.data, p.grad, state.m[i], state.v[i], state.step, lr, cfg.betas, cfg.eps, wd
        )
        p.data = new.astype(p.data.dtype, copy=False)
    return state


def cosine_warmup_lr(epoch: int, cfg: TrainConfig) -> float:
    """Linear ramp up to ``lr`` at ``epoch == warmup_epochs``, then cosine decay to ``eta_min``."""
    E, W, eta, eta_min = cfg.epochs, cfg.warmup_epochs, cfg.lr, cfg.eta_min
    if epoch < W:
        return eta * (epoch + 1) / (W + 1)
    return eta_min + 0.5 * (eta - eta_min) * (1 + math.cos(math.pi * (epoch - W) / (E - W)))


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))


def clip_gradients(grads: Sequence[np.ndarray], max_norm: float = 1.0) -> list:
    """Scale all gradients by ``max_norm / norm`` when their joint L2 norm exceeds ``max_norm``."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return list(grads)
    scale = max_norm / norm
    return [g * scale for g in grads]


# ----------------------------------------------------------------------------
# epoch loop


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    acc: float
    prec: float
    rec: float
    f1: float
    confusion: list = field(default_factory=list)

    CSV_HEADER = ("epoch", "lr", "train_loss", "val_loss", "acc", "prec", "rec", "f1")

    def row(self) -> list:
        return [self.epoch] + [repr(float(getattr(self, k))) for k in self.CSV_HEADER[1:]]


def write_epoch_csv(path, logs: Sequence[EpochLog]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EpochLog.CSV_HEADER)
        for log in logs:
            w.writerow(log.row())


def predict_logits(model, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
    out = [model.forward(X[i:i + batch_size], train=False).data for i in range(0, len(X), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.config.head_dim))


def evaluate_loss(model, X, y, task, n_bins, multilabel_loss, batch_size: int = 256) -> tuple[float, np.ndarray]:
    total, logits = 0.0, []
    for i in range(0, len(X), batch_size):
        z = model.forward(X[i:i + batch_size], train=False)
        total += float(task_loss(z, y[i:i + batch_size], task, n_bins, multilabel_loss).data) * len(z.data)
        logits.append(z.data)
    return total / max(len(X), 1), np.concatenate(logits, axis=0)


def fit(model, train_data, val_data, cfg: TrainConfig, task: str, n_bins: int = 10,
        callback=None):
    """Train a sequence model; returns ``(model, [EpochLog, ...])``.

    ``train_data`` and ``val_data`` are ``(X [n, seq, d], targets)`` pairs.
    Deterministic given ``cfg.seed``.
    """
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}")
    Xtr, ytr = train_data
    Xva, yva = val_data
    dtype = np.dtype(cfg.dtype)
    Xtr = np.asarray(Xtr, dtype=dtype)
    Xva = np.asarray(Xva, dtype=dtype)
    ytr, yva = np.asarray(ytr), np.asarray(yva)
    if len(Xtr) == 0 or len(Xva) == 0:
        raise ConfigError("fit needs non-empty training and validation sets")
    params = model.parameters()
    state = OptimizerState.for_params(params)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng, drop_rng = np.random.default_rng(seeds[0]), np.random.default_rng(seeds[1])
    logs = []
    for epoch in range(cfg.epochs):
        lr = cosine_warmup_lr(epoch, cfg)
        order = shuffle_rng.permutation(len(Xtr))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            ad.zero_grad(params)
            logits = model.forward(Xtr[idx], train=True, rng=drop_rng)
            loss = task_loss(logits, ytr[idx], task, n_bins, cfg.multilabel_loss)
            value = float(loss.data)
            if not math.isfinite(value):
                raise DivergedLoss(epoch)
            ad.backward(loss)
            clipped = clip_gradients([p.grad for p in params], cfg.clip_norm)
            for p, g in zip(params, clipped):
                p.grad = g
            adamw_step(params, state, lr, cfg)
            total += value * len(idx)
        train_loss = total / len(Xtr)
        val_loss, val_logits = evaluate_loss(model, Xva, yva, task, n_bins, cfg.multilabel_loss)
        if not math.isfinite(val_loss):
            raise DivergedLoss(epoch)
        report, cm = score_predictions(yva, predict_from_logits(val_logits, task, n_bins), task, n_bins)
        log = EpochLog(epoch, lr, train_loss, val_loss, report.accuracy, report.macro["precision"],
                       report.macro["recall"], report.macro["f1"], cm.counts.tolist())
        logs.append(log)
        if callback is not None:
            callback(log)
    return model, logs
