"""Recurrent and convolutional-recurrent classifiers built on the autodiff engine.

Input batches are ``[batch, seq_len, input_dim]`` arrays of consecutive window
feature vectors from one session. Every architecture reads out the last time
step, applies dropout and a dense head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .. import autodiff as ad
from ..autodiff import Parameter, Tensor
from ..errors import ConfigError, ShapeMismatch

ARCHITECTURES = ("LSTM", "GRU", "LSTM_GRU", "CNN_LSTM")


@dataclass(frozen=True)
class SequenceModelConfig:
    architecture: str = "LSTM_GRU"
    input_dim: int = 126
    hidden1: int = 64
    hidden2: int = 32
    conv_kernel: int = 3
    conv_filters: int = 32
    conv_stride: int = 1
    head_dim: int = 1
    dropout_p: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        for name in ("input_dim", "hidden1", "hidden2", "conv_kernel", "conv_filters", "conv_stride", "head_dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


class LSTMParams(NamedTuple):
    w_x: Parameter  # [D, 4H], gate blocks i, f, g, o
    w_h: Parameter  # [H, 4H]
    b: Parameter    # [4H]


class GRUParams(NamedTuple):
    w_x: Parameter  # [D, 3H], gate blocks r, z, n
    w_h: Parameter  # [H, 3H]
    b_x: Parameter  # [3H]
    b_h: Parameter  # [3H]


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_lstm(rng, D, H, prefix="lstm", dtype=np.float32) -> LSTMParams:
    b = np.zeros(4 * H, dtype=dtype)
    b[H:2 * H] = 1.0  # forget-gate bias starts open
    return LSTMParams(
        Parameter(_uniform(rng, (D, 4 * H), H, dtype), f"{prefix}.w_x"),
        Parameter(_uniform(rng, (H, 4 * H), H, dtype), f"{prefix}.w_h"),
        Parameter(b, f"{prefix}.b", decay=False),
    )


def init_gru(rng, D, H, prefix="gru", dtype=np.float32) -> GRUParams:
    return GRUParams(
        Parameter(_uniform(rng, (D, 3 * H), H, dtype), f"{prefix}.w_x"),
        Parameter(_uniform(rng, (H, 3 * H), H, dtype), f"{prefix}.w_h"),
        Parameter(np.zeros(3 * H, dtype=dtype), f"{prefix}.b_x", decay=False),
        Parameter(np.zeros(3 * H, dtype=dtype), f"{prefix}.b_h", decay=False),
    )


def lstm_step(x, h, c, params: LSTMParams) -> tuple[Tensor, Tensor]:
    """One LSTM step: ``c' = f*c + i*g``, ``h' = o*tanh(c')``."""
    x, h, c = ad.as_tensor(x), ad.as_tensor(h), ad.as_tensor(c)
    H = params.w_h.shape[0]
    if x.shape[-1] != params.w_x.shape[0] or h.shape[-1] != H or c.shape[-1] != H:
        raise ShapeMismatch(
            f"lstm_step: x {x.shape}, h {h.shape}, c {c.shape} vs w_x {params.w_x.shape}, w_h {params.w_h.shape}"
        )
    gates = x @ params.w_x + h @ params.w_h + params.b
    i = ad.sigmoid(gates[..., 0:H])
    f = ad.sigmoid(gates[..., H:2 * H])
    g = ad.tanh(gates[..., 2 * H:3 * H])
    o = ad.sigmoid(gates[..., 3 * H:4 * H])
    c_new = f * c + i * g
    return o * ad.tanh(c_new), c_new


def gru_step(x, h, params: GRUParams) -> Tensor:
    """One GRU step: ``h' = (1-z)*n + z*h`` with ``n = tanh(W_n x + r*(U_n h + b))``."""
    x, h = ad.as_tensor(x), ad.as_tensor(h)
    H = params.w_h.shape[0]
    if x.shape[-1] != params.w_x.shape[0] or h.shape[-1] != H:
        raise ShapeMismatch(f"gru_step: x {x.shape}, h {h.shape} vs w_x {params.w_x.shape}, w_h {params.w_h.shape}")
    gx = x @ params.w_x + params.b_x
    gh = h @ params.w_h + params.b_h
    r = ad.sigmoid(gx[..., 0:H] + gh[..., 0:H])
    z = ad.sigmoid(gx[..., H:2 * H] + gh[..., H:2 * H])
    n = ad.tanh(gx[..., 2 * H:] + r * gh[..., 2 * H:])
    return (1.0 - z) * n + z * h


def run_lstm(steps: list, params: LSTMParams) -> list:
    B = steps[0].shape[0]
    H = params.w_h.shape[0]
    dt = params.w_x.dtype
    h = ad.Tensor(np.zeros((B, H), dtype=dt))
    c = ad.Tensor(np.zeros((B, H), dtype=dt))
    out = []
    for x in steps:
        h, c = lstm_step(x, h, c, params)
        out.append(h)
    return out


def run_gru(steps: list, params: GRUParams) -> list:
    B = steps[0].shape[0]
    H = params.w_h.shape[0]
    h = ad.Tensor(np.zeros((B, H), dtype=params.w_x.dtype))
    out = []
    for x in steps:
        h = gru_step(x, h, params)
        out.append(h)
    return out


class SequenceModel:
    """Parameter container plus the forward pass for one architecture."""

    def __init__(self, config: SequenceModelConfig, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(config.seed)
        cfg = config
        self.params: dict[str, object] = {}
        arch = cfg.architecture
        if arch == "CNN_LSTM":
            k, D, F = cfg.conv_kernel, cfg.input_dim, cfg.conv_filters
            self.params["conv"] = (
                Parameter(_uniform(rng, (k * D, F), k * D, dtype), "conv.w"),
                Parameter(np.zeros(F, dtype=dtype), "conv.b", decay=False),
            )
            self.params["lstm"] = init_lstm(rng, F, cfg.hidden1, "lstm", dtype)
            last = cfg.hidden1
        elif arch == "LSTM":
            self.params["lstm"] = init_lstm(rng, cfg.input_dim, cfg.hidden1, "lstm", dtype)
            last = cfg.hidden1
        elif arch == "GRU":
            self.params["gru"] = init_gru(rng, cfg.input_dim, cfg.hidden1, "gru", dtype)
            last = cfg.hidden1
        else:
            self.params["lstm"] = init_lstm(rng, cfg.input_dim, cfg.hidden1, "lstm", dtype)
            self.params["gru"] = init_gru(rng, cfg.hidden1, cfg.hidden2, "gru", dtype)
            last = cfg.hidden2
        self.params["head"] = (
            Parameter(_uniform(rng, (last, cfg.head_dim), last, dtype), "head.w"),
            Parameter(np.zeros(cfg.head_dim, dtype=dtype), "head.b", decay=False),
        )

    def parameters(self) -> list[Parameter]:
        """Parameters in checkpoint order."""
        out = []
        for group in self.params.values():
            out.extend(group)
        return out

    def _conv_steps(self, x: Tensor) -> list:
        w, b = self.params["conv"]
        k, s = self.config.conv_kernel, self.config.conv_stride
        B, S, D = x.shape
        if S < k:
            raise ShapeMismatch(f"sequence length {S} shorter than conv kernel {k}")
        steps = []
        for t in range(0, S - k + 1, s):
            patch = x[:, t:t + k, :].reshape((B, k * D))
            steps.append(ad.relu(patch @ w + b))
        return steps

    def forward(self, features, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        x = ad.as_tensor(np.asarray(features, dtype=self.dtype) if not isinstance(features, Tensor) else features)
        if x.ndim != 3 or x.shape[-1] != self.config.input_dim:
            raise ShapeMismatch(f"expected [batch, seq, {self.config.input_dim}], got {x.shape}")
        arch = self.config.architecture
        if arch == "CNN_LSTM":
            steps = self._conv_steps(x)
        else:
            steps = [x[:, t, :] for t in range(x.shape[1])]
        if arch in ("LSTM", "CNN_LSTM"):
            h = run_lstm(steps, self.params["lstm"])[-1]
        elif arch == "GRU":
            h = run_gru(steps, self.params["gru"])[-1]
        else:
            h = run_gru(run_lstm(steps, self.params["lstm"]), self.params["gru"])[-1]
        h = ad.dropout(h, self.config.dropout_p, train, rng)
        w, b = self.params["head"]
        return h @ w + b


def forward_sequence(batch, model: SequenceModel, mode: str = "eval", rng=None) -> Tensor:
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    return model.forward(batch, train=(mode == "train"), rng=rng)
