"""Fixed-length overlapping windows with zero-padded tails."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data_ingest import RawRecording, SessionMeta
from .errors import ConfigError


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SegmentConfig:
    window_ms: float = 500.0
    overlap_fraction: float = 0.5

    def __post_init__(self):
        if not self.window_ms > 0:
            raise ConfigError("window_ms must be positive")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ConfigError("overlap_fraction must lie in [0, 1)")

    def window_samples(self, fs: float) -> int:
        n = round_half_up(self.window_ms * fs / 1000.0)
        if n < 2:
            raise ConfigError(f"window of {self.window_ms} ms at {fs} Hz is {n} samples; need >= 2")
        return n

    def hop_samples(self, fs: float) -> int:
        hop = round_half_up(self.window_samples(fs) * (1.0 - self.overlap_fraction))
        if hop < 1:
            raise ConfigError("overlap leaves a hop of 0 samples")
        return hop


@dataclass(frozen=True, eq=False)
class Window:
    samples: np.ndarray
    session: SessionMeta
    index: int
    padded_samples: int


def window_count(T: int, window: int, hop: int) -> int:
    """Number of windows ``segment`` emits: one per start ``k*hop < T``."""
    if window < 2 or hop < 1:
        raise ConfigError("need window >= 2 and hop >= 1")
    if T <= 0:
        return 0
    return -(-T // hop)


def segment_array(channels: np.ndarray, window: int, hop: int) -> tuple[np.ndarray, np.ndarray]:
    """Slice a ``[C, T]`` array into ``[K, C, window]`` plus per-window pad counts."""
    channels = np.asarray(channels)
    C, T = channels.shape
    K = window_count(T, window, hop)
    if K == 0:
        return np.zeros((0, C, window), dtype=channels.dtype), np.zeros(0, dtype=int)
    total = max(T, (K - 1) * hop + window)  # hop > window leaves gaps past the last start
    padded = np.zeros((C, total), dtype=channels.dtype)
    padded[:, :T] = channels
    views = sliding_window_view(padded, window, axis=1)[:, ::hop]  # [C, K, window]
    out = np.ascontiguousarray(views.transpose(1, 0, 2))
    starts = np.arange(K) * hop
    pads = np.maximum(starts + window - T, 0)
    return out, pads


def segment(recording: RawRecording, config: SegmentConfig, session: SessionMeta | None = None) -> list[Window]:
    fs = recording.sampling_rate_hz
    window, hop = config.window_samples(fs), config.hop_samples(fs)
    if session is None:
        session = SessionMeta(recording.subject_id, recording.game_id)
    arr, pads = segment_array(recording.channels, window, hop)
    return [Window(arr[k], session, k, int(pads[k])) for k in range(len(arr))]
