"""Per-channel window features: five time-domain statistics and four band powers.

Feature layout is channel-major; channel ``c`` owns columns ``9*c .. 9*c+8`` in
the order of :data:`FEATURE_NAMES`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BandAboveNyquist, ConfigError, EmptyTrainingSet
from .segmentation import Window

STAT_NAMES = ("mean", "std", "entropy", "skewness", "kurtosis")
ENTROPY_BINS = 16
MOMENT_EPS = 1e-24
CONSTANT_EPS = 1e-12


@dataclass(frozen=True)
class BandDefinition:
    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise ConfigError(f"band {self.name}: need 0 < low < high")


DEFAULT_BANDS = (
    BandDefinition("delta", 0.5, 4.0),
    BandDefinition("theta", 4.0, 8.0),
    BandDefinition("alpha", 8.0, 13.0),
    BandDefinition("beta", 13.0, 30.0),
)

FEATURE_NAMES = STAT_NAMES + tuple(f"P_{b.name}" for b in DEFAULT_BANDS)
FEATURES_PER_CHANNEL = len(FEATURE_NAMES)


def feature_columns(n_channels: int = 14) -> list[str]:
    return [f"c{c:02d}_{name}" for c in range(n_channels) for name in FEATURE_NAMES]


# ----------------------------------------------------------------------------
# spectrum


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(signal, n: int | None = None) -> np.ndarray:
    """Iterative radix-2 decimation-in-time DFT along the last axis.

    ``X[k] = sum_t x[t] exp(-2j*pi*k*t/n)``; the input is zero-padded to ``n``,
    which must be a power of two no smaller than the signal length.
    """
    x = np.asarray(signal)
    L = x.shape[-1]
    if n is None:
        n = next_pow2(L)
    if n < 1 or n & (n - 1):
        raise ValueError(f"n={n} is not a power of two")
    if L > n:
        raise ValueError(f"signal length {L} exceeds n={n}")
    buf = np.zeros(x.shape[:-1] + (n,), dtype=np.complex128)
    buf[..., :L] = x
    buf = buf[..., _bit_reverse_indices(n)]
    lead = buf.shape[:-1]
    m = 2
    while m <= n:
        h = m // 2
        tw = np.exp(-2j * np.pi * np.arange(h) / m)
        blocks = buf.reshape(lead + (n // m, m))
        even = blocks[..., :h]
        odd = blocks[..., h:] * tw
        buf = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
        m *= 2
    return buf


def periodogram(x, fs: float, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One-sided bins ``k = 0..n/2`` with ``P[k] = |X[k]|^2 / (n*fs)``."""
    x = np.asarray(x, dtype=np.float64)
    if n is None:
        n = next_pow2(x.shape[-1])
    X = fft(x, n)[..., : n // 2 + 1]
    freqs = np.arange(n // 2 + 1) * fs / n
    return freqs, (X.real ** 2 + X.imag ** 2) / (n * fs)


def _band_mask(freqs: np.ndarray, band: BandDefinition, fs: float) -> np.ndarray:
    if not fs > 2 * band.high_hz:
        raise BandAboveNyquist(f"band {band.name} tops out at {band.high_hz} Hz; fs={fs} Hz")
    return (freqs >= band.low_hz) & (freqs < band.high_hz)


def band_power(window_channel, band: BandDefinition, fs: float, n: int | None = None):
    """Sum of periodogram bins whose frequency lies in ``[low, high)``."""
    freqs, P = periodogram(window_channel, fs, n)
    out = P[..., _band_mask(freqs, band, fs)].sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def band_powers(x, bands: Sequence[BandDefinition], fs: float, n: int | None = None) -> np.ndarray:
    """All bands at once; returns ``[..., len(bands)]``."""
    freqs, P = periodogram(x, fs, n)
    return np.stack([P[..., _band_mask(freqs, b, fs)].sum(axis=-1) for b in bands], axis=-1)


# ----------------------------------------------------------------------------
# time-domain statistics


def _histogram_entropy(x: np.ndarray) -> np.ndarray:
    lo = x.min(axis=-1, keepdims=True)
    hi = x.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = span[..., 0] == 0
    safe = np.where(span == 0, 1.0, span)
    idx = np.floor((x - lo) / safe * ENTROPY_BINS).astype(np.intp)
    np.clip(idx, 0, ENTROPY_BINS - 1, out=idx)
    counts = (idx[..., None] == np.arange(ENTROPY_BINS)).sum(axis=-2)
    p = counts / x.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    ent = terms.sum(axis=-1)
    return np.where(flat, 0.0, ent)


def time_stats_array(x) -> np.ndarray:
    """Statistics along the last axis; returns ``[..., 5]``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError("need at least 2 samples")
    mean = x.mean(axis=-1)
    d = x - mean[..., None]
    m2 = (d ** 2).mean(axis=-1)
    m3 = (d ** 3).mean(axis=-1)
    m4 = (d ** 4).mean(axis=-1)
    ok = m2 >= MOMENT_EPS
    safe = np.where(ok, m2, 1.0)
    skew = np.where(ok, m3 / safe ** 1.5, 0.0)
    kurt = np.where(ok, m4 / safe ** 2 - 3.0, 0.0)
    return np.stack([mean, np.sqrt(m2), _histogram_entropy(x), skew, kurt], axis=-1)


def time_stats(window_channel) -> tuple[float, float, float, float, float]:
    """(mean, population std, 16-bin histogram entropy in bits, skewness, excess kurtosis)."""
    return tuple(float(v) for v in time_stats_array(np.asarray(window_channel).ravel()))


# ----------------------------------------------------------------------------
# feature vectors


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    window_ref: tuple = ()


def feature_matrix(windows: np.ndarray, fs: float, bands: Sequence[BandDefinition] = DEFAULT_BANDS) -> np.ndarray:
    """``[K, C, L]`` windows to ``[K, C*9]`` features."""
    w = np.asarray(windows, dtype=np.float64)
    feats = np.concatenate([time_stats_array(w), band_powers(w, bands, fs)], axis=-1)
    return feats.reshape(w.shape[0], -1)


def extract_features(window: Window, bands: Sequence[BandDefinition] = DEFAULT_BANDS, fs: float = 128.0) -> FeatureVector:
    values = feature_matrix(window.samples[None], fs, bands)[0]
    ref = (window.session.subject_id, window.session.game_id, window.index)
    return FeatureVector(values, ref)


# ----------------------------------------------------------------------------
# z-score


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std < CONSTANT_EPS

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "epsilon": CONSTANT_EPS}

    @classmethod
    def from_dict(cls, d) -> "NormalizationStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "NormalizationStats":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _as_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return np.atleast_2d(features.astype(np.float64, copy=False))
    rows = [f.values if isinstance(f, FeatureVector) else f for f in features]
    if not rows:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=np.float64)


def fit_normalization(train_features) -> NormalizationStats:
    """Column means and population standard deviations of the training rows."""
    X = _as_matrix(train_features)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit normalization on an empty training set")
    return NormalizationStats(X.mean(axis=0), X.std(axis=0))


def apply_normalization(fv, stats: NormalizationStats):
    """``(x - mean) / std``, with constant columns mapped to 0."""
    if isinstance(fv, FeatureVector):
        return FeatureVector(apply_normalization(fv.values, stats), fv.window_ref)
    x = np.asarray(fv, dtype=np.float64)
    const = stats.constant
    denom = np.where(const, 1.0, stats.std)
    return np.where(const, 0.0, (x - stats.mean) / denom)


def write_feature_csv(path, keys: Sequence[tuple], X: np.ndarray) -> None:
    """One row per window: ``subject,game,window`` then the feature columns."""
    X = np.asarray(X)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "game", "window"] + feature_columns(X.shape[1] // FEATURES_PER_CHANNEL))
        for (subject, game, idx), row in zip(keys, X):
            w.writerow([subject, game, idx] + [repr(float(v)) for v in row])


def read_feature_csv(path) -> tuple[list[tuple], np.ndarray]:
    keys, rows = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            if not row:
                continue
            keys.append((row[0], row[1], int(row[2])))
            rows.append([float(v) for v in row[3:]])
    return keys, np.asarray(rows, dtype=np.float64).reshape(len(rows), -1)
