"""Binary valence, dominant-emotion and ordinal-bin targets, plus subject splits."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data_ingest import EMOTIONS, RatingVector
from .errors import ConfigError, TooFewSubjects
from .segmentation import Window, round_half_up

LABEL_HEADER = ("subject", "game", "window", "binary", "categorical") + tuple(f"bin_{e}" for e in EMOTIONS)


@dataclass(frozen=True)
class BinningConfig:
    n_bins: int = 10
    domain: tuple = (0.0, 10.0)

    def __post_init__(self):
        if int(self.n_bins) < 2:
            raise ConfigError("n_bins must be >= 2")
        lo, hi = self.domain
        if not lo < hi:
            raise ConfigError("binning domain must be increasing")


@dataclass(frozen=True)
class LabelSet:
    binary_valence: int
    categorical: str
    ordinal_bins: tuple

    @property
    def categorical_index(self) -> int:
        return EMOTIONS.index(self.categorical)


def encode_binary(r: RatingVector) -> int:
    """1 when the positive pair outscores the negative pair; ties are negative."""
    return int((r.funny + r.calm) / 2 > (r.boring + r.horrible) / 2)


def encode_categorical(r: RatingVector) -> str:
    # max() keeps the first maximal element, which is the documented tie-break
    values = r.as_array()
    return EMOTIONS[max(range(len(EMOTIONS)), key=lambda i: values[i])]


def encode_ordinal(r: RatingVector, cfg: BinningConfig = BinningConfig()) -> tuple:
    lo, hi = cfg.domain
    B = cfg.n_bins
    return tuple(min(int(math.floor((v - lo) * B / (hi - lo))), B - 1) for v in r.as_array())


def to_multihot(bins: Sequence[int], B: int) -> np.ndarray:
    out = np.zeros(len(bins) * B, dtype=np.int8)
    for g, b in enumerate(bins):
        if not 0 <= b < B:
            raise ValueError(f"bin {b} outside [0, {B})")
        out[g * B + b] = 1
    return out


def from_multihot(vec: np.ndarray, B: int) -> np.ndarray:
    """Group-wise argmax; inverse of :func:`to_multihot` (works on scores too)."""
    v = np.asarray(vec)
    return v.reshape(v.shape[:-1] + (-1, B)).argmax(axis=-1)


def encode_labels(r: RatingVector, cfg: BinningConfig = BinningConfig()) -> LabelSet:
    return LabelSet(encode_binary(r), encode_categorical(r), encode_ordinal(r, cfg))


@dataclass(frozen=True)
class SplitAssignment:
    train_subjects: frozenset
    eval_subjects: frozenset
    ratio: float = 0.8
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "train_subjects": sorted(self.train_subjects),
            "eval_subjects": sorted(self.eval_subjects),
            "ratio": self.ratio,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "SplitAssignment":
        return cls(frozenset(d["train_subjects"]), frozenset(d["eval_subjects"]), d["ratio"], d["seed"])


def subject_split(subjects: Iterable[str], ratio: float = 0.8, seed: int = 0) -> SplitAssignment:
    """Shuffle subjects with ``seed`` and put the first ``round(ratio*n)`` in train.

    At least one subject always lands on each side.
    """
    pool = sorted(set(subjects))
    n = len(pool)
    if n < 2:
        raise TooFewSubjects(f"need at least 2 subjects for a split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise ConfigError("split ratio must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(round_half_up(ratio * n), 1), n - 1)
    train = frozenset(pool[i] for i in order[:n_train])
    return SplitAssignment(train, frozenset(pool) - train, ratio, seed)


def label_distribution(labels: Iterable[LabelSet]) -> dict:
    labels = list(labels)
    return {
        "binary": dict(sorted(Counter(l.binary_valence for l in labels).items())),
        "categorical": dict(sorted(Counter(l.categorical for l in labels).items())),
    }


def broadcast_labels(session_label, windows: Sequence[Window]) -> list[tuple[Window, LabelSet]]:
    """Attach session labels to windows.

    ``session_label`` is either one :class:`LabelSet` shared by every window, or
    a mapping keyed by ``(subject_id, game_id)`` joined on each window's session.
    """
    if isinstance(session_label, LabelSet):
        return [(w, session_label) for w in windows]
    return [(w, session_label[w.session.key]) for w in windows]


def write_label_csv(path, keys: Sequence[tuple], labels: Sequence[LabelSet]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_HEADER)
        for (subject, game, idx), lab in zip(keys, labels):
            w.writerow([subject, game, idx, lab.binary_valence, lab.categorical, *lab.ordinal_bins])


def read_label_csv(path) -> tuple[list[tuple], list[LabelSet]]:
    keys, labels = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != LABEL_HEADER:
            raise ValueError(f"{path}: unexpected label header {header}")
        for row in r:
            if not row:
                continue
            keys.append((row[0], row[1], int(row[2])))
            labels.append(LabelSet(int(row[3]), row[4], tuple(int(v) for v in row[5:9])))
    return keys, labels
