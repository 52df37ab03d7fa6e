"""Random forest of Gini-impurity decision trees (bootstrap + random feature subsets)."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    features_per_split: int | None = None  # None -> round(sqrt(d))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise ConfigError("max_depth must be >= 0 and min_leaf >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Tree:
    """Flat arrays; leaves have ``feature == -1``. ``counts`` holds per-node class counts."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] < self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the lowest class on ties
        return self.counts[self.leaf_index(np.asarray(X, dtype=np.float64))].argmax(axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [repr(float(t)) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.intp),
            np.asarray([float(t) for t in d["threshold"]], dtype=np.float64),
            np.asarray(d["left"], dtype=np.intp),
            np.asarray(d["right"], dtype=np.intp),
            np.asarray(d["counts"], dtype=np.int64).reshape(len(d["feature"]), -1),
        )


def gini(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1)
    safe = np.where(n == 0, 1, n)
    p = counts / safe[..., None]
    return np.where(n == 0, 0.0, 1.0 - (p ** 2).sum(axis=-1))


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, features, min_leaf: int):
    """Exhaustive threshold search over ``features``.

    Returns ``(weighted child impurity, feature, threshold)`` or ``None``.
    Thresholds are midpoints between consecutive distinct values; ties in the
    score keep the earliest candidate.
    """
    n = len(y)
    best = None
    onehot = np.eye(n_classes, dtype=np.int64)[y]
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]  # left counts after i+1 samples
        right = onehot.sum(axis=0) - left
        n_left = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        score = (n_left * gini(left) + (n - n_left) * gini(right)) / n
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if best is None or score[i] < best[0]:
            best = (float(score[i]), int(f), float((xs[i] + xs[i + 1]) / 2))
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, cfg: ForestConfig, k_features: int,
              rng: np.random.Generator) -> Tree:
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    d = X.shape[1]
    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= cfg.max_depth or len(idx) < 2 * cfg.min_leaf or np.count_nonzero(counts[node]) <= 1:
            continue
        feats = rng.choice(d, size=min(k_features, d), replace=False)
        split = best_split(X[idx], y[idx], n_classes, feats, cfg.min_leaf)
        if split is None:
            continue
        _, f, thr = split
        mask = X[idx, f] < thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(
        np.asarray(feature, dtype=np.intp), np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.intp), np.asarray(right, dtype=np.intp),
        np.asarray(counts, dtype=np.int64).reshape(len(feature), n_classes),
    )


@dataclass
class ForestModel:
    trees: list
    n_classes: int
    config: ForestConfig

    def vote_distribution(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.zeros((len(X), self.n_classes))
        for t in self.trees:
            votes[np.arange(len(X)), t.predict(X)] += 1
        return votes / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return self.vote_distribution(X).argmax(axis=1)

    def to_dict(self) -> dict:
        return {"kind": "forest", "n_classes": self.n_classes, "config": self.config.to_dict(),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        return cls([Tree.from_dict(t) for t in d["trees"]], int(d["n_classes"]), ForestConfig(**d["config"]))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EEG_AFFECT_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def rf_train(X, y, cfg: ForestConfig = ForestConfig(), n_classes: int | None = None) -> ForestModel:
    """Grow ``cfg.n_trees`` trees, each from its own child seed, so results do not depend on thread count."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if len(y) < 2:
        raise ValueError("need at least 2 samples")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= K:
        raise ValueError(f"labels must lie in [0, {K})")
    d = X.shape[1]
    k = cfg.features_per_split or max(1, int(math.floor(math.sqrt(d) + 0.5)))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)

    def one(ss):
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, len(y), len(y)) if cfg.bootstrap else np.arange(len(y))
        return grow_tree(X[idx], y[idx], K, cfg, k, rng)

    workers = min(_threads(), cfg.n_trees)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(one, seeds))
    else:
        trees = [one(s) for s in seeds]
    return ForestModel(trees, K, cfg)


def rf_predict(model: ForestModel, x) -> tuple:
    """Class of a single sample plus the vote distribution over classes."""
    dist = model.vote_distribution(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    return int(dist.argmax()), dist
