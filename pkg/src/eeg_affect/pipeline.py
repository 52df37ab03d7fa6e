"""End-to-end glue: sessions -> window table -> sequences -> trained models -> reports."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import MODEL_NAMES, SEQUENCE_MODELS, RunConfig
from .data_ingest import Session
from .errors import ConfigError, EmptyTrainingSet, HeadMismatch
from .evaluation import export_report
from .features import (
    DEFAULT_BANDS,
    NormalizationStats,
    apply_normalization,
    feature_matrix,
    fit_normalization,
    read_feature_csv,
    write_feature_csv,
)
from .labeling import (
    LabelSet,
    SplitAssignment,
    encode_labels,
    label_distribution,
    read_label_csv,
    subject_split,
    write_label_csv,
)
from .models import (
    GroupedClassifier,
    SequenceModel,
    linear_train,
    rf_train,
)
from .segmentation import segment_array
from .training import TASKS, N_GROUPS, fit, head_dim, n_classes, predict_from_logits, predict_logits, score_predictions

log = logging.getLogger(__name__)

FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"
STATS_FILE = "norm_stats.json"
SPLIT_FILE = "split.json"


@dataclass
class WindowTable:
    """Raw (un-normalised) window features aligned with their keys and labels."""

    keys: list        # (subject, game, window index)
    X: np.ndarray     # [n, 126]
    labels: list      # LabelSet per row

    def __len__(self):
        return len(self.keys)

    @property
    def subjects(self) -> list:
        return sorted({k[0] for k in self.keys})

    def rows_for(self, subjects: Iterable[str]) -> np.ndarray:
        wanted = set(subjects)
        return np.array([i for i, k in enumerate(self.keys) if k[0] in wanted], dtype=np.intp)

    def subset(self, rows: np.ndarray) -> "WindowTable":
        return WindowTable([self.keys[i] for i in rows], self.X[rows], [self.labels[i] for i in rows])


def targets(labels: Sequence[LabelSet], task: str) -> np.ndarray:
    if task == "binary":
        return np.array([l.binary_valence for l in labels], dtype=np.intp)
    if task == "categorical":
        return np.array([l.categorical_index for l in labels], dtype=np.intp)
    if task == "multilabel":
        return np.array([l.ordinal_bins for l in labels], dtype=np.intp).reshape(len(labels), N_GROUPS)
    raise ConfigError(f"unknown task {task!r}")


def featurize_sessions(sessions: Sequence[Session], cfg: RunConfig) -> WindowTable:
    keys, blocks, labels = [], [], []
    for rec, rating, meta in sessions:
        fs = rec.sampling_rate_hz
        w, hop = cfg.segment.window_samples(fs), cfg.segment.hop_samples(fs)
        windows, _ = segment_array(rec.channels, w, hop)
        blocks.append(feature_matrix(windows, fs, DEFAULT_BANDS))
        lab = encode_labels(rating, cfg.binning)
        keys.extend((meta.subject_id, meta.game_id, k) for k in range(len(windows)))
        labels.extend([lab] * len(windows))
    X = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, 126))
    return WindowTable(keys, X, labels)


def make_sequences(keys: Sequence[tuple], X: np.ndarray, seq_len: int, stride: int | None = None):
    """Chunk each session's consecutive windows into ``[m, seq_len, d]`` sequences.

    Sequences never cross a session boundary; a trailing remainder shorter than
    ``seq_len`` is dropped. Returns ``(sequences, row_index_of_last_window)``.
    """
    stride = stride or seq_len
    by_session: dict = {}
    for i, (subject, game, idx) in enumerate(keys):
        by_session.setdefault((subject, game), []).append((idx, i))
    seqs, last_rows = [], []
    for key in sorted(by_session):
        rows = [i for _, i in sorted(by_session[key])]
        for start in range(0, len(rows) - seq_len + 1, stride):
            chunk = rows[start:start + seq_len]
            seqs.append(X[chunk])
            last_rows.append(chunk[-1])
    d = X.shape[1] if X.ndim == 2 else 0
    if not seqs:
        return np.zeros((0, seq_len, d)), np.zeros(0, dtype=np.intp)
    return np.stack(seqs), np.asarray(last_rows, dtype=np.intp)


# ----------------------------------------------------------------------------
# models


def build_model(name: str, task: str, cfg: RunConfig, input_dim: int):
    if name not in MODEL_NAMES:
        raise ConfigError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    mcfg = dataclasses.replace(
        cfg.sequence_model,
        architecture=SEQUENCE_MODELS[name],
        input_dim=input_dim,
        head_dim=head_dim(task, cfg.binning.n_bins),
    )
    return SequenceModel(mcfg, dtype=np.dtype(cfg.train.dtype))


def _train_classical(name: str, X: np.ndarray, y: np.ndarray, task: str, cfg: RunConfig):
    K = n_classes(task, cfg.binning.n_bins)

    def one(target):
        if name == "forest":
            return rf_train(X, target, cfg.forest, n_classes=K)
        kind = "logistic" if name == "logistic" else "hinge_svm"
        return linear_train(X, target, dataclasses.replace(cfg.linear, kind=kind), n_classes=K)

    if task == "multilabel":
        return GroupedClassifier([one(y[:, g]) for g in range(N_GROUPS)])
    return one(y)


@dataclass
class TrainResult:
    name: str
    task: str
    model: object
    logs: list
    report: object
    confusion: object
    seconds: float


def split_table(table: WindowTable, split: SplitAssignment, stats: NormalizationStats):
    tr, ev = table.rows_for(split.train_subjects), table.rows_for(split.eval_subjects)
    Xn = apply_normalization(table.X, stats)
    return (tr, ev), Xn


def prepare_inputs(name: str, task: str, table: WindowTable, rows: np.ndarray, Xn: np.ndarray, cfg: RunConfig):
    """Model inputs and targets for the given table rows (sequences for deep models)."""
    y_all = targets(table.labels, task)
    if name in SEQUENCE_MODELS:
        keys = [table.keys[i] for i in rows]
        seqs, last = make_sequences(keys, Xn[rows], cfg.seq_len, cfg.stride)
        return seqs, y_all[rows][last]
    return Xn[rows], y_all[rows]


def train_one(name: str, task: str, table: WindowTable, split: SplitAssignment, stats: NormalizationStats,
              cfg: RunConfig) -> TrainResult:
    cfg = cfg.resolved()
    (tr, ev), Xn = split_table(table, split, stats)
    Xtr, ytr = prepare_inputs(name, task, table, tr, Xn, cfg)
    Xev, yev = prepare_inputs(name, task, table, ev, Xn, cfg)
    if len(Xtr) == 0:
        raise EmptyTrainingSet(f"no training inputs for {name}/{task}")
    t0 = time.perf_counter()
    if name in SEQUENCE_MODELS:
        model = build_model(name, task, cfg, Xn.shape[1])
        model, logs = fit(model, (Xtr, ytr), (Xev, yev), cfg.train, task, cfg.binning.n_bins)
        pred = predict_from_logits(predict_logits(model, np.asarray(Xev, dtype=model.dtype)), task, cfg.binning.n_bins)
    else:
        model = _train_classical(name, Xtr, ytr, task, cfg)
        logs = []
        pred = model.predict(Xev)
    report, cm = score_predictions(yev, pred, task, cfg.binning.n_bins)
    report.task, report.model = task, name
    return TrainResult(name, task, model, logs, report, cm, time.perf_counter() - t0)


def predict(model, name_or_kind: str, X: np.ndarray, task: str, n_bins: int) -> np.ndarray:
    if isinstance(model, SequenceModel):
        if model.config.head_dim != head_dim(task, n_bins):
            raise HeadMismatch(f"model head has {model.config.head_dim} outputs; task {task} needs {head_dim(task, n_bins)}")
        return predict_from_logits(predict_logits(model, np.asarray(X, dtype=model.dtype)), task, n_bins)
    return model.predict(X)


# ----------------------------------------------------------------------------
# on-disk feature store (the featurize / train / eval hand-off)


def write_feature_store(out_dir, table: WindowTable, split: SplitAssignment, stats: NormalizationStats) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_csv(out / FEATURES_FILE, table.keys, table.X)
    write_label_csv(out / LABELS_FILE, table.keys, table.labels)
    stats.save(out / STATS_FILE)
    train_labels = [table.labels[i] for i in table.rows_for(split.train_subjects)]
    eval_labels = [table.labels[i] for i in table.rows_for(split.eval_subjects)]
    doc = split.to_dict()
    doc["label_distribution"] = {"train": label_distribution(train_labels), "eval": label_distribution(eval_labels)}
    (out / SPLIT_FILE).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return out


def read_feature_store(store_dir) -> tuple[WindowTable, SplitAssignment, NormalizationStats]:
    d = Path(store_dir)
    keys, X = read_feature_csv(d / FEATURES_FILE)
    lkeys, labels = read_label_csv(d / LABELS_FILE)
    if lkeys != keys:
        raise ValueError(f"{d}: feature and label rows are not aligned")
    split = SplitAssignment.from_dict(json.loads((d / SPLIT_FILE).read_text()))
    return WindowTable(keys, X, labels), split, NormalizationStats.load(d / STATS_FILE)


def build_feature_store(sessions: Sequence[Session], cfg: RunConfig):
    """Featurise, split by subject and fit normalisation on the training subjects only."""
    cfg = cfg.resolved()
    table = featurize_sessions(sessions, cfg)
    split = subject_split(table.subjects, cfg.split_ratio, cfg.seed)
    stats = fit_normalization(table.X[table.rows_for(split.train_subjects)])
    return table, split, stats


# ----------------------------------------------------------------------------
# benchmark harness


REFERENCE_RESULTS = {
    # published GAMEEMO results (subject-independent split), shown for context only
    ("binary", "forest"): {"accuracy": 0.85, "precision": 0.85, "f1": 0.85},
    ("binary", "lstm_gru"): {"accuracy": 0.933, "precision": 0.933, "f1": 0.932},
    ("categorical", "forest"): {"accuracy": 0.796, "precision": 0.843, "f1": 0.758},
    ("categorical", "lstm_gru"): {"accuracy": 0.945, "precision": 0.938, "f1": 0.936},
    ("multilabel", "forest"): {"accuracy": 0.79, "precision": 0.79, "f1": 0.79},
    ("multilabel", "lstm_gru"): {"accuracy": 0.906, "precision": 0.909, "f1": 0.909},
}


def run_benchmark(sessions: Sequence[Session], cfg: RunConfig, models: Sequence[str] = ("lstm_gru", "forest"),
                  tasks: Sequence[str] = TASKS, out_dir=None) -> dict:
    """Train every (task, model) pair and optionally export reports.

    Returns ``{(task, model): TrainResult}``.
    """
    table, split, stats = build_feature_store(sessions, cfg)
    results = {}
    for task in tasks:
        for name in models:
            log.info("training %s on %s", name, task)
            results[(task, name)] = train_one(name, task, table, split, stats, cfg)
    if out_dir is not None:
        export_report({k: (r.report, r.confusion) for k, r in results.items()},
                      {k: r.logs for k, r in results.items()}, out_dir)
    return results


def format_table(rows: dict) -> str:
    """Plain-text summary: one line per (task, model) with reference figures alongside.

    ``rows`` maps ``(task, model)`` to a metrics dict (``accuracy`` and a
    ``macro`` block). Reference figures come from a different dataset scale
    and unpublished sequence/architecture details; they are context, not targets.
    """
    lines = [f"{'task':<12} {'model':<10} {'acc':>7} {'prec':>7} {'f1':>7}   {'ref acc':>7} {'ref f1':>7}"]
    for (task, model) in sorted(rows):
        m = rows[(task, model)]
        ref = REFERENCE_RESULTS.get((task, model))
        ref_s = f"{ref['accuracy']:>7.3f} {ref['f1']:>7.3f}" if ref else f"{'-':>7} {'-':>7}"
        lines.append(
            f"{task:<12} {model:<10} {m['accuracy']:>7.3f} {m['macro']['precision']:>7.3f} "
            f"{m['macro']['f1']:>7.3f}   {ref_s}"
        )
    return "\n".join(lines)
