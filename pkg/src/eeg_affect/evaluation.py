"""Confusion matrices, per-class and averaged classification metrics, report export.

Conventions: a ratio whose denominator is zero is reported as 0, and macro
averages only include classes that actually occur in the ground truth.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyMatrix, LabelOutOfRange


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or (c < 0).any():
            raise ValueError("confusion counts must be a non-negative square matrix")
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def confusion(true, pred, K: int) -> ConfusionMatrix:
    t = np.asarray(true, dtype=np.int64).ravel()
    p = np.asarray(pred, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError(f"true and predicted label counts differ: {t.shape} vs {p.shape}")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= K):
            raise LabelOutOfRange(f"{name} labels must lie in [0, {K})")
    counts = np.bincount(t * K + p, minlength=K * K).reshape(K, K)
    return ConfusionMatrix(counts)


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def _f1(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    if p == r:
        return p
    return 2 * p * r / (p + r)


@dataclass
class MetricReport:
    accuracy: float
    per_class: list  # dicts: precision, recall, f1, support
    macro: dict
    micro: dict
    task: str = ""
    model: str = ""
    class_names: list = field(default_factory=list)
    exact_match: float | None = None
    one_vs_rest: list = field(default_factory=list)
    groups: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "task": self.task,
            "model": self.model,
            "accuracy": self.accuracy,
            "macro": self.macro,
            "micro": self.micro,
            "per_class": self.per_class,
            "one_vs_rest": self.one_vs_rest,
        }
        if self.class_names:
            d["class_names"] = list(self.class_names)
        if self.exact_match is not None:
            d["exact_match"] = self.exact_match
        if self.groups:
            d["groups"] = [g.to_dict() for g in self.groups]
        return d


def one_vs_rest(cm: ConfusionMatrix) -> list:
    """Per-class binary view (class k against all others)."""
    c = cm.counts
    total = c.sum()
    out = []
    for k in range(cm.n_classes):
        tp = c[k, k]
        fp = c[:, k].sum() - tp
        fn = c[k, :].sum() - tp
        tn = total - tp - fp - fn
        p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        out.append({"accuracy": _ratio(tp + tn, total), "precision": p, "recall": r, "f1": _f1(p, r)})
    return out


def metrics(cm: ConfusionMatrix) -> MetricReport:
    c = cm.counts
    total = c.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    diag = np.diag(c)
    col = c.sum(axis=0)
    row = c.sum(axis=1)
    per_class = []
    for k in range(cm.n_classes):
        p, r = _ratio(diag[k], col[k]), _ratio(diag[k], row[k])
        per_class.append({"precision": p, "recall": r, "f1": _f1(p, r), "support": int(row[k])})
    present = [pc for pc in per_class if pc["support"] > 0]
    macro = {k: float(np.mean([pc[k] for pc in present])) for k in ("precision", "recall", "f1")}
    acc = _ratio(diag.sum(), total)
    # single-label: every false positive is someone's false negative, so micro P = R = accuracy
    micro_p = _ratio(diag.sum(), col.sum())
    micro_r = _ratio(diag.sum(), row.sum())
    micro = {"precision": micro_p, "recall": micro_r, "f1": _f1(micro_p, micro_r)}
    return MetricReport(acc, per_class, macro, micro, one_vs_rest=one_vs_rest(cm))


def multilabel_metrics(true_bins, pred_bins, B: int) -> MetricReport:
    """Each emotion group scored as a ``B``-class problem; headline numbers are group means."""
    t = np.asarray(true_bins)
    p = np.asarray(pred_bins)
    if t.shape != p.shape or t.ndim != 2:
        raise ValueError("bins must be matching [n, groups] arrays")
    if t.shape[0] == 0:
        raise EmptyMatrix("no samples")
    groups = [metrics(confusion(t[:, g], p[:, g], B)) for g in range(t.shape[1])]
    mean_of = lambda key, sub: float(np.mean([getattr(r, sub)[key] for r in groups]))
    macro = {k: mean_of(k, "macro") for k in ("precision", "recall", "f1")}
    micro = {k: mean_of(k, "micro") for k in ("precision", "recall", "f1")}
    acc = float(np.mean([r.accuracy for r in groups]))
    exact = float(np.mean(np.all(t == p, axis=1)))
    return MetricReport(acc, [], macro, micro, exact_match=exact, groups=groups)


# ----------------------------------------------------------------------------
# export


def write_confusion_csv(path, cm: ConfusionMatrix) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(cm.counts.tolist())


def read_confusion_csv(path) -> ConfusionMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return ConfusionMatrix(np.asarray([[int(v) for v in row] for row in csv.reader(fh) if row]))


def export_report(reports: Mapping[tuple, tuple], logs: Mapping[tuple, Sequence] | None, out_dir) -> list[Path]:
    """Write metrics JSON, confusion CSV and learning-curve CSV per (task, model).

    ``reports`` maps ``(task, model) -> (MetricReport, ConfusionMatrix)``;
    ``logs`` maps the same keys to epoch logs (objects with ``row()``, see
    ``training.EpochLog``). A curves file is written for every report, empty
    apart from its header when no epochs were logged.
    """
    from .training import write_epoch_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    logs = logs or {}
    for (task, model), (report, cm) in sorted(reports.items()):
        d = report.to_dict()
        d["task"], d["model"] = task, model
        mpath = out / f"metrics_{task}_{model}.json"
        mpath.write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")
        cpath = out / f"confusion_{task}_{model}.csv"
        write_confusion_csv(cpath, cm)
        gpath = out / f"curves_{task}_{model}.csv"
        write_epoch_csv(gpath, logs.get((task, model), []))
        written += [mpath, cpath, gpath]
    return written
