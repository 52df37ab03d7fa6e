import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eeg_affect.errors import EmptyMatrix, LabelOutOfRange
from eeg_affect.evaluation import (
    ConfusionMatrix,
    confusion,
    export_report,
    metrics,
    multilabel_metrics,
    read_confusion_csv,
)
from eeg_affect.training import EpochLog


def brute_metrics(t, p, K):
    """Counting loops, no matrices."""
    n = len(t)
    per = []
    for k in range(K):
        tp = sum(1 for a, b in zip(t, p) if a == k and b == k)
        pp = sum(1 for b in p if b == k)
        sup = sum(1 for a in t if a == k)
        prec = tp / pp if pp else 0.0
        rec = tp / sup if sup else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per.append((prec, rec, f1, sup))
    present = [x for x in per if x[3] > 0]
    macro = [sum(x[i] for x in present) / len(present) for i in range(3)]
    acc = sum(1 for a, b in zip(t, p) if a == b) / n
    return acc, per, macro


labels = st.integers(2, 6).flatmap(
    lambda K: st.integers(1, 40).flatmap(
        lambda n: st.tuples(st.just(K), st.lists(st.integers(0, K - 1), min_size=n, max_size=n),
                            st.lists(st.integers(0, K - 1), min_size=n, max_size=n))))


@given(labels)
def test_metrics_match_brute_force(args):
    K, t, p = args
    cm = confusion(t, p, K)
    for i in range(K):
        for j in range(K):
            assert cm.counts[i, j] == sum(1 for a, b in zip(t, p) if a == i and b == j)
    r = metrics(cm)
    acc, per, macro = brute_metrics(t, p, K)
    assert abs(r.accuracy - acc) <= 1e-12
    for got, (pr, rc, f1, sup) in zip(r.per_class, per):
        assert abs(got["precision"] - pr) <= 1e-12 and abs(got["recall"] - rc) <= 1e-12
        assert abs(got["f1"] - f1) <= 1e-12 and got["support"] == sup
    for key, ref in zip(("precision", "recall", "f1"), macro):
        assert abs(r.macro[key] - ref) <= 1e-12
    assert r.micro["f1"] == r.accuracy


def test_examples():
    r = metrics(confusion([0, 1, 1, 0], [0, 1, 0, 0], 2))
    assert r.accuracy == 0.75
    assert r.per_class[1] == {"precision": 1.0, "recall": 0.5, "f1": 2 / 3, "support": 2}
    # a class never predicted: precision 0 by convention
    r = metrics(confusion([0, 1], [0, 0], 2))
    assert r.per_class[1]["precision"] == 0.0
    # a class never present is left out of the macro average
    r = metrics(confusion([0, 0, 1], [0, 0, 2], 3))
    assert r.macro["recall"] == 0.5
    assert r.one_vs_rest[2]["accuracy"] == pytest.approx(2 / 3)


def test_errors():
    with pytest.raises(LabelOutOfRange):
        confusion([0, 3], [0, 1], 3)
    with pytest.raises(LabelOutOfRange):
        confusion([0, 1], [0, -1], 3)
    with pytest.raises(EmptyMatrix):
        metrics(ConfusionMatrix(np.zeros((3, 3), dtype=int)))
    with pytest.raises(ValueError):
        ConfusionMatrix(np.zeros((2, 3)))


@given(st.integers(2, 5).flatmap(lambda B: st.tuples(
    st.just(B),
    st.lists(st.tuples(*[st.integers(0, B - 1)] * 4), min_size=1, max_size=20),
    st.randoms(use_true_random=False))))
def test_multilabel_against_groups(args):
    B, rows, rnd = args
    t = np.array(rows)
    p = np.array([[rnd.randrange(B) if rnd.random() < 0.5 else v for v in row] for row in rows])
    r = multilabel_metrics(t, p, B)
    accs = [brute_metrics(t[:, g].tolist(), p[:, g].tolist(), B)[0] for g in range(4)]
    assert abs(r.accuracy - np.mean(accs)) <= 1e-12
    macro_f1 = [brute_metrics(t[:, g].tolist(), p[:, g].tolist(), B)[2][2] for g in range(4)]
    assert abs(r.macro["f1"] - np.mean(macro_f1)) <= 1e-12
    assert r.exact_match == np.mean([(a == b).all() for a, b in zip(t, p)])


def test_export_roundtrip(tmp_path):
    cm = confusion([0, 1, 1, 0, 1], [0, 1, 0, 0, 1], 2)
    rep = metrics(cm)
    logs = [EpochLog(0, 0.001, 0.7, 0.6, 0.8, 0.8, 0.8, 0.8)]
    paths = export_report({("binary", "lstm_gru"): (rep, cm)}, {("binary", "lstm_gru"): logs}, tmp_path)
    assert sorted(p.name for p in paths) == [
        "confusion_binary_lstm_gru.csv", "curves_binary_lstm_gru.csv", "metrics_binary_lstm_gru.json"]
    assert read_confusion_csv(tmp_path / "confusion_binary_lstm_gru.csv") == cm
    d = json.loads((tmp_path / "metrics_binary_lstm_gru.json").read_text())
    assert d["accuracy"] == rep.accuracy and d["task"] == "binary"
    assert (tmp_path / "curves_binary_lstm_gru.csv").read_text().count("\n") == 2
