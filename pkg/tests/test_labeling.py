import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eeg_affect.data_ingest import EMOTIONS, RatingVector, SessionMeta
from eeg_affect.errors import ConfigError, TooFewSubjects
from eeg_affect.labeling import (
    BinningConfig,
    LabelSet,
    SplitAssignment,
    broadcast_labels,
    encode_binary,
    encode_categorical,
    encode_labels,
    encode_ordinal,
    from_multihot,
    label_distribution,
    read_label_csv,
    subject_split,
    to_multihot,
    write_label_csv,
)
from eeg_affect.segmentation import Window

ratings = st.tuples(*[st.floats(0, 10) for _ in range(4)]).map(lambda t: RatingVector(*t))


def test_binary_examples():
    assert encode_binary(RatingVector(2, 1, 6, 8)) == 1
    assert encode_binary(RatingVector(5, 5, 5, 5)) == 0


def test_binary_integer_grid():
    for b, h, c, f in itertools.product(range(11), repeat=4):
        # integer oracle: compare sums, no division
        assert encode_binary(RatingVector(b, h, c, f)) == int(f + c > b + h)


def test_categorical_examples():
    assert encode_categorical(RatingVector(2, 9, 3, 1)) == "horrible"
    assert encode_categorical(RatingVector(7, 7, 1, 1)) == "boring"


def test_categorical_grid():
    for v in itertools.product((0, 5, 10), repeat=4):
        best = max(v)
        assert encode_categorical(RatingVector(*v)) == EMOTIONS[v.index(best)]


@given(ratings)
def test_binary_swap_symmetry(r):
    swapped = RatingVector(r.horrible, r.boring, r.funny, r.calm)
    assert encode_binary(r) == encode_binary(swapped)


@given(st.tuples(*[st.integers(0, 10) for _ in range(4)]), st.integers(-10, 10))
def test_categorical_shift_invariance(v, c):
    shifted = [x + c for x in v]
    if min(shifted) >= 0 and max(shifted) <= 10:
        assert encode_categorical(RatingVector(*v)) == encode_categorical(RatingVector(*shifted))


def test_ordinal_examples():
    cfg = BinningConfig()
    assert encode_ordinal(RatingVector(10, 0, 0, 0), cfg) == (9, 0, 0, 0)
    assert encode_ordinal(RatingVector(3.5, 1.0, 7.0, 9.99), cfg) == (3, 1, 7, 9)
    assert encode_ordinal(RatingVector(10, 10, 5, 0), BinningConfig(n_bins=11)) == (10, 10, 5, 0)


@pytest.mark.parametrize("B", [2, 5, 10, 11])
def test_ordinal_sweep_monotone_and_clamped(B):
    cfg = BinningConfig(n_bins=B)
    prev = -1
    for k in range(10001):
        v = k / 1000
        b = encode_ordinal(RatingVector(v, 0, 0, 0), cfg)[0]
        assert b >= prev and 0 <= b < B
        # exact integer oracle for floor(v*B/10) on the decimal grid
        assert b == min(k * B // 10000, B - 1)
        prev = b


def test_multihot_examples():
    assert np.flatnonzero(to_multihot([0, 0, 0, 0], 10)).tolist() == [0, 10, 20, 30]
    assert np.flatnonzero(to_multihot([9, 9, 9, 9], 10)).tolist() == [9, 19, 29, 39]
    with pytest.raises(ValueError):
        to_multihot([10, 0, 0, 0], 10)


@given(st.integers(2, 12).flatmap(lambda B: st.tuples(st.just(B), st.lists(st.integers(0, B - 1), min_size=4, max_size=4))))
def test_multihot_inverse(args):
    B, bins = args
    v = to_multihot(bins, B)
    assert v.shape == (4 * B,) and v.sum() == 4
    assert from_multihot(v, B).tolist() == bins


def test_split_examples():
    subjects = [f"S{i:02d}" for i in range(1, 29)]
    s = subject_split(subjects, 0.8, seed=1)
    assert (len(s.train_subjects), len(s.eval_subjects)) == (22, 6)
    assert s == subject_split(reversed(subjects), 0.8, seed=1)
    two = subject_split(["a", "b"], 0.8, 0)
    assert len(two.train_subjects) == len(two.eval_subjects) == 1
    with pytest.raises(TooFewSubjects):
        subject_split(["a"], 0.8, 0)
    with pytest.raises(ConfigError):
        subject_split(["a", "b"], 1.0, 0)
    assert SplitAssignment.from_dict(s.to_dict()) == s


@given(st.sets(st.text(min_size=1, max_size=4), min_size=2, max_size=60), st.floats(0.05, 0.95), st.integers(0, 2**32))
def test_split_properties(subjects, ratio, seed):
    s = subject_split(subjects, ratio, seed)
    assert not (s.train_subjects & s.eval_subjects)
    assert s.train_subjects | s.eval_subjects == subjects
    assert s.train_subjects and s.eval_subjects
    assert abs(len(s.train_subjects) - ratio * len(subjects)) <= 1


def _windows(n, subject="S01", game="G1"):
    meta = SessionMeta(subject, game)
    return [Window(np.zeros((14, 4)), meta, k, 0) for k in range(n)]


def test_broadcast_labels():
    lab = encode_labels(RatingVector(1, 2, 3, 4))
    out = broadcast_labels(lab, _windows(32))
    assert len(out) == 32 and all(l is lab for _, l in out)
    assert broadcast_labels(lab, []) == []
    other = encode_labels(RatingVector(9, 0, 0, 0))
    ws = _windows(3) + _windows(3, game="G2")
    ws = [ws[i] for i in (4, 0, 5, 2, 1, 3)]
    table = {("S01", "G1"): lab, ("S01", "G2"): other}
    for w, l in broadcast_labels(table, ws):
        assert l is table[w.session.key]


def test_label_csv_roundtrip_and_distribution(tmp_path):
    labs = [encode_labels(RatingVector(*v)) for v in [(1, 2, 3, 4), (9, 0, 0, 0), (0, 0, 10, 0)]]
    keys = [("S01", "G1", 0), ("S01", "G1", 1), ("S02", "G3", 0)]
    write_label_csv(tmp_path / "l.csv", keys, labs)
    k2, l2 = read_label_csv(tmp_path / "l.csv")
    assert k2 == keys and l2 == labs
    d = label_distribution(labs)
    assert d == {"binary": {0: 1, 1: 2}, "categorical": {"boring": 1, "calm": 1, "funny": 1}}
    assert isinstance(labs[0], LabelSet) and labs[0].categorical_index == 3
