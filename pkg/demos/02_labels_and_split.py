#!/usr/bin/env python3
# From four self-ratings to the three targets, and a subject-held-out split.

from eeg_affect.data_ingest import RatingVector
from eeg_affect.labeling import BinningConfig, encode_labels, subject_split, to_multihot

r = RatingVector(boring=2, horrible=1, calm=6, funny=8)
lab = encode_labels(r)
print(lab)  # positive valence, funny dominates
print(to_multihot(lab.ordinal_bins, 10).reshape(4, 10))

print(encode_labels(RatingVector(5, 5, 5, 5)))  # ties: negative valence, earliest emotion
print(encode_labels(RatingVector(10, 0, 0, 0), BinningConfig(n_bins=11)).ordinal_bins)  # 11 bins keep 10 apart

subjects = [f"S{i:02d}" for i in range(1, 29)]
split = subject_split(subjects, ratio=0.8, seed=0)
print(len(split.train_subjects), "train /", len(split.eval_subjects), "eval")
print("eval:", sorted(split.eval_subjects))
print("same seed, same split:", split == subject_split(subjects, 0.8, seed=0))
