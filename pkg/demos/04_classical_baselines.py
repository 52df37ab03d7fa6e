#!/usr/bin/env python3
# Random forest and the two linear models on per-window features.

import numpy as np

from eeg_affect.config import RunConfig
from eeg_affect.data_ingest import SynthSpec, generate_synthetic
from eeg_affect.models import ForestConfig, rf_predict, rf_train
from eeg_affect.pipeline import build_feature_store, train_one

# XOR needs a split with zero immediate gain
X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
y = np.array([0, 1, 1, 0])
forest = rf_train(X, y, ForestConfig(n_trees=25, max_depth=2, min_leaf=1, features_per_split=2, bootstrap=False))
print("xor:", forest.predict(X), rf_predict(forest, [1.0, 0.0]))

cfg = RunConfig.from_dict({"seed": 0, "forest": {"n_trees": 30}})
sessions = generate_synthetic(SynthSpec(n_subjects=6, duration_s=30.0, seed=0))
table, split, stats = build_feature_store(sessions, cfg)

for name in ("forest", "logistic", "svm"):
    for task in ("binary", "categorical", "multilabel"):
        res = train_one(name, task, table, split, stats, cfg)
        print(f"{name:9s} {task:12s} acc {res.report.accuracy:.3f}  macro-F1 {res.report.macro['f1']:.3f}  {res.seconds:.1f}s")
