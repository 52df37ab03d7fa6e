#!/usr/bin/env python3
# Train the LSTM-GRU on synthetic data and watch the schedule and the curves.
# Runs in a few seconds.

from eeg_affect.config import RunConfig
from eeg_affect.data_ingest import SynthSpec, generate_synthetic
from eeg_affect.pipeline import build_feature_store, train_one
from eeg_affect.training import cosine_warmup_lr

cfg = RunConfig.from_dict({"seed": 0, "train": {"epochs": 20, "warmup_epochs": 3}})
print("lr schedule:", [round(cosine_warmup_lr(e, cfg.train), 5) for e in range(cfg.train.epochs)])

sessions = generate_synthetic(SynthSpec(n_subjects=6, duration_s=30.0, seed=0))
table, split, stats = build_feature_store(sessions, cfg)
print(len(table), "windows; eval subjects", sorted(split.eval_subjects))

for task in ("binary", "categorical"):
    res = train_one("lstm_gru", task, table, split, stats, cfg)
    print(f"\n{task}: {res.seconds:.1f}s")
    for log in res.logs[::4]:
        print(f"  epoch {log.epoch:2d}  lr {log.lr:.5f}  train {log.train_loss:.4f}  val {log.val_loss:.4f}  acc {log.acc:.3f}")
    print("  confusion:", res.confusion.counts.tolist())
