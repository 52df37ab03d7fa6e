"""Command line: ``synth``, ``featurize``, ``train``, ``eval``, ``report``.

Every failure prints one line starting with ``error_code=<code>`` to stderr.
Exit codes: 0 success, 1 runtime/data error, 2 usage error or missing input,
3 diverged training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import MODEL_NAMES, RunConfig
from .data_ingest import generate_synthetic, load_dataset, write_dataset
from .errors import DivergedLoss, EEGAffectError, HeadMismatch
from .evaluation import export_report
from .models import load_checkpoint, save_checkpoint
from .pipeline import (
    build_feature_store,
    format_table,
    predict,
    prepare_inputs,
    read_feature_store,
    run_benchmark,
    split_table,
    train_one,
    write_feature_store,
)
from .training import TASKS, head_dim, score_predictions, write_epoch_csv

log = logging.getLogger("eeg_affect")


class UsageError(Exception):
    def __init__(self, message, code="usage"):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON run configuration (flags override its values)")
    p.add_argument("--seed", type=int, help="master seed copied into every stage")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eeg-affect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_common()]

    p = sub.add_parser("synth", parents=common, help="write a synthetic dataset")
    p.add_argument("--subjects", type=int, help="number of synthetic subjects")
    p.add_argument("--duration", type=float, help="seconds per session")
    p.add_argument("--noise", type=float, help="white-noise sigma")

    p = sub.add_parser("featurize", parents=common, help="windows -> features, labels, split, normalisation")
    p.add_argument("--dataset", type=Path, required=True, help="dataset root (<root>/<subject>/<game>.csv)")
    p.add_argument("--ratings", type=Path, help="rating sidecar CSV (default: <dataset>/ratings.csv)")

    p = sub.add_parser("train", parents=common, help="train one model on one task")
    p.add_argument("--features", type=Path, required=True, help="directory written by featurize")
    p.add_argument("--task", choices=TASKS, help="binary, categorical or multilabel")
    p.add_argument("--model", choices=MODEL_NAMES, help="model name")
    p.add_argument("--epochs", type=int, help="training epochs for sequence models")

    p = sub.add_parser("eval", parents=common, help="score a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True, help="model.json written by train")
    p.add_argument("--features", type=Path, required=True, help="directory written by featurize")
    p.add_argument("--task", choices=TASKS, help="must match the checkpoint's task")
    p.add_argument("--subset", choices=("eval", "train", "all"), default="eval", help="which subjects to score")

    p = sub.add_parser("report", parents=common, help="summarise metrics files or run the full benchmark")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--metrics", type=Path, nargs="+", help="directories holding metrics_*.json files")
    src.add_argument("--dataset", type=Path, help="dataset root: train every model on every task first")
    p.add_argument("--ratings", type=Path, help="rating sidecar CSV (default: <dataset>/ratings.csv)")
    p.add_argument("--models", nargs="+", choices=MODEL_NAMES, default=["lstm_gru", "cnn_lstm", "lstm", "forest", "logistic", "svm"])
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "task", None):
        overrides["task"] = args.task
    if getattr(args, "model", None):
        overrides["model"] = args.model
    if getattr(args, "epochs", None) is not None:
        overrides.setdefault("train", {})["epochs"] = args.epochs
        overrides["train"]["warmup_epochs"] = min(cfg.train.warmup_epochs, max(args.epochs - 1, 0))
    synth = {k: v for k, v in (("n_subjects", getattr(args, "subjects", None)),
                               ("duration_s", getattr(args, "duration", None)),
                               ("noise_sigma", getattr(args, "noise", None))) if v is not None}
    if synth:
        overrides["synth"] = synth
    return cfg.merged(overrides).resolved() if overrides else cfg.resolved()


def _write_config(out: Path, cfg: RunConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(cfg.to_json())


# ----------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg: RunConfig) -> int:
    sessions = generate_synthetic(cfg.synth)
    write_dataset(sessions, args.out, cfg.synth)
    _write_config(args.out, cfg)
    print(f"wrote {len(sessions)} sessions to {args.out}")
    return 0


def cmd_featurize(args, cfg: RunConfig) -> int:
    if not args.dataset.is_dir():
        raise UsageError(f"dataset directory {args.dataset} does not exist", "missing_input")
    ratings = args.ratings or args.dataset / "ratings.csv"
    sessions = load_dataset(args.dataset, ratings, cfg.sampling_rate_hz)
    if not sessions:
        raise EEGAffectError(f"no sessions found under {args.dataset}")
    table, split, stats = build_feature_store(sessions, cfg)
    write_feature_store(args.out, table, split, stats)
    _write_config(args.out, cfg)
    print(f"sessions={len(sessions)} windows={len(table)} train_subjects={len(split.train_subjects)} "
          f"eval_subjects={len(split.eval_subjects)} out={args.out}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    if not (args.features / "features.csv").is_file():
        raise UsageError(f"{args.features} has no features.csv; run featurize first", "missing_input")
    table, split, stats = read_feature_store(args.features)
    result = train_one(cfg.model, cfg.task, table, split, stats, cfg)
    run_dir = args.out / f"{cfg.task}_{cfg.model}_{cfg.run_id()}"
    run_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.model, run_dir / "model.json", task=cfg.task, model=cfg.model,
                    n_bins=cfg.binning.n_bins, seq_len=cfg.seq_len, seq_stride=cfg.stride)
    write_epoch_csv(run_dir / "epochs.csv", result.logs)
    summary = {"task": cfg.task, "model": cfg.model, "run_id": cfg.run_id(), "eval": result.report.to_dict(),
               "epochs": len(result.logs)}
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    export_report({(cfg.task, cfg.model): (result.report, result.confusion)},
                  {(cfg.task, cfg.model): result.logs}, run_dir)
    _write_config(run_dir, cfg)
    r = result.report
    print(f"run_dir={run_dir} accuracy={r.accuracy:.4f} macro_f1={r.macro['f1']:.4f}")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    if not args.checkpoint.is_file():
        raise UsageError(f"checkpoint {args.checkpoint} not found", "missing_checkpoint")
    model, manifest = load_checkpoint(args.checkpoint)
    task, name, n_bins = manifest["task"], manifest["model"], manifest["n_bins"]
    if args.task and args.task != task:
        raise HeadMismatch(f"checkpoint was trained for {task}, not {args.task}")
    if manifest["model_kind"] == "sequence" and manifest["config"]["head_dim"] != head_dim(task, n_bins):
        raise HeadMismatch("checkpoint head size does not match its task")
    table, split, stats = read_feature_store(args.features)
    (tr, ev), Xn = split_table(table, split, stats)
    rows = {"eval": ev, "train": tr, "all": np.arange(len(table))}[args.subset]
    seq_cfg = cfg.merged({"seq_len": manifest.get("seq_len", cfg.seq_len),
                          "seq_stride": manifest.get("seq_stride", cfg.stride),
                          "binning": {"n_bins": n_bins}})
    X, y = prepare_inputs(name, task, table, rows, Xn, seq_cfg)
    pred = predict(model, name, X, task, n_bins)
    report, cm = score_predictions(y, pred, task, n_bins)
    report.task, report.model = task, name
    export_report({(task, name): (report, cm)}, None, args.out)
    _write_config(args.out, seq_cfg)
    print(format_table({(task, name): report.to_dict()}))
    return 0


def _collect_metrics(dirs) -> dict:
    rows = {}
    for d in dirs:
        for path in sorted(Path(d).rglob("metrics_*.json")):
            m = json.loads(path.read_text())
            rows[(m["task"], m["model"])] = m
    return rows


def cmd_report(args, cfg: RunConfig) -> int:
    if args.metrics:
        rows = _collect_metrics(args.metrics)
        if not rows:
            raise UsageError("no metrics_*.json files found", "missing_input")
    else:
        ratings = args.ratings or args.dataset / "ratings.csv"
        sessions = load_dataset(args.dataset, ratings, cfg.sampling_rate_hz)
        if not sessions:
            raise EEGAffectError(f"no sessions found under {args.dataset}")
        results = run_benchmark(sessions, cfg, models=args.models, out_dir=args.out)
        rows = {k: r.report.to_dict() for k, r in results.items()}
    text = format_table(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    note = ("Reference columns are published GAMEEMO figures. Differences are expected: the window-to-sequence "
            "assembly and layer sizes behind them are unpublished, so these runs use documented defaults.")
    (args.out / "report.txt").write_text(text + "\n\n" + note + "\n")
    _write_config(args.out, cfg)
    print(text)
    print()
    print(note)
    return 0


COMMANDS = {"synth": cmd_synth, "featurize": cmd_featurize, "train": cmd_train, "eval": cmd_eval,
            "report": cmd_report}


def _fail(code: str, message, rc: int) -> int:
    text = " ".join(str(message).split())
    print(f"error_code={code} {text}", file=sys.stderr)
    return rc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail(exc.code, exc, 2)
    except DivergedLoss as exc:
        return _fail(exc.code, f"epoch={exc.epoch} {exc}", 3)
    except EEGAffectError as exc:
        return _fail(exc.code, exc, 1)
    except FileNotFoundError as exc:
        return _fail("missing_input", exc, 2)
    except OSError as exc:
        return _fail("io", exc, 1)
    except Exception as exc:  # noqa: BLE001 - last line of defence keeps the one-line contract
        return _fail("internal", f"{type(exc).__name__}: {exc}", 1)

if __name__ == "__main__":
    sys.exit(main())
