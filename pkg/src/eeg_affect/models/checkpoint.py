"""Checkpoint files.

Sequence models: ``<stem>.json`` manifest (architecture, config, seed, parameter
table) next to ``<stem>.bin``, the parameters flattened in manifest order as
little-endian float32. Classical models: a single JSON document with the estimator under ``estimator``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forest import ForestModel
from .grouped import GroupedClassifier
from .linear import LinearModel
from .sequence import SequenceModel, SequenceModelConfig

FORMAT = "eeg-affect-checkpoint/1"
_LE_F32 = np.dtype("<f4")


def save_checkpoint(model, path, /, **meta) -> Path:
    """Write ``model`` to ``path`` (a ``.json`` manifest); extra keyword metadata is stored verbatim."""
    path = Path(path)
    manifest = {"format": FORMAT, **meta}
    if isinstance(model, SequenceModel):
        bin_path = path.with_suffix(".bin")
        table, chunks, offset = [], [], 0
        for p in model.parameters():
            flat = np.ascontiguousarray(p.data, dtype=_LE_F32).reshape(-1)
            table.append({"name": p.name, "shape": list(p.shape), "offset": offset, "count": int(flat.size)})
            chunks.append(flat)
            offset += flat.size
        bin_path.write_bytes(np.concatenate(chunks).tobytes())
        manifest.update({
            "model_kind": "sequence",
            "architecture": model.config.architecture,
            "config": model.config.to_dict(),
            "seed": model.config.seed,
            "dtype": "float32-le",
            "weights_file": bin_path.name,
            "parameters": table,
        })
    else:
        manifest.update({"model_kind": "classical", "estimator": model.to_dict()})
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _classical_from_dict(d):
    kind = d["kind"]
    if kind == "forest":
        return ForestModel.from_dict(d)
    if kind == "linear":
        return LinearModel.from_dict(d)
    if kind == "grouped":
        return GroupedClassifier([_classical_from_dict(m) for m in d["members"]])
    raise ValueError(f"unknown classical model kind {kind!r}")


def load_checkpoint(path):
    """Return ``(model, manifest)``."""
    path = Path(path)
    manifest = json.loads(path.read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{path}: not an {FORMAT} manifest")
    if manifest["model_kind"] == "classical":
        return _classical_from_dict(manifest["estimator"]), manifest
    model = SequenceModel(SequenceModelConfig(**manifest["config"]), dtype=np.float32)
    flat = np.frombuffer((path.parent / manifest["weights_file"]).read_bytes(), dtype=_LE_F32)
    params = model.parameters()
    if len(params) != len(manifest["parameters"]):
        raise ValueError(f"{path}: parameter table does not match architecture")
    for p, entry in zip(params, manifest["parameters"]):
        if entry["name"] != p.name or tuple(entry["shape"]) != p.shape:
            raise ValueError(f"{path}: parameter {entry['name']} {entry['shape']} does not match {p.name} {p.shape}")
        chunk = flat[entry["offset"]:entry["offset"] + entry["count"]]
        p.data = chunk.astype(np.float32).reshape(p.shape)
        p.zero_grad()
    return model, manifest
