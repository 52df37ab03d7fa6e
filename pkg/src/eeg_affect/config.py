"""Run configuration: every stage config in one validated JSON document.

Precedence is defaults < config file < command-line flags. The top-level
``seed`` is authoritative: resolving a config copies it into every stage that
owns a seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .data_ingest import DEFAULT_FS, SynthSpec
from .errors import ConfigError
from .labeling import BinningConfig
from .models.forest import ForestConfig
from .models.linear import LinearModelConfig
from .models.sequence import SequenceModelConfig
from .segmentation import SegmentConfig
from .training import TASKS, TrainConfig

MODEL_NAMES = ("lstm", "gru", "lstm_gru", "cnn_lstm", "logistic", "svm", "forest")
SEQUENCE_MODELS = {"lstm": "LSTM", "gru": "GRU", "lstm_gru": "LSTM_GRU", "cnn_lstm": "CNN_LSTM"}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sampling_rate_hz: float = DEFAULT_FS
    split_ratio: float = 0.8
    seq_len: int = 10
    seq_stride: int = 0  # 0 -> seq_len (non-overlapping sequences)
    task: str = "binary"
    model: str = "lstm_gru"
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    binning: BinningConfig = field(default_factory=BinningConfig)
    sequence_model: SequenceModelConfig = field(default_factory=SequenceModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    linear: LinearModelConfig = field(default_factory=LinearModelConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"model must be one of {MODEL_NAMES}")
        if self.seq_len < 1 or self.seq_stride < 0:
            raise ConfigError("seq_len must be >= 1 and seq_stride >= 0")
        if not 0 < self.split_ratio < 1:
            raise ConfigError("split_ratio must lie in (0, 1)")
        if not self.sampling_rate_hz > 0:
            raise ConfigError("sampling_rate_hz must be positive")

    @property
    def stride(self) -> int:
        return self.seq_stride or self.seq_len

    def resolved(self) -> "RunConfig":
        s = self.seed
        return dataclasses.replace(
            self,
            sequence_model=dataclasses.replace(self.sequence_model, seed=s, dropout_p=self.train.dropout_p),
            train=dataclasses.replace(self.train, seed=s),
            forest=dataclasses.replace(self.forest, seed=s),
            linear=dataclasses.replace(self.linear, seed=s),
            synth=dataclasses.replace(self.synth, seed=s, sampling_rate_hz=self.sampling_rate_hz),
        )

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if hasattr(v, "to_dict"):
                v = v.to_dict()
            elif dataclasses.is_dataclass(v):
                v = _plain(dataclasses.asdict(v))
            out[f.name] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def run_id(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunConfig":
        return _build(cls, d, "config")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def merged(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Deep-merge a (possibly nested) dict of overrides and re-validate."""
        return RunConfig.from_dict(_deep_merge(self.to_dict(), overrides))


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def _deep_merge(base: dict, extra: Mapping) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


_NESTED = {
    "segment": SegmentConfig, "binning": BinningConfig, "sequence_model": SequenceModelConfig,
    "train": TrainConfig, "forest": ForestConfig, "linear": LinearModelConfig, "synth": SynthSpec,
}


def _check_type(value, default, where: str):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, (tuple, list)):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise ConfigError(f"{where}: expected a list of {len(default)} values, got {value!r}")
        return tuple(_check_type(v, d, f"{where}[{i}]") for i, (v, d) in enumerate(zip(value, default)))
    if isinstance(default, Mapping):
        if not isinstance(value, Mapping):
            raise ConfigError(f"{where}: expected an object, got {value!r}")
        return value
    return value


def _build(cls, d: Mapping[str, Any], where: str):
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in d.items():
        sub = f"{where}.{key}"
        if cls is RunConfig and key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, sub)
        elif cls is SynthSpec and key == "signature_map":
            if not isinstance(value, Mapping):
                raise ConfigError(f"{sub}: expected an object")
            kwargs[key] = {g: tuple(v) for g, v in value.items()}
        else:
            kwargs[key] = _check_type(value, getattr(defaults, key), sub)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
