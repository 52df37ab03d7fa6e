from .checkpoint import load_checkpoint, save_checkpoint
from .forest import ForestConfig, ForestModel, rf_predict, rf_train
from .grouped import GroupedClassifier
from .linear import LinearModel, LinearModelConfig, linear_train
from .sequence import (
    ARCHITECTURES,
    SequenceModel,
    SequenceModelConfig,
    forward_sequence,
    gru_step,
    lstm_step,
)

__all__ = [
    "ARCHITECTURES", "ForestConfig", "ForestModel", "GroupedClassifier", "LinearModel", "LinearModelConfig",
    "SequenceModel", "SequenceModelConfig", "forward_sequence", "gru_step", "linear_train", "load_checkpoint",
    "lstm_step", "rf_predict", "rf_train", "save_checkpoint",
]
