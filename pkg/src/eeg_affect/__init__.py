"""EEG emotion recognition: windowed features, label encodings, from-scratch models."""

__version__ = "0.1.0"
