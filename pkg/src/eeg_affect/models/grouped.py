"""One single-label classifier per emotion group, for the ordinal multi-label task."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GroupedClassifier:
    members: list  # each has .predict(X) and .to_dict()

    def predict(self, X) -> np.ndarray:
        """``[n, n_groups]`` predicted bins."""
        return np.stack([m.predict(X) for m in self.members], axis=1)

    def to_dict(self) -> dict:
        return {"kind": "grouped", "members": [m.to_dict() for m in self.members]}
