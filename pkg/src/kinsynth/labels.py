"""Age-stage and gender labels with their network encodings.

Age stages: A = 0-5 years, B = 6-15, C = 16-45, D = over 45.
Age encodes as a 4-dim one-hot; gender encodes as a scalar (M=0, F=1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AGE_STAGES = ("A", "B", "C", "D")
GENDERS = ("M", "F")


class LabelError(ValueError):
    pass


def age_to_stage(years: int) -> str:
    """Bin an age in years into stage A/B/C/D (bounds inclusive)."""
    if years < 0:
        raise LabelError(f"age must be nonnegative, got {years}")
    if years <= 5:
        return "A"
    if years <= 15:
        return "B"
    if years <= 45:
        return "C"
    return "D"


@dataclass(frozen=True)
class AttributeLabel:
    """One face's age stage and gender."""

    age_stage: str
    gender: str

    def __post_init__(self):
        if self.age_stage not in AGE_STAGES:
            raise LabelError(f"age stage must be one of {AGE_STAGES}, got {self.age_stage!r}")
        if self.gender not in GENDERS:
            raise LabelError(f"gender must be one of {GENDERS}, got {self.gender!r}")

    def age_onehot(self) -> np.ndarray:
        enc = np.zeros(4, dtype=np.float32)
        enc[AGE_STAGES.index(self.age_stage)] = 1.0
        return enc

    def gender_scalar(self) -> float:
        return float(GENDERS.index(self.gender))

    def encode(self) -> np.ndarray:
        """5-dim encoding: 4 one-hot age dims followed by the gender scalar."""
        return np.concatenate([self.age_onehot(), [self.gender_scalar()]]).astype(np.float32)
