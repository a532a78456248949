# flowtopo/models/recurrence.py
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from flowtopo.schemas.recurrence import RecurrenceKind, ReturnRule


class RecurrenceTable(BaseModel):
    """First-return time T1(i) in samples per index; None where no return was found."""

    t1: List[Optional[int]]
    kind: RecurrenceKind
    scale: float
    tau_min: int = Field(..., ge=1)
    rule: ReturnRule = ReturnRule.STRICT

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_returns(self) -> "RecurrenceTable":
        n = len(self.t1)
        for i, t in enumerate(self.t1):
            if t is not None and (t < self.tau_min or i + t >= n):
                raise ValueError(f"Return {t} at index {i} violates tau_min={self.tau_min} or n={n}")
        return self

    @property
    def detected(self) -> int:
        return sum(t is not None for t in self.t1)

    def __len__(self) -> int:
        return len(self.t1)


class GroundTruthReturns(BaseModel):
    """Smallest j - i with theta[j] >= theta[i] + 2 pi, per index."""

    returns: List[Optional[int]]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_positive(self) -> "GroundTruthReturns":
        if any(r is not None and r <= 0 for r in self.returns):
            raise ValueError("Ground-truth returns must be positive")
        return self

    def __len__(self) -> int:
        return len(self.returns)


class RecurrenceScore(BaseModel):
    """
    Agreement between estimated and true first returns, over indices that have a
    true return.
    """

    evaluated: int
    detected_fraction: float
    within_tol_fraction: float
    spurious_early: int
    mean_abs_error: Optional[float] = None
    tol_samples: int

    model_config = ConfigDict(frozen=True)
