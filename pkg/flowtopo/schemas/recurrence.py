"""
Recurrence Schemas Module

Neighborhood and return-rule choices for first-return estimation.
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator


class RecurrenceKind(str, Enum):
    SPHERICAL = "spherical"
    ELLIPSOIDAL = "ellipsoidal"


class ReturnRule(str, Enum):
    """
    STRICT: the first return is the first index after i inside N_i, and it only
    counts when it is at least tau_min samples away (every intermediate state
    must lie outside N_i).
    FIRST_REENTRY: the first index at or beyond i + tau_min that enters N_i
    from outside.
    """
    STRICT = "strict"
    FIRST_REENTRY = "first_reentry"


class RecurrenceNeighborhood(BaseModel):
    """Ball of radius `scale` around x_i, or the ellipsoid E_i(scale)."""
    kind: RecurrenceKind
    scale: float = Field(..., gt=0)

    model_config = ConfigDict(frozen=True)

    @field_validator("kind", mode="before")
    @classmethod
    def normalize_kind(cls, v):
        return v.strip().lower() if isinstance(v, str) else v
