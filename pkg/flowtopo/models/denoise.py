# flowtopo/models/denoise.py
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class RmseReport(BaseModel):
    """Per-axis RMSE of a denoised cloud against its clean reference."""

    per_axis: List[float]
    snr_db: Optional[float] = None
    seed: Optional[int] = None

    model_config = ConfigDict(frozen=True)

    @field_validator("per_axis")
    @classmethod
    def validate_non_negative(cls, v: List[float]) -> List[float]:
        if any(not x >= 0 for x in v):
            raise ValueError("RMSE values must be non-negative")
        return v


class SweepRow(BaseModel):
    """One line of the SNR sweep table; rmse is None for a cell whose scale could not be selected."""

    snr_db: float
    seed: int = Field(..., ge=0)
    filter: str
    axis: int = Field(..., ge=0)
    rmse: Optional[float] = None

    model_config = ConfigDict(frozen=True)

    @property
    def key(self):
        return self.snr_db, self.seed, self.filter

    def sort_key(self):
        return self.snr_db, self.seed, self.filter, self.axis
