# flowtopo/models/ellipsoid.py
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from flowtopo.models.base import ArrayModel, readonly_array


class Ellipsoid(ArrayModel):
    """E = {x : (x - center)^T shape^{-1} (x - center) <= scale^2}; semi-axes scale * sqrt(lambda_j)."""

    center: np.ndarray
    shape: np.ndarray
    scale: float = Field(..., gt=0)

    @field_validator("center", mode="before")
    @classmethod
    def coerce_center(cls, v):
        return readonly_array(v, ndim=1)

    @field_validator("shape", mode="before")
    @classmethod
    def coerce_shape(cls, v):
        return readonly_array(v, ndim=2)

    @model_validator(mode="after")
    def validate_dims(self) -> "Ellipsoid":
        d = self.center.size
        if self.shape.shape != (d, d):
            raise ValueError(f"Shape matrix must be {d}x{d}, got {self.shape.shape}")
        return self


class IntersectionResult(BaseModel):
    """Outcome of minimising K(S) over (0, 1) for one pair of ellipsoids."""

    intersects: bool
    k_min: float
    s_at_min: float
    iterations: int

    model_config = ConfigDict(frozen=True)
