"""
Denoise Schemas Module

Filter specifications for the five denoising strategies:
- moving_average(w): centred fixed window
- adaptive_moving_average: window set per sample from a local frequency estimate
- knn(k): k nearest neighbours plus the point itself
- spherical(r): all points within distance r
- ellipsoidal(eps): all points inside the centre's ellipsoid E_i(eps)

The topological kinds aggregate their neighborhood with a mean or a geometric
median. ScaleAnchor selects which H1-derived scale feeds r or eps when the
scale is chosen automatically.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class FilterKind(str, Enum):
    MOVING_AVERAGE = "moving_average"
    ADAPTIVE_MOVING_AVERAGE = "adaptive_moving_average"
    KNN = "knn"
    SPHERICAL = "spherical"
    ELLIPSOIDAL = "ellipsoidal"

    @property
    def is_topological(self) -> bool:
        return self in (FilterKind.SPHERICAL, FilterKind.ELLIPSOIDAL)


class Aggregator(str, Enum):
    MEAN = "mean"
    GEOMETRIC_MEDIAN = "geometric_median"


class NeighborhoodMode(str, Enum):
    """How an ellipsoidal neighborhood is read: x_j in E_i, or E_j meets E_i."""
    CONTAINMENT = "containment"
    INTERSECTION = "intersection"


class FilterSpec(BaseModel):
    """
    One denoising strategy with its parameter.

    Only the parameter of the chosen kind is required; `radius` and `eps` may
    stay unset for the topological kinds until a scale has been selected.
    """
    kind: FilterKind
    window: int = Field(20, ge=1, description="Moving-average window (samples)")
    k: int = Field(20, ge=1, description="Neighbour count for the k-NN filter")
    radius: Optional[float] = Field(None, gt=0, description="Spherical radius")
    eps: Optional[float] = Field(None, gt=0, description="Ellipsoid scale")
    aggregator: Aggregator = Aggregator.MEAN
    mode: NeighborhoodMode = NeighborhoodMode.CONTAINMENT

    model_config = ConfigDict(frozen=True)

    @field_validator("kind", "aggregator", "mode", mode="before")
    @classmethod
    def normalize_enum(cls, v):
        if isinstance(v, str):
            return v.strip().lower().replace("-", "_")
        return v

    @property
    def scale(self) -> Optional[float]:
        if self.kind == FilterKind.SPHERICAL:
            return self.radius
        if self.kind == FilterKind.ELLIPSOIDAL:
            return self.eps
        return None

    @property
    def label(self) -> str:
        """Stable name used in sweep tables and output file names."""
        if self.kind == FilterKind.MOVING_AVERAGE:
            return f"moving_average_{self.window}"
        if self.kind == FilterKind.KNN:
            name = f"knn_{self.k}"
        elif self.kind.is_topological:
            name = self.kind.value
        else:
            return self.kind.value
        if self.aggregator == Aggregator.GEOMETRIC_MEDIAN:
            name += "_gm"
        if self.kind == FilterKind.ELLIPSOIDAL and self.mode == NeighborhoodMode.INTERSECTION:
            name += "_intersection"
        return name

    def with_scale(self, scale: float) -> "FilterSpec":
        """Copy with r (spherical) or eps (ellipsoidal) set."""
        if not self.kind.is_topological:
            return self
        if not scale > 0:
            raise ValueError(f"Scale must be positive, got {scale}")
        field = "radius" if self.kind == FilterKind.SPHERICAL else "eps"
        return self.model_copy(update={field: float(scale)})

    def require_scale(self) -> float:
        scale = self.scale
        if scale is None:
            raise ValueError(f"Filter {self.kind.value} needs a scale before it can run")
        return scale


class ScaleAnchor(BaseModel):
    """Either the dominant H1 death, or entry `index` of the four-scale schedule."""
    schedule_index: Optional[int] = Field(None, ge=0, le=3)

    model_config = ConfigDict(frozen=True)

    @property
    def is_death(self) -> bool:
        return self.schedule_index is None

    @classmethod
    def parse(cls, text: str) -> "ScaleAnchor":
        """Accepts "death" or "schedule:0" .. "schedule:3"."""
        text = text.strip().lower()
        if text == "death":
            return cls()
        prefix, _, index = text.partition(":")
        if prefix != "schedule" or not index.strip().isdigit():
            raise ValueError(f"Scale anchor must be 'death' or 'schedule:0..3', got {text!r}")
        return cls(schedule_index=int(index))

    def __str__(self) -> str:
        return "death" if self.is_death else f"schedule:{self.schedule_index}"
