# flowtopo/models/persistence.py
"""
Persistence diagrams for H0 and H1, and the four-scale schedule derived from
the dominant H1 class.
"""

import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PersistencePair(BaseModel):
    """
    One (birth, death) point of a diagram.

    `unresolved` marks an H1 class that never filled within the complex; its
    death is reported as the diagram's scale cap.
    """

    dim: int = Field(..., ge=0, le=1)
    birth: float = Field(..., ge=0)
    death: float
    unresolved: bool = False

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_order(self) -> "PersistencePair":
        if not self.birth <= self.death:
            raise ValueError(f"Birth {self.birth} exceeds death {self.death}")
        return self

    @property
    def lifetime(self) -> float:
        return self.death - self.birth

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.death) and not self.unresolved

    def as_tuple(self) -> Tuple[float, float, float]:
        """(b, d, l)"""
        return self.birth, self.death, self.lifetime


class PersistenceDiagram(BaseModel):
    pairs: List[PersistencePair] = Field(default_factory=list)
    scale_cap: Optional[float] = Field(None, description="Death reported for unresolved H1 classes")

    model_config = ConfigDict(frozen=True)

    def pairs_in(self, dim: int, include_diagonal: bool = True) -> List[PersistencePair]:
        """Pairs of one dimension; zero-lifetime pairs are dropped unless include_diagonal."""
        return [
            p for p in self.pairs
            if p.dim == dim and (include_diagonal or p.lifetime > 0)
        ]

    def betti(self, dim: int, value: float) -> int:
        """Rank of H_dim of the complex at `value` (unresolved classes stay alive)."""
        return sum(
            1 for p in self.pairs
            if p.dim == dim and p.birth <= value and (p.unresolved or value < p.death)
        )

    def __len__(self) -> int:
        return len(self.pairs)


class ScaleSchedule(BaseModel):
    """B, B + L/2, B + L, B + 3L/2 from the dominant class (B = birth, L = lifetime)."""

    birth: float = Field(..., ge=0)
    death: float

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_lifetime(self) -> "ScaleSchedule":
        if not math.isfinite(self.death) or self.death < self.birth:
            raise ValueError("A schedule needs a finite death no earlier than the birth")
        return self

    @property
    def lifetime(self) -> float:
        return self.death - self.birth

    @property
    def scales(self) -> Tuple[float, float, float, float]:
        b, l = self.birth, self.lifetime
        return b, b + 0.5 * l, b + l, b + 1.5 * l

    def __getitem__(self, index: int) -> float:
        return self.scales[index]
