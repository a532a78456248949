"""
Experiment Schemas Module

SweepConfig describes one SNR sweep as a flat key-value file, read with
python-dotenv so configs stay diffable:

    SNR_DB=0,10,20,30
    SEEDS=0,1,2
    FILTERS=moving_average,adaptive_moving_average,knn,spherical,ellipsoidal
    AGGREGATOR=mean
    SCALE_ANCHOR=death
    CHIRP_N=500

Keys are case-insensitive; list values are comma separated. Chirp parameters
take a CHIRP_ prefix (CHIRP_F_START, CHIRP_AMP_Y, ...). Unknown keys are
rejected so that a typo never silently falls back to a default.
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator

from flowtopo.schemas.denoise import Aggregator, FilterKind, FilterSpec, NeighborhoodMode, ScaleAnchor
from flowtopo.schemas.neighborhood import NeighborhoodSpec
from flowtopo.schemas.signal import ChirpParams

CHIRP_PREFIX = "chirp_"


def split_list(value):
    """'a, b,c' -> ['a', 'b', 'c']; lists pass through."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class SweepConfig(BaseModel):
    snr_db: List[float] = Field(..., min_length=1)
    seeds: List[int] = Field(..., min_length=1)
    filters: List[FilterKind] = Field(..., min_length=1)
    window: int = Field(20, ge=1, description="Fixed moving-average window")
    knn_k: int = Field(20, ge=1, description="k of the k-NN filter")
    radius: Optional[float] = Field(None, gt=0, description="Fixed spherical radius (skips H1 selection)")
    eps: Optional[float] = Field(None, gt=0, description="Fixed ellipsoid scale (skips H1 selection)")
    aggregator: Aggregator = Aggregator.MEAN
    mode: NeighborhoodMode = NeighborhoodMode.CONTAINMENT
    scale_anchor: str = "death"
    tau: int = Field(3, ge=0, description="Temporal half-width for local covariances")
    k: int = Field(15, ge=0, description="Spatial neighbours for local covariances")
    chirp: ChirpParams = Field(default_factory=ChirpParams)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("snr_db", "seeds", mode="before")
    @classmethod
    def parse_lists(cls, v):
        return split_list(v)

    @field_validator("filters", mode="before")
    @classmethod
    def parse_filters(cls, v):
        return [f.lower().replace("-", "_") if isinstance(f, str) else f for f in split_list(v)]

    @field_validator("aggregator", "mode", mode="before")
    @classmethod
    def normalize_enum(cls, v):
        return v.strip().lower().replace("-", "_") if isinstance(v, str) else v

    @field_validator("scale_anchor")
    @classmethod
    def validate_anchor(cls, v: str) -> str:
        return str(ScaleAnchor.parse(v))

    @property
    def anchor(self) -> ScaleAnchor:
        return ScaleAnchor.parse(self.scale_anchor)

    @property
    def neighborhood(self) -> NeighborhoodSpec:
        return NeighborhoodSpec(tau=self.tau, k=self.k)

    def filter_specs(self) -> List[FilterSpec]:
        return [
            FilterSpec(
                kind=kind, window=self.window, k=self.knn_k, radius=self.radius, eps=self.eps,
                aggregator=self.aggregator, mode=self.mode,
            )
            for kind in self.filters
        ]

    @classmethod
    def from_mapping(cls, values: Dict[str, Optional[str]]) -> "SweepConfig":
        """Build from flat key-value pairs (keys case-insensitive, chirp keys prefixed)."""
        fields: Dict[str, object] = {}
        chirp: Dict[str, object] = {}
        for key, value in values.items():
            key = key.strip().lower()
            if key.startswith(CHIRP_PREFIX):
                chirp[key[len(CHIRP_PREFIX):]] = value
            else:
                fields[key] = value
        unknown = sorted(set(chirp) - set(ChirpParams.model_fields))
        if unknown:
            raise ValueError(f"Unknown chirp keys: {', '.join(CHIRP_PREFIX + k for k in unknown)}")
        if chirp:
            fields["chirp"] = chirp
        return cls(**fields)

    @classmethod
    def from_file(cls, path: Union[str, Path], overrides: Optional[Dict[str, str]] = None) -> "SweepConfig":
        values = dict(dotenv_values(path))
        values.update(overrides or {})
        return cls.from_mapping(values)
