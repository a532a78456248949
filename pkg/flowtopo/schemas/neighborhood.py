# flowtopo/schemas/neighborhood.py
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class NeighborhoodSpec(BaseModel):
    """
    Spatio-temporal neighborhood N_i = T_i U S_i.

    tau is the temporal half-width in samples, k the number of spatial nearest
    neighbours. Raising k pools neighbours across adjacent cycles of a
    recurrent trajectory. `floor` is the relative ridge added to each local
    covariance (None means the configured default).
    """
    tau: int = Field(3, ge=0, description="Temporal half-width (samples)")
    k: int = Field(15, ge=0, description="Spatial nearest-neighbour count")
    floor: Optional[float] = Field(None, gt=0, description="Relative covariance ridge")

    model_config = ConfigDict(frozen=True)
