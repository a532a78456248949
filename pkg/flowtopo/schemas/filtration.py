# flowtopo/schemas/filtration.py
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class FiltrationKind(str, Enum):
    """Proximity rules available for building filtered flag complexes."""
    VIETORIS_RIPS = "vr"
    ELLIPSOID = "ellipsoid"
    FERMAT = "fermat"


class FermatParams(BaseModel):
    """
    Sample Fermat distance: shortest paths through the sample with hop cost |.|^p.

    `knn` restricts hops to a symmetrised k-nearest-neighbour graph; None keeps
    the exact complete graph.
    """
    p: float = Field(2.0, ge=1)
    knn: Optional[int] = Field(None, ge=1)

    model_config = ConfigDict(frozen=True)
