# flowtopo/models/base.py
import numpy as np
from pydantic import BaseModel, ConfigDict


def readonly_array(value, dtype=float, ndim: int = None) -> np.ndarray:
    """Copy `value` into a write-protected numpy array of the given rank."""
    arr = np.array(value, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"Expected an array of rank {ndim}, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class ArrayModel(BaseModel):
    """Base for immutable, numpy-backed result containers."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
