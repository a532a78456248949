# flowtopo/models/cloud.py
"""
Time-indexed point clouds.

A TimeSeriesPointCloud is the universe every operation works on: n ordered,
uniformly sampled states in R^d with sampling interval `dt` and start time
`t0`. Index i maps to time t0 + i * dt.
"""

import numpy as np
from pydantic import Field, field_validator, model_validator

from flowtopo.models.base import ArrayModel


class TimeSeriesPointCloud(ArrayModel):
    """Ordered, uniformly sampled points in R^d."""

    points: np.ndarray = Field(..., description="(n, d) array of states")
    dt: float = Field(..., gt=0, description="Sampling interval in seconds")
    t0: float = Field(0.0, description="Time of the first sample in seconds")

    @field_validator("points", mode="before")
    @classmethod
    def coerce_points(cls, v):
        arr = np.array(v, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def validate_shape(self) -> "TimeSeriesPointCloud":
        n, d = self.points.shape
        if n < 1:
            raise ValueError("A point cloud needs at least one point")
        if d < 1:
            raise ValueError("Points must have dimension d >= 1")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("Points must be finite")
        return self

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) * self.dt

    @property
    def sampling_rate(self) -> float:
        return 1.0 / self.dt

    def with_points(self, points) -> "TimeSeriesPointCloud":
        """Same sampling metadata, new states."""
        return TimeSeriesPointCloud(points=points, dt=self.dt, t0=self.t0)

    def __len__(self) -> int:
        return self.n
