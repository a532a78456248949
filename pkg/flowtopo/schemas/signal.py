"""
Signal Schemas Module

Validated parameter sets for the two synthetic generators and the noise model:
- HamiltonianParams: perturbed double-well system integrated with Stormer-Verlet
- ChirpParams: linear chirp with an amplitude notch that creates a bottleneck
- NoiseSpec: axis-wise Gaussian noise, SNR-relative by default

All schemas validate their invariants up front so that no computation starts
from an invalid configuration.
"""

import math
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class HamiltonianParams(BaseModel):
    """
    Parameters of q'' = -(q^r - q - eps * omega * sin(omega * q)).

    `r_exp` and `eps_pert` carry the exponent and perturbation strength; they are
    named apart from the filtration scale and the recurrence radius.
    """
    total_time: float = Field(17.22, gt=0, description="Integration horizon T (s)")
    step: float = Field(0.08, gt=0, description="Time step h (s)")
    r_exp: int = Field(5, ge=1, description="Exponent of the restoring force")
    eps_pert: float = Field(0.39, description="Perturbation strength")
    omega: float = Field(3.0, description="Perturbation frequency (rad)")
    q0: float = Field(0.5, description="Initial position")
    p0: float = Field(1.0, description="Initial momentum")
    skip: int = Field(0, ge=0, description="Leading states dropped from the output")

    model_config = ConfigDict(frozen=True)

    @property
    def n_states(self) -> int:
        """floor(T/h) + 1, guarding against T/h landing a hair below an integer."""
        return int(math.floor(self.total_time / self.step + 1e-9)) + 1


class ChirpParams(BaseModel):
    """Linear chirp x = A_x cos(phi), y = A_y sin(phi) S(x) sampled on [0, t_max]."""
    f_start: float = Field(1.0, gt=0, description="Start frequency (Hz)")
    f_end: float = Field(10.0, gt=0, description="End frequency (Hz)")
    t_max: float = Field(2.0, gt=0, description="Duration (s)")
    n: int = Field(500, ge=2, description="Number of uniform samples")
    amp_x: float = Field(10.0, gt=0)
    amp_y: float = Field(2.0, gt=0)
    notch_depth: float = Field(0.9, ge=0, lt=1)
    notch_width_ref: Optional[float] = Field(
        None,
        gt=0,
        description="Reference for the notch width; defaults to max |x(t)| = amp_x",
    )

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_band(self) -> "ChirpParams":
        if self.f_end < self.f_start:
            raise ValueError("f_end must be greater than or equal to f_start")
        return self

    @property
    def width_ref(self) -> float:
        return self.notch_width_ref if self.notch_width_ref is not None else self.amp_x


class NoiseSpec(BaseModel):
    """
    Axis-wise Gaussian noise.

    SNR-relative mode (default): axis a gets variance P_a / snr_linear, where
    P_a is given in `per_axis_power` or measured from the clean cloud.
    Absolute mode: `noise_variance` gives the per-axis variances directly.
    snr_linear = inf means no noise.
    """
    snr_linear: float = Field(math.inf, description="Signal-to-noise power ratio")
    seed: int = Field(0, ge=0)
    per_axis_power: Optional[List[float]] = None
    noise_variance: Optional[List[float]] = None

    model_config = ConfigDict(frozen=True)

    @field_validator("snr_linear")
    @classmethod
    def validate_snr(cls, v: float) -> float:
        if math.isnan(v) or v <= 0:
            raise ValueError("snr_linear must be positive")
        return v

    @field_validator("per_axis_power", "noise_variance")
    @classmethod
    def validate_non_negative(cls, v):
        if v is not None and any((not math.isfinite(p)) or p < 0 for p in v):
            raise ValueError("Per-axis powers and variances must be finite and non-negative")
        return v

    @classmethod
    def from_db(cls, snr_db: float, seed: int = 0, **kwargs) -> "NoiseSpec":
        """Build a spec from an SNR in decibels (inf dB means no noise)."""
        from flowtopo.operations.signal_model import db_to_linear

        return cls(snr_linear=db_to_linear(snr_db), seed=seed, **kwargs)
