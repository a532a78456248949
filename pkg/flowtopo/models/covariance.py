# flowtopo/models/covariance.py
import numpy as np
from pydantic import Field, field_validator, model_validator

from flowtopo.models.base import ArrayModel, readonly_array


class LocalCovariance(ArrayModel):
    """Sigma_i with its eigendecomposition (eigenvalues sorted descending)."""

    sigma: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ridge: float = Field(..., ge=0)

    @field_validator("sigma", "eigenvectors", mode="before")
    @classmethod
    def coerce_matrix(cls, v):
        return readonly_array(v, ndim=2)

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def coerce_vector(cls, v):
        return readonly_array(v, ndim=1)


class CovarianceField(ArrayModel):
    """
    Per-point covariances defining the adaptive ellipsoids.

    sigmas[i] = eigenvectors[i] @ diag(eigenvalues[i]) @ eigenvectors[i].T,
    with eigenvalues[i] sorted descending and strictly positive.
    """

    sigmas: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ridges: np.ndarray

    @field_validator("sigmas", "eigenvectors", mode="before")
    @classmethod
    def coerce_stack(cls, v):
        return readonly_array(v, ndim=3)

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def coerce_values(cls, v):
        return readonly_array(v, ndim=2)

    @field_validator("ridges", mode="before")
    @classmethod
    def coerce_ridges(cls, v):
        return readonly_array(v, ndim=1)

    @model_validator(mode="after")
    def validate_shapes(self) -> "CovarianceField":
        n, d, d2 = self.sigmas.shape
        if d != d2:
            raise ValueError("Covariances must be square")
        if self.eigenvectors.shape != (n, d, d) or self.eigenvalues.shape != (n, d):
            raise ValueError("Eigendecomposition shape does not match the covariances")
        if self.ridges.shape != (n,):
            raise ValueError("One ridge value is required per point")
        if n and not np.all(self.eigenvalues > 0):
            raise ValueError("Covariances must be positive-definite")
        return self

    @classmethod
    def from_locals(cls, locals_: list) -> "CovarianceField":
        return cls(
            sigmas=np.stack([c.sigma for c in locals_]),
            eigenvalues=np.stack([c.eigenvalues for c in locals_]),
            eigenvectors=np.stack([c.eigenvectors for c in locals_]),
            ridges=np.array([c.ridge for c in locals_]),
        )

    @classmethod
    def identity(cls, n: int, d: int, variance: float = 1.0) -> "CovarianceField":
        """Isotropic field: every ellipsoid is a ball of radius eps * sqrt(variance)."""
        eye = np.broadcast_to(np.eye(d), (n, d, d))
        return cls(
            sigmas=eye * variance,
            eigenvalues=np.full((n, d), float(variance)),
            eigenvectors=eye,
            ridges=np.zeros(n),
        )

    def scaled(self, factor_sq: float) -> "CovarianceField":
        """All covariances multiplied by `factor_sq` (eigenvectors unchanged)."""
        return CovarianceField(
            sigmas=self.sigmas * factor_sq,
            eigenvalues=self.eigenvalues * factor_sq,
            eigenvectors=self.eigenvectors,
            ridges=self.ridges * factor_sq,
        )

    @property
    def n(self) -> int:
        return self.sigmas.shape[0]

    @property
    def d(self) -> int:
        return self.sigmas.shape[1]

    def __len__(self) -> int:
        return self.n
