# flowtopo/core/config.py
from functools import lru_cache
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Runtime
    FLOWTOPO_THREADS: int = 1
    FLOWTOPO_LOG_LEVEL: str = "INFO"

    # Ellipsoid intersection (golden-section search on K(S))
    GOLDEN_TOL: float = 1e-6
    GOLDEN_MAX_ITER: int = 100
    TANGENCY_TOL: float = 1e-9
    BIRTH_REL_TOL: float = 1e-6

    # Neighborhoods
    COVARIANCE_FLOOR: float = 1e-9
    KNN_EXHAUSTIVE_LIMIT: int = 2000

    # Denoising
    GEOMEDIAN_TOL: float = 1e-8
    GEOMEDIAN_MAX_ITER: int = 200
    ADAPTIVE_SEGMENT: int = 64
    ADAPTIVE_HOP: int = 32
    ADAPTIVE_NFFT: int = 512
    ELLIPSOID_MEMBERSHIP_FACTOR: float = 1.0

    # Recurrence
    TAU_MIN: int = 15
    RECURRENCE_TOL_SAMPLES: int = 2

    # Automatic edge caps for filtrations
    EDGE_CAP_QUANTILE: float = 0.1
    CAP_GROWTH: float = 2.0
    CAP_ATTEMPTS: int = 8

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    return Settings()
