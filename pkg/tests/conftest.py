import logging

import numpy as np
import pytest

from flowtopo.core.config import get_settings
from flowtopo.core.logging import LOG_FORMAT
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.schemas.signal import ChirpParams

# ======================================================================================
# Logging Configuration
# ======================================================================================
logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
logger = logging.getLogger(__name__)


# ======================================================================================
# Helper Functions
# ======================================================================================
def circle_points(n: int, radius: float = 1.0, turns: float = 1.0) -> np.ndarray:
    """n samples of a circle traversed `turns` times, without repeating the start point."""
    theta = 2.0 * np.pi * turns * np.arange(n) / n
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])


def make_cloud(points, dt: float = 1.0, t0: float = 0.0) -> TimeSeriesPointCloud:
    return TimeSeriesPointCloud(points=points, dt=dt, t0=t0)


# ======================================================================================
# Fixtures
# ======================================================================================
@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Settings are read from the environment per test, never from a stray .env."""
    monkeypatch.delenv("FLOWTOPO_THREADS", raising=False)
    monkeypatch.delenv("FLOWTOPO_LOG_LEVEL", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def unit_square() -> TimeSeriesPointCloud:
    return make_cloud([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def circle_cloud() -> TimeSeriesPointCloud:
    return make_cloud(circle_points(24), dt=0.1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_chirp() -> ChirpParams:
    return ChirpParams(n=120)
