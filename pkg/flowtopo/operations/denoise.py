# flowtopo/operations/denoise.py
"""
Module: denoise.py

Five denoising strategies for time-indexed point clouds:

- moving_average: centred window of w samples, truncated at the ends;
- adaptive_moving_average: per-sample window from a short-time spectral
  estimate of the local dominant frequency (w = fs / (2 f));
- knn / spherical / ellipsoidal topological filters: each point is replaced
  by the mean or geometric median of its neighborhood, which always
  contains the point itself.

Every filter keeps n, d, dt and t0 of its input.
"""

import logging
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
from scipy.signal import stft

from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import InvalidSpecError, ShapeMismatchError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.denoise import RmseReport
from flowtopo.operations.ellipsoid import quadratic_form_row
from flowtopo.operations.filtration import ellipsoid_complex_at_scale
from flowtopo.operations.neighborhoods import knn_table
from flowtopo.schemas.denoise import Aggregator, FilterKind, FilterSpec, NeighborhoodMode

logger = logging.getLogger(__name__)

MIN_ADAPTIVE_LENGTH = 8
MIN_ADAPTIVE_WINDOW = 3


# ----------------------------------------------------------------------------
# Moving averages
# ----------------------------------------------------------------------------
def _as_columns(signal) -> Tuple[np.ndarray, bool]:
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim != 2:
        raise InvalidSpecError(f"Expected a series of shape (n,) or (n, d), got {x.shape}")
    return x, False


def _windowed_means(x: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """Mean over [i - w//2, i + (w-1)//2] clipped to the series, per sample."""
    n = x.shape[0]
    out = np.empty_like(x)
    for i, w in enumerate(windows):
        lo = max(0, i - w // 2)
        hi = min(n - 1, i + (w - 1) // 2)
        out[i] = np.mean(x[lo:hi + 1], axis=0)
    return out


def moving_average(signal, w: int) -> np.ndarray:
    """Centred moving average with a fixed window of w samples."""
    if w < 1:
        raise InvalidSpecError(f"Window must be at least 1, got {w}")
    x, flat = _as_columns(signal)
    out = _windowed_means(x, np.full(x.shape[0], int(w)))
    return out[:, 0] if flat else out


def _dominant_frequency(power: np.ndarray, freqs: np.ndarray, floor: float = 0.0) -> Optional[float]:
    if not np.any(power > floor):
        return None
    return float(freqs[int(np.argmax(power))])


def _global_frequency(x: np.ndarray, fs: float, nfft: int, floor: float) -> Optional[float]:
    centred = x - x.mean(axis=0)
    n_fft = max(nfft, x.shape[0])
    power = np.sum(np.abs(np.fft.rfft(centred, n=n_fft, axis=0)) ** 2, axis=1)
    power[0] = 0.0
    return _dominant_frequency(power, np.fft.rfftfreq(n_fft, d=1.0 / fs), floor * n_fft * n_fft)


def adaptive_windows(signal, fs: float) -> np.ndarray:
    """
    Per-sample window lengths round(fs / (2 f_i)), clamped to [3, max(3, n // 4)].

    f_i is interpolated between the dominant frequencies of Hann-windowed
    segments (power summed over axes). A segment with no power falls back to
    the dominant frequency of the whole series, and a series with no power at
    all to fs / 2.
    """
    if not fs > 0:
        raise InvalidSpecError(f"Sampling rate must be positive, got {fs}")
    x, _ = _as_columns(signal)
    n = x.shape[0]
    if n < MIN_ADAPTIVE_LENGTH:
        raise InvalidSpecError(f"Adaptive moving average needs at least {MIN_ADAPTIVE_LENGTH} samples, got {n}")

    cfg = get_settings()
    nperseg = min(cfg.ADAPTIVE_SEGMENT, n)
    hop = max(1, min(cfg.ADAPTIVE_HOP, nperseg // 2))
    nfft = max(cfg.ADAPTIVE_NFFT, nperseg)
    freqs, seg_times, spectrum = stft(
        x.T, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg - hop,
        nfft=nfft, detrend="constant", boundary=None, padded=False,
    )
    power = np.sum(np.abs(spectrum) ** 2, axis=0)
    power[0] = 0.0
    # detrending a constant segment leaves rounding residue, not signal
    floor = (1e-10 * max(1.0, float(np.max(np.abs(x))))) ** 2

    fallback = None
    estimates = []
    for s in range(power.shape[1]):
        f = _dominant_frequency(power[:, s], freqs, floor)
        if f is None:
            if fallback is None:
                fallback = _global_frequency(x, fs, nfft, floor) or fs / 2.0
            f = fallback
        estimates.append(f)

    per_sample = np.interp(np.arange(n), seg_times * fs, np.asarray(estimates))
    upper = max(MIN_ADAPTIVE_WINDOW, n // 4)
    windows = np.clip(np.rint(fs / (2.0 * per_sample)), MIN_ADAPTIVE_WINDOW, upper).astype(int)
    logger.debug("Adaptive windows: %d segments, window range [%d, %d]",
                 power.shape[1], windows.min(), windows.max())
    return windows


def adaptive_moving_average(signal, fs: float) -> np.ndarray:
    """Centred moving average whose window follows the local dominant frequency."""
    x, flat = _as_columns(signal)
    out = _windowed_means(x, adaptive_windows(x, fs))
    return out[:, 0] if flat else out


# ----------------------------------------------------------------------------
# Geometric median
# ----------------------------------------------------------------------------
def _objective(points: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.sqrt(np.sum((points - y) ** 2, axis=1))))


def weiszfeld_iterates(
    points,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> Iterator[Tuple[np.ndarray, float]]:
    """
    Yield (estimate, objective) for the centroid and every Weiszfeld step after it.

    An iterate that coincides with data points uses the modified update of
    Vardi and Zhang, and stops when it already satisfies the subgradient
    optimality condition. Stops once a step is shorter than tol.
    """
    cfg = get_settings()
    tol = cfg.GEOMEDIAN_TOL if tol is None else tol
    max_iter = cfg.GEOMEDIAN_MAX_ITER if max_iter is None else max_iter
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[0] == 0:
        raise InvalidSpecError("Geometric median of an empty set")

    y = x.mean(axis=0)
    yield y, _objective(x, y)
    scale = max(1.0, float(np.max(np.abs(x))))
    for _ in range(max_iter):
        dist = np.sqrt(np.sum((x - y) ** 2, axis=1))
        coincident = dist <= 1e-14 * scale
        far = ~coincident
        if not np.any(far):
            return
        weights = 1.0 / dist[far]
        target = weights @ x[far] / weights.sum()
        eta = int(np.count_nonzero(coincident))
        if eta == 0:
            y_next = target
        else:
            pull = np.linalg.norm(weights @ (x[far] - y))
            if pull <= eta:
                return
            ratio = eta / pull
            y_next = (1.0 - ratio) * target + ratio * y
        step = float(np.linalg.norm(y_next - y))
        y = y_next
        yield y, _objective(x, y)
        if step < tol:
            return


def geometric_median(points, tol: Optional[float] = None, max_iter: Optional[int] = None) -> np.ndarray:
    """Point minimising the summed Euclidean distance; returns the best iterate seen."""
    best, best_value = None, np.inf
    for y, value in weiszfeld_iterates(points, tol, max_iter):
        if value < best_value or best is None:
            best, best_value = y, value
    return np.array(best)


# ----------------------------------------------------------------------------
# Topological filters
# ----------------------------------------------------------------------------
_AGGREGATORS: Dict[Aggregator, Callable[[np.ndarray], np.ndarray]] = {
    Aggregator.MEAN: lambda block: np.mean(block, axis=0),
    Aggregator.GEOMETRIC_MEDIAN: geometric_median,
}


def _aggregate(cloud: TimeSeriesPointCloud, neighborhoods, aggregator: Aggregator) -> TimeSeriesPointCloud:
    reduce = _AGGREGATORS[aggregator]
    x = cloud.points
    out = np.empty_like(x)
    for i, idx in enumerate(neighborhoods):
        out[i] = reduce(x[idx])
    return cloud.with_points(out)


def _knn_neighborhoods(cloud: TimeSeriesPointCloud, k: int):
    table = knn_table(cloud, k)
    return [np.union1d(row, [i]) for i, row in enumerate(table)]


def _ball_neighborhoods(cloud: TimeSeriesPointCloud, scale: float, field: Optional[CovarianceField]):
    x = cloud.points
    limit = scale * scale
    return [np.flatnonzero(quadratic_form_row(x, i, field) <= limit) for i in range(cloud.n)]


def _intersection_neighborhoods(cloud: TimeSeriesPointCloud, field: CovarianceField, eps: float):
    complex_ = ellipsoid_complex_at_scale(cloud, field, eps)
    members = [[i] for i in range(cloud.n)]
    for i, j in complex_.edges:
        members[i].append(int(j))
        members[j].append(int(i))
    return [np.unique(m) for m in members]


def topological_filter(
    cloud: TimeSeriesPointCloud,
    spec: FilterSpec,
    field: Optional[CovarianceField] = None,
) -> TimeSeriesPointCloud:
    """
    Replace each point by an aggregate of its neighborhood.

    - knn: the k nearest neighbours and the point itself
    - spherical: {j : |x_j - x_i| <= r}
    - ellipsoidal: {j : (x_j - x_i)^T Sigma_i^{-1} (x_j - x_i) <= eps^2}, or with
      NeighborhoodMode.INTERSECTION, every j whose ellipsoid meets E_i(eps)

    Raises:
    - InvalidSpecError: for a missing scale or covariance field, or k >= n.
    - ShapeMismatchError: if the field is not aligned with the cloud.
    """
    if spec.kind == FilterKind.KNN:
        neighborhoods = _knn_neighborhoods(cloud, spec.k)
    elif spec.kind == FilterKind.SPHERICAL:
        if spec.radius is None:
            raise InvalidSpecError("Spherical filter needs a radius")
        neighborhoods = _ball_neighborhoods(cloud, spec.radius, None)
    elif spec.kind == FilterKind.ELLIPSOIDAL:
        if spec.eps is None:
            raise InvalidSpecError("Ellipsoidal filter needs a scale eps")
        if field is None:
            raise InvalidSpecError("Ellipsoidal filter needs a covariance field")
        if field.n != cloud.n or field.d != cloud.d:
            raise ShapeMismatchError("Covariance field is not aligned with the cloud")
        if spec.mode == NeighborhoodMode.INTERSECTION:
            neighborhoods = _intersection_neighborhoods(cloud, field, spec.eps)
        else:
            neighborhoods = _ball_neighborhoods(cloud, spec.eps, field)
    else:
        raise InvalidSpecError(f"{spec.kind.value} is not a topological filter")

    sizes = [len(idx) for idx in neighborhoods]
    logger.debug("%s filter: neighborhood size min=%d mean=%.1f max=%d",
                 spec.label, min(sizes), float(np.mean(sizes)), max(sizes))
    return _aggregate(cloud, neighborhoods, spec.aggregator)


def _apply_moving_average(cloud, spec, field):
    return cloud.with_points(moving_average(cloud.points, spec.window))


def _apply_adaptive(cloud, spec, field):
    return cloud.with_points(adaptive_moving_average(cloud.points, cloud.sampling_rate))


_STRATEGIES = {
    FilterKind.MOVING_AVERAGE: _apply_moving_average,
    FilterKind.ADAPTIVE_MOVING_AVERAGE: _apply_adaptive,
    FilterKind.KNN: topological_filter,
    FilterKind.SPHERICAL: topological_filter,
    FilterKind.ELLIPSOIDAL: topological_filter,
}


def apply_filter(
    cloud: TimeSeriesPointCloud,
    spec: FilterSpec,
    field: Optional[CovarianceField] = None,
) -> TimeSeriesPointCloud:
    """Run any of the five strategies on a cloud."""
    return _STRATEGIES[spec.kind](cloud, spec, field)


# ----------------------------------------------------------------------------
# Scoring
# ----------------------------------------------------------------------------
def rmse(
    clean: TimeSeriesPointCloud,
    denoised: TimeSeriesPointCloud,
    snr_db: Optional[float] = None,
    seed: Optional[int] = None,
) -> RmseReport:
    """Per-axis root-mean-square difference."""
    a, b = clean.points, denoised.points
    if a.shape != b.shape:
        raise ShapeMismatchError(f"Cannot compare clouds of shape {a.shape} and {b.shape}")
    per_axis = np.sqrt(np.mean((a - b) ** 2, axis=0))
    return RmseReport(per_axis=[float(v) for v in per_axis], snr_db=snr_db, seed=seed)
