# flowtopo/operations/neighborhoods.py
"""
Module: neighborhoods.py

Spatio-temporal neighborhoods and the local covariances that shape each
adaptive ellipsoid.

The covariance of point i is centred at x_i itself, not at the neighborhood
mean:

    Sigma_i = 1/|N_i| sum_j (x_j - x_i)(x_j - x_i)^T + delta I

so a neighborhood made of a straight trajectory segment through x_i yields an
ellipsoid stretched along the flow. The ridge delta = floor * max(tr/d, eps)
keeps every Sigma_i positive-definite.
"""

import logging
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import InvalidSpecError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.covariance import CovarianceField, LocalCovariance
from flowtopo.schemas.neighborhood import NeighborhoodSpec

logger = logging.getLogger(__name__)


def temporal_neighborhood(i: int, tau: int, n: int) -> np.ndarray:
    """Indices j with |j - i| <= tau, truncated to [0, n - 1] (no wraparound)."""
    if not 0 <= i < n:
        raise InvalidSpecError(f"Index {i} outside [0, {n})")
    return np.arange(max(0, i - tau), min(n - 1, i + tau) + 1)


def _rank_by_distance(dist: np.ndarray, idx: np.ndarray, i: int, k: int) -> np.ndarray:
    """k smallest distances excluding i; ties go to the smaller index."""
    keep = idx != i
    dist, idx = dist[keep], idx[keep]
    order = np.lexsort((idx, dist))
    return np.sort(idx[order[:k]])


def spatial_neighborhood(cloud: TimeSeriesPointCloud, i: int, k: int) -> np.ndarray:
    """
    The k indices j != i closest to x_i in Euclidean distance.

    An exhaustive scan is used up to KNN_EXHAUSTIVE_LIMIT points and a KD-tree
    above it; both resolve distance ties in favour of the smaller index.
    """
    n = cloud.n
    if k >= n:
        raise InvalidSpecError(f"k={k} must be smaller than n={n}")
    if k == 0:
        return np.empty(0, dtype=int)
    x = cloud.points
    if n <= get_settings().KNN_EXHAUSTIVE_LIMIT:
        dist = np.sqrt(np.sum((x - x[i]) ** 2, axis=1))
        return _rank_by_distance(dist, np.arange(n), i, k)
    return _tree_neighbors(cKDTree(x), x, i, k)


def _tree_neighbors(tree: cKDTree, x: np.ndarray, i: int, k: int) -> np.ndarray:
    kth, _ = tree.query(x[i], k=k + 1)
    radius = float(np.max(kth))
    # every point tied with the k-th distance is a candidate
    candidates = np.asarray(tree.query_ball_point(x[i], r=radius * (1 + 1e-12) + 1e-300), dtype=int)
    dist = np.sqrt(np.sum((x[candidates] - x[i]) ** 2, axis=1))
    return _rank_by_distance(dist, candidates, i, k)


def knn_table(cloud: TimeSeriesPointCloud, k: int) -> np.ndarray:
    """Row i holds spatial_neighborhood(cloud, i, k) for every i; shape (n, k)."""
    n = cloud.n
    if k >= n:
        raise InvalidSpecError(f"k={k} must be smaller than n={n}")
    if k == 0:
        return np.empty((n, 0), dtype=int)
    x = cloud.points
    if n <= get_settings().KNN_EXHAUSTIVE_LIMIT:
        return np.stack([spatial_neighborhood(cloud, i, k) for i in range(n)])
    tree = cKDTree(x)
    return np.stack([_tree_neighbors(tree, x, i, k) for i in range(n)])


def combined_neighborhood(cloud: TimeSeriesPointCloud, i: int, spec: NeighborhoodSpec) -> np.ndarray:
    """N_i = T_i U S_i as a sorted index array; always contains i."""
    temporal = temporal_neighborhood(i, spec.tau, cloud.n)
    spatial = spatial_neighborhood(cloud, i, spec.k)
    return np.union1d(temporal, spatial)


def local_covariance(
    cloud: TimeSeriesPointCloud,
    i: int,
    neighborhood,
    floor: Optional[float] = None,
) -> LocalCovariance:
    """
    Covariance of the neighborhood centred at x_i, plus a relative ridge.

    A neighborhood of {i} alone gives the isotropic fallback delta * I.
    """
    idx = np.asarray(neighborhood, dtype=int)
    if idx.size == 0:
        raise InvalidSpecError("Neighborhood must be nonempty")
    floor = get_settings().COVARIANCE_FLOOR if floor is None else floor
    x = cloud.points
    diff = x[idx] - x[i]
    raw = diff.T @ diff / idx.size
    return _regularize(raw, floor)


def _regularize(raw: np.ndarray, floor: float) -> LocalCovariance:
    d = raw.shape[0]
    raw = 0.5 * (raw + raw.T)
    ridge = floor * max(np.trace(raw) / d, np.finfo(float).eps)
    sigma = raw + ridge * np.eye(d)
    values, vectors = np.linalg.eigh(sigma)
    # eigh returns ascending order
    values, vectors = values[::-1], vectors[:, ::-1]
    values = np.maximum(values, ridge)
    return LocalCovariance(sigma=sigma, eigenvalues=values, eigenvectors=vectors, ridge=ridge)


def covariance_field(cloud: TimeSeriesPointCloud, spec: NeighborhoodSpec) -> CovarianceField:
    """
    Local covariance at every index from its spatio-temporal neighborhood.

    Raises:
    - InvalidSpecError: if tau + k < d or k >= n.
    """
    n, d = cloud.n, cloud.d
    if spec.tau + spec.k < d:
        raise InvalidSpecError(f"tau + k = {spec.tau + spec.k} must be at least d = {d}")
    floor = get_settings().COVARIANCE_FLOOR if spec.floor is None else spec.floor
    table = knn_table(cloud, spec.k)
    locals_ = []
    for i in range(n):
        nbhd = np.union1d(temporal_neighborhood(i, spec.tau, n), table[i])
        locals_.append(local_covariance(cloud, i, nbhd, floor))
    logger.debug("Built covariance field for n=%d, d=%d (tau=%d, k=%d)", n, d, spec.tau, spec.k)
    return CovarianceField.from_locals(locals_)
