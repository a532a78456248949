# flowtopo/operations/filtration.py
"""
Module: filtration.py

Filtered flag complexes from three proximity rules:

- ellipsoidal: edge (i, j) at the smallest eps where E_i(eps) and E_j(eps)
  intersect (radius convention: identity covariances give |x_i - x_j| / 2);
- Vietoris-Rips: edge at |x_i - x_j| (diameter convention);
- Fermat: Vietoris-Rips over the sample Fermat distance.

Triangles follow the flag rule and enter at the largest of their edge values.
Every builder takes a cap (eps_max / r_max) that bounds the edge count.
"""

import logging
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import pdist, squareform

from flowtopo.core.exceptions import InvalidSpecError, ShapeMismatchError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.complex import FilteredComplex
from flowtopo.models.covariance import CovarianceField
from flowtopo.operations.ellipsoid import birth_scales, intersect_many
from flowtopo.operations.neighborhoods import knn_table
from flowtopo.schemas.filtration import FermatParams

logger = logging.getLogger(__name__)


def flag_complex(n: int, edges, values, cap: Optional[float] = None) -> FilteredComplex:
    """
    Flag complex (dim <= 2) of a weighted graph on n vertices.

    `edges` are (i, j) pairs. Triangles are implied, each entering at the max
    of its edge values, and are streamed by the complex rather than stored.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    values = np.asarray(values, dtype=float).reshape(-1)
    if len(edges) != len(values):
        raise ShapeMismatchError("One value is required per edge")
    edges = np.sort(edges, axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0], values))
    edges, values = edges[order], values[order]

    logger.debug("Flag complex: %d vertices, %d edges", n, len(edges))
    return FilteredComplex(n_vertices=n, edges=edges, edge_values=values, cap=cap)


def _check_field(cloud: TimeSeriesPointCloud, field: CovarianceField) -> None:
    if field.n != cloud.n or field.d != cloud.d:
        raise ShapeMismatchError(
            f"Covariance field ({field.n} x {field.d}) does not match the cloud ({cloud.n} x {cloud.d})"
        )


def _candidate_pairs(cloud: TimeSeriesPointCloud, field: CovarianceField, scale: float):
    """Pairs i < j whose circumscribed balls of radius scale * sqrt(lambda_max) meet."""
    iu, ju = np.triu_indices(cloud.n, k=1)
    x = cloud.points
    v = x[iu] - x[ju]
    norm_v = np.sqrt(np.sum(v * v, axis=1))
    reach = np.sqrt(field.eigenvalues[:, 0])
    keep = norm_v <= scale * (reach[iu] + reach[ju]) * (1.0 + 1e-8)
    return iu[keep], ju[keep], v[keep]


def ellipsoid_complex_at_scale(
    cloud: TimeSeriesPointCloud,
    field: CovarianceField,
    eps: float,
) -> FilteredComplex:
    """
    The ellipsoid complex at a single scale: edge (i, j) iff E_i(eps) meets E_j(eps).

    All simplices carry the value eps.
    """
    if not eps > 0:
        raise InvalidSpecError(f"Scale must be positive, got {eps}")
    _check_field(cloud, field)
    iu, ju, v = _candidate_pairs(cloud, field, eps)
    hit = intersect_many(field.sigmas[iu], field.sigmas[ju], v, eps)[0]
    edges = np.column_stack([iu[hit], ju[hit]])
    return flag_complex(cloud.n, edges, np.full(len(edges), float(eps)), cap=eps)


def ellipsoid_filtration(
    cloud: TimeSeriesPointCloud,
    field: CovarianceField,
    eps_max: float,
    rel_tol: Optional[float] = None,
) -> FilteredComplex:
    """
    Continuous ellipsoidal filtration: each edge enters at its birth scale.

    Pairs that do not intersect by eps_max are omitted. The snapshot at any
    eps <= eps_max matches ellipsoid_complex_at_scale(eps) up to rel_tol.
    """
    if not eps_max > 0:
        raise InvalidSpecError(f"eps_max must be positive, got {eps_max}")
    _check_field(cloud, field)
    iu, ju, v = _candidate_pairs(cloud, field, eps_max)
    births = birth_scales(
        field.sigmas[iu], field.sigmas[ju], v,
        field.eigenvalues[iu], field.eigenvalues[ju],
        eps_max, rel_tol,
    )
    keep = np.isfinite(births)
    logger.info("Ellipsoidal filtration: %d of %d candidate pairs connect by eps_max=%.6g",
                int(keep.sum()), len(births), eps_max)
    return flag_complex(cloud.n, np.column_stack([iu[keep], ju[keep]]), births[keep], cap=eps_max)


def rips_from_distances(distances: np.ndarray, r_max: float) -> FilteredComplex:
    """Vietoris-Rips flag complex of a symmetric distance matrix, edges up to r_max."""
    if not r_max > 0:
        raise InvalidSpecError(f"r_max must be positive, got {r_max}")
    distances = np.asarray(distances, dtype=float)
    n = distances.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    values = distances[iu, ju]
    keep = values <= r_max
    return flag_complex(n, np.column_stack([iu[keep], ju[keep]]), values[keep], cap=r_max)


def vietoris_rips_filtration(cloud: TimeSeriesPointCloud, r_max: float) -> FilteredComplex:
    """Edges enter at the Euclidean distance |x_i - x_j| (diameter convention)."""
    return rips_from_distances(pairwise_distances(cloud), r_max)


def pairwise_distances(cloud: TimeSeriesPointCloud) -> np.ndarray:
    if cloud.n == 1:
        return np.zeros((1, 1))
    return squareform(pdist(cloud.points))


def fermat_distance_matrix(cloud: TimeSeriesPointCloud, params: FermatParams) -> np.ndarray:
    """
    All-pairs sample Fermat distance: min over paths through the sample of sum |hop|^p.

    Shortest paths run on the complete graph unless `params.knn` asks for a
    k-nearest-neighbour graph. The result is symmetric with a zero diagonal.
    """
    n = cloud.n
    weights = pairwise_distances(cloud) ** params.p
    if params.knn is not None:
        k = min(params.knn, n - 1)
        table = knn_table(cloud, k)
        mask = np.zeros((n, n), dtype=bool)
        mask[np.repeat(np.arange(n), k), table.ravel()] = True
        mask |= mask.T
    else:
        mask = ~np.eye(n, dtype=bool)
    rows, cols = np.nonzero(mask)
    tiny = np.finfo(float).tiny
    # stored entries are edges whatever their size; zero would be dropped as "no edge"
    data = np.maximum(weights[rows, cols], tiny)
    graph = csr_matrix((data, (rows, cols)), shape=(n, n))
    result = shortest_path(graph, method="D", directed=False)
    result = np.minimum(result, result.T)
    # paths made only of coincident hops
    result[result <= n * tiny] = 0.0
    np.fill_diagonal(result, 0.0)
    return result


def fermat_filtration(cloud: TimeSeriesPointCloud, params: FermatParams, r_max: float) -> FilteredComplex:
    """Vietoris-Rips construction over the Fermat distance matrix."""
    return rips_from_distances(fermat_distance_matrix(cloud, params), r_max)
