# flowtopo/operations/ellipsoid.py
"""
Module: ellipsoid.py

Adaptive ellipsoids E_i(eps) = {x : (x - x_i)^T Sigma_i^{-1} (x - x_i) <= eps^2}
and the convex intersection criterion between two of them.

Scale convention: the semi-axes of E_i(eps) are eps * sqrt(lambda_ij), so the
shape matrix of E_i(eps) in the form {x : x^T P^{-1} x <= 1} is P_i = eps^2 Sigma_i.
With v = x_i - x_j,

    K(S) = 1 - v^T (P_i / S + P_j / (1 - S))^{-1} v
         = 1 - S (1 - S) / eps^2 * v^T ((1 - S) Sigma_i + S Sigma_j)^{-1} v

and the ellipsoids intersect iff min over S in (0, 1) of K(S) >= 0. For
Sigma = I this reduces to balls of radius eps, which touch when |v| = 2 eps.
K grows with eps at every S, so intersection is monotone in the scale.

The batched helpers (`intersect_many`, `birth_scales`) evaluate many pairs at
once with stacked Cholesky factorizations; the scalar operations are thin
wrappers over them.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import (
    IntersectionConsistencyError,
    InvalidSpecError,
    ShapeMismatchError,
)
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.ellipsoid import Ellipsoid, IntersectionResult

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# relative slack applied to the analytic ball bounds of the birth scale
_BOUND_SLACK = 1e-8


def contains(e: Ellipsoid, x) -> bool:
    """True iff x lies in the closed ellipsoid."""
    x = np.asarray(x, dtype=float)
    if x.shape != e.center.shape:
        raise ShapeMismatchError(f"Point of shape {x.shape} vs center of shape {e.center.shape}")
    diff = x - e.center
    q = float(diff @ cho_solve(cho_factor(e.shape), diff))
    return q <= e.scale ** 2


def quadratic_form_row(points: np.ndarray, i: int, field: Optional[CovarianceField] = None) -> np.ndarray:
    """
    (x_j - x_i)^T Sigma_i^{-1} (x_j - x_i) for every j, from the cached eigendecomposition.

    Without a field this is the squared Euclidean distance, summed the same way,
    so an identity field reproduces it bit for bit.
    """
    diff = points - points[i]
    if field is None:
        return np.sum(diff * diff, axis=1)
    rotated = diff @ field.eigenvectors[i]
    return np.sum(rotated * rotated / field.eigenvalues[i], axis=1)


def _k_single(s: float, sig_i, sig_j, v, eps_sq: float, tol: float) -> float:
    """K at one S; a singular inner matrix is retried at S shifted by tol."""
    for attempt in range(4):
        m = (1.0 - s) * sig_i + s * sig_j
        try:
            c = cho_factor(m)
        except np.linalg.LinAlgError:
            s = s + tol if s < 0.5 else s - tol
            continue
        return 1.0 - s * (1.0 - s) * float(v @ cho_solve(c, v)) / eps_sq
    logger.warning("Inner matrix stayed singular near S=%.6g; using a pseudo-inverse", s)
    return 1.0 - s * (1.0 - s) * float(v @ np.linalg.pinv(m) @ v) / eps_sq


def _k_values(s, sig_i, sig_j, v, eps_sq, tol) -> np.ndarray:
    """K(S) for a stack of pairs, one S per pair."""
    m = (1.0 - s)[:, None, None] * sig_i + s[:, None, None] * sig_j
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return np.array([
            _k_single(s[p], sig_i[p], sig_j[p], v[p], eps_sq[p], tol) for p in range(len(s))
        ])
    y = np.linalg.solve(chol, v[..., None])[..., 0]
    return 1.0 - s * (1.0 - s) * np.sum(y * y, axis=1) / eps_sq


def _golden_minimize(sig_i, sig_j, v, eps_sq, tol, max_iter, tangency):
    """
    Batched golden-section minimisation of K over (0, 1).

    A pair stops as soon as any evaluated K drops below -tangency: it is then
    known not to intersect. Returns (k_min, s_at_min, iterations).
    """
    m = len(v)
    a = np.zeros(m)
    b = np.ones(m)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = _k_values(c, sig_i, sig_j, v, eps_sq, tol)
    fd = _k_values(d, sig_i, sig_j, v, eps_sq, tol)
    k_min = np.minimum(fc, fd)
    s_min = np.where(fc <= fd, c, d)
    iterations = np.zeros(m, dtype=int)
    done = k_min < -tangency

    width = 1.0
    it = 0
    while it < max_iter and width > tol:
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        it += 1
        width *= INV_PHI
        left = fc[idx] < fd[idx]
        ai, bi, ci, di = a[idx], b[idx], c[idx], d[idx]
        new_a = np.where(left, ai, ci)
        new_b = np.where(left, di, bi)
        new_c = np.where(left, new_b - INV_PHI * (new_b - new_a), di)
        new_d = np.where(left, ci, new_a + INV_PHI * (new_b - new_a))
        trial = np.where(left, new_c, new_d)
        fp = _k_values(trial, sig_i[idx], sig_j[idx], v[idx], eps_sq[idx], tol)

        fc_old, fd_old = fc[idx], fd[idx]
        fc[idx] = np.where(left, fp, fd_old)
        fd[idx] = np.where(left, fc_old, fp)
        a[idx], b[idx], c[idx], d[idx] = new_a, new_b, new_c, new_d

        better = fp < k_min[idx]
        k_min[idx] = np.where(better, fp, k_min[idx])
        s_min[idx] = np.where(better, trial, s_min[idx])
        iterations[idx] = it
        done[idx] = fp < -tangency

    idx = np.flatnonzero(~done)
    if idx.size:
        mid = 0.5 * (a[idx] + b[idx])
        fm = _k_values(mid, sig_i[idx], sig_j[idx], v[idx], eps_sq[idx], tol)
        better = fm < k_min[idx]
        k_min[idx] = np.where(better, fm, k_min[idx])
        s_min[idx] = np.where(better, mid, s_min[idx])
    return k_min, s_min, iterations


def intersect_many(
    sig_i: np.ndarray,
    sig_j: np.ndarray,
    v: np.ndarray,
    eps,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Intersection test for a stack of pairs.

    Returns (intersects, k_min, s_at_min, iterations), one entry per pair.
    """
    cfg = get_settings()
    tol = cfg.GOLDEN_TOL if tol is None else tol
    max_iter = cfg.GOLDEN_MAX_ITER if max_iter is None else max_iter
    v = np.atleast_2d(np.asarray(v, dtype=float))
    eps_sq = np.broadcast_to(np.asarray(eps, dtype=float) ** 2, (len(v),)).copy()
    if len(v) == 0:
        empty = np.empty(0)
        return np.empty(0, dtype=bool), empty, empty, np.empty(0, dtype=int)
    k_min, s_min, iterations = _golden_minimize(
        np.asarray(sig_i, dtype=float), np.asarray(sig_j, dtype=float), v, eps_sq,
        tol, max_iter, cfg.TANGENCY_TOL,
    )
    return k_min >= -cfg.TANGENCY_TOL, k_min, s_min, iterations


def _check_pair(sigma_i, sigma_j, x_i, x_j):
    sigma_i = np.asarray(sigma_i, dtype=float)
    sigma_j = np.asarray(sigma_j, dtype=float)
    x_i = np.asarray(x_i, dtype=float).ravel()
    x_j = np.asarray(x_j, dtype=float).ravel()
    d = x_i.size
    if x_j.size != d or sigma_i.shape != (d, d) or sigma_j.shape != (d, d):
        raise ShapeMismatchError("Centers and covariances must share dimension d")
    return sigma_i, sigma_j, x_i, x_j


def intersection_test(
    sigma_i,
    sigma_j,
    x_i,
    x_j,
    eps: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> IntersectionResult:
    """
    Decide whether E_i(eps) and E_j(eps) intersect.

    |min K| <= TANGENCY_TOL counts as touching, hence intersecting.
    """
    if not eps > 0:
        raise InvalidSpecError(f"Scale must be positive, got {eps}")
    sigma_i, sigma_j, x_i, x_j = _check_pair(sigma_i, sigma_j, x_i, x_j)
    hit, k_min, s_min, iterations = intersect_many(
        sigma_i[None], sigma_j[None], (x_i - x_j)[None], eps, tol, max_iter
    )
    return IntersectionResult(
        intersects=bool(hit[0]),
        k_min=float(k_min[0]),
        s_at_min=float(s_min[0]),
        iterations=int(iterations[0]),
    )


def birth_scales(
    sig_i: np.ndarray,
    sig_j: np.ndarray,
    v: np.ndarray,
    lam_i: np.ndarray,
    lam_j: np.ndarray,
    eps_max: float,
    rel_tol: Optional[float] = None,
) -> np.ndarray:
    """
    Smallest intersecting scale for a stack of pairs; NaN where none exists up to eps_max.

    The bracket starts from the ball bounds |v| / (sqrt(lmax_i) + sqrt(lmax_j))
    (circumscribed balls, no intersection below) and |v| / (sqrt(lmin_i) +
    sqrt(lmin_j)) (inscribed balls, intersection guaranteed above), then is
    bisected to relative width rel_tol. `lam_i`, `lam_j` are the descending
    eigenvalues of each covariance.

    Raises:
    - IntersectionConsistencyError: if a pair fails to intersect above its
      inscribed-ball bound, i.e. the test is not monotone in the scale.
    """
    if not eps_max > 0:
        raise InvalidSpecError(f"eps_max must be positive, got {eps_max}")
    rel_tol = get_settings().BIRTH_REL_TOL if rel_tol is None else rel_tol
    sig_i = np.asarray(sig_i, dtype=float)
    sig_j = np.asarray(sig_j, dtype=float)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    m = len(v)
    births = np.full(m, np.nan)
    if m == 0:
        return births

    norm_v = np.sqrt(np.sum(v * v, axis=1))
    lower = norm_v / (np.sqrt(lam_i[:, 0]) + np.sqrt(lam_j[:, 0])) * (1.0 - _BOUND_SLACK)
    upper = norm_v / (np.sqrt(lam_i[:, -1]) + np.sqrt(lam_j[:, -1])) * (1.0 + _BOUND_SLACK)
    births[norm_v == 0] = 0.0

    cand = np.flatnonzero((norm_v > 0) & (lower <= eps_max))
    if cand.size == 0:
        return births
    hi = np.minimum(upper[cand], eps_max)
    lo = lower[cand]
    hit = intersect_many(sig_i[cand], sig_j[cand], v[cand], hi)[0]
    guaranteed = upper[cand] <= eps_max
    if np.any(guaranteed & ~hit):
        bad = cand[np.flatnonzero(guaranteed & ~hit)[0]]
        raise IntersectionConsistencyError(
            f"Pair {bad} does not intersect at {upper[bad]:.6g} although its inscribed balls touch there"
        )
    cand, lo, hi = cand[hit], lo[hit], hi[hit]

    active = np.flatnonzero(hi - lo > rel_tol * hi)
    steps = 0
    while active.size:
        steps += 1
        mid = 0.5 * (lo[active] + hi[active])
        idx = cand[active]
        hit = intersect_many(sig_i[idx], sig_j[idx], v[idx], mid)[0]
        hi[active] = np.where(hit, mid, hi[active])
        lo[active] = np.where(hit, lo[active], mid)
        active = active[hi[active] - lo[active] > rel_tol * hi[active]]
    births[cand] = hi
    logger.debug("Bisected %d birth scales in %d steps", cand.size, steps)
    return births


def edge_birth_scale(
    sigma_i,
    sigma_j,
    x_i,
    x_j,
    eps_max: float,
    rel_tol: Optional[float] = None,
) -> Optional[float]:
    """Smallest eps at which E_i(eps) and E_j(eps) intersect, or None beyond eps_max."""
    sigma_i, sigma_j, x_i, x_j = _check_pair(sigma_i, sigma_j, x_i, x_j)
    lam_i = np.linalg.eigvalsh(sigma_i)[::-1]
    lam_j = np.linalg.eigvalsh(sigma_j)[::-1]
    births = birth_scales(
        sigma_i[None], sigma_j[None], (x_i - x_j)[None], lam_i[None], lam_j[None], eps_max, rel_tol
    )
    return None if np.isnan(births[0]) else float(births[0])
