# flowtopo/operations/recurrence.py
"""
Module: recurrence.py

First-return times with spherical or ellipsoidal neighborhoods, ground truth
from an unwrapped phase, and the comparison between the two.

Membership in N_i is containment: |x_j - x_i| <= r for a ball, and
(x_j - x_i)^T Sigma_i^{-1} (x_j - x_i) <= eps^2 for the ellipsoid E_i(eps).
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import InvalidSpecError, PhaseOrderError, ShapeMismatchError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.recurrence import GroundTruthReturns, RecurrenceScore, RecurrenceTable
from flowtopo.operations.ellipsoid import quadratic_form_row
from flowtopo.schemas.recurrence import RecurrenceKind, RecurrenceNeighborhood, ReturnRule

logger = logging.getLogger(__name__)


def _strict_return(inside: np.ndarray, tau_min: int) -> Optional[int]:
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        return None
    first = int(hits[0]) + 1
    return first if first >= tau_min else None


def _reentry_return(inside: np.ndarray, tau_min: int) -> Optional[int]:
    # inside[k] refers to offset k + 1; offset 0 (x_i itself) is inside
    previous = np.concatenate([[True], inside[:-1]])
    entries = np.flatnonzero(inside & ~previous) + 1
    entries = entries[entries >= tau_min]
    return int(entries[0]) if entries.size else None


_RULES = {
    ReturnRule.STRICT: _strict_return,
    ReturnRule.FIRST_REENTRY: _reentry_return,
}


def first_returns(
    cloud: TimeSeriesPointCloud,
    neighborhood: RecurrenceNeighborhood,
    tau_min: Optional[int] = None,
    field: Optional[CovarianceField] = None,
    rule: ReturnRule = ReturnRule.STRICT,
) -> RecurrenceTable:
    """
    T1(i) = min{j > i : j - i >= tau_min, x_j in N_i, x_k not in N_i for i < k < j}.

    Under the strict rule an intermediate state inside N_i before i + tau_min
    breaks the chain and T1(i) is absent.

    Raises:
    - InvalidSpecError: if tau_min < 1 or an ellipsoidal neighborhood has no field.
    - ShapeMismatchError: if the field is not aligned with the cloud.
    """
    tau_min = get_settings().TAU_MIN if tau_min is None else tau_min
    if tau_min < 1:
        raise InvalidSpecError(f"tau_min must be at least 1, got {tau_min}")
    if neighborhood.kind == RecurrenceKind.ELLIPSOIDAL:
        if field is None:
            raise InvalidSpecError("Ellipsoidal neighborhoods need a covariance field")
        if field.n != cloud.n or field.d != cloud.d:
            raise ShapeMismatchError("Covariance field is not aligned with the cloud")
    else:
        field = None

    x = cloud.points
    limit = neighborhood.scale * neighborhood.scale
    select = _RULES[rule]
    t1 = []
    for i in range(cloud.n):
        inside = quadratic_form_row(x, i, field)[i + 1:] <= limit
        t1.append(select(inside, tau_min))

    table = RecurrenceTable(t1=t1, kind=neighborhood.kind, scale=neighborhood.scale, tau_min=tau_min, rule=rule)
    logger.debug("First returns (%s, scale=%.6g, tau_min=%d): %d of %d detected",
                 neighborhood.kind.value, neighborhood.scale, tau_min, table.detected, cloud.n)
    return table


def ground_truth_returns(phase: Sequence[float]) -> GroundTruthReturns:
    """
    Smallest j - i with theta[j] >= theta[i] + 2 pi, or None when the series ends first.

    Raises:
    - PhaseOrderError: if the phase decreases anywhere.
    """
    theta = np.asarray(phase, dtype=float).reshape(-1)
    if theta.size > 1 and np.any(np.diff(theta) < 0):
        bad = int(np.flatnonzero(np.diff(theta) < 0)[0])
        raise PhaseOrderError(f"Phase decreases between samples {bad} and {bad + 1}")
    n = theta.size
    target = theta + 2.0 * math.pi
    # absorb rounding in theta[i] + 2 pi for phases sampled exactly on a period
    slack = 1e-12 * np.maximum(1.0, np.abs(target))
    j = np.searchsorted(theta, target - slack, side="left")
    returns = [int(jj - i) if jj < n else None for i, jj in enumerate(j)]
    return GroundTruthReturns(returns=returns)


def score_returns(
    table: RecurrenceTable,
    truth: GroundTruthReturns,
    tol_samples: Optional[int] = None,
) -> RecurrenceScore:
    """
    Index-aligned comparison over indices that have a true return.

    A detection more than tol_samples earlier than the truth counts as
    spurious-early.

    Raises:
    - ShapeMismatchError: if the two tables have different lengths.
    """
    tol = get_settings().RECURRENCE_TOL_SAMPLES if tol_samples is None else tol_samples
    if len(table) != len(truth):
        raise ShapeMismatchError(f"Table has {len(table)} entries, truth has {len(truth)}")

    evaluated = detected = within = early = 0
    errors = []
    for t1, true in zip(table.t1, truth.returns):
        if true is None:
            continue
        evaluated += 1
        if t1 is None:
            continue
        detected += 1
        error = abs(t1 - true)
        errors.append(error)
        if error <= tol:
            within += 1
        if t1 < true - tol:
            early += 1

    return RecurrenceScore(
        evaluated=evaluated,
        detected_fraction=detected / evaluated if evaluated else 0.0,
        within_tol_fraction=within / evaluated if evaluated else 0.0,
        spurious_early=early,
        mean_abs_error=float(np.mean(errors)) if errors else None,
        tol_samples=tol,
    )
