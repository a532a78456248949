"""
Scale Selection Service

Chooses a neighborhood scale from the dominant H1 class of a filtration:
build the filtration up to an edge cap, compute its diagram, take the most
persistent finite loop and read off either its death or one entry of the
four-scale schedule.

Without an explicit cap, the first cap is a low quantile of the pairwise
values and it is widened geometrically (tenacity) while no finite loop exists
or while a loop still open at the cap has already outlived the dominant one.
Widening stops at the cap where the complex is complete, since no loop is
open there.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, stop_any

from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import DominantClassNotFoundError, InvalidSpecError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.complex import FilteredComplex
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.persistence import PersistenceDiagram, PersistencePair, ScaleSchedule
from flowtopo.operations.filtration import (
    ellipsoid_filtration,
    fermat_distance_matrix,
    pairwise_distances,
    rips_from_distances,
)
from flowtopo.operations.persistence import compute_persistence, dominant_class, scale_schedule
from flowtopo.schemas.denoise import ScaleAnchor
from flowtopo.schemas.filtration import FermatParams, FiltrationKind

logger = logging.getLogger(__name__)

# margin over the inscribed-ball bound so every pair's bisected birth fits
_FULL_CAP_MARGIN = 1e-6


class _OpenLoopError(Exception):
    """A loop still open at the cap already outlives the dominant class."""


class ScaleSelection(BaseModel):
    """Outcome of a dominant-H1 scale selection."""

    kind: FiltrationKind
    cap: float
    filtration: FilteredComplex
    diagram: PersistenceDiagram
    dominant: Optional[PersistencePair] = None
    schedule: Optional[ScaleSchedule] = None
    scale: Optional[float] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class FiltrationBuilder:
    """Builds one kind of filtration for a cloud at any cap."""

    def __init__(
        self,
        cloud: TimeSeriesPointCloud,
        kind: FiltrationKind,
        field: Optional[CovarianceField] = None,
        fermat: Optional[FermatParams] = None,
        rel_tol: Optional[float] = None,
    ):
        if kind == FiltrationKind.ELLIPSOID and field is None:
            raise InvalidSpecError("An ellipsoidal filtration needs a covariance field")
        self.cloud = cloud
        self.kind = kind
        self.field = field
        self.rel_tol = rel_tol
        self._distances = None
        if kind == FiltrationKind.FERMAT:
            self._distances = fermat_distance_matrix(cloud, fermat or FermatParams())
        elif kind == FiltrationKind.VIETORIS_RIPS:
            self._distances = pairwise_distances(cloud)

    def default_cap(self) -> float:
        """Low quantile of the pairwise values, in the units of this filtration."""
        q = get_settings().EDGE_CAP_QUANTILE
        n = self.cloud.n
        if n < 2:
            return 1.0
        iu = np.triu_indices(n, k=1)
        if self.kind == FiltrationKind.ELLIPSOID:
            values = pairwise_distances(self.cloud)[iu] / (2.0 * float(np.median(np.sqrt(self.field.eigenvalues[:, 0]))))
        else:
            values = self._distances[iu]
        cap = float(np.quantile(values, q))
        return cap if cap > 0 else float(np.max(values)) or 1.0

    def full_cap(self) -> float:
        """Smallest cap at which every connectable pair is an edge."""
        n = self.cloud.n
        if n < 2:
            return 1.0
        iu, ju = np.triu_indices(n, k=1)
        if self.kind == FiltrationKind.ELLIPSOID:
            reach = np.sqrt(self.field.eigenvalues[:, -1])
            distances = pairwise_distances(self.cloud)[iu, ju]
            values = distances / (reach[iu] + reach[ju]) * (1.0 + _FULL_CAP_MARGIN)
        else:
            values = self._distances[iu, ju]
            values = values[np.isfinite(values)]
        cap = float(np.max(values)) if values.size else 0.0
        return cap if cap > 0 else 1.0

    def build(self, cap: float) -> FilteredComplex:
        if self.kind == FiltrationKind.ELLIPSOID:
            return ellipsoid_filtration(self.cloud, self.field, cap, self.rel_tol)
        return rips_from_distances(self._distances, cap)


def _scale_from(schedule: ScaleSchedule, dominant: PersistencePair, anchor: ScaleAnchor) -> float:
    return dominant.death if anchor.is_death else schedule[anchor.schedule_index]


def _longest_open_loop(diagram: PersistenceDiagram) -> float:
    """Lifetime so far (cap - birth) of the oldest unresolved H1 pair; 0 if none."""
    return max((p.lifetime for p in diagram.pairs_in(1) if p.unresolved), default=0.0)


def select_scale(
    cloud: TimeSeriesPointCloud,
    kind: FiltrationKind,
    anchor: Optional[ScaleAnchor] = None,
    field: Optional[CovarianceField] = None,
    fermat: Optional[FermatParams] = None,
    cap: Optional[float] = None,
    rel_tol: Optional[float] = None,
    required: bool = True,
) -> ScaleSelection:
    """
    Filtration, diagram and H1-anchored scale for a cloud.

    With an explicit `cap` a single filtration is built. Otherwise the cap
    grows by CAP_GROWTH, clamped to the complete-complex cap, up to
    CAP_ATTEMPTS times: while no finite loop exists, and while an unresolved
    loop has lived longer than the dominant finite one. If attempts run out
    first, the last dominant class is kept with a warning. Zero-lifetime
    loops are not eligible as dominant class. With required=False a cloud
    without a finite loop yields the last filtration and diagram, with no
    dominant class.

    Raises:
    - DominantClassNotFoundError: when no finite H1 pair appears and `required`.
    """
    cfg = get_settings()
    anchor = anchor or ScaleAnchor()
    builder = FiltrationBuilder(cloud, kind, field, fermat, rel_tol)
    automatic = cap is None
    full = builder.full_cap() if automatic else cap
    start = min(builder.default_cap(), full) if automatic else cap
    attempts = cfg.CAP_ATTEMPTS if automatic else 1

    last = {}

    def attempt_once(current_cap: float) -> ScaleSelection:
        complex_ = builder.build(current_cap)
        diagram = compute_persistence(complex_)
        last.clear()
        last.update(cap=current_cap, filtration=complex_, diagram=diagram)
        dominant = dominant_class(diagram, dim=1, include_diagonal=False)
        schedule = scale_schedule(dominant)
        selection = ScaleSelection(
            kind=kind, cap=current_cap, filtration=complex_, diagram=diagram,
            dominant=dominant, schedule=schedule, scale=_scale_from(schedule, dominant, anchor),
        )
        last["selection"] = selection
        if automatic and _longest_open_loop(diagram) > dominant.lifetime:
            raise _OpenLoopError(f"An open loop outlives the dominant class at cap {current_cap:.6g}")
        return selection

    def reached_full_cap(retry_state) -> bool:
        return last.get("cap", 0.0) >= full

    try:
        for attempt in Retrying(
            stop=stop_any(stop_after_attempt(attempts), reached_full_cap),
            retry=retry_if_exception_type((DominantClassNotFoundError, _OpenLoopError)),
            reraise=True,
        ):
            with attempt:
                n_try = attempt.retry_state.attempt_number
                current = min(start * cfg.CAP_GROWTH ** (n_try - 1), full)
                if n_try > 1:
                    logger.warning("No settled H1 class below cap %.6g; widening to %.6g", last["cap"], current)
                selection = attempt_once(current)
    except _OpenLoopError as exc:
        selection = last["selection"]
        logger.warning("%s; keeping the current dominant class", exc)
    except DominantClassNotFoundError:
        if required:
            raise
        logger.warning("No finite H1 class up to cap %.6g; schedule omitted", last["cap"])
        return ScaleSelection(kind=kind, **last)

    logger.info("%s filtration: dominant H1 (b=%.6g, d=%.6g), scale %.6g (anchor %s, cap %.6g)",
                kind.value, selection.dominant.birth, selection.dominant.death,
                selection.scale, anchor, selection.cap)
    return selection


def filter_scale(selection_scale: float, kind: FiltrationKind) -> float:
    """
    Containment scale for a denoising or recurrence neighborhood from a filtration value.

    Ellipsoidal values are already radii. Vietoris-Rips and Fermat values are
    diameters (an edge at the distance between its points), so the radius is
    half of them.
    """
    if kind == FiltrationKind.ELLIPSOID:
        return selection_scale * get_settings().ELLIPSOID_MEMBERSHIP_FACTOR
    return selection_scale / 2.0
