"""
SNR Sweep Service

Runs the denoising comparison over a grid of (snr_db, seed, filter) cells:
regenerate the noisy chirp, pick the topological scale from the dominant H1
class of the matching filtration (VR for spherical, ellipsoidal for
ellipsoidal), filter, and score each axis against the clean signal.

Cells are independent and run on a thread pool of FLOWTOPO_THREADS workers.
Rows come back sorted, so the table does not depend on scheduling. Cells
whose key is already in `completed` are skipped, which makes an interrupted
sweep resumable.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field

from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import DominantClassNotFoundError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.denoise import SweepRow
from flowtopo.operations.denoise import apply_filter, rmse
from flowtopo.operations.neighborhoods import covariance_field
from flowtopo.operations.signal_model import add_noise, generate_chirp
from flowtopo.schemas.denoise import FilterKind, FilterSpec, ScaleAnchor
from flowtopo.schemas.experiment import SweepConfig
from flowtopo.schemas.filtration import FiltrationKind
from flowtopo.schemas.neighborhood import NeighborhoodSpec
from flowtopo.schemas.signal import NoiseSpec
from flowtopo.services.scale_selection import filter_scale, select_scale

logger = logging.getLogger(__name__)

CellKey = Tuple[float, int, str]


class CellFailure(BaseModel):
    key: CellKey
    message: str

    model_config = ConfigDict(frozen=True)


class SweepResult(BaseModel):
    rows: List[SweepRow] = Field(default_factory=list)
    failures: List[CellFailure] = Field(default_factory=list)
    skipped: int = 0

    model_config = ConfigDict(frozen=True)

    @property
    def ok(self) -> bool:
        return not self.failures


def denoise_with_selection(
    noisy: TimeSeriesPointCloud,
    spec: FilterSpec,
    neighborhood: NeighborhoodSpec,
    anchor: ScaleAnchor,
    field: Optional[CovarianceField] = None,
) -> Tuple[TimeSeriesPointCloud, FilterSpec]:
    """
    Apply one filter, choosing r or eps from the noisy cloud's own diagram when unset.

    Returns the filtered cloud and the spec with its scale resolved. The
    ellipsoidal kind uses `field` when given, else the covariance field of
    the noisy cloud.

    Raises:
    - DominantClassNotFoundError: when the diagram has no finite H1 class.
    """
    if spec.kind != FilterKind.ELLIPSOIDAL:
        field = None
    elif field is None:
        field = covariance_field(noisy, neighborhood)
    if spec.kind.is_topological and spec.scale is None:
        kind = FiltrationKind.ELLIPSOID if spec.kind == FilterKind.ELLIPSOIDAL else FiltrationKind.VIETORIS_RIPS
        selection = select_scale(noisy, kind, anchor, field=field)
        spec = spec.with_scale(filter_scale(selection.scale, kind))
    return apply_filter(noisy, spec, field), spec


class SweepRunner:
    """Evaluates the cells of one SweepConfig."""

    def __init__(self, config: SweepConfig, threads: Optional[int] = None):
        self.config = config
        self.threads = threads or get_settings().FLOWTOPO_THREADS
        self.clean, _ = generate_chirp(config.chirp)
        self.specs = {spec.label: spec for spec in config.filter_specs()}

    def cells(self) -> List[CellKey]:
        return [
            (float(snr), int(seed), label)
            for snr in self.config.snr_db
            for seed in self.config.seeds
            for label in self.specs
        ]

    def run_cell(self, key: CellKey) -> List[SweepRow]:
        snr_db, seed, label = key
        noisy = add_noise(self.clean, NoiseSpec.from_db(snr_db, seed=seed))
        try:
            denoised, _ = denoise_with_selection(noisy, self.specs[label], self.config.neighborhood, self.config.anchor)
        except DominantClassNotFoundError as exc:
            logger.warning("Cell snr=%s seed=%d filter=%s has no H1 scale: %s", snr_db, seed, label, exc)
            return [SweepRow(snr_db=snr_db, seed=seed, filter=label, axis=a) for a in range(self.clean.d)]
        report = rmse(self.clean, denoised, snr_db=snr_db, seed=seed)
        return [
            SweepRow(snr_db=snr_db, seed=seed, filter=label, axis=a, rmse=value)
            for a, value in enumerate(report.per_axis)
        ]

    def run(self, completed: Optional[Iterable[CellKey]] = None) -> SweepResult:
        done: Set[CellKey] = set(completed or ())
        pending = [key for key in self.cells() if key not in done]
        skipped = len(self.cells()) - len(pending)
        logger.info("Sweep: %d cells to run, %d already complete, %d threads",
                    len(pending), skipped, self.threads)

        rows: List[SweepRow] = []
        failures: List[CellFailure] = []

        def guarded(key: CellKey):
            try:
                return key, self.run_cell(key), None
            except Exception as exc:
                logger.error("Cell %s failed: %s", key, exc)
                return key, [], str(exc)

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            for n_done, (key, cell_rows, error) in enumerate(pool.map(guarded, pending), start=1):
                rows.extend(cell_rows)
                if error is not None:
                    failures.append(CellFailure(key=key, message=error))
                logger.info("Sweep progress: %d/%d cells", n_done, len(pending))

        rows.sort(key=SweepRow.sort_key)
        return SweepResult(rows=rows, failures=failures, skipped=skipped)


def snr_sweep(
    config: SweepConfig,
    completed: Optional[Iterable[CellKey]] = None,
    threads: Optional[int] = None,
) -> SweepResult:
    """Run every (snr_db, seed, filter) cell of `config` not listed in `completed`."""
    return SweepRunner(config, threads).run(completed)
