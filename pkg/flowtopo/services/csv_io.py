"""
CSV Service Module

Reading and writing every tabular format the command line produces:

- point cloud:  t,x0..x{d-1}[,extra columns]
- edges:        i,j,value
- diagram:      dim,birth,death,unresolved  (empty death for an infinite class)
- recurrence:   i,t1,truth,within_tol       (empty cells where no value exists)
- sweep / RMSE: snr_db,seed,filter,axis,rmse

Floats are written with repr(), the shortest text that parses back to the same
64-bit value, so generated files are byte-stable and round-trip exactly. All
writes go to a temporary file in the target directory and are moved into
place with os.replace.
"""

import csv
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from flowtopo.core.exceptions import CsvParseError, InvalidSpecError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.complex import FilteredComplex
from flowtopo.models.denoise import SweepRow
from flowtopo.models.persistence import PersistenceDiagram
from flowtopo.models.recurrence import GroundTruthReturns, RecurrenceTable

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CLOUD_TIME_COLUMN = "t"
EDGE_HEADER = ["i", "j", "value"]
DIAGRAM_HEADER = ["dim", "birth", "death", "unresolved"]
RECURRENCE_HEADER = ["i", "t1", "truth", "within_tol"]
SWEEP_HEADER = ["snr_db", "seed", "filter", "axis", "rmse"]


def format_float(value: Optional[float]) -> str:
    """Shortest round-trip text; None and infinities become an empty cell."""
    if value is None or math.isinf(value):
        return ""
    return repr(float(value))


def format_optional(value: Optional[int]) -> str:
    return "" if value is None else str(int(value))


# ------------------------------------------------------------------------------
# Writing
# ------------------------------------------------------------------------------
def write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    """Atomically write a header and rows of pre-formatted cells."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    count = 0
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
                count += 1
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.info("Wrote %d rows to %s", count, path)
    return path


def cloud_header(d: int, extra: Sequence[str] = ()) -> List[str]:
    return [CLOUD_TIME_COLUMN] + [f"x{a}" for a in range(d)] + list(extra)


def write_cloud(
    path: PathLike,
    cloud: TimeSeriesPointCloud,
    extra: Optional[Dict[str, Sequence[float]]] = None,
) -> Path:
    """Write t,x0..x{d-1} plus optional extra columns (e.g. phase)."""
    extra = extra or {}
    for name, values in extra.items():
        if len(values) != cloud.n:
            raise InvalidSpecError(f"Column {name!r} has {len(values)} values for {cloud.n} points")
    columns = [cloud.times] + [cloud.points[:, a] for a in range(cloud.d)] + [np.asarray(v) for v in extra.values()]
    rows = ([format_float(c[i]) for c in columns] for i in range(cloud.n))
    return write_rows(path, cloud_header(cloud.d, list(extra)), rows)


def write_edges(path: PathLike, complex_: FilteredComplex) -> Path:
    """i,j,value rows in filtration order."""
    rows = (
        [str(int(i)), str(int(j)), format_float(w)]
        for (i, j), w in zip(complex_.edges, complex_.edge_values)
    )
    return write_rows(path, EDGE_HEADER, rows)


def write_diagram(path: PathLike, diagram: PersistenceDiagram) -> Path:
    rows = (
        [str(p.dim), format_float(p.birth), format_float(p.death), "1" if p.unresolved else "0"]
        for p in diagram.pairs
    )
    return write_rows(path, DIAGRAM_HEADER, rows)


def write_recurrence(
    path: PathLike,
    table: RecurrenceTable,
    truth: Optional[GroundTruthReturns] = None,
    tol_samples: int = 2,
) -> Path:
    """i,t1,truth,within_tol; truth and within_tol stay empty without ground truth."""
    def row(i: int, t1: Optional[int]) -> List[str]:
        true = None if truth is None else truth.returns[i]
        within = ""
        if true is not None:
            within = "1" if t1 is not None and abs(t1 - true) <= tol_samples else "0"
        return [str(i), format_optional(t1), format_optional(true), within]

    return write_rows(path, RECURRENCE_HEADER, (row(i, t1) for i, t1 in enumerate(table.t1)))


def write_sweep(path: PathLike, rows: Iterable[SweepRow]) -> Path:
    ordered = sorted(rows, key=SweepRow.sort_key)
    cells = (
        [repr(float(r.snr_db)), str(r.seed), r.filter, str(r.axis), format_float(r.rmse)]
        for r in ordered
    )
    return write_rows(path, SWEEP_HEADER, cells)


# ------------------------------------------------------------------------------
# Reading
# ------------------------------------------------------------------------------
def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvParseError(line, f"non-numeric value {cell!r} in column {column!r}") from None


def read_table(path: PathLike, header: Optional[bool] = None) -> Tuple[List[str], List[List[str]], List[int]]:
    """
    Column names, data rows and their 1-based line numbers, with a rectangular
    shape check.

    header=None detects a header row: the first row is a header unless every
    cell in it parses as a number. Headerless files get columns c0, c1, ...

    Raises:
    - CsvParseError: for an empty file or a ragged row (1-based line numbers).
    """
    with open(path, newline="") as handle:
        raw = [(n, row) for n, row in enumerate(csv.reader(handle), start=1) if row and any(c.strip() for c in row)]
    if not raw:
        raise CsvParseError(1, "file is empty")
    _, first = raw[0]
    if header is None:
        header = not all(_is_number(c) for c in first)
    if header:
        names = [c.strip() for c in first]
        body = raw[1:]
    else:
        names = [f"c{a}" for a in range(len(first))]
        body = raw
    width = len(names)
    for line, row in body:
        if len(row) != width:
            raise CsvParseError(line, f"expected {width} fields, found {len(row)}")
    return names, [[c.strip() for c in row] for _, row in body], [line for line, _ in body]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest(
    path: PathLike,
    columns: Optional[Sequence[str]] = None,
    time_column: Optional[str] = CLOUD_TIME_COLUMN,
    segment: Optional[Tuple[int, int]] = None,
    stride: int = 1,
    rate: Optional[float] = None,
    extra_columns: Sequence[str] = ("phase",),
) -> Tuple[TimeSeriesPointCloud, Dict[str, np.ndarray]]:
    """
    Load a d-axial time series as a point cloud.

    `columns` picks the state columns by name (default: every column except
    the time column and `extra_columns`). `segment` = (start, length) is
    applied before `stride`. The sampling interval comes from `rate` (Hz) if
    given, else from the first two time stamps, else 1; striding multiplies it.

    Returns the cloud and any extra columns found (e.g. the chirp phase),
    restricted to the same rows.

    Raises:
    - CsvParseError: for ragged rows, non-numeric cells or unknown columns.
    - InvalidSpecError: for an empty selection.
    """
    if stride < 1:
        raise InvalidSpecError(f"Stride must be at least 1, got {stride}")
    names, rows, lines = read_table(path)
    index = {name: a for a, name in enumerate(names)}
    time_column = time_column if time_column in index else None
    if columns is None:
        skip = {time_column, *extra_columns}
        columns = [name for name in names if name not in skip]
    for name in columns:
        if name not in index:
            raise CsvParseError(1, f"unknown column {name!r}; available: {', '.join(names)}")
    if not columns:
        raise InvalidSpecError("No state columns selected")

    if segment is not None:
        start, length = segment
        if start < 0 or length < 1 or start >= len(rows):
            raise InvalidSpecError(f"Segment ({start}, {length}) lies outside the {len(rows)} data rows")
        rows, lines = rows[start:start + length], lines[start:start + length]
    rows, lines = rows[::stride], lines[::stride]
    if not rows:
        raise InvalidSpecError("Selection contains no rows")

    def column(name: str) -> np.ndarray:
        a = index[name]
        return np.array([_parse_float(row[a], line, name) for row, line in zip(rows, lines)])

    points = np.column_stack([column(name) for name in columns])
    times = column(time_column) if time_column is not None else None

    if rate is not None:
        if not rate > 0:
            raise InvalidSpecError(f"Sampling rate must be positive, got {rate}")
        dt = stride / rate
    elif times is not None and len(times) >= 2:
        dt = float(times[1] - times[0])
    else:
        dt = float(stride)
    t0 = float(times[0]) if times is not None else 0.0

    extras = {name: column(name) for name in extra_columns if name in index and name not in columns}
    cloud = TimeSeriesPointCloud(points=points, dt=dt, t0=t0)
    logger.info("Ingested %s: n=%d, d=%d, dt=%.6g", path, cloud.n, cloud.d, cloud.dt)
    return cloud, extras


def read_sweep(path: PathLike) -> List[SweepRow]:
    """Rows of an existing sweep table (used to resume a sweep)."""
    names, rows, lines = read_table(path, header=True)
    if names != SWEEP_HEADER:
        raise CsvParseError(1, f"expected header {','.join(SWEEP_HEADER)}")
    out = []
    for row, line in zip(rows, lines):
        snr, seed, name, axis, value = row
        try:
            out.append(SweepRow(
                snr_db=_parse_float(snr, line, "snr_db"),
                seed=int(seed),
                filter=name,
                axis=int(axis),
                rmse=_parse_float(value, line, "rmse") if value else None,
            ))
        except ValueError as exc:
            if isinstance(exc, CsvParseError):
                raise
            raise CsvParseError(line, str(exc)) from None
    return out
