"""
flowtopo Command Line Module

Entry point for every experiment:
- generate: synthetic Hamiltonian or chirp datasets
- ingest: load and report a d-axial CSV time series
- persistence: filtration + diagram + dominant H1 schedule
- denoise: the five filters, optionally scored against a clean reference
- recurrence: first-return tables, optionally scored against a phase column
- sweep: resumable RMSE-versus-SNR sweep from a flat key-value config

Progress and diagnostics are logged to stderr; stdout carries one JSON object
per result line so that runs can be parsed by other tools.
"""

import functools
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional

import click
from pydantic import ValidationError

from flowtopo import __version__
from flowtopo.core.config import get_settings
from flowtopo.core.exceptions import FlowTopoError
from flowtopo.core.logging import configure_logging
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.denoise import SweepRow
from flowtopo.operations.denoise import rmse
from flowtopo.operations.neighborhoods import covariance_field
from flowtopo.operations.recurrence import first_returns, ground_truth_returns, score_returns
from flowtopo.operations.signal_model import add_noise, generate_chirp, generate_hamiltonian
from flowtopo.schemas.denoise import Aggregator, FilterKind, FilterSpec, NeighborhoodMode, ScaleAnchor
from flowtopo.schemas.experiment import SweepConfig
from flowtopo.schemas.filtration import FermatParams, FiltrationKind
from flowtopo.schemas.neighborhood import NeighborhoodSpec
from flowtopo.schemas.recurrence import RecurrenceKind, RecurrenceNeighborhood, ReturnRule
from flowtopo.schemas.signal import ChirpParams, HamiltonianParams, NoiseSpec
from flowtopo.services import csv_io
from flowtopo.services.scale_selection import filter_scale, select_scale
from flowtopo.services.sweep import SweepRunner, denoise_with_selection

logger = logging.getLogger(__name__)

SWEEP_PARTIAL_FAILURE = 2


# ------------------------------------------------------------------------------
# Helpers
# ------------------------------------------------------------------------------
def emit(payload: Dict) -> None:
    """One JSON line on stdout; non-finite floats become null."""
    def clean(value):
        if isinstance(value, float) and not math.isfinite(value):
            return None
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [clean(v) for v in value]
        return value

    click.echo(json.dumps(clean(payload), sort_keys=True))


def handle_errors(func):
    """Turn domain and validation errors into a one-line message with exit status 1."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (FlowTopoError, ValidationError, ValueError, OSError) as exc:
            logger.debug("Command failed", exc_info=True)
            raise click.ClickException(str(exc)) from exc
    return wrapper


def split_names(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [name.strip() for name in value.split(",") if name.strip()]


def cloud_input(func):
    """Shared options for commands that read a point-cloud CSV."""
    options = [
        click.argument("source", type=click.Path(exists=True, dir_okay=False)),
        click.option("--columns", default=None, help="Comma-separated state columns (default: all but t/phase)"),
        click.option("--time-column", default="t", show_default=True),
        click.option("--segment", nargs=2, type=int, default=None, help="START LENGTH of the rows to keep"),
        click.option("--stride", type=click.IntRange(min=1), default=1, show_default=True),
        click.option("--rate", type=float, default=None, help="Sampling rate in Hz (overrides the time column)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_cloud(source, columns, time_column, segment, stride, rate):
    return csv_io.ingest(
        source,
        columns=split_names(columns),
        time_column=time_column,
        segment=tuple(segment) if segment else None,
        stride=stride,
        rate=rate,
    )


def neighborhood_options(func):
    options = [
        click.option("--tau", type=click.IntRange(min=0), default=3, show_default=True,
                     help="Temporal half-width of the covariance neighborhood"),
        click.option("--k", "k", type=click.IntRange(min=0), default=15, show_default=True,
                     help="Spatial neighbours of the covariance neighborhood"),
        click.option("--identity-covariance", is_flag=True, help="Use Sigma_i = I (balls) for every point"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_field(cloud: TimeSeriesPointCloud, tau: int, k: int, identity: bool) -> CovarianceField:
    if identity:
        return CovarianceField.identity(cloud.n, cloud.d)
    return covariance_field(cloud, NeighborhoodSpec(tau=tau, k=k))


def enum_choice(enum_cls):
    return click.Choice([member.value for member in enum_cls], case_sensitive=False)


# ------------------------------------------------------------------------------
# Command group
# ------------------------------------------------------------------------------
@click.group()
@click.version_option(__version__, prog_name="flowtopo")
@click.option("--log-level", default=None, help="Log level (default: FLOWTOPO_LOG_LEVEL)")
def cli(log_level: Optional[str]):
    """Flow-aware topological analysis of recurrent time series."""
    configure_logging(log_level)


# ------------------------------------------------------------------------------
# generate
# ------------------------------------------------------------------------------
@cli.command()
@click.argument("kind", type=click.Choice(["hamiltonian", "chirp"], case_sensitive=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--snr-db", type=float, default=math.inf, show_default=True, help="inf means no noise")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--n", "n_samples", type=int, default=None, help="Chirp samples")
@click.option("--t-max", type=float, default=None, help="Chirp duration (s)")
@click.option("--f-start", type=float, default=None)
@click.option("--f-end", type=float, default=None)
@click.option("--total-time", type=float, default=None, help="Hamiltonian horizon T (s)")
@click.option("--step", type=float, default=None, help="Hamiltonian step h (s)")
@click.option("--skip", type=int, default=None, help="Leading Hamiltonian states to drop")
@handle_errors
def generate(kind, out_path, snr_db, seed, n_samples, t_max, f_start, f_end, total_time, step, skip):
    """Write a synthetic dataset as t,x0..x{d-1}[,phase]."""
    extra = {}
    if kind.lower() == "chirp":
        overrides = {"n": n_samples, "t_max": t_max, "f_start": f_start, "f_end": f_end}
        params = ChirpParams(**{k: v for k, v in overrides.items() if v is not None})
        cloud, phase = generate_chirp(params)
        extra["phase"] = phase
    else:
        overrides = {"total_time": total_time, "step": step, "skip": skip}
        cloud = generate_hamiltonian(HamiltonianParams(**{k: v for k, v in overrides.items() if v is not None}))

    cloud = add_noise(cloud, NoiseSpec.from_db(snr_db, seed=seed))
    csv_io.write_cloud(out_path, cloud, extra)
    emit({
        "command": "generate",
        "kind": kind.lower(),
        "path": str(out_path),
        "rows": cloud.n,
        "columns": csv_io.cloud_header(cloud.d, list(extra)),
        "snr_db": snr_db,
        "seed": seed,
    })


# ------------------------------------------------------------------------------
# ingest
# ------------------------------------------------------------------------------
@cli.command()
@cloud_input
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Write the selected cloud back out as t,x0..")
@handle_errors
def ingest(source, columns, time_column, segment, stride, rate, out_path):
    """Load a CSV time series and report n, d and dt."""
    cloud, extras = load_cloud(source, columns, time_column, segment, stride, rate)
    if out_path:
        csv_io.write_cloud(out_path, cloud, extras)
    emit({"command": "ingest", "path": str(source), "n": cloud.n, "d": cloud.d, "dt": cloud.dt, "t0": cloud.t0})


# ------------------------------------------------------------------------------
# persistence
# ------------------------------------------------------------------------------
@cli.command()
@cloud_input
@click.option("--filtration", "kind", type=enum_choice(FiltrationKind), default="ellipsoid", show_default=True)
@neighborhood_options
@click.option("--cap", type=float, default=None, help="Edge cap (eps_max / r_max); automatic when omitted")
@click.option("--p", "fermat_p", type=float, default=2.0, show_default=True, help="Fermat path exponent")
@click.option("--fermat-knn", type=int, default=None, help="Sparsify Fermat paths to a k-NN graph")
@click.option("--rel-tol", type=float, default=None, help="Relative tolerance of edge birth scales")
@click.option("--diagram-out", required=True, type=click.Path(dir_okay=False))
@click.option("--edges-out", default=None, type=click.Path(dir_okay=False))
@handle_errors
def persistence(source, columns, time_column, segment, stride, rate, kind, tau, k, identity_covariance,
                cap, fermat_p, fermat_knn, rel_tol, diagram_out, edges_out):
    """Build a filtration, export its diagram and report the dominant H1 schedule."""
    cloud, _ = load_cloud(source, columns, time_column, segment, stride, rate)
    kind = FiltrationKind(kind.lower())
    field = build_field(cloud, tau, k, identity_covariance) if kind == FiltrationKind.ELLIPSOID else None
    fermat = FermatParams(p=fermat_p, knn=fermat_knn) if kind == FiltrationKind.FERMAT else None

    selection = select_scale(cloud, kind, field=field, fermat=fermat, cap=cap, rel_tol=rel_tol, required=False)
    csv_io.write_diagram(diagram_out, selection.diagram)
    if edges_out:
        csv_io.write_edges(edges_out, selection.filtration)

    payload = {
        "command": "persistence",
        "filtration": kind.value,
        "cap": selection.cap,
        "edges": selection.filtration.n_edges,
        "triangles": selection.filtration.n_triangles,
        "h0_pairs": len(selection.diagram.pairs_in(0)),
        "h1_pairs": len(selection.diagram.pairs_in(1)),
        "dominant": None,
        "schedule": None,
    }
    if selection.dominant is not None:
        b, d, l = selection.dominant.as_tuple()
        payload["dominant"] = {"birth": b, "death": d, "lifetime": l}
        payload["schedule"] = list(selection.schedule.scales)
    emit(payload)


# ------------------------------------------------------------------------------
# denoise
# ------------------------------------------------------------------------------
@cli.command()
@cloud_input
@click.option("--filter", "filters", multiple=True, type=enum_choice(FilterKind),
              help="Filter to run (repeatable; default: all five)")
@click.option("--window", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--knn-k", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--radius", type=float, default=None, help="Spherical radius (automatic from H1 when omitted)")
@click.option("--eps", type=float, default=None, help="Ellipsoid scale (automatic from H1 when omitted)")
@click.option("--scale-anchor", default="death", show_default=True, help="death or schedule:0..3")
@click.option("--aggregator", type=click.Choice(["mean", "geometric-median", "geometric_median"]), default="mean",
              show_default=True)
@click.option("--neighborhood-mode", "mode", type=enum_choice(NeighborhoodMode), default="containment",
              show_default=True)
@neighborhood_options
@click.option("--clean", "clean_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Clean reference cloud; enables RMSE")
@click.option("--snr-db", type=float, default=math.inf, help="SNR label for RMSE rows")
@click.option("--seed", type=click.IntRange(min=0), default=0, help="Seed label for RMSE rows")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--rmse-out", default=None, type=click.Path(dir_okay=False))
@handle_errors
def denoise(source, columns, time_column, segment, stride, rate, filters, window, knn_k, radius, eps,
            scale_anchor, aggregator, mode, tau, k, identity_covariance, clean_path, snr_db, seed,
            out_dir, rmse_out):
    """Run denoising filters and write one filtered cloud per filter."""
    cloud, _ = load_cloud(source, columns, time_column, segment, stride, rate)
    clean = None
    if clean_path:
        clean, _ = load_cloud(clean_path, columns, time_column, segment, stride, rate)
    anchor = ScaleAnchor.parse(scale_anchor)
    kinds = [FilterKind(f.lower()) for f in filters] or list(FilterKind)
    neighborhood = NeighborhoodSpec(tau=tau, k=k)
    field = CovarianceField.identity(cloud.n, cloud.d) if identity_covariance else None

    out_dir = Path(out_dir)
    rows: List[SweepRow] = []
    for kind in kinds:
        spec = FilterSpec(kind=kind, window=window, k=knn_k, radius=radius, eps=eps,
                          aggregator=Aggregator(aggregator.replace("-", "_")), mode=mode)
        denoised, resolved = denoise_with_selection(cloud, spec, neighborhood, anchor, field)
        path = csv_io.write_cloud(out_dir / f"{resolved.label}.csv", denoised)
        payload = {"command": "denoise", "filter": resolved.label, "path": str(path), "scale": resolved.scale}
        if clean is not None:
            report = rmse(clean, denoised, snr_db=snr_db, seed=seed)
            payload["rmse"] = report.per_axis
            rows += [
                SweepRow(snr_db=snr_db, seed=seed, filter=resolved.label, axis=a, rmse=value)
                for a, value in enumerate(report.per_axis)
            ]
        emit(payload)

    if clean is not None:
        csv_io.write_sweep(rmse_out or out_dir / "rmse.csv", rows)


# ------------------------------------------------------------------------------
# recurrence
# ------------------------------------------------------------------------------
@cli.command()
@cloud_input
@click.option("--neighborhood", "kind", type=enum_choice(RecurrenceKind), default="ellipsoidal", show_default=True)
@click.option("--scale", "scales", multiple=True, type=float,
              help="Neighborhood scale (repeatable); the four H1 schedule scales when omitted")
@click.option("--tau-min", type=click.IntRange(min=1), default=None, help="Minimum return delay (samples)")
@click.option("--rule", type=enum_choice(ReturnRule), default="strict", show_default=True)
@click.option("--truth-column", default="phase", show_default=True,
              help="Unwrapped phase column used as ground truth when present")
@click.option("--tol-samples", type=click.IntRange(min=0), default=None)
@click.option("--cap", type=float, default=None, help="Edge cap for the automatic schedule")
@neighborhood_options
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@handle_errors
def recurrence(source, columns, time_column, segment, stride, rate, kind, scales, tau_min, rule, truth_column,
               tol_samples, cap, tau, k, identity_covariance, out_dir):
    """First-return tables for each requested (or scheduled) scale."""
    cfg = get_settings()
    cloud, extras = csv_io.ingest(
        source,
        columns=split_names(columns),
        time_column=time_column,
        segment=tuple(segment) if segment else None,
        stride=stride,
        rate=rate,
        extra_columns=(truth_column,),
    )
    kind = RecurrenceKind(kind.lower())
    rule = ReturnRule(rule.lower())
    tau_min = cfg.TAU_MIN if tau_min is None else tau_min
    tol = cfg.RECURRENCE_TOL_SAMPLES if tol_samples is None else tol_samples
    field = build_field(cloud, tau, k, identity_covariance) if kind == RecurrenceKind.ELLIPSOIDAL else None

    scale_list = list(scales)
    if not scale_list:
        filtration = FiltrationKind.ELLIPSOID if kind == RecurrenceKind.ELLIPSOIDAL else FiltrationKind.VIETORIS_RIPS
        selection = select_scale(cloud, filtration, field=field, cap=cap)
        scale_list = [filter_scale(s, filtration) for s in selection.schedule.scales]
        logger.info("Recurrence scales from the H1 schedule: %s", ", ".join(f"{s:.6g}" for s in scale_list))

    truth = None
    if truth_column in extras:
        truth = ground_truth_returns(extras[truth_column])
    else:
        logger.warning("No %r column; writing detections without scores", truth_column)

    out_dir = Path(out_dir)
    for index, scale in enumerate(scale_list):
        table = first_returns(cloud, RecurrenceNeighborhood(kind=kind, scale=scale), tau_min, field, rule)
        path = csv_io.write_recurrence(out_dir / f"recurrence_{kind.value}_{index}.csv", table, truth, tol)
        payload = {
            "command": "recurrence",
            "neighborhood": kind.value,
            "index": index,
            "scale": scale,
            "tau_min": tau_min,
            "detected": table.detected,
            "path": str(path),
            "score": None,
        }
        if truth is not None:
            payload["score"] = score_returns(table, truth, tol).model_dump()
        emit(payload)


# ------------------------------------------------------------------------------
# sweep
# ------------------------------------------------------------------------------
@cli.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, help="KEY=VALUE override of a config entry (repeatable)")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads (default: FLOWTOPO_THREADS)")
@click.pass_context
@handle_errors
def sweep(ctx, config_path, out_path, overrides, threads):
    """RMSE-versus-SNR sweep; cells already present in OUT are not recomputed."""
    pairs = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--set")
        pairs[key.strip()] = value.strip()
    config = SweepConfig.from_file(config_path, pairs)

    existing: List[SweepRow] = []
    if Path(out_path).exists():
        existing = csv_io.read_sweep(out_path)
        logger.info("Resuming from %d rows in %s", len(existing), out_path)

    result = SweepRunner(config, threads).run({row.key for row in existing})
    csv_io.write_sweep(out_path, existing + result.rows)
    emit({
        "command": "sweep",
        "path": str(out_path),
        "rows": len(existing) + len(result.rows),
        "new_rows": len(result.rows),
        "skipped_cells": result.skipped,
        "missing_cells": len({r.key for r in result.rows if r.rmse is None}),
        "failed_cells": [{"key": list(f.key), "message": f.message} for f in result.failures],
    })
    if not result.ok:
        ctx.exit(SWEEP_PARTIAL_FAILURE)


if __name__ == "__main__":
    cli()
