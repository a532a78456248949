# flowtopo/operations/signal_model.py
"""
Module: signal_model.py

Synthetic recurrent signals and the noise model:

- generate_hamiltonian: Stormer-Verlet trajectory of a perturbed double well.
- generate_chirp: 1 -> 10 Hz chirp with a notch in y that pinches the orbit.
- add_noise: axis-wise Gaussian noise with variance P_axis / SNR.

All functions are pure; randomness comes from numpy's PCG64 bit generator so
a given seed reproduces the same noise on every platform.
"""

import logging
import math
from typing import Tuple

import numpy as np

from flowtopo.core.exceptions import DivergenceError, InvalidSpecError
from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.schemas.signal import ChirpParams, HamiltonianParams, NoiseSpec

logger = logging.getLogger(__name__)


def hamiltonian_force(q: float, params: HamiltonianParams) -> float:
    """F(q) = -(q^r - q - eps * omega * sin(omega * q)); F(0) = 0."""
    w = params.omega
    return -(q ** params.r_exp - q - params.eps_pert * w * math.sin(w * q))


def stormer_verlet_step(q: float, p: float, h: float, params: HamiltonianParams) -> Tuple[float, float]:
    """One leapfrog step; applying it with -h undoes a step with +h."""
    p_half = p + 0.5 * h * hamiltonian_force(q, params)
    q_next = q + h * p_half
    p_next = p_half + 0.5 * h * hamiltonian_force(q_next, params)
    return q_next, p_next


def generate_hamiltonian(params: HamiltonianParams) -> TimeSeriesPointCloud:
    """
    Integrate the perturbed double well and return the (q, p) trajectory.

    Returns floor(T/h) + 1 states (minus `skip` leading ones). The first state is
    exactly (q0, p0).

    Raises:
    - DivergenceError: if a state becomes non-finite; `step` names the index.
    """
    n = params.n_states
    states = np.empty((n, 2))
    q, p = float(params.q0), float(params.p0)
    states[0] = q, p
    for k in range(1, n):
        try:
            q, p = stormer_verlet_step(q, p, params.step, params)
        except OverflowError as e:
            raise DivergenceError(k) from e
        if not (math.isfinite(q) and math.isfinite(p)):
            raise DivergenceError(k)
        states[k] = q, p
    if params.skip >= n:
        raise InvalidSpecError(f"skip={params.skip} drops all {n} states")
    logger.debug("Integrated %d Hamiltonian states (skip=%d)", n, params.skip)
    return TimeSeriesPointCloud(
        points=states[params.skip:],
        dt=params.step,
        t0=params.skip * params.step,
    )


def chirp_frequency(t, params: ChirpParams):
    """Instantaneous frequency f(t) in Hz."""
    return params.f_start + (params.f_end - params.f_start) / params.t_max * np.asarray(t)


def chirp_phase(t, params: ChirpParams):
    """Exact integral phi(t) = 2 pi (f_start t + (f_end - f_start) t^2 / (2 t_max))."""
    t = np.asarray(t, dtype=float)
    sweep = (params.f_end - params.f_start) / (2.0 * params.t_max)
    return 2.0 * np.pi * (params.f_start * t + sweep * t * t)


def notch(x, params: ChirpParams):
    """S(x) = 1 - depth * exp(-(x / ref)^2 / 2); deepest (1 - depth) at x = 0."""
    u = np.asarray(x, dtype=float) / params.width_ref
    return 1.0 - params.notch_depth * np.exp(-0.5 * u * u)


def generate_chirp(params: ChirpParams) -> Tuple[TimeSeriesPointCloud, np.ndarray]:
    """
    Sample the chirp on n uniform times in [0, t_max].

    Returns the (x, y) cloud and the analytic phase phi(t_i).
    """
    t = np.linspace(0.0, params.t_max, params.n)
    phase = chirp_phase(t, params)
    x = params.amp_x * np.cos(phase)
    y = params.amp_y * np.sin(phase) * notch(x, params)
    cloud = TimeSeriesPointCloud(points=np.column_stack([x, y]), dt=t[1] - t[0], t0=0.0)
    return cloud, phase


def db_to_linear(snr_db: float) -> float:
    """Convert decibels to a power ratio; +inf dB maps to inf."""
    if math.isinf(snr_db) and snr_db > 0:
        return math.inf
    return 10.0 ** (snr_db / 10.0)


def signal_power(cloud: TimeSeriesPointCloud) -> np.ndarray:
    """Mean-square power of each axis."""
    return np.mean(cloud.points ** 2, axis=0)


def add_noise(cloud: TimeSeriesPointCloud, spec: NoiseSpec) -> TimeSeriesPointCloud:
    """
    Add independent zero-mean Gaussian noise to each axis.

    The input cloud is not modified; length, dimension, dt and t0 are kept.

    Raises:
    - InvalidSpecError: if the per-axis lists do not match the cloud dimension.
    """
    if spec.noise_variance is not None:
        variance = np.asarray(spec.noise_variance, dtype=float)
    else:
        power = signal_power(cloud) if spec.per_axis_power is None else np.asarray(spec.per_axis_power, dtype=float)
        if power.shape != (cloud.d,):
            raise InvalidSpecError(f"Expected {cloud.d} per-axis powers, got {power.size}")
        if math.isinf(spec.snr_linear):
            variance = np.zeros(cloud.d)
        else:
            variance = power / spec.snr_linear
    if variance.shape != (cloud.d,):
        raise InvalidSpecError(f"Expected {cloud.d} per-axis variances, got {variance.size}")
    if not np.any(variance > 0):
        return cloud.with_points(cloud.points)

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal(cloud.points.shape) * np.sqrt(variance)
    return cloud.with_points(cloud.points + noise)
