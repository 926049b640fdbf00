"""Seeded Monte Carlo estimation of secrecy rates and channel statistics.

Ground-truth companion to the analytical module: every trial draws a full
channel realization from counter-based per-trial substreams, applies a
phase policy, and scores the two receivers' rates.  Estimates are
bit-exact reproducible for a fixed master seed regardless of how many
workers share the trials, because trials are split into fixed-size
chunks whose partial results are reduced in index order.

Three phase policies are supported: the quantized-compensation baseline
(each element rounds the sum of its incident and trusted forward phase to
the control grid), a fixed phase vector, and a per-trial callable for
optimizer-in-the-loop evaluation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelRealization,
    SystemConfig,
    received_snrs,
    sample_realization,
    trial_rng,
)

__all__ = [
    "BASELINE",
    "QUANTITIES",
    "McEstimate",
    "EmpiricalDistribution",
    "baseline_phases",
    "mc_esr",
    "mc_mean_instantaneous_sr",
    "empirical_distribution",
    "ks_statistic",
    "ks_against_density",
]

_TWO_PI = 2.0 * math.pi

BASELINE = "baseline"

# per-trial chunk length; fixed so the reduction tree never depends on the
# worker count
_CHUNK = 256

QUANTITIES = ("r_u", "r_e", "H_u", "H_e", "T", "P", "eps_hat", "theta_sre")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo point estimate with its sampling error."""

    mean: float
    standard_error: float
    trial_count: int
    master_seed: int


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sampled per-trial (or per-element) values of one channel quantity."""

    quantity: str
    values: np.ndarray
    counts: np.ndarray
    bin_edges: np.ndarray
    ks_statistic: float | None
    trial_count: int
    master_seed: int


def baseline_phases(config: SystemConfig, realization: ChannelRealization) -> np.ndarray:
    """Quantized compensation of the trusted cascaded phases.

    Each element targets the common beamforming direction plus its own
    incident and trusted forward phase; finite-resolution control rounds
    the target to the nearest grid point, which is what introduces the
    quantization error.
    """
    target = (
        config.common_direction
        + realization.incident_phases
        + realization.forward_phases_u
    )
    step = config.phase_error.grid_step
    if step == 0.0:
        return target
    return np.round(target / step) * step


def _resolve_policy(phase_policy):
    if isinstance(phase_policy, str):
        if phase_policy != BASELINE:
            raise ValueError(f"unknown phase policy {phase_policy!r}")
        return lambda config, realization, rng: baseline_phases(config, realization)
    if isinstance(phase_policy, np.ndarray):
        fixed = np.asarray(phase_policy, dtype=float)
        return lambda config, realization, rng: fixed
    if callable(phase_policy):
        return phase_policy
    raise ValueError("phase policy must be the baseline token, an array, or a callable")


def _chunk_bounds(trials: int):
    return [(lo, min(lo + _CHUNK, trials)) for lo in range(0, trials, _CHUNK)]


def _run_chunks(trials, workers, worker_fn):
    bounds = _chunk_bounds(trials)
    if workers <= 1:
        return [worker_fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker_fn, lo, hi) for lo, hi in bounds]
        return [f.result() for f in futures]


def _rate_arrays(config, policy, trials, seed, workers):
    def chunk_rates(lo, hi):
        ru = np.empty(hi - lo)
        re = np.empty(hi - lo)
        for i, t in enumerate(range(lo, hi)):
            rng = trial_rng(seed, t)
            realization = sample_realization(config, rng)
            phases = policy(config, realization, rng)
            snr_u, snr_e = received_snrs(config, realization, phases)
            ru[i] = math.log2(1.0 + snr_u)
            re[i] = math.log2(1.0 + snr_e)
        return ru, re

    parts = _run_chunks(trials, workers, chunk_rates)
    ru = np.concatenate([p[0] for p in parts])
    re = np.concatenate([p[1] for p in parts])
    return ru, re


def _check_trials(trials):
    if not (isinstance(trials, (int, np.integer)) and trials >= 1):
        raise ValueError("trials must be an integer >= 1")


def mc_esr(
    config: SystemConfig,
    phase_policy=BASELINE,
    trials: int = 10000,
    seed: int = 0,
    workers: int = 1,
) -> McEstimate:
    """Ergodic secrecy rate estimate: rates averaged, then clipped once.

    The estimator mirrors the analytical definition: the two receivers'
    ergodic rates are averaged separately over trials and the difference
    is clipped at zero at the end.  The reported standard error is the
    sample standard deviation of the per-trial rate difference divided by
    sqrt(trials).
    """
    _check_trials(trials)
    policy = _resolve_policy(phase_policy)
    ru, re = _rate_arrays(config, policy, trials, seed, workers)
    diff = ru - re
    se = float(diff.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(
        mean=max(float(ru.mean()) - float(re.mean()), 0.0),
        standard_error=se,
        trial_count=trials,
        master_seed=seed,
    )


def mc_mean_instantaneous_sr(
    config: SystemConfig,
    phase_policy=BASELINE,
    trials: int = 10000,
    seed: int = 0,
    workers: int = 1,
) -> McEstimate:
    """Mean of the per-trial clipped secrecy rate.

    Distinct from the ergodic secrecy rate: clipping happens inside the
    average, which is the statistic the per-realization optimizer curves
    report.
    """
    _check_trials(trials)
    policy = _resolve_policy(phase_policy)
    ru, re = _rate_arrays(config, policy, trials, seed, workers)
    inst = np.maximum(ru - re, 0.0)
    se = float(inst.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(
        mean=float(inst.mean()),
        standard_error=se,
        trial_count=trials,
        master_seed=seed,
    )


def ks_statistic(cdf_values) -> float:
    """Two-sided Kolmogorov-Smirnov statistic from CDF-transformed samples."""
    s = np.sort(np.asarray(cdf_values, dtype=float))
    n = s.size
    if n == 0:
        raise ValueError("need at least one sample")
    hi = np.abs(s - np.arange(1, n + 1) / n).max()
    lo = np.abs(s - np.arange(n) / n).max()
    return float(max(hi, lo))


def ks_against_density(values, density, grid_points: int = 4001) -> float:
    """KS statistic of samples against a density callable.

    The density is integrated numerically on a grid spanning the sample
    range and normalized to its own total mass, so densities that
    deliberately integrate to slightly less than one (truncation
    deficits) are compared by shape.  Positive-support samples get a
    geometric grid: several of the amplitude densities have an
    integrable power-law divergence at zero that a uniform grid would
    integrate badly.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if lo > 0:
        grid = np.geomspace(lo, hi, grid_points)
    else:
        grid = np.linspace(lo, hi, grid_points)
    pdf = np.asarray(density(grid), dtype=float)
    cdf = np.concatenate(
        [[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))]
    )
    if cdf[-1] <= 0:
        raise ValueError("density integrates to zero on the sample range")
    cdf /= cdf[-1]
    return ks_statistic(np.interp(values, grid, cdf))


def _trial_quantity(config, realization, quantity):
    r = realization
    if quantity == "T":
        return r.turbulence_u
    if quantity == "P":
        return r.pointing_u
    if quantity == "eps_hat":
        return r.quantization_errors + r.estimation_errors_u
    if quantity == "theta_sre":
        raw = (
            (r.forward_phases_e - r.forward_phases_u) % _TWO_PI
            + r.quantization_errors
            + r.estimation_errors_e
        )
        return ((raw + math.pi) % (4.0 * math.pi)) - math.pi
    if quantity == "r_u":
        resid = r.quantization_errors + r.estimation_errors_u
        return np.abs(np.exp(1j * resid).mean())
    # remaining quantities build on the received element sums under the
    # baseline policy
    phases = baseline_phases(config, r)
    if quantity == "r_e":
        total = phases - r.incident_phases - r.forward_phases_e + r.estimation_errors_e
        return np.abs(np.exp(1j * total).sum())
    if quantity == "H_u":
        resid = phases - r.incident_phases - r.forward_phases_u + r.estimation_errors_u
        return r.turbulence_u * r.pointing_u * np.abs(np.exp(1j * resid).mean())
    if quantity == "H_e":
        total = phases - r.incident_phases - r.forward_phases_e + r.estimation_errors_e
        return r.turbulence_e * r.pointing_e * np.abs(np.exp(1j * total).sum())
    raise ValueError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")


def empirical_distribution(
    quantity: str,
    config: SystemConfig,
    trials: int = 10000,
    seed: int = 0,
    density=None,
    bins: int = 64,
    workers: int = 1,
) -> EmpiricalDistribution:
    """Sample one channel quantity across trials and summarize it.

    Scalar quantities give one value per trial; per-element quantities
    (``eps_hat``, ``theta_sre``) contribute one value per element per
    trial, concatenated in trial order.  When a ``density`` callable is
    supplied, its numeric CDF is compared to the samples with a
    two-sided KS statistic.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")
    _check_trials(trials)

    def chunk_values(lo, hi):
        out = []
        for t in range(lo, hi):
            rng = trial_rng(seed, t)
            realization = sample_realization(config, rng)
            out.append(np.atleast_1d(_trial_quantity(config, realization, quantity)))
        return np.concatenate(out)

    parts = _run_chunks(trials, workers, chunk_values)
    values = np.concatenate(parts)
    counts, edges = np.histogram(values, bins=bins)
    ks = ks_against_density(values, density) if density is not None else None
    return EmpiricalDistribution(
        quantity=quantity,
        values=values,
        counts=counts,
        bin_edges=edges,
        ks_statistic=ks,
        trial_count=trials,
        master_seed=seed,
    )
