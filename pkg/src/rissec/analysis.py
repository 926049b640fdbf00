"""Analytical statistics of the reflected secrecy link.

Builds the closed-form statistical model of the end-to-end channel and
evaluates ergodic rates:

* a mixture-of-Gammas approximation of the Gamma-Gamma turbulence law,
  fitted by Gauss-Laguerre quadrature;
* the combined turbulence-plus-pointing amplitude density;
* characteristic functions and equivalent-channel statistics of the
  residual phase errors under both error regimes, giving a Nakagami
  approximation for the legitimate combining amplitude and a Rayleigh law
  for the eavesdropper's;
* closed-form densities of the full cascade amplitudes (a four-term
  hypergeometric expansion per mixture component) with a conditioning
  guard: whenever catastrophic cancellation is detected, evaluation falls
  back transparently to a direct convolution-integral oracle;
* ergodic rate and ergodic secrecy rate by adaptive Gauss-Kronrod
  quadrature with certified tail truncation.

The phase-estimation-error pieces use a truncated-Gaussian surrogate for
the von Mises law exactly as stated by the underlying model, so the
resulting densities carry its (small) normalization deficit; Monte Carlo
cross-checks in the test suite quantify the bias.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaincc, gammainccinv, gammaincinv, gammaln

from . import specfun
from .channel import (
    QUANTIZATION_ONLY,
    QUANTIZED_ESTIMATE,
    PhaseErrorModel,
    PointingModel,
    SystemConfig,
    pointing_pdf,
)

__all__ = [
    "MixtureGammaApprox",
    "EquivalentChannelStats",
    "EsrReport",
    "QuadratureError",
    "mixture_gamma_fit",
    "mixture_turbulence_pdf",
    "combined_fading_pdf",
    "phase_charfun",
    "total_phase_error_pdf",
    "theta_sre_pdf",
    "equivalent_stats",
    "pdf_r_u",
    "pdf_r_e",
    "pdf_H_u",
    "pdf_H_e",
    "pdf_H_oracle",
    "ergodic_rates",
    "adaptive_quadrature",
]

_TWO_PI = 2.0 * math.pi

# thresholds for the closed-form conditioning guard
_CANCEL_RATIO = 1e8
_SHAPE_GATE = 30.0
_ARG_GATE = 5e3


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach tolerance.

    Carries the best available partial result in ``partial`` and its
    estimated error in ``error_estimate``.
    """

    def __init__(self, message: str, partial: float, error_estimate: float):
        super().__init__(message)
        self.partial = partial
        self.error_estimate = error_estimate


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod quadrature (7-15 pair, vectorized panel refinement)

_K15_NODES = np.array([
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993944, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0, 0.2077849550078985, 0.4058451513773972,
    0.5860872354676911, 0.7415311855993944, 0.8648644233597691,
    0.9491079123427585, 0.9914553711208126,
])
_K15_WEIGHTS = np.array([
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278, 0.2044329400752989,
    0.1903505780647854, 0.1690047266392679, 0.1406532597155259,
    0.1047900103222502, 0.0630920926299786, 0.0229353220105292,
])
# 7-point Gauss weights, aligned with the odd-index Kronrod nodes
_G7_WEIGHTS = np.array([
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697,
])


def _eval_panels(f, lo, hi):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _K15_NODES[None, :]
    y = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    kron = (y * _K15_WEIGHTS).sum(axis=1) * half
    gauss = (y[:, 1::2] * _G7_WEIGHTS).sum(axis=1) * half
    return kron, np.abs(kron - gauss)


def adaptive_quadrature(
    f,
    a: float,
    b: float,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-8,
    max_panels: int = 4000,
) -> tuple[float, float, int]:
    """Integrate a vectorized callable over [a, b] by panel bisection.

    A Gauss-Kronrod 7-15 pair supplies per-panel error estimates; panels
    carrying more than their share of the budget are bisected, all new
    panels evaluated in one batched call.  Returns ``(integral,
    error_estimate, panel_count)``; raises QuadratureError (with the
    partial result attached) if ``max_panels`` is exhausted.
    """
    if not b > a:
        raise ValueError("integration interval must have b > a")
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    vals, errs = _eval_panels(f, lo, hi)
    while True:
        total = float(vals.sum())
        tot_err = float(errs.sum())
        tol = max(abs_tol, rel_tol * abs(total))
        if tot_err <= tol:
            return total, tot_err, len(vals)
        if len(vals) >= max_panels:
            raise QuadratureError(
                f"quadrature not converged with {len(vals)} panels: "
                f"estimated error {tot_err:.3e} > tolerance {tol:.3e}",
                partial=total,
                error_estimate=tot_err,
            )
        split = errs > tol / (2.0 * len(vals))
        if not split.any():
            split = errs >= errs.max()
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_vals, new_errs = _eval_panels(f, new_lo, new_hi)
        lo = np.concatenate([lo[~split], new_lo])
        hi = np.concatenate([hi[~split], new_hi])
        vals = np.concatenate([vals[~split], new_vals])
        errs = np.concatenate([errs[~split], new_errs])


# ---------------------------------------------------------------------------
# mixture-of-Gammas turbulence approximation


@dataclass(frozen=True)
class MixtureGammaApprox:
    """Gamma-mixture approximation of the turbulence amplitude law.

    The implied density is ``sum_i mixing[i] * t^(alpha-1) *
    exp(-rates[i] * t)``; the mixing coefficients are normalized so the
    density integrates to one.  ``raw_weights``, ``nodes`` and ``weights``
    retain the Gauss-Laguerre construction for inspection.
    """

    order: int
    mixing: np.ndarray
    rates: np.ndarray
    raw_weights: np.ndarray
    alpha: float
    beta: float
    nodes: np.ndarray
    weights: np.ndarray


def mixture_gamma_fit(alpha: float, beta: float, order: int = 30) -> MixtureGammaApprox:
    """Fit a Gamma mixture to the Gamma-Gamma law by Laguerre quadrature."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("shape parameters must be positive")
    rule = specfun.gauss_laguerre(order)
    c = rule.nodes
    g = rule.weights
    ga = specfun.gamma_fn(alpha)
    gb = specfun.gamma_fn(beta)
    raw = (alpha * beta) ** alpha * g * c ** (-alpha + beta - 1.0) / (ga * gb)
    rates = alpha * beta / c
    norm = float((raw * ga * rates ** (-alpha)).sum())
    return MixtureGammaApprox(
        order=order,
        mixing=raw / norm,
        rates=rates,
        raw_weights=raw,
        alpha=alpha,
        beta=beta,
        nodes=c,
        weights=g,
    )


def mixture_turbulence_pdf(t, approx: MixtureGammaApprox):
    """Mixture-form turbulence density at gain value(s) t > 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("turbulence gain must be positive")
    out = np.zeros_like(t)
    for ai, xii in zip(approx.mixing, approx.rates):
        out += ai * np.exp(-xii * t)
    out *= t ** (approx.alpha - 1.0)
    return out if out.shape else float(out)


def combined_fading_pdf(h, approx: MixtureGammaApprox, pointing: PointingModel):
    """Density of the turbulence-times-pointing amplitude product.

    Termwise upper-incomplete-gamma expression over the mixture
    components.  Supported on h > 0 (raises for h <= 0); the pointing
    factor caps the product at A times the turbulence tail.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("amplitude must be positive")
    a_max = pointing.collected_fraction
    r2 = pointing.ratio**2
    out = np.zeros_like(h)
    for ai, xii in zip(approx.mixing, approx.rates):
        out += (
            ai
            * xii ** (r2 - approx.alpha)
            * specfun.upper_incomplete_gamma(approx.alpha - r2, xii * h / a_max)
        )
    out *= r2 / a_max**r2 * h ** (r2 - 1.0)
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# phase-error characteristic functions and densities


def _quantization_charfun(bits: float, p: int) -> float:
    if bits == math.inf:
        return 1.0
    return 2.0**bits * math.sin(p * math.pi / 2.0**bits) / (p * math.pi)


def phase_charfun(model: PhaseErrorModel, p: int) -> float:
    """p-th cosine moment of the residual per-element phase error.

    Quantization-only mode has the closed sinc form.  In the combined
    quantization-plus-estimation mode the moment is integrated against
    the erf-smoothed convolution density (absolute tolerance 1e-10);
    that density inherits the truncated-Gaussian surrogate of the von
    Mises law, so the value carries the surrogate's small bias.
    """
    if not (isinstance(p, (int, np.integer)) and p >= 1):
        raise ValueError("moment order p must be a positive integer")
    if model.mode == QUANTIZATION_ONLY:
        return _quantization_charfun(model.bits, p)
    kappa = model.concentration
    sq = math.sqrt(kappa / 2.0)
    # erf transitions have width ~1/sq; hand quadpack explicit breakpoints
    # bracketing each shoulder so sharp (large kappa) cases are resolved
    shoulder = 10.0 / sq

    def _breaks(centers, lo, hi):
        pts = sorted(
            x
            for x0 in centers
            for x in (x0 - shoulder, x0, x0 + shoulder)
            if lo < x < hi
        )
        return pts or None

    if model.bits == math.inf:
        dens = lambda e: math.sqrt(kappa / _TWO_PI) * math.exp(-0.5 * kappa * e * e)
        val, _ = integrate.quad(
            lambda e: math.cos(p * e) * dens(e),
            -math.pi,
            math.pi,
            epsabs=1e-10,
            epsrel=1e-11,
            limit=400,
            points=_breaks([0.0], -math.pi, math.pi),
        )
        return val
    d = math.pi / 2.0**model.bits
    c = 2.0 ** (model.bits - 2.0) / math.pi
    erf_pi = float(specfun.erf(sq * math.pi))

    def piece1(e):
        return math.cos(p * e) * c * (erf_pi + float(specfun.erf(sq * (d + e))))

    def piece2(e):
        return (
            math.cos(p * e)
            * c
            * (float(specfun.erf(sq * (d + e))) - float(specfun.erf(sq * (e - d))))
        )

    def piece3(e):
        return math.cos(p * e) * c * (erf_pi - float(specfun.erf(sq * (e - d))))

    v1, _ = integrate.quad(piece1, -math.pi - d, -math.pi + d,
                           epsabs=1e-10, epsrel=1e-11, limit=400,
                           points=_breaks([-d], -math.pi - d, -math.pi + d))
    v2, _ = integrate.quad(piece2, -math.pi + d, math.pi - d,
                           epsabs=1e-10, epsrel=1e-11, limit=400,
                           points=_breaks([-d, 0.0, d], -math.pi + d, math.pi - d))
    v3, _ = integrate.quad(piece3, math.pi - d, math.pi + d,
                           epsabs=1e-10, epsrel=1e-11, limit=400,
                           points=_breaks([d], math.pi - d, math.pi + d))
    return v1 + v2 + v3


def total_phase_error_pdf(e, model: PhaseErrorModel):
    """Density of quantization-plus-estimation phase error (estimation mode).

    Three-piece erf-smoothed convolution supported on
    ``[-pi - pi/2^b, pi + pi/2^b)``.  It integrates to
    ``erf(sqrt(kappa/2)*pi)`` rather than exactly one, inheriting the
    truncated-Gaussian surrogate.  Raises in quantization-only mode (the
    quantization error alone is plain uniform).
    """
    if model.mode != QUANTIZED_ESTIMATE:
        raise ValueError("total_phase_error_pdf requires the estimation mode")
    e = np.asarray(e, dtype=float)
    kappa = model.concentration
    sq = math.sqrt(kappa / 2.0)
    if model.bits == math.inf:
        out = np.where(
            (e >= -math.pi) & (e < math.pi),
            math.sqrt(kappa / _TWO_PI) * np.exp(-0.5 * kappa * e * e),
            0.0,
        )
        return out if out.shape else float(out)
    d = math.pi / 2.0**model.bits
    c = 2.0 ** (model.bits - 2.0) / math.pi
    erf_pi = float(specfun.erf(sq * math.pi))
    left = (e >= -math.pi - d) & (e < -math.pi + d)
    mid = (e >= -math.pi + d) & (e < math.pi - d)
    right = (e >= math.pi - d) & (e < math.pi + d)
    out = np.zeros_like(e)
    out[left] = c * (erf_pi + specfun.erf(sq * (d + e[left])))
    out[mid] = c * (
        specfun.erf(sq * (d + e[mid])) - specfun.erf(sq * (e[mid] - d))
    )
    out[right] = c * (erf_pi - specfun.erf(sq * (e[right] - d)))
    return out if out.shape else float(out)


def theta_sre_pdf(theta, model: PhaseErrorModel):
    """Density of the eavesdropper's total reflected-path phase offset.

    In quantization-only mode this is the trapezoid obtained by smearing
    a full-turn uniform phase with the quantization error: flat at
    ``1/(2*pi)`` on the middle segment with linear ramps of half-width
    ``pi/2^b`` at both ends.  In estimation mode it is the erf-smoothed
    variant supported on ``[-pi, 3*pi)``, independent of the bit depth
    (the model neglects the quantization smear there).
    """
    theta = np.asarray(theta, dtype=float)
    if model.mode == QUANTIZATION_ONLY:
        d = math.pi / 2.0**model.bits if model.bits != math.inf else 0.0
        flat = 1.0 / _TWO_PI
        if d == 0.0:
            out = np.where((theta >= 0.0) & (theta < _TWO_PI), flat, 0.0)
            return out if out.shape else float(out)
        up = (theta >= -d) & (theta < d)
        mid = (theta >= d) & (theta < _TWO_PI - d)
        down = (theta >= _TWO_PI - d) & (theta < _TWO_PI + d)
        out = np.zeros_like(theta)
        out[up] = (theta[up] + d) / (4.0 * math.pi * d)
        out[mid] = flat
        out[down] = (_TWO_PI + d - theta[down]) / (4.0 * math.pi * d)
        return out if out.shape else float(out)
    kappa = model.concentration
    sq = math.sqrt(kappa / 2.0)
    erf_pi = float(specfun.erf(sq * math.pi))
    lower = (theta >= -math.pi) & (theta < math.pi)
    upper = (theta >= math.pi) & (theta < 3.0 * math.pi)
    out = np.zeros_like(theta)
    out[lower] = (erf_pi + specfun.erf(sq * theta[lower])) / (4.0 * math.pi)
    out[upper] = (erf_pi + specfun.erf(sq * (_TWO_PI - theta[upper]))) / (4.0 * math.pi)
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# equivalent-channel statistics


@dataclass(frozen=True)
class EquivalentChannelStats:
    """First and second moments of the element-combined channel factors.

    The legitimate path's combining amplitude (per-element average of the
    residual-error phasors) is approximated Nakagami with shape
    ``nakagami_m`` and spread ``nakagami_spread``; the eavesdropper's
    combining amplitude (un-normalized element sum) is Rayleigh with
    per-component variance ``eav_var``.  ``correlation`` between the
    in-phase and quadrature parts is identically zero and kept only so
    the property can be asserted.
    """

    element_count: int
    mode: str
    char_fn_1: float
    char_fn_2: float
    mean_c: float
    mean_s: float
    var_c: float
    var_s: float
    nakagami_m: float
    nakagami_spread: float
    eav_var: float
    correlation: float = 0.0


def equivalent_stats(n: int, model: PhaseErrorModel) -> EquivalentChannelStats:
    """Moments, Nakagami fit and Rayleigh variance for n elements.

    With continuous phase control (``bits=inf``) in quantization-only
    mode the trusted amplitude degenerates to the constant 1, reported as
    ``nakagami_m = inf`` with unit spread.
    """
    if not n >= 1:
        raise ValueError("element count must be >= 1")
    p1 = phase_charfun(model, 1)
    p2 = phase_charfun(model, 2)
    mean_c = p1
    var_c = (1.0 + p2 - 2.0 * p1 * p1) / (2.0 * n)
    var_s = (1.0 - p2) / (2.0 * n)
    if var_c <= 0.0:
        m = math.inf
    else:
        m = mean_c * mean_c / (4.0 * var_c)
    spread = mean_c * mean_c
    if model.mode == QUANTIZED_ESTIMATE:
        eav = 0.5 * n * float(specfun.erf(math.sqrt(model.concentration / 2.0) * math.pi))
    else:
        eav = 0.5 * n
    return EquivalentChannelStats(
        element_count=n,
        mode=model.mode,
        char_fn_1=p1,
        char_fn_2=p2,
        mean_c=mean_c,
        mean_s=0.0,
        var_c=var_c,
        var_s=var_s,
        nakagami_m=m,
        nakagami_spread=spread,
        eav_var=eav,
    )


def _nakagami_pdf(r, m: float, spread: float):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("amplitude must be non-negative")
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    # log-space evaluation keeps large shapes (m ~ 100) inside float range
    log_f = (
        math.log(2.0)
        + m * math.log(m / spread)
        - gammaln(m)
        + (2.0 * m - 1.0) * np.log(rp)
        - m * rp * rp / spread
    )
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(log_f)
    return out


def pdf_r_u(r, stats: EquivalentChannelStats):
    """Nakagami density of the legitimate combining amplitude."""
    if not math.isfinite(stats.nakagami_m):
        raise ValueError("degenerate amplitude (infinite shape) has no density")
    out = _nakagami_pdf(r, stats.nakagami_m, stats.nakagami_spread)
    return out if out.shape else float(out)


def pdf_r_e(r, stats: EquivalentChannelStats):
    """Rayleigh density of the eavesdropper combining amplitude."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("amplitude must be non-negative")
    s2 = stats.eav_var
    out = r / s2 * np.exp(-r * r / (2.0 * s2))
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# cascade amplitude densities


def _near_nonpositive_integer(x: float, tol: float = 1e-10) -> bool:
    xr = round(x)
    return xr <= 0 and abs(x - xr) < tol


def _regularized_shape_params(alpha: float, ratio_sq: float, m: float):
    """Nudge parameters off measure-zero pole configurations.

    The four-term expansion divides by ``ratio_sq - 2m``, ``alpha -
    ratio_sq`` and ``1 + alpha - ratio_sq`` and evaluates Gamma and
    hypergeometric factors whose arguments must avoid non-positive
    integers; a relative perturbation of 1e-9 (warned) moves the
    parameters off such coincidences without visible effect on the
    density.
    """
    for attempt in range(4):
        gamma_args = (
            alpha - ratio_sq,
            alpha - 2.0 * m,
            m - ratio_sq / 2.0,
            m - alpha / 2.0,
            m - (1.0 + alpha) / 2.0,
            (1.0 - alpha) / 2.0 + m,
            1.0 - alpha / 2.0 + m,
            1.0 + m - ratio_sq / 2.0,
            (2.0 + alpha) / 2.0 - m,
            (2.0 + alpha - ratio_sq) / 2.0,
            (3.0 + alpha) / 2.0 - m,
            (3.0 + alpha - ratio_sq) / 2.0,
        )
        divisors = (ratio_sq - 2.0 * m, alpha - ratio_sq, 1.0 + alpha - ratio_sq)
        degenerate = any(_near_nonpositive_integer(x) for x in gamma_args) or any(
            abs(x) < 1e-12 for x in divisors
        )
        if not degenerate:
            return ratio_sq, m
        warnings.warn(
            "shape parameters sit on a pole of the closed-form expansion; "
            "perturbing by 1e-9 relative",
            RuntimeWarning,
            stacklevel=3,
        )
        ratio_sq *= 1.0 + 1e-9
        m *= 1.0 + 1e-9
    raise ValueError("could not move shape parameters off a pole configuration")


def _closed_cascade_pdf(z, approx, pointing, m, spread):
    """Four-term closed form; returns (values, cancellation flags)."""
    alpha = approx.alpha
    a_max = pointing.collected_fraction
    r2, m = _regularized_shape_params(alpha, pointing.ratio**2, m)

    vals = np.full(z.shape, np.nan)
    flags = np.ones(z.shape, dtype=bool)
    xi_max = float(approx.rates.max())
    # a-priori conditioning gate: very large Nakagami shapes or huge
    # hypergeometric arguments are hopeless in double precision
    viable = np.abs(xi_max**2 * m * z**2 / (4.0 * a_max**2 * spread)) <= _ARG_GATE
    if m > _SHAPE_GATE:
        viable &= False
    idx = np.nonzero(viable)[0]
    if idx.size == 0:
        return vals, flags

    g = specfun.gamma_fn
    g_av = g(alpha - r2)
    g_a2m = g(alpha - 2.0 * m)
    g_m_v = g(m - r2 / 2.0)
    g_m_a = g(m - alpha / 2.0)
    g_m_a1 = g(m - (1.0 + alpha) / 2.0)
    pref = (r2 / a_max**r2) * (2.0 * m**m / (g(m) * spread**m))

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for j in idx:
            zj = float(z[j])
            zz = zj * zj
            base = spread / (m * zz)
            total = 0.0
            flagged = False
            for ai, xii in zip(approx.mixing, approx.rates):
                arg = -(xii * xii) * m * zz / (4.0 * a_max * a_max * spread)
                t1 = 0.5 * base ** (m - r2 / 2.0) * g_av * g_m_v
                h2 = specfun.hyp1f3(
                    m - r2 / 2.0,
                    (1.0 - alpha) / 2.0 + m,
                    1.0 - alpha / 2.0 + m,
                    1.0 + m - r2 / 2.0,
                    arg,
                )
                t2 = (xii / a_max) ** (2.0 * m - r2) * g_a2m * h2.value / (r2 - 2.0 * m)
                h3 = specfun.hyp1f3(
                    (alpha - r2) / 2.0,
                    0.5,
                    (2.0 + alpha) / 2.0 - m,
                    (2.0 + alpha - r2) / 2.0,
                    arg,
                )
                t3 = (
                    (xii / a_max) ** (alpha - r2)
                    * base ** (m - alpha / 2.0)
                    / (2.0 * (alpha - r2))
                    * g_m_a
                    * h3.value
                )
                h4 = specfun.hyp1f3(
                    (1.0 + alpha - r2) / 2.0,
                    1.5,
                    (3.0 + alpha) / 2.0 - m,
                    (3.0 + alpha - r2) / 2.0,
                    arg,
                )
                t4 = (
                    (xii / a_max) ** (1.0 + alpha - r2)
                    * base ** (m - (1.0 + alpha) / 2.0)
                    / (2.0 * (1.0 + alpha - r2))
                    * g_m_a1
                    * h4.value
                )
                four = t1 + t2 - t3 + t4
                peak = max(abs(t1), abs(t2), abs(t3), abs(t4))
                if peak > _CANCEL_RATIO * abs(four):
                    flagged = True
                flagged = flagged or h2.cancellation or h3.cancellation or h4.cancellation
                total += ai * xii ** (r2 - alpha) * four
            value = pref * zj ** (2.0 * m - 1.0) * total
            if not math.isfinite(value) or value < 0:
                flagged = True
            vals[j] = value
            flags[j] = flagged
    return vals, flags


_LEGENDRE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _legendre_rule(order: int):
    if order not in _LEGENDRE_CACHE:
        _LEGENDRE_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _LEGENDRE_CACHE[order]


def pdf_H_oracle(
    z,
    approx: MixtureGammaApprox | None,
    pointing: PointingModel,
    stats: EquivalentChannelStats,
    which: str = "u",
    order: int = 240,
):
    """Cascade amplitude density by direct convolution quadrature.

    Integrates ``f_amplitude(r)/r * f_fading(z/r)`` over the combining
    amplitude's quantile range with a fixed high-order Gauss-Legendre
    rule (relative accuracy well below 1e-8 for these smooth unimodal
    integrands).  ``approx=None`` selects the no-turbulence case where
    the fading factor is the pointing fraction alone; an infinite
    Nakagami shape degenerates the amplitude to 1.
    """
    if which not in ("u", "e"):
        raise ValueError("which must be 'u' or 'e'")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0):
        raise ValueError("amplitude must be positive")

    if approx is None:
        fading = lambda h: pointing_pdf(h, pointing)
    else:
        fading = lambda h: combined_fading_pdf(h, approx, pointing)

    if which == "u":
        m, spread = stats.nakagami_m, stats.nakagami_spread
    else:
        m, spread = 1.0, 2.0 * stats.eav_var

    if not math.isfinite(m):
        out = fading(z)
        return out if np.ndim(out) else np.array([out])

    tail = 1e-12
    r_lo = math.sqrt(float(gammaincinv(m, tail)) * spread / m)
    r_hi = math.sqrt(float(gammainccinv(m, tail)) * spread / m)
    x, w = _legendre_rule(order)
    half = 0.5 * (r_hi - r_lo)
    r = 0.5 * (r_hi + r_lo) + half * x
    weight = _nakagami_pdf(r, m, spread) / r * w * half

    out = np.zeros(z.shape)
    # chunk the z axis so the (z, r) grid stays modest in memory
    chunk = max(1, int(2e6 // r.size))
    for start in range(0, z.size, chunk):
        zs = z[start : start + chunk]
        h = zs[:, None] / r[None, :]
        out[start : start + chunk] = fading(h) @ weight
    return out


def _cascade_pdf(z, approx, pointing, stats, which, with_flags):
    z_in = np.asarray(z, dtype=float)
    z1 = np.atleast_1d(z_in)
    if np.any(z1 <= 0):
        raise ValueError("amplitude must be positive")
    if which == "u":
        m, spread = stats.nakagami_m, stats.nakagami_spread
    else:
        m, spread = 1.0, 2.0 * stats.eav_var
    if not math.isfinite(m):
        raise ValueError(
            "degenerate amplitude (infinite shape): use pdf_H_oracle, which "
            "handles the point-mass limit"
        )
    vals, flags = _closed_cascade_pdf(z1, approx, pointing, m, spread)
    if flags.any():
        vals[flags] = pdf_H_oracle(
            z1[flags], approx, pointing, stats, which=which
        )
    if z_in.ndim == 0:
        return (float(vals[0]), bool(flags[0])) if with_flags else float(vals[0])
    return (vals, flags) if with_flags else vals


def pdf_H_u(z, approx, pointing, stats, with_flags: bool = False):
    """Density of the legitimate cascade amplitude (turbulence x pointing
    x combining amplitude).

    Evaluates the four-term closed form per mixture component; wherever
    the cancellation guard trips (detected in-series, across the four
    terms, or by the a-priori conditioning gate) the value is replaced by
    the convolution oracle.  ``with_flags=True`` additionally returns the
    per-point fallback indicator.
    """
    return _cascade_pdf(z, approx, pointing, stats, "u", with_flags)


def pdf_H_e(z, approx, pointing, stats, with_flags: bool = False):
    """Density of the eavesdropper cascade amplitude.

    Same expansion with the Rayleigh amplitude expressed as the unit
    Nakagami shape whose spread is twice the per-component variance.
    """
    return _cascade_pdf(z, approx, pointing, stats, "e", with_flags)


# ---------------------------------------------------------------------------
# ergodic rates


@dataclass(frozen=True)
class EsrReport:
    """Ergodic rates, their difference, and integration diagnostics."""

    ergodic_rate_u: float
    ergodic_rate_e: float
    esr: float
    truncation_u: float
    truncation_e: float
    quad_error_u: float
    quad_error_e: float
    panels_u: int
    panels_e: int


def _mixture_survival(t: float, approx: MixtureGammaApprox) -> float:
    ga = specfun.gamma_fn(approx.alpha)
    comp = (
        approx.mixing
        * ga
        * approx.rates ** (-approx.alpha)
        * gammaincc(approx.alpha, approx.rates * t)
    )
    return float(comp.sum())


def _turbulence_quantile(approx: MixtureGammaApprox | None, tail: float) -> float:
    if approx is None:
        return 1.0
    hi = 1.0
    for _ in range(80):
        if _mixture_survival(hi, approx) < tail:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _mixture_survival(mid, approx) < tail:
            hi = mid
        else:
            lo = mid
    return hi


def _amplitude_quantile(m: float, spread: float, tail: float) -> float:
    if not math.isfinite(m):
        return 1.0
    return math.sqrt(float(gammainccinv(m, tail)) * spread / m)


def ergodic_rates(
    config: SystemConfig,
    mixture_order: int = 30,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-8,
    max_panels: int = 4000,
) -> EsrReport:
    """Ergodic rates of both receivers and the ergodic secrecy rate.

    Each rate is the expectation of ``log2(1 + snr)`` over the cascade
    amplitude density, integrated adaptively on ``[0, z_max]`` where
    ``z_max`` bounds the neglected tail mass below 1e-8 (split evenly
    between the turbulence and combining-amplitude tails; the pointing
    fraction is bounded).  The secrecy rate clips the rate difference at
    zero after averaging each side.
    """
    n = config.element_count
    stats = equivalent_stats(n, config.phase_error)

    def side(which):
        turb = config.turbulence_u if which == "u" else config.turbulence_e
        pointing = config.pointing_u if which == "u" else config.pointing_e
        approx = (
            None
            if turb.is_degenerate
            else mixture_gamma_fit(turb.alpha, turb.beta, mixture_order)
        )
        if which == "u":
            m, spread = stats.nakagami_m, stats.nakagami_spread
            snr_gain = config.snr_scale_u * n * n
        else:
            m, spread = 1.0, 2.0 * stats.eav_var
            snr_gain = config.snr_scale_e
        z_max = (
            pointing.collected_fraction
            * _turbulence_quantile(approx, 5e-9)
            * _amplitude_quantile(m, spread, 5e-9)
        )
        if approx is None and not math.isfinite(m):
            density = lambda zz: pointing_pdf(zz, pointing)
        elif approx is None or not math.isfinite(m):
            density = lambda zz: pdf_H_oracle(zz, approx, pointing, stats, which=which)
        elif which == "u":
            density = lambda zz: pdf_H_u(zz, approx, pointing, stats)
        else:
            density = lambda zz: pdf_H_e(zz, approx, pointing, stats)

        def integrand(zz):
            return np.log2(1.0 + snr_gain * zz * zz) * density(zz)

        rate, err, panels = adaptive_quadrature(
            integrand, 0.0, z_max, abs_tol=abs_tol, rel_tol=rel_tol,
            max_panels=max_panels,
        )
        return rate, err, panels, z_max

    rate_u, err_u, panels_u, zmax_u = side("u")
    rate_e, err_e, panels_e, zmax_e = side("e")
    return EsrReport(
        ergodic_rate_u=rate_u,
        ergodic_rate_e=rate_e,
        esr=max(rate_u - rate_e, 0.0),
        truncation_u=zmax_u,
        truncation_e=zmax_e,
        quad_error_u=err_u,
        quad_error_e=err_e,
        panels_u=panels_u,
        panels_e=panels_e,
    )
