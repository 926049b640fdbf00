"""Link budget and stochastic channel sampling for the two-hop secrecy link.

A satellite transmits through a reflecting surface with ``N`` phase-tunable
elements toward a legitimate aerial receiver, while an eavesdropping aerial
platform observes the same reflection.  This module owns everything about
one coherence interval:

* deterministic link parameters: free-space path loss, scintillation shape
  parameters of the Gamma-Gamma turbulence law, and the collected-fraction
  geometry of the pointing-error model;
* the stochastic samplers for turbulence gain, pointing gain, line-of-sight
  phases, phase quantization error, and von Mises phase estimation error;
* the closed-form received SNRs given a vector of applied phase shifts.

Transmitted symbols and receiver noise are never sampled; SNR is evaluated
in closed form from the sampled channel state.

Two phase-error regimes are supported.  In ``quantization-only`` mode the
only phase impairment is rounding the intended shift to a ``2^b``-point
grid.  In ``quantization+estimation`` mode each applied shift additionally
carries a von Mises phase-estimation error, drawn independently for the
path to the legitimate receiver and the path to the eavesdropper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun

__all__ = [
    "QUANTIZATION_ONLY",
    "QUANTIZED_ESTIMATE",
    "LinkGeometry",
    "TurbulenceModel",
    "PointingModel",
    "PhaseErrorModel",
    "SystemConfig",
    "ChannelRealization",
    "path_loss",
    "rytov_variance",
    "scintillation_params",
    "sample_turbulence",
    "turbulence_pdf",
    "pointing_params",
    "pointing_pdf",
    "sample_pointing",
    "sample_quantization_error",
    "sample_von_mises",
    "sample_realization",
    "received_snrs",
    "trial_rng",
    "default_config",
]

QUANTIZATION_ONLY = "quantization-only"
QUANTIZED_ESTIMATE = "quantization+estimation"

_TWO_PI = 2.0 * math.pi


def _require_positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not (value > 0) or not math.isfinite(value):
            raise ValueError(f"{name} must be positive and finite, got {value}")


# ---------------------------------------------------------------------------
# deterministic link parameters


def path_loss(geometry: "LinkGeometry") -> float:
    """Free-space power gain G*(lambda/(4*pi*d))^2 of one hop."""
    return geometry.antenna_gain * (
        geometry.wavelength / (4.0 * math.pi * geometry.distance)
    ) ** 2


@dataclass(frozen=True)
class LinkGeometry:
    """One hop of the link: carrier wavelength, distance, antenna gain.

    All quantities are linear (gain is dimensionless, not dB).  The
    free-space path loss is derived on construction.
    """

    wavelength: float
    distance: float
    antenna_gain: float
    loss: float = field(init=False)

    def __post_init__(self):
        _require_positive(
            wavelength=self.wavelength,
            distance=self.distance,
            antenna_gain=self.antenna_gain,
        )
        object.__setattr__(self, "loss", path_loss(self))


def rytov_variance(wavelength: float, distance: float, cn2: float) -> float:
    """Spherical-wave scintillation strength 1.23 k^{7/6} Cn2 d^{11/6}."""
    _require_positive(wavelength=wavelength, distance=distance)
    if cn2 < 0:
        raise ValueError("cn2 must be non-negative")
    k = _TWO_PI / wavelength
    return 1.23 * k ** (7.0 / 6.0) * cn2 * distance ** (11.0 / 6.0)


def scintillation_params(
    wavelength: float, distance: float, cn2: float
) -> tuple[float, float]:
    """Gamma-Gamma shape pair (alpha, beta) for a turbulent hop.

    ``cn2 = 0`` signals the no-turbulence case and returns ``(inf, inf)``;
    callers substitute a unit turbulence gain instead of sampling.
    """
    s2 = rytov_variance(wavelength, distance, cn2)
    if s2 == 0.0:
        return math.inf, math.inf
    alpha = 1.0 / math.expm1(0.49 * s2 / (1.0 + 1.11 * s2**1.2) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * s2 / (1.0 + 0.69 * s2**1.2) ** (5.0 / 6.0))
    return alpha, beta


@dataclass(frozen=True)
class TurbulenceModel:
    """Gamma-Gamma turbulence state of one hop.

    ``cn2 == 0`` marks the degenerate no-turbulence hop (gain fixed at 1);
    in that case ``alpha`` and ``beta`` are ``inf`` and must not be passed
    to the samplers.
    """

    cn2: float
    rytov: float
    alpha: float
    beta: float

    def __post_init__(self):
        if self.cn2 < 0:
            raise ValueError("cn2 must be non-negative")
        if self.cn2 > 0:
            _require_positive(alpha=self.alpha, beta=self.beta)

    @classmethod
    def from_link(
        cls, wavelength: float, distance: float, cn2: float
    ) -> "TurbulenceModel":
        s2 = rytov_variance(wavelength, distance, cn2)
        alpha, beta = scintillation_params(wavelength, distance, cn2)
        return cls(cn2=cn2, rytov=s2, alpha=alpha, beta=beta)

    @property
    def is_degenerate(self) -> bool:
        return self.cn2 == 0.0


def sample_turbulence(alpha: float, beta: float, rng, size=None):
    """Draw unit-mean Gamma-Gamma turbulence gain(s) T = X*Y.

    X ~ Gamma(shape alpha, scale 1/alpha) and Y ~ Gamma(shape beta,
    scale 1/beta) are independent, so E[T] = 1.
    """
    _require_positive(alpha=alpha, beta=beta)
    x = rng.gamma(alpha, 1.0 / alpha, size=size)
    y = rng.gamma(beta, 1.0 / beta, size=size)
    return x * y


def turbulence_pdf(t, alpha: float, beta: float):
    """Normalized Gamma-Gamma density of the turbulence gain.

    2 (ab)^{(a+b)/2} / (G(a)G(b)) * t^{(a+b)/2 - 1} * K_{a-b}(2 sqrt(ab t)).
    Raises for t <= 0 (the gain is strictly positive).
    """
    _require_positive(alpha=alpha, beta=beta)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("turbulence gain must be positive")
    half = 0.5 * (alpha + beta)
    lead = (
        2.0
        * (alpha * beta) ** half
        / (specfun.gamma_fn(alpha) * specfun.gamma_fn(beta))
    )
    out = lead * t ** (half - 1.0) * specfun.bessel_k(
        alpha - beta, 2.0 * np.sqrt(alpha * beta * t)
    )
    return out if out.shape else float(out)


def pointing_params(
    aperture_radius: float, beam_waist: float, jitter_std: float
) -> "PointingModel":
    """Derive the pointing-error geometry of one receiving aperture.

    ``aperture_radius`` is the effective receive aperture radius,
    ``beam_waist`` the beam footprint radius at the receiver plane, and
    ``jitter_std`` the per-axis standard deviation of the radial beam
    displacement.
    """
    _require_positive(
        aperture_radius=aperture_radius,
        beam_waist=beam_waist,
        jitter_std=jitter_std,
    )
    v = math.sqrt(math.pi) * aperture_radius / (math.sqrt(2.0) * beam_waist)
    erf_v = float(specfun.erf(v))
    collected = erf_v**2
    weq2 = beam_waist**2 * math.sqrt(math.pi) * erf_v / (2.0 * v * math.exp(-v * v))
    weq = math.sqrt(weq2)
    return PointingModel(
        aperture_radius=aperture_radius,
        beam_waist=beam_waist,
        jitter_std=jitter_std,
        collected_fraction=collected,
        equivalent_beam_width=weq,
        ratio=weq / (2.0 * jitter_std),
    )


@dataclass(frozen=True)
class PointingModel:
    """Pointing-error geometry of one receiving aperture.

    ``collected_fraction`` is the maximum collectable power fraction at
    zero displacement, ``equivalent_beam_width`` the Gaussian-equivalent
    beam width, and ``ratio`` the beam-width-to-jitter ratio that shapes
    the power-law density of the collected fraction.
    """

    aperture_radius: float
    beam_waist: float
    jitter_std: float
    collected_fraction: float
    equivalent_beam_width: float
    ratio: float

    def __post_init__(self):
        _require_positive(
            aperture_radius=self.aperture_radius,
            beam_waist=self.beam_waist,
            jitter_std=self.jitter_std,
            ratio=self.ratio,
        )
        if not 0.0 < self.collected_fraction < 1.0:
            raise ValueError("collected_fraction must lie in (0, 1)")


def pointing_pdf(p, model: PointingModel):
    """Power-law density of the collected power fraction on [0, A].

    f(p) = (r^2 / A^{r^2}) p^{r^2 - 1} with A the maximum collected
    fraction and r the beam-width-to-jitter ratio.  Zero outside [0, A].
    """
    p = np.asarray(p, dtype=float)
    a = model.collected_fraction
    r2 = model.ratio**2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            (p > 0) & (p <= a), r2 / a**r2 * p ** (r2 - 1.0), 0.0
        )
    return out if out.shape else float(out)


def sample_pointing(model: PointingModel, rng, size=None):
    """Inverse-CDF draw of the collected power fraction: A * U^{1/r^2}."""
    u = rng.uniform(0.0, 1.0, size=size)
    return model.collected_fraction * u ** (1.0 / model.ratio**2)


@dataclass(frozen=True)
class PhaseErrorModel:
    """Phase impairment model of the reflecting elements.

    ``bits`` is the phase-shift resolution (each element realizes
    ``2^bits`` levels); ``math.inf`` means continuous phase control.
    In ``quantization+estimation`` mode every applied shift also suffers
    a zero-mean von Mises estimation error with the given concentration.
    """

    bits: float
    mode: str = QUANTIZATION_ONLY
    concentration: float | None = None

    def __post_init__(self):
        if self.mode not in (QUANTIZATION_ONLY, QUANTIZED_ESTIMATE):
            raise ValueError(f"unknown phase-error mode {self.mode!r}")
        b = self.bits
        if not (b == math.inf or (float(b).is_integer() and b >= 1)):
            raise ValueError("bits must be a positive integer or inf")
        if self.mode == QUANTIZED_ESTIMATE:
            if self.concentration is None or not (self.concentration > 0):
                raise ValueError(
                    "quantization+estimation mode requires concentration > 0"
                )

    @property
    def grid_step(self) -> float:
        """Spacing 2*pi/2^bits of the realizable phase grid (0 if continuous)."""
        return 0.0 if self.bits == math.inf else _TWO_PI / 2.0**self.bits


def sample_quantization_error(bits: float, rng, size=None):
    """Uniform quantization error on [-pi/2^b, pi/2^b); zero for bits=inf."""
    if bits == math.inf:
        return 0.0 if size is None else np.zeros(size)
    if not (float(bits).is_integer() and bits >= 1):
        raise ValueError("bits must be a positive integer or inf")
    half = math.pi / 2.0**bits
    return rng.uniform(-half, half, size=size)


def sample_von_mises(concentration: float, rng, size=None):
    """Exact zero-mean von Mises draw(s) on [-pi, pi)."""
    _require_positive(concentration=concentration)
    v = rng.vonmises(0.0, concentration, size=size)
    # numpy may return the closed endpoint +pi; wrap to the half-open interval
    return np.where(v >= math.pi, v - _TWO_PI, v) if np.ndim(v) else (
        v - _TWO_PI if v >= math.pi else v
    )


@dataclass(frozen=True)
class SystemConfig:
    """Full static description of the satellite-surface-receiver system.

    ``transmit_snr`` is the linear transmit-power-to-noise ratio before
    path loss; both receivers are assumed to have equal noise power.
    ``snr_scale_u``/``snr_scale_e`` are the per-path SNR scale factors
    (transmit SNR times both hop losses) that multiply the squared channel
    amplitude in the received-SNR expressions.
    """

    element_count: int
    transmit_snr: float
    geometry_s: LinkGeometry
    geometry_u: LinkGeometry
    geometry_e: LinkGeometry
    turbulence_u: TurbulenceModel
    turbulence_e: TurbulenceModel
    pointing_u: PointingModel
    pointing_e: PointingModel
    phase_error: PhaseErrorModel
    common_direction: float = 0.0
    snr_scale_u: float = field(init=False)
    snr_scale_e: float = field(init=False)

    def __post_init__(self):
        if not (isinstance(self.element_count, (int, np.integer)) and self.element_count >= 1):
            raise ValueError("element_count must be an integer >= 1")
        # zero is allowed: a powered-off transmitter is a valid (degenerate)
        # operating point with identically zero received SNR
        if not (np.isfinite(self.transmit_snr) and self.transmit_snr >= 0.0):
            raise ValueError("transmit_snr must be finite and >= 0")
        su = self.transmit_snr * self.geometry_s.loss * self.geometry_u.loss
        se = self.transmit_snr * self.geometry_s.loss * self.geometry_e.loss
        object.__setattr__(self, "snr_scale_u", su)
        object.__setattr__(self, "snr_scale_e", se)


@dataclass(frozen=True)
class ChannelRealization:
    """Sampled channel state of one coherence interval.

    Phase vectors have length ``element_count``; turbulence and pointing
    gains are per-path scalars.  In quantization-only mode both estimation
    error vectors are identically zero.
    """

    incident_phases: np.ndarray
    forward_phases_u: np.ndarray
    forward_phases_e: np.ndarray
    turbulence_u: float
    turbulence_e: float
    pointing_u: float
    pointing_e: float
    quantization_errors: np.ndarray
    estimation_errors_u: np.ndarray
    estimation_errors_e: np.ndarray


def sample_realization(config: SystemConfig, rng) -> ChannelRealization:
    """Draw one coherence interval of channel state.

    Draw order is fixed (incident phases, forward phases to each receiver,
    turbulence gains, pointing gains, quantization errors, estimation
    errors) so a given generator state always yields the same realization.
    """
    n = config.element_count
    incident = rng.uniform(0.0, _TWO_PI, size=n)
    fwd_u = rng.uniform(0.0, _TWO_PI, size=n)
    fwd_e = rng.uniform(0.0, _TWO_PI, size=n)

    tu = config.turbulence_u
    te = config.turbulence_e
    t_u = 1.0 if tu.is_degenerate else float(sample_turbulence(tu.alpha, tu.beta, rng))
    t_e = 1.0 if te.is_degenerate else float(sample_turbulence(te.alpha, te.beta, rng))
    p_u = float(sample_pointing(config.pointing_u, rng))
    p_e = float(sample_pointing(config.pointing_e, rng))

    pe = config.phase_error
    eps = np.asarray(sample_quantization_error(pe.bits, rng, size=n), dtype=float)
    if pe.mode == QUANTIZED_ESTIMATE:
        nu_u = np.asarray(sample_von_mises(pe.concentration, rng, size=n), dtype=float)
        nu_e = np.asarray(sample_von_mises(pe.concentration, rng, size=n), dtype=float)
    else:
        nu_u = np.zeros(n)
        nu_e = np.zeros(n)

    return ChannelRealization(
        incident_phases=incident,
        forward_phases_u=fwd_u,
        forward_phases_e=fwd_e,
        turbulence_u=t_u,
        turbulence_e=t_e,
        pointing_u=p_u,
        pointing_e=p_e,
        quantization_errors=eps,
        estimation_errors_u=nu_u,
        estimation_errors_e=nu_e,
    )


def received_snrs(
    config: SystemConfig, realization: ChannelRealization, phase_shifts
) -> tuple[float, float]:
    """Instantaneous received SNRs at both receivers for applied shifts.

    ``phase_shifts`` is the length-N vector of phases actually applied by
    the surface.  The estimation errors stored in the realization enter
    the element sums here (they perturb whatever the caller applies); the
    quantization errors do not, because they are a property of how the
    caller chose the shifts, not of the propagation.
    """
    ups = np.asarray(phase_shifts, dtype=float)
    n = config.element_count
    if ups.shape != (n,):
        raise ValueError(f"phase_shifts must have shape ({n},), got {ups.shape}")
    r = realization
    sum_u = np.exp(
        1j * (ups - r.incident_phases - r.forward_phases_u + r.estimation_errors_u)
    ).sum()
    sum_e = np.exp(
        1j * (ups - r.incident_phases - r.forward_phases_e + r.estimation_errors_e)
    ).sum()
    snr_u = config.snr_scale_u * (r.turbulence_u * r.pointing_u) ** 2 * abs(sum_u) ** 2
    snr_e = config.snr_scale_e * (r.turbulence_e * r.pointing_e) ** 2 * abs(sum_e) ** 2
    return float(snr_u), float(snr_e)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based generator for one trial of a Monte Carlo run.

    Keyed by (master seed, trial index), so any subset of trials can be
    generated independently, in any order, on any number of workers, and
    reproduce bit-identical draws.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    key = np.array(
        [master_seed % (1 << 64), trial_index % (1 << 64)], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def default_config(
    element_count: int,
    transmit_snr_db: float = 260.0,
    *,
    bits: float = 1,
    mode: str = QUANTIZATION_ONLY,
    concentration: float | None = None,
    sigma_j_u: float = 0.1,
    sigma_j_e: float = 0.2,
    w_over_l: float = 6.0,
    cn2: float = 1e-13,
    wavelength: float = 500e-6,
    distance_s: float = 150e3,
    distance_u: float = 19e3,
    distance_e: float = 20e3,
    gain_s_dbi: float = 69.0,
    gain_u_dbi: float = 55.0,
    gain_e_dbi: float = 55.0,
) -> SystemConfig:
    """Assemble a SystemConfig for the reference scenario.

    Defaults describe the baseline evaluation scenario: a 500 um carrier,
    a satellite hop of 150 km with 69 dBi gain, receiver hops of 19/20 km
    with 55 dBi gain, moderate turbulence, and a beam-waist-to-aperture
    ratio of 6.  Gains are given in dBi; ``transmit_snr_db`` is the
    pre-path-loss transmit-power-to-noise ratio in dB.
    """
    geom_s = LinkGeometry(wavelength, distance_s, 10.0 ** (gain_s_dbi / 10.0))
    geom_u = LinkGeometry(wavelength, distance_u, 10.0 ** (gain_u_dbi / 10.0))
    geom_e = LinkGeometry(wavelength, distance_e, 10.0 ** (gain_e_dbi / 10.0))
    turb_u = TurbulenceModel.from_link(wavelength, distance_u, cn2)
    turb_e = TurbulenceModel.from_link(wavelength, distance_e, cn2)
    # receive aperture radius from the receiver antenna gain
    radius_u = wavelength * math.sqrt(geom_u.antenna_gain) / (2.0 * math.pi)
    radius_e = wavelength * math.sqrt(geom_e.antenna_gain) / (2.0 * math.pi)
    point_u = pointing_params(radius_u, w_over_l * radius_u, sigma_j_u)
    point_e = pointing_params(radius_e, w_over_l * radius_e, sigma_j_e)
    phase = PhaseErrorModel(bits=bits, mode=mode, concentration=concentration)
    return SystemConfig(
        element_count=element_count,
        transmit_snr=10.0 ** (transmit_snr_db / 10.0),
        geometry_s=geom_s,
        geometry_u=geom_u,
        geometry_e=geom_e,
        turbulence_u=turb_u,
        turbulence_e=turb_e,
        pointing_u=point_u,
        pointing_e=point_e,
        phase_error=phase,
    )
