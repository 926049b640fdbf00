"""Secrecy-rate laboratory for a THz RIS-assisted satellite-HAP-UAV downlink.

The package simulates, analytically evaluates, and optimizes the secrecy
rate of a link in which a satellite transmits to a trusted aerial receiver
through a reflecting surface carried by a high-altitude platform, while an
untrusted receiver eavesdrops. Channel impairments covered: Gamma-Gamma
atmosphere turbulence, beam pointing error, and reflecting-element phase
errors (finite phase resolution and imperfect channel estimation).

Modules
-------
specfun     special functions and Gauss-Laguerre quadrature
linalg      dense complex Hermitian helpers for the cone solver
channel     link parameters, stochastic sampling, received SNRs
analysis    mixture-Gamma fit, equivalent statistics, densities, ergodic rates
montecarlo  seeded Monte Carlo estimators and distribution checks
optimize    phase-shift optimization (statistical and perfect CSI)
cli         experiment runner producing CSV sweeps
"""

__version__ = "0.1.0"

__all__ = [
    "specfun",
    "linalg",
    "channel",
    "analysis",
    "montecarlo",
    "optimize",
    "cli",
]
