"""Special functions and quadrature rules used by the analytical machinery.

Everything here is scalar-or-array friendly and pure. The generalized
hypergeometric series carries an explicit cancellation flag so callers can
detect when a float64 evaluation has lost too many digits to be trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy import special as _sp

__all__ = [
    "QuadratureRule",
    "Hyp1f3Result",
    "gamma_fn",
    "upper_incomplete_gamma",
    "bessel_k",
    "bessel_i0",
    "erf",
    "hyp1f3",
    "gauss_laguerre",
]

# Cancellation threshold: flag when the largest intermediate term exceeds
# this multiple of the final sum (roughly 8 of 16 float64 digits lost).
CANCELLATION_RATIO = 1e8


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Laguerre rule: integrates f against e^{-x} on [0, inf)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class Hyp1f3Result:
    """Outcome of a 1F3 series evaluation.

    value        the summed series
    cancellation True when intermediate terms dwarfed the result and the
                 float64 value may be unusable; callers should fall back
                 to an independent evaluation route
    terms        number of series terms consumed
    """

    value: float
    cancellation: bool
    terms: int


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def gamma_fn(x):
    """Gamma function for real arguments away from the poles.

    Negative non-integer arguments are supported (needed when shape
    differences turn negative); non-positive integers raise ValueError.
    """
    arr = np.asarray(x, dtype=float)
    if np.any((arr <= 0) & (arr == np.floor(arr))):
        raise ValueError("gamma function pole at non-positive integer argument")
    out = _sp.gamma(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def upper_incomplete_gamma(a: float, x):
    """Upper incomplete gamma integral for real shape a, including a <= 0.

    For a > 0 this is the regularized scipy routine rescaled. Negative
    non-integer shapes are reached by the downward recurrence
    G(a, x) = (G(a+1, x) - x^a e^{-x}) / a starting from a positive shifted
    shape, which stays accurate to ~1e-10 relative for the argument ranges
    produced by the channel parameters here. x may be an array.

    x = 0 requires a > 0 (the integral diverges otherwise).
    """
    a = float(a)
    xs = np.asarray(x, dtype=float)
    scalar = np.isscalar(x) or xs.ndim == 0
    xs = np.atleast_1d(xs).astype(float)
    if np.any(xs < 0):
        raise ValueError("upper incomplete gamma requires x >= 0")
    if np.any(xs == 0) and a <= 0:
        raise ValueError("upper incomplete gamma diverges at x = 0 for a <= 0")

    if a > 0:
        out = _sp.gammaincc(a, xs) * _sp.gamma(a)
    else:
        # shift to a positive shape, then recurse back down
        k = int(math.ceil(-a)) + 1
        with np.errstate(over="ignore"):
            g = _sp.gammaincc(a + k, xs) * _sp.gamma(a + k)
            emx = np.exp(-xs)
            for j in range(k - 1, -1, -1):
                aj = a + j
                if aj == 0.0:
                    # integer landing is excluded by construction of k
                    # unless a itself is a non-positive integer
                    g = _sp.exp1(xs)
                else:
                    g = (g - xs**aj * emx) / aj
        out = g
    return float(out[0]) if scalar else out


def bessel_k(order: float, x):
    """Modified Bessel function of the second kind, real fractional order."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("bessel_k requires x > 0")
    out = _sp.kv(order, xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def bessel_i0(x):
    """Modified Bessel function of the first kind, order zero.

    Saturates to inf (without raising) once e^{|x|} overflows float64.
    """
    xs = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = _sp.i0(xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def erf(x):
    """Error function."""
    out = _sp.erf(np.asarray(x, dtype=float))
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def hyp1f3(a: float, b1: float, b2: float, b3: float, x: float,
           rtol: float = 1e-12, max_terms: int = 10000) -> Hyp1f3Result:
    """Generalized hypergeometric series 1F3(a; b1, b2, b3; x).

    Straight power-series summation with the term-ratio recurrence
    t_{k+1} = t_k * x (a+k) / ((k+1)(b1+k)(b2+k)(b3+k)), stopping once the
    last term is below rtol times the running sum. The result carries a
    cancellation flag set when any intermediate term exceeded 1e8 times
    the final sum, meaning at least half the significand was cancelled.
    """
    for b in (b1, b2, b3):
        if _is_nonpositive_integer(b):
            raise ValueError("1F3 denominator parameter at a non-positive integer")
    x = float(x)
    term = 1.0
    total = 1.0
    max_abs = 1.0
    used = max_terms
    for k in range(max_terms):
        term *= x * (a + k) / ((k + 1.0) * (b1 + k) * (b2 + k) * (b3 + k))
        total += term
        at = abs(term)
        if at > max_abs:
            max_abs = at
        if k > 2 and at <= rtol * abs(total):
            used = k + 1
            break
    flagged = max_abs > CANCELLATION_RATIO * abs(total) if total != 0 else True
    return Hyp1f3Result(value=total, cancellation=flagged, terms=used)


def gauss_laguerre(order: int) -> QuadratureRule:
    """Gauss-Laguerre nodes and weights of the given order (1..128).

    Exact for e^{-x} p(x) with deg p <= 2*order - 1.
    """
    if not isinstance(order, (int, np.integer)) or isinstance(order, bool):
        raise ValueError("quadrature order must be an integer")
    if order < 1 or order > 128:
        raise ValueError("quadrature order must be in 1..128")
    nodes, weights = laggauss(int(order))
    return QuadratureRule(order=int(order), nodes=nodes, weights=weights)
