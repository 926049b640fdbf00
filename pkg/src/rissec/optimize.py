"""Surface phase-shift selection for the secrecy link.

Two knowledge regimes are covered.  With only statistical knowledge of
the eavesdropper channel the best move is closed form: compensate the
cascaded incident+forward phase of every element toward the trusted
receiver, then snap to the realizable grid; the figure of merit is a
secrecy-rate lower bound in which the eavesdropper combining power is
replaced by its mean.  With full knowledge of both channels the
instantaneous secrecy rate is a ratio of Hermitian quadratic forms over
unit-modulus vectors: it is lifted to a semidefinite relaxation through
the Charnes-Cooper substitution, solved by a bespoke operator-splitting
iteration on the Hermitian PSD cone, and a feasible phase vector is
recovered by principal-eigenvector extraction, a gauge sweep over the
discretization offset, and coordinate-exchange polish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import channel as ch

__all__ = [
    "SdrProblem",
    "SdpSolution",
    "PhaseSolution",
    "SolverConvergenceError",
    "statistical_csi_phases",
    "lower_bound_sr",
    "secrecy_rate",
    "build_sdr",
    "solve_sdp",
    "extract_rank_one",
    "discretize_phases",
    "random_phases",
    "optimize_statistical_csi",
    "optimize_perfect_csi",
]

_TWO_PI = 2.0 * math.pi


class SolverConvergenceError(RuntimeError):
    """The SDP iteration hit its cap before meeting the tolerance.

    The partial solution (flagged non-converged) is attached as
    ``.solution`` for diagnosis.
    """

    def __init__(self, message: str, solution: "SdpSolution"):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SdrProblem:
    """Lifted data of one perfect-CSI phase optimization instance.

    ``form_u`` and ``form_e`` are Hermitian positive definite matrices
    whose quadratic forms on unit-modulus vectors equal one plus the
    received SNR at the trusted receiver and the eavesdropper:
    ``t^H form t = 1 + snr_gain |t^H a|^2`` with ``a`` the cascaded
    phase coefficients of the path.  ``incident_diag`` is the diagonal
    matrix of incident-channel coefficients, kept for reference;
    ``snr_gain_u``/``snr_gain_e`` are the instantaneous per-path SNR
    scales (transmit SNR times both hop losses times the squared
    turbulence-pointing gain).
    """

    form_u: np.ndarray
    form_e: np.ndarray
    incident_diag: np.ndarray
    snr_gain_u: float
    snr_gain_e: float


@dataclass(frozen=True)
class SdpSolution:
    """Solution of the relaxed (lifted) problem.

    ``matrix`` maximizes ``tr(form_u @ matrix)`` over Hermitian PSD
    matrices with ``tr(form_e @ matrix) = 1`` and constant diagonal;
    ``eta`` is that common diagonal value and ``normalized`` is
    ``matrix / eta``, whose diagonal is all ones.  ``objective`` is the
    attained value, an upper bound on ``(1+snr_u)/(1+snr_e)`` over all
    unit-modulus phase vectors.  ``residuals`` is the final (primal,
    dual) pair of the splitting iteration.
    """

    matrix: np.ndarray
    eta: float
    normalized: np.ndarray
    objective: float
    residuals: tuple[float, float]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PhaseSolution:
    """Phase configuration produced by an optimization routine.

    ``continuous`` holds unit-modulus complex coefficients; applied
    phases are their arguments.  ``discretized`` is the grid-constrained
    version (``None`` when no discretization was requested).
    ``continuous_sr`` and ``instantaneous_sr`` are the single-realization
    secrecy rates achieved by the continuous and discretized vectors;
    ``lower_bound_sr`` is the statistical-eavesdropper objective of the
    discretized vector.  Rate fields are ``None`` when the routine had
    no system configuration to evaluate against.
    """

    continuous: np.ndarray
    discretized: np.ndarray | None = None
    lower_bound_sr: float | None = None
    instantaneous_sr: float | None = None
    continuous_sr: float | None = None


def _validate_bits(bits: float) -> None:
    if not (bits == math.inf or (float(bits).is_integer() and bits >= 1)):
        raise ValueError("bits must be a positive integer or inf")


def _as_unit_modulus(vec, name: str) -> np.ndarray:
    out = np.asarray(vec, dtype=complex)
    if out.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector")
    if np.any(np.abs(np.abs(out) - 1.0) > 1e-6):
        raise ValueError(f"{name} entries must have unit modulus")
    return out


# ---------------------------------------------------------------------------
# statistical-CSI regime


def statistical_csi_phases(incident_channel, forward_channel) -> PhaseSolution:
    """Closed-form compensation of the cascaded per-element phases.

    Both inputs are equal-length unit-modulus complex vectors.  The
    returned continuous coefficients carry the phase sum of the two
    hops, which makes every summand of the combined gain real positive
    and the combined amplitude exactly the element count.
    """
    hr = _as_unit_modulus(incident_channel, "incident_channel")
    hu = _as_unit_modulus(forward_channel, "forward_channel")
    if hr.shape != hu.shape:
        raise ValueError("channel vectors must have equal length")
    return PhaseSolution(continuous=np.exp(1j * (np.angle(hr) + np.angle(hu))))


def lower_bound_sr(
    config: ch.SystemConfig, realization: ch.ChannelRealization, phase_shifts
) -> float:
    """Secrecy-rate lower bound with the eavesdropper power averaged out.

    log2 of (1 + received trusted SNR) over (1 + eavesdropper SNR scale
    times element count), clipped at zero.  The numerator uses the
    actual applied phases (including any estimation errors stored in
    the realization); the denominator replaces the eavesdropper
    combining power by its mean, the element count.
    """
    snr_u, _ = ch.received_snrs(config, realization, phase_shifts)
    gain_e = (
        config.snr_scale_e * (realization.turbulence_e * realization.pointing_e) ** 2
    )
    value = math.log2((1.0 + snr_u) / (1.0 + gain_e * config.element_count))
    return max(value, 0.0)


def secrecy_rate(
    config: ch.SystemConfig, realization: ch.ChannelRealization, phase_shifts
) -> float:
    """Instantaneous secrecy rate of one realization, clipped at zero."""
    snr_u, snr_e = ch.received_snrs(config, realization, phase_shifts)
    return max(math.log2((1.0 + snr_u) / (1.0 + snr_e)), 0.0)


# ---------------------------------------------------------------------------
# perfect-CSI regime


def build_sdr(
    config: ch.SystemConfig, realization: ch.ChannelRealization
) -> SdrProblem:
    """Assemble the lifted quadratic forms of one realization.

    The identity part enters scaled by 1/N so that the quadratic form of
    any unit-modulus vector is exactly one plus the received SNR.
    """
    n = config.element_count
    a_u = np.exp(1j * (realization.incident_phases + realization.forward_phases_u))
    a_e = np.exp(1j * (realization.incident_phases + realization.forward_phases_e))
    gain_u = (
        config.snr_scale_u * (realization.turbulence_u * realization.pointing_u) ** 2
    )
    gain_e = (
        config.snr_scale_e * (realization.turbulence_e * realization.pointing_e) ** 2
    )
    eye = np.eye(n) / n
    return SdrProblem(
        form_u=eye + gain_u * np.outer(a_u, a_u.conj()),
        form_e=eye + gain_e * np.outer(a_e, a_e.conj()),
        incident_diag=np.diag(np.exp(1j * realization.incident_phases)),
        snr_gain_u=gain_u,
        snr_gain_e=gain_e,
    )


def solve_sdp(
    problem: SdrProblem, tol: float = 1e-6, max_iters: int = 50000
) -> SdpSolution:
    """Maximize tr(form_u X) over PSD X with tr(form_e X)=1, equal diagonal.

    The fractional objective over unit-modulus vectors becomes this
    linear SDP after lifting and the Charnes-Cooper normalization; the
    common diagonal value of the solution is the Charnes-Cooper scale.
    Solved by operator splitting: the iterate is alternately projected
    onto the affine constraint set (in coordinates whitened by
    ``form_e``, where the trace constraint is orthogonal to the
    diagonal-equality constraints' right-hand sides) and onto the PSD
    cone, with a scaled dual update, over-relaxation, and periodic
    penalty rebalancing.  Hitting the iteration cap returns the best
    iterate flagged non-converged instead of raising.
    """
    form_u = np.asarray(problem.form_u, dtype=complex)
    form_e = np.asarray(problem.form_e, dtype=complex)
    n = form_u.shape[0]
    if form_u.shape != (n, n) or form_e.shape != (n, n):
        raise ValueError("quadratic forms must be square matrices of equal size")
    ev_e, q_e = np.linalg.eigh(0.5 * (form_e + form_e.conj().T))
    if ev_e[0] <= 0.0:
        raise ValueError("eavesdropper form must be positive definite")
    # whitened variable X = form_e^{1/2} Phi form_e^{1/2}: the trace
    # constraint becomes tr(X) = 1 and the objective tr(target X)
    whiten = (q_e / np.sqrt(ev_e)) @ q_e.conj().T
    target = whiten @ form_u @ whiten
    target = 0.5 * (target + target.conj().T)
    step_dir = target / np.linalg.norm(target)

    # affine constraints <basis_k, X> = rhs_k: unit trace, then N-1
    # equalities pinning every diagonal entry of Phi to the first
    basis = np.empty((n, n, n), dtype=complex)
    basis[0] = np.eye(n)
    for k in range(1, n):
        m = np.outer(whiten[:, k], whiten[:, k].conj()) - np.outer(
            whiten[:, 0], whiten[:, 0].conj()
        )
        basis[k] = 0.5 * (m + m.conj().T)
    flat = basis.reshape(n, n * n)
    flat_c = flat.conj().copy()
    gram = np.real(flat_c @ flat.T)
    gram_cf = sla.cho_factor(gram)
    rhs = np.zeros(n)
    rhs[0] = 1.0

    rho = 1.0
    z = np.eye(n, dtype=complex) / n
    dual_var = np.zeros((n, n), dtype=complex)
    primal = dual = math.inf
    iterations = max_iters
    converged = False
    for it in range(max_iters):
        v = z - dual_var + step_dir / rho
        lam = sla.cho_solve(gram_cf, (flat_c @ v.ravel()).real - rhs)
        x = v - (lam @ flat).reshape(n, n)
        x_relaxed = 1.6 * x - 0.6 * z
        w = x_relaxed + dual_var
        w = 0.5 * (w + w.conj().T)
        ev, q = np.linalg.eigh(w)
        z_new = (q * np.maximum(ev, 0.0)) @ q.conj().T
        primal = float(np.linalg.norm(x - z_new))
        dual = float(rho * np.linalg.norm(z_new - z))
        dual_var = dual_var + x_relaxed - z_new
        z = z_new
        if primal < tol * max(1.0, np.linalg.norm(x)) and dual < tol * max(
            1.0, rho * np.linalg.norm(dual_var)
        ):
            iterations = it + 1
            converged = True
            break
        if (it + 1) % 25 == 0 and it < 10000:
            # rebalance the penalty while one residual dominates
            if primal > 10.0 * dual:
                rho *= 2.0
                dual_var /= 2.0
            elif dual > 10.0 * primal:
                rho /= 2.0
                dual_var *= 2.0

    trace_z = max(np.trace(z).real, 1e-300)
    phi = whiten @ (z / trace_z) @ whiten
    phi = 0.5 * (phi + phi.conj().T)
    phi = phi / np.real(np.vdot(form_e, phi))
    eta = float(np.real(phi[0, 0]))
    if not eta > 0.0:
        raise ValueError("degenerate solution matrix with non-positive diagonal")
    return SdpSolution(
        matrix=phi,
        eta=eta,
        normalized=phi / eta,
        objective=float(np.real(np.vdot(form_u, phi))),
        residuals=(primal, dual),
        iterations=iterations,
        converged=converged,
    )


def extract_rank_one(solution: SdpSolution) -> np.ndarray:
    """Feasible unit-modulus vector from the lifted solution.

    Takes the principal eigenpair of the normalized matrix (exact when
    the numerical rank is one, the best rank-one fit otherwise) and
    normalizes every entry to unit modulus so the result is always a
    realizable phase configuration.
    """
    psi = np.asarray(solution.normalized, dtype=complex)
    ev, q = np.linalg.eigh(0.5 * (psi + psi.conj().T))
    if ev[-1] <= 0.0:
        raise ValueError("degenerate solution matrix has no positive eigenvalue")
    vec = math.sqrt(ev[-1]) * q[:, -1]
    mags = np.abs(vec)
    return np.where(mags > 0.0, vec / np.where(mags > 0.0, mags, 1.0), 1.0 + 0.0j)


def discretize_phases(coefficients, bits: float) -> np.ndarray:
    """Snap unit-modulus coefficients to the nearest realizable grid phase.

    Nearest is in circular distance; exact midpoints resolve toward the
    smaller grid element.  Infinite resolution returns a copy unchanged.
    """
    t = _as_unit_modulus(coefficients, "coefficients")
    _validate_bits(bits)
    if bits == math.inf:
        return t.copy()
    levels = int(2.0**bits)
    step = _TWO_PI / levels
    phase = np.mod(np.angle(t), _TWO_PI)
    idx = np.mod(np.ceil(phase / step - 0.5), levels)
    return np.exp(1j * step * idx)


def random_phases(config: ch.SystemConfig, rng) -> np.ndarray:
    """Uniformly random realizable phase shifts (radians)."""
    n = config.element_count
    step = config.phase_error.grid_step
    if step == 0.0:
        return rng.uniform(0.0, _TWO_PI, size=n)
    levels = int(round(_TWO_PI / step))
    return rng.integers(0, levels, size=n) * step


def _quadratic_ratio(form_u, form_e, t) -> float:
    return float(
        np.real(t.conj() @ form_u @ t) / np.real(t.conj() @ form_e @ t)
    )


def _coordinate_ascent(form_u, form_e, t, alphabet, max_passes: int = 60):
    """Cycle single-element exchanges until no alphabet move improves."""
    t = t.copy()
    value = _quadratic_ratio(form_u, form_e, t)
    for _ in range(max_passes):
        changed = False
        for n in range(t.size):
            keep = t[n]
            for letter in alphabet:
                t[n] = letter
                trial = _quadratic_ratio(form_u, form_e, t)
                if trial > value * (1.0 + 1e-13):
                    value = trial
                    keep = letter
                    changed = True
            t[n] = keep
        if not changed:
            break
    return t, value


def _pairwise_ascent(form_u, form_e, t, alphabet):
    """Exchange element pairs, re-cycling single moves after any gain."""
    t = t.copy()
    value = _quadratic_ratio(form_u, form_e, t)
    improved = True
    while improved:
        improved = False
        for n1 in range(t.size):
            for n2 in range(n1 + 1, t.size):
                keep1, keep2 = t[n1], t[n2]
                for a1 in alphabet:
                    for a2 in alphabet:
                        t[n1], t[n2] = a1, a2
                        trial = _quadratic_ratio(form_u, form_e, t)
                        if trial > value * (1.0 + 1e-13):
                            value = trial
                            keep1, keep2 = a1, a2
                            improved = True
                t[n1], t[n2] = keep1, keep2
        if improved:
            t, value = _coordinate_ascent(form_u, form_e, t, alphabet)
    return t, value


# pairwise polish is quadratic in elements and in alphabet size; skip it
# beyond this move budget and rely on the gauge sweep + single exchanges
_PAIRWISE_BUDGET = 4096


def optimize_statistical_csi(
    config: ch.SystemConfig,
    realization: ch.ChannelRealization,
    bits: float | None = None,
) -> PhaseSolution:
    """Statistical-eavesdropper phase choice for one realization.

    Compensates the cascaded phases toward the trusted receiver in
    closed form, discretizes at the requested resolution (the
    configuration's own resolution by default), and evaluates the
    lower-bound and instantaneous secrecy rates.
    """
    if bits is None:
        bits = config.phase_error.bits
    continuous = statistical_csi_phases(
        np.exp(1j * realization.incident_phases),
        np.exp(1j * realization.forward_phases_u),
    ).continuous
    discretized = discretize_phases(continuous, bits)
    phases = np.angle(discretized)
    return PhaseSolution(
        continuous=continuous,
        discretized=discretized,
        lower_bound_sr=lower_bound_sr(config, realization, phases),
        instantaneous_sr=secrecy_rate(config, realization, phases),
        continuous_sr=secrecy_rate(config, realization, np.angle(continuous)),
    )


def optimize_perfect_csi(
    config: ch.SystemConfig,
    realization: ch.ChannelRealization,
    bits: float | None = None,
    tol: float = 1e-6,
    max_iters: int = 50000,
) -> PhaseSolution:
    """Perfect-CSI secrecy-rate maximization for one realization.

    Lifts the fractional objective, solves the semidefinite relaxation,
    extracts a unit-modulus vector, and discretizes deterministically: a
    16-point gauge sweep over the rounding offset with coordinate-
    exchange polish of each candidate, plus pairwise polish when the
    move budget allows.  Raises :class:`SolverConvergenceError` when the
    relaxation does not meet its tolerance.  Estimation errors present
    in the realization affect only the reported rates, never the
    optimization itself, which uses the error-free channel state.
    """
    if bits is None:
        bits = config.phase_error.bits
    _validate_bits(bits)
    problem = build_sdr(config, realization)
    solution = solve_sdp(problem, tol=tol, max_iters=max_iters)
    if not solution.converged:
        raise SolverConvergenceError(
            f"relaxation stopped at residuals {solution.residuals} "
            f"after {solution.iterations} iterations",
            solution,
        )
    continuous = extract_rank_one(solution)

    if bits == math.inf:
        discretized = continuous.copy()
    else:
        levels = int(2.0**bits)
        step = _TWO_PI / levels
        alphabet = np.exp(1j * step * np.arange(levels))
        best_t = None
        best_v = -math.inf
        for offset in np.linspace(0.0, step, 16, endpoint=False):
            cand = discretize_phases(continuous * np.exp(1j * offset), bits)
            cand, value = _coordinate_ascent(problem.form_u, problem.form_e, cand, alphabet)
            if value > best_v:
                best_v = value
                best_t = cand
        pairs = config.element_count * (config.element_count - 1) // 2
        if pairs * levels**2 <= _PAIRWISE_BUDGET:
            best_t, best_v = _pairwise_ascent(
                problem.form_u, problem.form_e, best_t, alphabet
            )
        discretized = best_t

    phases = np.angle(discretized)
    return PhaseSolution(
        continuous=continuous,
        discretized=discretized,
        lower_bound_sr=lower_bound_sr(config, realization, phases),
        instantaneous_sr=secrecy_rate(config, realization, phases),
        continuous_sr=secrecy_rate(config, realization, np.angle(continuous)),
    )
