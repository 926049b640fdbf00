"""Tests for surface phase-shift optimization.

Closed-form results are checked exactly, the semidefinite relaxation
against feasibility/upper-bound properties and scalar or rank-one cases
with known answers, and the end-to-end discrete optimizer against
exhaustive enumeration on instances small enough to enumerate.
"""

import dataclasses
import itertools
import math

import numpy as np
import pytest

from rissec import channel as ch
from rissec import optimize as op


def quad_ratio(form_u, form_e, t):
    return float(np.real(t.conj() @ form_u @ t) / np.real(t.conj() @ form_e @ t))


def synthetic_problem(rng, n):
    """Random rank-one-plus-identity instance with log-uniform SNR gains."""
    gain_u = 10.0 ** rng.uniform(-1.0, 1.5)
    gain_e = 10.0 ** rng.uniform(-1.5, 0.5)
    a_u = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
    a_e = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
    problem = op.SdrProblem(
        form_u=np.eye(n) / n + gain_u * np.outer(a_u, a_u.conj()),
        form_e=np.eye(n) / n + gain_e * np.outer(a_e, a_e.conj()),
        incident_diag=np.eye(n, dtype=complex),
        snr_gain_u=gain_u,
        snr_gain_e=gain_e,
    )
    return problem, a_u, a_e


def _realization(cfg, seed=0, trial=0):
    return ch.sample_realization(cfg, ch.trial_rng(seed, trial))


# ---------------------------------------------------------------------------
# statistical-CSI compensation


def test_statistical_phases_align_every_summand():
    rng = np.random.default_rng(0)
    hr = np.exp(1j * rng.uniform(0, 2 * np.pi, 12))
    hu = np.exp(1j * rng.uniform(0, 2 * np.pi, 12))
    t = op.statistical_csi_phases(hr, hu).continuous
    cascade = hr * hu
    summands = t.conj() * cascade
    np.testing.assert_allclose(summands.real, 1.0, rtol=0, atol=1e-12)
    assert abs(abs(np.vdot(t, cascade)) - 12.0) < 1e-9


def test_statistical_phases_identity_channels():
    ones = np.ones(5, dtype=complex)
    t = op.statistical_csi_phases(ones, ones).continuous
    np.testing.assert_allclose(t, ones, rtol=0, atol=1e-12)


def test_statistical_phases_match_grid_search():
    # N=3, 720-point grid per free element (global phase fixed)
    rng = np.random.default_rng(3)
    hr = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    hu = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    cascade_phase = np.angle(hr) + np.angle(hu)
    grid = np.linspace(0.0, 2 * np.pi, 720, endpoint=False)
    g1, g2 = np.meshgrid(grid, grid, indexing="ij")
    total = (
        np.exp(-1j * cascade_phase[0])
        + np.exp(1j * (g1 - cascade_phase[1]))
        + np.exp(1j * (g2 - cascade_phase[2]))
    )
    grid_best = np.abs(total).max()
    ours = abs(np.vdot(op.statistical_csi_phases(hr, hu).continuous, hr * hu))
    assert grid_best <= 3.0 + 1e-12
    assert ours >= grid_best - 1e-3
    assert abs(ours - 3.0) < 1e-9


def test_statistical_phases_reject_bad_input():
    ones = np.ones(4, dtype=complex)
    with pytest.raises(ValueError):
        op.statistical_csi_phases(ones, np.ones(5, dtype=complex))
    with pytest.raises(ValueError):
        op.statistical_csi_phases(2.0 * ones, ones)


# ---------------------------------------------------------------------------
# rate figures of merit


def test_lower_bound_zero_power():
    cfg = dataclasses.replace(ch.default_config(8, bits=1), transmit_snr=0.0)
    rlz = _realization(cfg)
    assert op.lower_bound_sr(cfg, rlz, np.zeros(8)) == 0.0


def test_lower_bound_perfect_compensation_formula():
    cfg = ch.default_config(16, bits=math.inf)
    rlz = _realization(cfg)
    phases = rlz.incident_phases + rlz.forward_phases_u
    gain_u = cfg.snr_scale_u * (rlz.turbulence_u * rlz.pointing_u) ** 2
    gain_e = cfg.snr_scale_e * (rlz.turbulence_e * rlz.pointing_e) ** 2
    expected = math.log2((1.0 + gain_u * 16.0**2) / (1.0 + gain_e * 16.0))
    assert op.lower_bound_sr(cfg, rlz, phases) == pytest.approx(expected, rel=1e-12)


def test_lower_bound_matches_direct_formula_on_random_phases():
    cfg = ch.default_config(10, bits=2)
    rlz = _realization(cfg, trial=3)
    rng = np.random.default_rng(5)
    phases = rng.uniform(0, 2 * np.pi, 10)
    snr_u, _ = ch.received_snrs(cfg, rlz, phases)
    gain_e = cfg.snr_scale_e * (rlz.turbulence_e * rlz.pointing_e) ** 2
    expected = max(math.log2((1.0 + snr_u) / (1.0 + gain_e * 10.0)), 0.0)
    assert op.lower_bound_sr(cfg, rlz, phases) == pytest.approx(expected, rel=1e-12)


def test_lower_bound_clips_at_zero():
    cfg = ch.default_config(8, bits=math.inf)
    rlz = _realization(cfg)
    # phases offset by a full turn of increments cancel the trusted sum
    phases = (
        rlz.incident_phases
        + rlz.forward_phases_u
        + np.arange(8) * (2 * np.pi / 8)
    )
    assert op.lower_bound_sr(cfg, rlz, phases) == 0.0


def test_secrecy_rate_matches_received_snrs():
    cfg = ch.default_config(9, bits=1)
    rlz = _realization(cfg, trial=1)
    phases = np.linspace(0.0, 3.0, 9)
    snr_u, snr_e = ch.received_snrs(cfg, rlz, phases)
    expected = max(math.log2((1.0 + snr_u) / (1.0 + snr_e)), 0.0)
    assert op.secrecy_rate(cfg, rlz, phases) == pytest.approx(expected, rel=1e-12)


def test_secrecy_rate_clips_at_zero():
    cfg = ch.default_config(8, bits=math.inf)
    rlz = _realization(cfg)
    phases = (
        rlz.incident_phases
        + rlz.forward_phases_u
        + np.arange(8) * (2 * np.pi / 8)
    )
    assert op.secrecy_rate(cfg, rlz, phases) == 0.0


# ---------------------------------------------------------------------------
# problem assembly


def test_build_sdr_cross_checks_received_snrs():
    cfg = ch.default_config(8, bits=2)
    rlz = _realization(cfg)
    problem = op.build_sdr(cfg, rlz)
    rng = np.random.default_rng(1)
    t = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
    snr_u, snr_e = ch.received_snrs(cfg, rlz, np.angle(t))
    assert np.real(t.conj() @ problem.form_u @ t) - 1.0 == pytest.approx(
        snr_u, rel=1e-10
    )
    assert np.real(t.conj() @ problem.form_e @ t) - 1.0 == pytest.approx(
        snr_e, rel=1e-10
    )


def test_build_sdr_positive_definite():
    cfg = ch.default_config(6, bits=1)
    problem = op.build_sdr(cfg, _realization(cfg))
    for form in (problem.form_u, problem.form_e):
        np.testing.assert_allclose(form, form.conj().T, rtol=0, atol=1e-14)
        assert np.linalg.eigvalsh(form).min() >= 1.0 / 6.0 - 1e-12


def test_build_sdr_zero_power():
    cfg = dataclasses.replace(ch.default_config(5, bits=1), transmit_snr=0.0)
    problem = op.build_sdr(cfg, _realization(cfg))
    np.testing.assert_array_equal(problem.form_u, np.eye(5) / 5.0)
    assert problem.snr_gain_u == 0.0 and problem.snr_gain_e == 0.0


# ---------------------------------------------------------------------------
# semidefinite relaxation


def test_solve_sdp_scalar_case():
    problem = op.SdrProblem(
        form_u=np.array([[3.0 + 0j]]),
        form_e=np.array([[2.0 + 0j]]),
        incident_diag=np.eye(1, dtype=complex),
        snr_gain_u=1.0,
        snr_gain_e=1.0,
    )
    sol = op.solve_sdp(problem)
    assert sol.converged
    assert sol.matrix[0, 0] == pytest.approx(0.5, rel=1e-9)
    assert sol.objective == pytest.approx(1.5, rel=1e-9)
    assert sol.eta == pytest.approx(0.5, rel=1e-9)
    assert sol.normalized[0, 0] == pytest.approx(1.0, rel=1e-9)


def test_solve_sdp_feasibility_triple():
    cfg = ch.default_config(6, bits=1)
    sol = op.solve_sdp(op.build_sdr(cfg, _realization(cfg)))
    assert sol.converged
    problem = op.build_sdr(cfg, _realization(cfg))
    assert abs(np.real(np.vdot(problem.form_e, sol.matrix)) - 1.0) < 1e-6
    diag = np.diag(sol.matrix).real
    assert np.abs(diag - sol.eta).max() < 1e-6
    assert np.linalg.eigvalsh(sol.matrix).min() > -1e-8


def test_solve_sdp_upper_bounds_feasible_points():
    rng = np.random.default_rng(7)
    for _ in range(25):
        problem, _, _ = synthetic_problem(rng, 4)
        sol = op.solve_sdp(problem)
        assert sol.converged
        for _ in range(100):
            t = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
            r = quad_ratio(problem.form_u, problem.form_e, t)
            assert sol.objective >= r * (1.0 - 1e-6)


def test_solve_sdp_scale_invariance():
    rng = np.random.default_rng(11)
    problem, _, _ = synthetic_problem(rng, 5)
    scaled = op.SdrProblem(
        form_u=7.3 * problem.form_u,
        form_e=7.3 * problem.form_e,
        incident_diag=problem.incident_diag,
        snr_gain_u=problem.snr_gain_u,
        snr_gain_e=problem.snr_gain_e,
    )
    t1 = op.extract_rank_one(op.solve_sdp(problem))
    t2 = op.extract_rank_one(op.solve_sdp(scaled))
    assert abs(np.vdot(t1, t2)) == pytest.approx(5.0, abs=1e-4)


def test_solve_sdp_flags_non_convergence():
    rng = np.random.default_rng(2)
    problem, _, _ = synthetic_problem(rng, 4)
    sol = op.solve_sdp(problem, max_iters=3)
    assert not sol.converged
    assert sol.iterations == 3


def test_solve_sdp_rejects_indefinite_eavesdropper_form():
    bad = op.SdrProblem(
        form_u=np.eye(3, dtype=complex),
        form_e=np.diag([1.0, -1.0, 1.0]).astype(complex),
        incident_diag=np.eye(3, dtype=complex),
        snr_gain_u=1.0,
        snr_gain_e=1.0,
    )
    with pytest.raises(ValueError):
        op.solve_sdp(bad)


# ---------------------------------------------------------------------------
# rank-one extraction


def test_extract_rank_one_exact_input():
    rng = np.random.default_rng(4)
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, 7))
    psi = np.outer(v, v.conj())
    sol = op.SdpSolution(
        matrix=psi,
        eta=1.0,
        normalized=psi,
        objective=1.0,
        residuals=(0.0, 0.0),
        iterations=1,
        converged=True,
    )
    t = op.extract_rank_one(sol)
    assert abs(np.vdot(t, v)) == pytest.approx(7.0, abs=1e-9)


def test_extract_rank_one_high_rank_stays_unit_modulus():
    sol = op.SdpSolution(
        matrix=np.eye(4, dtype=complex),
        eta=1.0,
        normalized=np.eye(4, dtype=complex),
        objective=1.0,
        residuals=(0.0, 0.0),
        iterations=1,
        converged=True,
    )
    t = op.extract_rank_one(sol)
    np.testing.assert_allclose(np.abs(t), 1.0, rtol=0, atol=1e-12)


def test_extract_rank_one_rejects_zero_matrix():
    sol = op.SdpSolution(
        matrix=np.zeros((3, 3), dtype=complex),
        eta=1.0,
        normalized=np.zeros((3, 3), dtype=complex),
        objective=0.0,
        residuals=(0.0, 0.0),
        iterations=1,
        converged=True,
    )
    with pytest.raises(ValueError):
        op.extract_rank_one(sol)


def test_global_phase_invariance_of_objective():
    rng = np.random.default_rng(9)
    problem, _, _ = synthetic_problem(rng, 6)
    t = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    r1 = quad_ratio(problem.form_u, problem.form_e, t)
    r2 = quad_ratio(problem.form_u, problem.form_e, t * np.exp(1j * 0.7))
    assert r1 == pytest.approx(r2, rel=1e-12)


# ---------------------------------------------------------------------------
# discretization


def test_discretize_wraps_cyclically():
    # b=2: quarter-step short of a full turn snaps to phase 0
    t = np.array([np.exp(1j * (2 * np.pi - np.pi / 8 + 1e-9))])
    out = op.discretize_phases(t, 2)
    assert np.angle(out[0]) == pytest.approx(0.0, abs=1e-12)


def test_discretize_ties_toward_smaller():
    # exact midpoints: pi/2 between 0 and pi (b=1), pi/4 between 0 and pi/2
    assert np.angle(op.discretize_phases(np.array([np.exp(1j * np.pi / 2)]), 1)[0]) == 0.0
    assert np.angle(op.discretize_phases(np.array([np.exp(1j * np.pi / 4)]), 2)[0]) == 0.0


def test_discretize_infinite_bits_is_identity():
    rng = np.random.default_rng(6)
    t = np.exp(1j * rng.uniform(0, 2 * np.pi, 9))
    out = op.discretize_phases(t, math.inf)
    np.testing.assert_array_equal(out, t)
    assert out is not t


def test_discretize_idempotent_and_on_grid():
    rng = np.random.default_rng(8)
    t = np.exp(1j * rng.uniform(0, 2 * np.pi, 50))
    once = op.discretize_phases(t, 3)
    step = 2 * np.pi / 8
    idx = np.mod(np.angle(once), 2 * np.pi) / step
    np.testing.assert_allclose(idx, np.round(idx), rtol=0, atol=1e-9)
    np.testing.assert_allclose(
        op.discretize_phases(once, 3), once, rtol=0, atol=1e-12
    )


def test_discretized_compensation_keeps_cosine_bound():
    rng = np.random.default_rng(10)
    hr = np.exp(1j * rng.uniform(0, 2 * np.pi, 32))
    hu = np.exp(1j * rng.uniform(0, 2 * np.pi, 32))
    t = op.statistical_csi_phases(hr, hu).continuous
    for bits in (1, 2, 3):
        snapped = op.discretize_phases(t, bits)
        combined = abs(np.vdot(snapped, hr * hu))
        assert combined >= 32.0 * math.cos(math.pi / 2.0**bits) - 1e-9


def test_discretize_rejects_bad_input():
    with pytest.raises(ValueError):
        op.discretize_phases(np.array([2.0 + 0j]), 1)
    with pytest.raises(ValueError):
        op.discretize_phases(np.array([1.0 + 0j]), 0.5)


def test_random_phases_respect_grid():
    cfg = ch.default_config(200, bits=2)
    phases = op.random_phases(cfg, np.random.default_rng(0))
    step = 2 * np.pi / 4
    np.testing.assert_allclose(
        phases, np.round(phases / step) * step, rtol=0, atol=1e-12
    )
    assert phases.min() >= 0.0 and phases.max() < 2 * np.pi
    cont = op.random_phases(
        ch.default_config(200, bits=math.inf), np.random.default_rng(0)
    )
    assert np.unique(cont).size == 200


# ---------------------------------------------------------------------------
# end-to-end optimization


def test_statistical_csi_end_to_end():
    cfg = ch.default_config(12, bits=2)
    rlz = _realization(cfg, trial=2)
    sol = op.optimize_statistical_csi(cfg, rlz)
    step = 2 * np.pi / 4
    idx = np.mod(np.angle(sol.discretized), 2 * np.pi) / step
    np.testing.assert_allclose(idx, np.round(idx), rtol=0, atol=1e-9)
    # the continuous compensation maximizes the lower bound exactly
    cont = op.optimize_statistical_csi(cfg, rlz, bits=math.inf)
    assert cont.lower_bound_sr >= sol.lower_bound_sr
    gain_u = cfg.snr_scale_u * (rlz.turbulence_u * rlz.pointing_u) ** 2
    gain_e = cfg.snr_scale_e * (rlz.turbulence_e * rlz.pointing_e) ** 2
    best = math.log2((1.0 + gain_u * 144.0) / (1.0 + gain_e * 12.0))
    assert cont.lower_bound_sr == pytest.approx(max(best, 0.0), rel=1e-12)


def test_statistical_csi_estimation_errors_affect_rates_only():
    cfg = ch.default_config(
        12, bits=2, mode=ch.QUANTIZED_ESTIMATE, concentration=2.0
    )
    rlz = _realization(cfg, trial=5)
    sol = op.optimize_statistical_csi(cfg, rlz)
    problem = op.build_sdr(cfg, rlz)
    error_free = max(
        math.log2(quad_ratio(problem.form_u, problem.form_e, sol.discretized)), 0.0
    )
    # phases identical, but the reported rate sees the drawn errors
    assert sol.instantaneous_sr != pytest.approx(error_free, rel=1e-9)


def test_perfect_csi_beats_exhaustive_threshold():
    hits = 0
    for trial in range(8):
        cfg = ch.default_config(5, bits=2)
        rlz = _realization(cfg, seed=20, trial=trial)
        problem = op.build_sdr(cfg, rlz)
        sol = op.optimize_perfect_csi(cfg, rlz)
        got = math.log2(
            quad_ratio(problem.form_u, problem.form_e, sol.discretized)
        )
        step = 2 * np.pi / 4
        best = -math.inf
        for combo in itertools.product(range(4), repeat=4):
            t = np.exp(1j * step * np.array((0,) + combo))
            best = max(best, quad_ratio(problem.form_u, problem.form_e, t))
        best = math.log2(best)
        if got >= best - 0.05 * abs(best):
            hits += 1
    assert hits == 8


def test_perfect_csi_beats_random_on_every_realization():
    cfg = ch.default_config(8, bits=1)
    rng = np.random.default_rng(14)
    for trial in range(10):
        rlz = _realization(cfg, seed=30, trial=trial)
        problem = op.build_sdr(cfg, rlz)
        sol = op.optimize_perfect_csi(cfg, rlz)
        opt = quad_ratio(problem.form_u, problem.form_e, sol.continuous)
        rand = quad_ratio(
            problem.form_u,
            problem.form_e,
            np.exp(1j * rng.uniform(0, 2 * np.pi, 8)),
        )
        assert opt >= rand


def test_perfect_csi_nondecreasing_in_resolution_on_average():
    cfg = ch.default_config(8, bits=1)
    means = []
    for bits in (1, 2, 3):
        srs = [
            op.optimize_perfect_csi(
                cfg, _realization(cfg, seed=40, trial=k), bits=bits
            ).instantaneous_sr
            for k in range(6)
        ]
        means.append(np.mean(srs))
    assert means[0] <= means[1] + 1e-9
    assert means[1] <= means[2] + 1e-9


def test_perfect_csi_degenerate_eavesdropper_matches_compensation():
    # with a flat eavesdropper form the relaxation reduces to coherent
    # combining toward the trusted receiver
    rng = np.random.default_rng(21)
    a_u = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    problem = op.SdrProblem(
        form_u=np.eye(6) / 6.0 + 2.5 * np.outer(a_u, a_u.conj()),
        form_e=np.eye(6, dtype=complex) / 6.0,
        incident_diag=np.eye(6, dtype=complex),
        snr_gain_u=2.5,
        snr_gain_e=0.0,
    )
    t = op.extract_rank_one(op.solve_sdp(problem))
    assert abs(np.vdot(t, a_u)) >= 6.0 * (1.0 - 1e-3)


def test_perfect_csi_propagates_non_convergence():
    cfg = ch.default_config(6, bits=1)
    with pytest.raises(op.SolverConvergenceError) as excinfo:
        op.optimize_perfect_csi(cfg, _realization(cfg), max_iters=2)
    assert not excinfo.value.solution.converged


def test_perfect_csi_continuous_resolution():
    cfg = ch.default_config(6, bits=math.inf)
    rlz = _realization(cfg, trial=9)
    sol = op.optimize_perfect_csi(cfg, rlz)
    np.testing.assert_array_equal(sol.discretized, sol.continuous)
    assert sol.instantaneous_sr == pytest.approx(sol.continuous_sr, rel=1e-12)


def test_perfect_csi_large_instance_smoke():
    cfg = ch.default_config(40, bits=3, sigma_j_u=0.2, sigma_j_e=0.1)
    rlz = _realization(cfg, seed=50, trial=0)
    sol = op.optimize_perfect_csi(cfg, rlz, tol=5e-4, max_iters=40000)
    rand = op.secrecy_rate(
        cfg, rlz, op.random_phases(cfg, np.random.default_rng(0))
    )
    assert sol.instantaneous_sr > 0.0
    assert sol.continuous_sr >= rand
