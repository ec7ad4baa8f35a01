"""Diagonally constrained SDP solver and rank-one extraction."""

import numpy as np
import pytest

from iswpt.objective import (Beamformer, DerivedOperators, PhaseProfile,
                             build_operators)
from iswpt.oracle import SearchBudget, quantized_phase_search
from iswpt.scenario import (SystemConfig, complex_normal, sample_channels,
                            trial_stream)
from iswpt.sdp import (DiagSdpProblem, SdpNonConvergence, extract_beamformer,
                       extract_phases, lifted_phase_score, sdp_update_v,
                       sdp_update_w, solve_diag_sdp)


def random_psd(rng, n):
    a = complex_normal(rng, (n, n))
    mat = a.conj().T @ a
    return 0.5 * (mat + mat.conj().T)


def random_hermitian(rng, n):
    a = complex_normal(rng, (n, n))
    return 0.5 * (a + a.conj().T)


def small_config(n=4, l=6, p0=1.0, **overrides):
    return SystemConfig(n_tx=n, n_irs=l, n_ehd=2, n_targets=2,
                        target_angles=(-0.5, 0.5), p0=p0, **overrides)


# ---------------------------------------------------------------------------
# Solver on problems with known optima


def test_solver_diagonal_cost():
    # Off-diagonals never enter the objective, so the value is the trace of
    # the cost against the fixed diagonal.
    problem = DiagSdpProblem(cost=np.diag([3.0, -1.0, 2.0]),
                             diag_values=np.ones(3))
    solution = solve_diag_sdp(problem)
    assert solution.objective == pytest.approx(4.0, abs=1e-6)


def test_solver_all_ones_cost():
    problem = DiagSdpProblem(cost=np.ones((3, 3)), diag_values=np.ones(3))
    solution = solve_diag_sdp(problem)
    assert solution.objective == pytest.approx(9.0, rel=1e-6)
    np.testing.assert_allclose(solution.x_opt, np.ones((3, 3)), atol=1e-4)


def test_solver_exchange_cost():
    problem = DiagSdpProblem(cost=np.array([[0.0, 1.0], [1.0, 0.0]]),
                             diag_values=np.ones(2))
    solution = solve_diag_sdp(problem)
    assert solution.objective == pytest.approx(2.0, rel=1e-6)
    np.testing.assert_allclose(solution.x_opt.real, np.ones((2, 2)), atol=1e-4)


def test_solver_rank_one_cost_analytic_optimum():
    # For cost u u^H, |X_ij| <= sqrt(b_i b_j) bounds the value by
    # (sum_i sqrt(b_i) |u_i|)^2, attained by the aligned rank-one X.
    rng = trial_stream(20, 0)
    for _ in range(5):
        u = complex_normal(rng, (6,))
        b = rng.uniform(0.5, 2.0, 6)
        cost = np.outer(u, u.conj())
        cost = 0.5 * (cost + cost.conj().T)
        expected = float(np.sum(np.sqrt(b) * np.abs(u)) ** 2)
        solution = solve_diag_sdp(DiagSdpProblem(cost=cost, diag_values=b))
        assert solution.objective == pytest.approx(expected, rel=1e-6)


def test_solver_certificates_on_random_instances():
    rng = trial_stream(21, 0)
    for _ in range(5):
        cost = random_hermitian(rng, 7)
        b = rng.uniform(0.5, 2.0, 7)
        solution = solve_diag_sdp(DiagSdpProblem(cost=cost, diag_values=b),
                                  tol=1e-8)
        scale = max(1.0, abs(solution.objective))
        assert solution.primal_residual <= 1e-8
        assert solution.duality_gap <= 1e-7 * scale
        assert solution.duality_gap >= -1e-9 * scale
        np.testing.assert_allclose(np.diag(solution.x_opt).real, b, atol=1e-6)
        min_eig = float(np.linalg.eigvalsh(solution.x_opt)[0])
        assert min_eig >= -1e-8 * np.linalg.norm(solution.x_opt)


def test_solver_matches_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = trial_stream(22, 0)
    cost = random_hermitian(rng, 5)
    b = rng.uniform(0.5, 2.0, 5)
    x = cp.Variable((5, 5), hermitian=True)
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(cost @ x))),
                      [cp.diag(x) == b, x >> 0])
    prob.solve()
    ours = solve_diag_sdp(DiagSdpProblem(cost=cost, diag_values=b))
    assert ours.objective == pytest.approx(prob.value, rel=1e-5)


def test_solver_deterministic():
    rng = trial_stream(23, 0)
    problem = DiagSdpProblem(cost=random_hermitian(rng, 5),
                             diag_values=np.ones(5))
    first = solve_diag_sdp(problem)
    second = solve_diag_sdp(problem)
    assert first.objective == second.objective
    assert np.array_equal(first.x_opt, second.x_opt)


def test_solver_rejects_bad_inputs():
    with pytest.raises(ValueError):
        DiagSdpProblem(cost=np.array([[0.0, 1.0], [0.0, 0.0]]),
                       diag_values=np.ones(2))
    with pytest.raises(ValueError):
        DiagSdpProblem(cost=np.zeros((2, 2)), diag_values=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        DiagSdpProblem(cost=np.zeros((3, 3)), diag_values=np.ones(2))
    problem = DiagSdpProblem(cost=np.eye(2), diag_values=np.ones(2))
    with pytest.raises(ValueError):
        solve_diag_sdp(problem, tol=0.0)


def test_solver_nonconvergence_carries_best_iterate():
    problem = DiagSdpProblem(cost=np.ones((3, 3)), diag_values=np.ones(3))
    with pytest.raises(SdpNonConvergence) as info:
        solve_diag_sdp(problem, tol=1e-300)
    assert info.value.rel_gap > 0.0
    best = info.value.solution
    # The stalled iterate is still a nearly optimal feasible point.
    assert best.objective == pytest.approx(9.0, rel=1e-3)


# ---------------------------------------------------------------------------
# Rank-one extraction


def test_extract_beamformer_rank_one_exact():
    config = small_config(n=5)
    rng = trial_stream(24, 0)
    zeta = config.beam_amplitude * np.exp(1j * rng.uniform(-np.pi, np.pi, 5))
    x_opt = np.outer(zeta, zeta.conj())
    big_h = np.outer(zeta, zeta.conj())  # optimum aligns with the generator
    beam = extract_beamformer(x_opt, big_h, config, n_rand=20, rng=rng)
    optimum = float(np.real(np.vdot(zeta, big_h @ zeta)))
    achieved = float(np.real(np.vdot(beam.w, big_h @ beam.w)))
    assert achieved == pytest.approx(optimum, rel=1e-10)
    np.testing.assert_allclose(np.abs(beam.w), config.beam_amplitude, atol=1e-12)


def test_extract_beamformer_deterministic():
    config = small_config(n=4)
    rng = trial_stream(25, 0)
    big_h = random_psd(rng, 4)
    first = extract_beamformer(np.eye(4), big_h, config, n_rand=50,
                               rng=trial_stream(25, 1))
    second = extract_beamformer(np.eye(4), big_h, config, n_rand=50,
                                rng=trial_stream(25, 1))
    assert np.array_equal(first.w, second.w)


def test_extract_beamformer_randomization_never_hurts():
    config = small_config(n=6)
    rng = trial_stream(26, 0)
    for trial in range(10):
        x_opt = random_psd(rng, 6)
        big_h = random_psd(rng, 6)
        eig_only = extract_beamformer(x_opt, big_h, config, n_rand=0,
                                      rng=trial_stream(26, 1, trial))
        with_draws = extract_beamformer(x_opt, big_h, config, n_rand=200,
                                        rng=trial_stream(26, 1, trial))
        score = lambda b: float(np.real(np.vdot(b.w, big_h @ b.w)))
        assert score(with_draws) >= score(eig_only) - 1e-12


def test_extract_beamformer_keeps_incumbent():
    # With an uninformative relaxed solution, a strong incumbent must win.
    config = small_config(n=5)
    rng = trial_stream(27, 0)
    h = np.exp(1j * rng.uniform(-np.pi, np.pi, 5))
    big_h = np.outer(h.conj(), h)
    incumbent = Beamformer.from_phases(-np.angle(h), config)
    best = (config.beam_amplitude * config.n_tx) ** 2
    out = extract_beamformer(np.eye(5), big_h, config, n_rand=5,
                             rng=trial_stream(27, 1), incumbent=incumbent)
    achieved = float(np.real(np.vdot(out.w, big_h @ out.w)))
    assert achieved >= best * (1.0 - 1e-12)


def test_extract_phases_rank_one_recovery():
    rng = trial_stream(28, 0)
    l_dim = 6
    v_gen = np.exp(1j * rng.uniform(-np.pi, np.pi, l_dim))
    aug = np.concatenate([v_gen, [1.0 + 0.0j]])
    lifted = np.concatenate([v_gen.conj(), [1.0 + 0.0j]])
    x_opt = np.outer(lifted, lifted.conj())
    big_f = np.outer(aug.conj(), aug)
    big_f = 0.5 * (big_f + big_f.conj().T)
    recovered = extract_phases(x_opt, big_f, n_rand=0, rng=rng)
    np.testing.assert_allclose(recovered.v, v_gen, atol=1e-8)
    assert lifted_phase_score(big_f, recovered.v) == pytest.approx(
        float((l_dim + 1) ** 2), rel=1e-10)


def test_extract_phases_degenerate_tail_fallback():
    # A relaxed solution whose principal eigenvector has zero last entry
    # exercises the global-phase fallback; the rotation it picks must beat
    # the unrotated projection.
    rng = trial_stream(29, 0)
    l_dim = 5
    v_gen = np.exp(1j * rng.uniform(-np.pi, np.pi, l_dim))
    x_opt = np.zeros((l_dim + 1, l_dim + 1), dtype=complex)
    x_opt[:l_dim, :l_dim] = np.outer(v_gen.conj(), v_gen)
    x_opt[l_dim, l_dim] = 1.0
    f11 = random_psd(rng, l_dim)
    f12 = complex_normal(rng, (l_dim,))
    big_f = np.zeros((l_dim + 1, l_dim + 1), dtype=complex)
    big_f[:l_dim, :l_dim] = f11
    big_f[:l_dim, l_dim] = f12
    big_f[l_dim, :l_dim] = f12.conj()
    out = extract_phases(x_opt, big_f, n_rand=0, rng=rng)
    assert out.modulus_error() < 1e-15
    assert lifted_phase_score(big_f, out.v) >= lifted_phase_score(big_f, v_gen) - 1e-9


def test_extract_phases_keeps_incumbent():
    rng = trial_stream(30, 0)
    l_dim = 6
    big_f = random_psd(rng, l_dim + 1)
    strong = extract_phases(random_psd(rng, l_dim + 1), big_f, n_rand=200,
                            rng=trial_stream(30, 1))
    weak_x = np.eye(l_dim + 1)
    out = extract_phases(weak_x, big_f, n_rand=0, rng=trial_stream(30, 2),
                         incumbent=strong)
    assert lifted_phase_score(big_f, out.v) >= \
        lifted_phase_score(big_f, strong.v) - 1e-12


# ---------------------------------------------------------------------------
# Half-step wrappers


def ops_with_big_h(big_h, n, l):
    """Operators carrying only the beam-side matrix (rest zeroed)."""
    return DerivedOperators(
        h_tilde=np.zeros((1, n), dtype=complex),
        h_hat=np.zeros((1, n), dtype=complex),
        c_vecs=np.zeros((1, l), dtype=complex),
        a_scalars=np.zeros(1, dtype=complex),
        d_vecs=np.zeros((1, l), dtype=complex),
        f11=np.zeros((l, l), dtype=complex),
        f12=np.zeros(l, dtype=complex),
        big_f=np.zeros((l + 1, l + 1), dtype=complex),
        big_h=big_h, offset=0.0)


def test_sdp_update_w_matched_filter():
    # Rank-one cost: the relaxation is tight and extraction recovers the
    # per-antenna matched filter, objective amp^2 (sum |h_n|)^2.
    config = small_config(n=4, p0=2.0)
    rng = trial_stream(31, 0)
    h = complex_normal(rng, (4,))
    big_h = np.outer(h.conj(), h)
    big_h = 0.5 * (big_h + big_h.conj().T)
    ops = ops_with_big_h(big_h, 4, config.n_irs)
    beam, relaxed = sdp_update_w(ops, config, trial_stream(31, 1))
    optimum = float(config.beam_amplitude ** 2 * np.sum(np.abs(h)) ** 2)
    feasible = float(np.real(np.vdot(beam.w, big_h @ beam.w)))
    assert relaxed == pytest.approx(optimum, rel=1e-6)
    assert feasible == pytest.approx(optimum, rel=1e-6)
    assert feasible <= relaxed * (1.0 + 1e-6)


def test_sdp_update_w_feasible_close_to_relaxed():
    # Randomized extraction stays within a few percent of the SDP bound on
    # random instances (median over 100 draws).
    config = small_config(n=4, p0=1.0)
    rng = trial_stream(32, 0)
    ratios = []
    for trial in range(100):
        big_h = random_psd(rng, 4)
        ops = ops_with_big_h(big_h, 4, config.n_irs)
        beam, relaxed = sdp_update_w(ops, config, trial_stream(32, 1, trial))
        feasible = float(np.real(np.vdot(beam.w, big_h @ beam.w)))
        assert feasible <= relaxed * (1.0 + 1e-6)
        ratios.append(feasible / relaxed)
    assert float(np.median(ratios)) >= 0.95


def test_sdp_update_v_beats_quantized_search():
    # The extracted phase profile should match or beat an 8-level
    # exhaustive search up to quantization slack.
    angles = (-0.6, 0.4)
    config = SystemConfig(n_tx=3, n_irs=6, n_ehd=2, n_targets=2,
                          target_angles=angles, p0=1.0, rho=0.5, seed=33)
    rng = trial_stream(33, 0)
    channels = sample_channels(config, rng)
    beam = Beamformer.from_phases(rng.uniform(-np.pi, np.pi, 3), config)
    phases = PhaseProfile(alpha=rng.uniform(-np.pi, np.pi, 6))
    ops = build_operators(channels, phases, beam, config)

    profile, relaxed = sdp_update_v(ops, config, trial_stream(33, 1))
    j_sdp = lifted_phase_score(ops.big_f, profile.v) + ops.offset
    assert j_sdp <= relaxed * (1.0 + 1e-6)

    budget = SearchBudget(phase_levels=8, max_evals=8 ** 6)
    _, j_oracle = quantized_phase_search(channels, beam, config, budget)
    assert j_sdp >= 0.98 * j_oracle
