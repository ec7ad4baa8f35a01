"""Diagonally constrained semidefinite programs and rank-one extraction.

Both alternating-optimization subproblems relax to the same template once
the rank constraint is dropped:

    maximise  Re tr(C X)   subject to  X_ii = b_i,  X >= 0 (Hermitian PSD)

with C Hermitian and b > 0.  `solve_diag_sdp` is a self-contained
primal-dual path-following interior-point method on the complex Hermitian
cone (no external solver).  The dual is

    minimise  b^T z   subject to  S = Diag(z) - C >= 0,

and dual feasibility is maintained exactly throughout, so the duality gap
is <X, S> = b^T z - Re tr(C X) whenever the primal diagonal is feasible.

The search direction is the standard XZ (HKM) direction with a Mehrotra
predictor-corrector.  For diagonal constraints the Schur complement has
the closed form  M_ij = Re(X_ij * conj(Sinv_ij)), an elementwise product,
which keeps each iteration at a handful of dense factorisations.

Inner products on the complex Hermitian cone are <A, B> = Re tr(A B); no
real symmetric embedding is used, so there is no factor-2 bookkeeping to
track and Tr(C X) is preserved trivially.

`extract_beamformer` / `extract_phases` turn a relaxed PSD solution into a
feasible constant-modulus iterate via the principal eigenvector plus
Gaussian randomisation, keeping whichever candidate scores best on the
true objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import Beamformer, DerivedOperators, PhaseProfile, hermitian_part
from .scenario import SystemConfig, complex_normal


@dataclass(frozen=True)
class DiagSdpProblem:
    """max Re tr(cost X) s.t. diag(X) = diag_values, X Hermitian PSD."""

    cost: np.ndarray         # (n, n) Hermitian
    diag_values: np.ndarray  # (n,) positive reals

    def __post_init__(self) -> None:
        cost = np.asarray(self.cost, dtype=np.complex128)
        b = np.asarray(self.diag_values, dtype=float)
        n = b.size
        if cost.shape != (n, n):
            raise ValueError(f"cost shape {cost.shape} does not match {n} diagonal values")
        scale = float(np.max(np.abs(cost))) if n else 0.0
        herm_err = float(np.max(np.abs(cost - cost.conj().T))) if n else 0.0
        if herm_err > 1e-12 * max(1.0, scale):
            raise ValueError(f"cost matrix is not Hermitian (deviation {herm_err:.3e})")
        if np.any(b <= 0.0):
            raise ValueError("diagonal values must be strictly positive")
        cost = hermitian_part(cost)
        cost.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "diag_values", b)


@dataclass(frozen=True)
class SdpSolution:
    """Solver output: primal iterate plus convergence diagnostics."""

    x_opt: np.ndarray      # (n, n) Hermitian PSD with diag ~= b
    objective: float       # Re tr(C x_opt)
    duality_gap: float     # b^T z - objective at the final iterate
    iterations: int
    primal_residual: float  # max_i |X_ii - b_i| / (1 + max b)


class SdpNonConvergence(RuntimeError):
    """Raised when the interior-point loop exhausts its iteration cap.

    Carries the best iterate reached so callers can inspect residuals.
    """

    def __init__(self, message: str, solution: SdpSolution, rel_gap: float):
        super().__init__(message)
        self.solution = solution
        self.rel_gap = rel_gap


def _max_step(pos_def: np.ndarray, direction: np.ndarray) -> float:
    """Largest t with pos_def + t*direction still PSD (may be inf)."""
    chol = np.linalg.cholesky(pos_def)
    half = np.linalg.solve(chol, direction)
    w = np.linalg.solve(chol, half.conj().T).conj().T
    lam_min = float(np.linalg.eigvalsh(hermitian_part(w))[0])
    if lam_min >= 0.0:
        return np.inf
    return -1.0 / lam_min


def solve_diag_sdp(problem: DiagSdpProblem, tol: float = 1e-7,
                   max_iters: int = 100) -> SdpSolution:
    """Solve the diagonally constrained SDP (see module docstring).

    Success requires the relative duality gap and the relative diagonal
    feasibility error to both drop below `tol`.  Determinism: no random
    state is consumed, so repeated calls return identical iterates.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    b = problem.diag_values
    n = b.size
    c_scale = float(np.max(np.abs(problem.cost)))
    if c_scale == 0.0:
        # every feasible point is optimal at objective 0
        return SdpSolution(x_opt=np.diag(b).astype(np.complex128), objective=0.0,
                           duality_gap=0.0, iterations=0, primal_residual=0.0)
    cost = problem.cost / c_scale
    eye = np.eye(n)

    x = np.diag(b).astype(np.complex128)
    # Gershgorin margin keeps the initial dual slack S = Diag(z) - C
    # comfortably positive definite.
    z = np.sum(np.abs(cost), axis=1) + 0.1
    s = np.diag(z) - cost

    best: SdpSolution | None = None
    rel_gap = np.inf
    iteration = 0
    for iteration in range(1, max_iters + 1):
        diag_x = np.real(np.diag(x))
        r_p = b - diag_x
        primal_res = float(np.max(np.abs(r_p))) / (1.0 + float(np.max(b)))
        primal_obj = float(np.real(np.trace(cost @ x)))
        dual_obj = float(b @ z)
        gap = float(np.real(np.trace(x @ s)))
        rel_gap = abs(gap) / (1.0 + abs(primal_obj) + abs(dual_obj))
        best = SdpSolution(x_opt=hermitian_part(x) * 1.0,
                           objective=primal_obj * c_scale,
                           duality_gap=(dual_obj - primal_obj) * c_scale,
                           iterations=iteration - 1,
                           primal_residual=primal_res)
        if rel_gap <= tol and primal_res <= tol:
            return best

        try:
            s_chol = np.linalg.cholesky(s)
            s_inv = np.linalg.solve(s_chol.conj().T, np.linalg.solve(s_chol, eye))
            s_inv = hermitian_part(s_inv)
            # Schur complement of the diagonal-constraint normal equations.
            m_mat = np.real(x * s_inv.conj())
            m_mat = 0.5 * (m_mat + m_mat.T) + (1e-14 * float(np.max(np.abs(m_mat))) + 1e-300) * np.eye(n)

            mu = gap / n

            def direction(r_mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
                rhs = np.real(np.diag(r_mat @ s_inv)) - r_p
                dz = np.linalg.solve(m_mat, rhs)
                ds = np.diag(dz).astype(np.complex128)
                dx = (r_mat - x @ ds) @ s_inv
                return hermitian_part(dx), dz, ds

            # Mehrotra predictor: pure Newton step toward the boundary.
            dx_aff, dz_aff, ds_aff = direction(-(x @ s))
            ap_aff = min(1.0, _max_step(x, dx_aff))
            ad_aff = min(1.0, _max_step(s, ds_aff))
            gap_aff = float(np.real(np.trace((x + ap_aff * dx_aff) @ (s + ad_aff * ds_aff))))
            sigma = min(0.99, max((max(gap_aff, 0.0) / gap) ** 3, 1e-8))

            # Corrector with second-order term.
            r_mat = sigma * mu * eye - x @ s - dx_aff @ ds_aff
            dx, dz, ds = direction(r_mat)
            frac = 0.98 if iteration > 2 else 0.9
            ap = min(1.0, frac * _max_step(x, dx))
            ad = min(1.0, frac * _max_step(s, ds))
            x = hermitian_part(x + ap * dx)
            z = z + ad * dz
            s = np.diag(z) - cost
        except np.linalg.LinAlgError:
            # Iterates pinned to the cone boundary by an unreachable
            # tolerance stop factorizing cleanly; report the stall rather
            # than leaking the factorization error.
            raise SdpNonConvergence(
                f"numerical breakdown at iteration {iteration} "
                f"(rel_gap={rel_gap:.3e}, primal_res={best.primal_residual:.3e})",
                solution=best, rel_gap=rel_gap) from None

    assert best is not None
    raise SdpNonConvergence(
        f"no convergence in {max_iters} iterations "
        f"(rel_gap={rel_gap:.3e}, primal_res={best.primal_residual:.3e})",
        solution=best, rel_gap=rel_gap)


def _psd_factor(x_opt: np.ndarray) -> np.ndarray:
    """A with A A^H ~= x_opt, negative eigenvalues clipped to zero."""
    lam, vec = np.linalg.eigh(hermitian_part(np.asarray(x_opt, dtype=np.complex128)))
    lam = np.clip(lam, 0.0, None)
    return vec * np.sqrt(lam)[None, :]


def _candidates(x_opt: np.ndarray, n_rand: int,
                rng: np.random.Generator) -> np.ndarray:
    """Principal eigenvector plus Gaussian randomisations, one per row."""
    x_opt = np.asarray(x_opt, dtype=np.complex128)
    n = x_opt.shape[0]
    lam, vec = np.linalg.eigh(hermitian_part(x_opt))
    principal = vec[:, -1] * np.sqrt(max(float(lam[-1]), 0.0))
    if n_rand > 0:
        factor = _psd_factor(x_opt)
        xi = complex_normal(rng, (n_rand, n))
        draws = xi @ factor.conj().T
        return np.vstack([principal[None, :], draws])
    return principal[None, :]


def extract_beamformer(x_opt: np.ndarray, big_h: np.ndarray,
                       config: SystemConfig, n_rand: int,
                       rng: np.random.Generator,
                       incumbent: Beamformer | None = None) -> Beamformer:
    """Feasible constant-modulus beamformer from a relaxed lifted solution.

    Each candidate is projected entrywise onto the per-antenna modulus
    (zero entries get phase 0) and scored on the true quadratic objective
    w^H big_h w; the best candidate wins, first on ties.  An incumbent
    iterate, when given, competes as an extra candidate so the extraction
    never returns anything worse than it.
    """
    cands = _candidates(x_opt, n_rand, rng)
    w_rows = config.beam_amplitude * np.exp(1j * np.angle(cands))
    if incumbent is not None:
        w_rows = np.vstack([w_rows, incumbent.w[None, :]])
    scores = np.real(np.einsum("bn,nm,bm->b", w_rows.conj(), np.asarray(big_h), w_rows))
    return Beamformer.from_phases(np.angle(w_rows[int(np.argmax(scores))]), config)


def lifted_phase_score(big_f: np.ndarray, v: np.ndarray) -> float:
    """Quadratic score [v, 1] big_f [v, 1]^H in the row-vector convention."""
    aug = np.concatenate([np.asarray(v, dtype=np.complex128), [1.0 + 0.0j]])
    return float(np.real(aug @ (np.asarray(big_f) @ aug.conj())))


def extract_phases(x_opt: np.ndarray, big_f: np.ndarray, n_rand: int,
                   rng: np.random.Generator,
                   incumbent: PhaseProfile | None = None) -> PhaseProfile:
    """Feasible unit-modulus phase profile from a relaxed lifted solution.

    The lifted variable is [conj(v), 1] up to a global phase, so each
    candidate is rotated to make its last entry real positive, truncated,
    conjugated and projected onto unit modulus.  When the last entry is
    numerically zero the global phase is instead chosen to maximise the
    linear term of the score directly.  Candidates are scored with
    `lifted_phase_score`; an incumbent profile, when given, competes as an
    extra candidate so the extraction never returns anything worse than it.
    """
    x_opt = np.asarray(x_opt, dtype=np.complex128)
    big_f = np.asarray(big_f, dtype=np.complex128)
    l_dim = x_opt.shape[0] - 1
    f12 = big_f[:l_dim, l_dim]

    best_alpha: np.ndarray | None = None
    best_score = -np.inf
    for cand in _candidates(x_opt, n_rand, rng):
        tail = cand[l_dim]
        if np.abs(tail) >= 1e-9:
            rotated = cand * np.exp(-1j * np.angle(tail))
            alpha = -np.angle(rotated[:l_dim])
        else:
            # Global phase is unconstrained; pick the rotation maximising
            # 2 Re(e^{j phi} v . f12) in closed form.
            v0 = np.exp(-1j * np.angle(cand[:l_dim]))
            lin = np.dot(v0, f12)
            phi = -np.angle(lin) if np.abs(lin) > 0.0 else 0.0
            alpha = np.angle(v0) + phi
        score = lifted_phase_score(big_f, np.exp(1j * alpha))
        if score > best_score:
            best_score = score
            best_alpha = alpha
    if incumbent is not None:
        score = lifted_phase_score(big_f, incumbent.v)
        if score > best_score:
            best_score = score
            best_alpha = incumbent.alpha
    assert best_alpha is not None
    return PhaseProfile(alpha=best_alpha)


def sdp_update_w(ops: DerivedOperators, config: SystemConfig,
                 rng: np.random.Generator, tol: float = 1e-7,
                 n_rand: int = 200,
                 incumbent: Beamformer | None = None) -> tuple[Beamformer, float]:
    """Beamformer half-step: relax, solve, extract.

    Returns the feasible beamformer and the relaxed optimum of
    Re tr(big_h X), an upper bound on the achievable J at these phases.
    """
    problem = DiagSdpProblem(cost=ops.big_h,
                             diag_values=np.full(config.n_tx, config.per_antenna_power))
    solution = solve_diag_sdp(problem, tol=tol)
    beam = extract_beamformer(solution.x_opt, ops.big_h, config, n_rand, rng,
                              incumbent=incumbent)
    return beam, solution.objective


def sdp_update_v(ops: DerivedOperators, config: SystemConfig,
                 rng: np.random.Generator, tol: float = 1e-7,
                 n_rand: int = 200,
                 incumbent: PhaseProfile | None = None) -> tuple[PhaseProfile, float]:
    """Phase half-step: relax the lifted unit-diagonal program, extract.

    Returns the feasible profile and the relaxed bound expressed in
    composite-objective units (tr(big_f X) plus the v-independent offset).
    """
    problem = DiagSdpProblem(cost=ops.big_f,
                             diag_values=np.ones(config.n_irs + 1))
    solution = solve_diag_sdp(problem, tol=tol)
    phases = extract_phases(solution.x_opt, ops.big_f, n_rand, rng,
                            incumbent=incumbent)
    return phases, solution.objective + ops.offset
