"""Solution value types, derived operators and the composite objective.

The design variables are a constant-modulus transmit beamformer w (each of
the N entries has modulus sqrt(p0/N)) and a unit-modulus reflection profile
v (L phase factors).  Writing g = H_br w for the surface illumination, the
two figures of merit are

* harvested power at device k:   eta * |h_tilde_k w|^2, where
  h_tilde_k = h_ru_k diag(v) H_br + h_d_k is the effective device channel;
* sensing gain toward angle m:   |a(theta_m) diag(v) H_br w|^2.

Both are quadratic forms in either variable once the other is frozen, and
this module materialises the matrices of those forms:

with c_k = h_ru_k * g, a_k = h_d_k w, d_m = a(theta_m) * g  (elementwise
products against g), the scalar identities

    v . c_k + a_k = h_tilde_k w        v . d_m = a(theta_m) diag(v) H_br w

hold with plain unconjugated dot products, and the weighted objective

    J = rho*eta*p0 * sum_k |h_tilde_k w|^2 + (1-rho) * sum_m |...|^2

equals both v F11 v^H + 2 Re(v . f12) + const and w^H H w for the operators
built here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ChannelSet, SystemConfig, steering_matrix


def hermitian_part(mat: np.ndarray) -> np.ndarray:
    """Symmetrise a nearly Hermitian matrix as (A + A^H) / 2."""
    return 0.5 * (mat + mat.conj().T)


@dataclass(frozen=True)
class Beamformer:
    """Constant-modulus transmit beamformer, stored as a length-N vector."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.complex128)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("w must be a nonempty 1-D complex vector")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @classmethod
    def from_phases(cls, phases: np.ndarray, config: SystemConfig) -> "Beamformer":
        """Build sqrt(p0/N) * exp(j*phase) per antenna; the only constructor
        used by the optimizers, so the modulus constraint holds by shape."""
        phases = np.asarray(phases, dtype=float)
        if phases.shape != (config.n_tx,):
            raise ValueError(f"expected {config.n_tx} phases, got {phases.shape}")
        return cls(w=config.beam_amplitude * np.exp(1j * phases))

    def modulus_error(self, config: SystemConfig) -> float:
        """Worst-case deviation of |w_n| from sqrt(p0/N)."""
        return float(np.max(np.abs(np.abs(self.w) - config.beam_amplitude)))

    def validate(self, config: SystemConfig, tol: float = 1e-12) -> None:
        if self.w.shape != (config.n_tx,):
            raise ValueError(f"beamformer length {self.w.size} != n_tx {config.n_tx}")
        err = self.modulus_error(config)
        if err > tol:
            raise ValueError(f"per-antenna modulus off by {err:.3e} (> {tol:.1e})")


def wrap_angle(alpha: np.ndarray) -> np.ndarray:
    """Wrap angles into [-pi, pi)."""
    return np.mod(np.asarray(alpha, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class PhaseProfile:
    """Unit-modulus reflection profile of an L-element surface.

    The phases `alpha` (wrapped to [-pi, pi)) are the source of truth; the
    complex factors v = exp(j*alpha) are materialised once at construction
    so |v_l| = 1 holds to machine precision by construction.
    """

    alpha: np.ndarray

    def __post_init__(self) -> None:
        alpha = wrap_angle(self.alpha)
        if alpha.ndim != 1 or alpha.size < 1:
            raise ValueError("alpha must be a nonempty 1-D real vector")
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        v = np.exp(1j * alpha)
        v.flags.writeable = False
        object.__setattr__(self, "_v", v)

    @property
    def v(self) -> np.ndarray:
        return self._v

    @classmethod
    def from_v(cls, v: np.ndarray) -> "PhaseProfile":
        """Project an arbitrary nonzero complex vector onto unit modulus."""
        return cls(alpha=np.angle(np.asarray(v, dtype=np.complex128)))

    def augmented(self) -> np.ndarray:
        """The lifted vector [v, 1] used by the phase-side relaxation."""
        return np.concatenate([self.v, [1.0 + 0.0j]])

    def modulus_error(self) -> float:
        return float(np.max(np.abs(np.abs(self.v) - 1.0)))


@dataclass(frozen=True)
class DerivedOperators:
    """All matrices and vectors derived from (channels, v, w).

    The v-side quantities (c_vecs, a_scalars, d_vecs, f11, f12, big_f)
    depend on w only; the w-side quantities (h_tilde, h_hat, big_h) depend
    on v only.  f11, big_f and big_h are exactly Hermitian (symmetrised).
    """

    h_tilde: np.ndarray    # (K, N) effective device channels
    h_hat: np.ndarray      # (M, N) effective sensing channels
    c_vecs: np.ndarray     # (K, L) cascade vectors, rows c_k
    a_scalars: np.ndarray  # (K,) direct-link scalars a_k
    d_vecs: np.ndarray     # (M, L) sensing cascade vectors, rows d_m
    f11: np.ndarray        # (L, L) PSD quadratic part of the phase objective
    f12: np.ndarray        # (L,) linear part of the phase objective
    big_f: np.ndarray      # (L+1, L+1) lifted phase-side matrix
    big_h: np.ndarray      # (N, N) PSD beamformer-side matrix
    offset: float          # v-independent term rho*eta*p0*sum_k |a_k|^2


def _cascade_terms(channels: ChannelSet, beam: Beamformer,
                   config: SystemConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """c_k, a_k, d_m for the current beamformer (v-side parameterisation)."""
    g = channels.h_br @ beam.w                          # (L,) illumination
    c_vecs = channels.h_ru * g[None, :]                 # rows: h_ru_k * g
    a_scalars = channels.h_d @ beam.w                   # (K,)
    steer = steering_matrix(np.asarray(config.target_angles),
                            config.n_irs, config.delta)
    d_vecs = steer * g[None, :]                         # rows: a(theta_m) * g
    return c_vecs, a_scalars, d_vecs


def _effective_channels(channels: ChannelSet, phases: PhaseProfile,
                        config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """h_tilde_k and h_hat_m for the current phase profile (w-side)."""
    v = phases.v
    h_tilde = (channels.h_ru * v[None, :]) @ channels.h_br + channels.h_d
    steer = steering_matrix(np.asarray(config.target_angles),
                            config.n_irs, config.delta)
    h_hat = (steer * v[None, :]) @ channels.h_br
    return h_tilde, h_hat


def energy_weight(config: SystemConfig) -> float:
    """Weight rho*eta*p0 multiplying the summed harvested-power term in J."""
    return config.rho * config.eta * config.p0


def build_operators(channels: ChannelSet, phases: PhaseProfile,
                    beam: Beamformer, config: SystemConfig) -> DerivedOperators:
    """Materialise every derived operator at the current iterate."""
    c_vecs, a_scalars, d_vecs = _cascade_terms(channels, beam, config)
    h_tilde, h_hat = _effective_channels(channels, phases, config)

    w_e = energy_weight(config)
    w_s = 1.0 - config.rho
    # sum_k c_k c_k^H == C^T conj(C) for row-stacked C, likewise for d.
    f11 = hermitian_part(w_e * (c_vecs.T @ c_vecs.conj())
                         + w_s * (d_vecs.T @ d_vecs.conj()))
    f12 = w_e * (c_vecs.T @ a_scalars.conj())
    l_dim = config.n_irs
    big_f = np.zeros((l_dim + 1, l_dim + 1), dtype=np.complex128)
    big_f[:l_dim, :l_dim] = f11
    big_f[:l_dim, l_dim] = f12
    big_f[l_dim, :l_dim] = f12.conj()
    big_f = hermitian_part(big_f)
    big_h = hermitian_part(w_e * (h_tilde.conj().T @ h_tilde)
                           + w_s * (h_hat.conj().T @ h_hat))
    offset = float(w_e * np.sum(np.abs(a_scalars) ** 2))
    return DerivedOperators(h_tilde=h_tilde, h_hat=h_hat, c_vecs=c_vecs,
                            a_scalars=a_scalars, d_vecs=d_vecs, f11=f11,
                            f12=f12, big_f=big_f, big_h=big_h, offset=offset)


def objective_for_phase_batch(channels: ChannelSet, beam: Beamformer,
                              config: SystemConfig, v_rows: np.ndarray) -> np.ndarray:
    """Composite objective J evaluated for a batch of phase vectors.

    `v_rows` is (B, L); returns a length-B real array.  This is the single
    evaluation path for J: the scalar entry point and the exhaustive
    searches all route through here.
    """
    v_rows = np.atleast_2d(np.asarray(v_rows, dtype=np.complex128))
    c_vecs, a_scalars, d_vecs = _cascade_terms(channels, beam, config)
    energy = np.abs(v_rows @ c_vecs.T + a_scalars[None, :]) ** 2
    sensing = np.abs(v_rows @ d_vecs.T) ** 2
    return (energy_weight(config) * energy.sum(axis=1)
            + (1.0 - config.rho) * sensing.sum(axis=1))


def objective_for_beam_batch(channels: ChannelSet, phases: PhaseProfile,
                             config: SystemConfig, w_rows: np.ndarray) -> np.ndarray:
    """Composite objective J for a batch of beamformers at fixed phases."""
    w_rows = np.atleast_2d(np.asarray(w_rows, dtype=np.complex128))
    h_tilde, h_hat = _effective_channels(channels, phases, config)
    energy = np.abs(w_rows @ h_tilde.T) ** 2
    sensing = np.abs(w_rows @ h_hat.T) ** 2
    return (energy_weight(config) * energy.sum(axis=1)
            + (1.0 - config.rho) * sensing.sum(axis=1))


def composite_objective(channels: ChannelSet, phases: PhaseProfile,
                        beam: Beamformer, config: SystemConfig) -> float:
    """Scalar J at one iterate (see module docstring for the formula)."""
    return float(objective_for_phase_batch(channels, beam, config,
                                           phases.v[None, :])[0])


def harvested_energy(channels: ChannelSet, phases: PhaseProfile,
                     beam: Beamformer, config: SystemConfig, k: int) -> float:
    """Harvested power eta * |h_tilde_k w|^2 at device k (0-based).

    This is the user-facing per-device metric; the transmit power budget
    enters once, through the modulus of w.
    """
    if not 0 <= k < config.n_ehd:
        raise IndexError(f"device index {k} out of range [0, {config.n_ehd})")
    h_tilde, _ = _effective_channels(channels, phases, config)
    return float(config.eta * np.abs(h_tilde[k] @ beam.w) ** 2)


def beampattern_profile(channels: ChannelSet, phases: PhaseProfile,
                        beam: Beamformer, thetas: np.ndarray,
                        delta: float = 0.5) -> np.ndarray:
    """Sensing beampattern |a(theta) diag(v) H_br w|^2 over a grid of angles."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    steer = steering_matrix(thetas, phases.v.size, delta)
    u = phases.v * (channels.h_br @ beam.w)
    return np.abs(steer @ u) ** 2


def beampattern_gain(channels: ChannelSet, phases: PhaseProfile,
                     beam: Beamformer, theta: float, delta: float = 0.5) -> float:
    """Beampattern at a single angle."""
    return float(beampattern_profile(channels, phases, beam,
                                     np.asarray([theta]), delta)[0])


def solution_metrics(channels: ChannelSet, phases: PhaseProfile,
                     beam: Beamformer, config: SystemConfig) -> tuple[float, float, float]:
    """(J, summed harvested power, summed target beampattern) at an iterate.

    J decomposes as rho*p0*harvested_sum + (1-rho)*beampattern_sum since
    harvested_sum already carries eta.
    """
    h_tilde, h_hat = _effective_channels(channels, phases, config)
    harvested_sum = float(config.eta * np.sum(np.abs(h_tilde @ beam.w) ** 2))
    beampattern_sum = float(np.sum(np.abs(h_hat @ beam.w) ** 2))
    j_value = config.rho * config.p0 * harvested_sum \
        + (1.0 - config.rho) * beampattern_sum
    return j_value, harvested_sum, beampattern_sum
