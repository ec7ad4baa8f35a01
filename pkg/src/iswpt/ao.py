"""Alternating optimization driver and the random-phase baseline.

One outer iteration updates the beamformer at fixed phases, then the
phases at fixed beamformer.  Either half-step runs in one of two modes:

* "sdp": relax the subproblem to a diagonally constrained SDP, solve it
  with the interior-point method, and extract a feasible iterate by
  Gaussian randomisation.  Relaxed optima are upper bounds and are
  recorded alongside the feasible objective.
* "lc": closed-form SCA step for the beamformer and an inner MM loop for
  the phases.  Every half-step is monotone, so the recorded objective
  sequence is nondecreasing up to floating-point noise.

The trace records the composite objective and the physical metrics after
initialisation and after every half-step, which is what the convergence
experiments and the acceptance checks consume.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import lc, sdp
from .objective import (Beamformer, PhaseProfile, build_operators,
                        solution_metrics)
from .scenario import ChannelSet, SystemConfig

ALGORITHM_SDP = "sdp"
ALGORITHM_LC = "lc"

INIT_RANDOM_PHASES = "random_phases"
INIT_ZERO_PHASES = "zero_phases"
INIT_GIVEN = "given"


@dataclass(frozen=True)
class AoConfig:
    """Knobs of one alternating-optimization run."""

    algorithm: str = ALGORITHM_LC
    max_outer_iters: int = 30
    inner_mm_iters: int = 50         # MM steps per phase half-step (lc)
    inner_sca_iters: int = 50        # SCA steps per beam half-step (lc)
    rel_tol: float = 1e-4            # outer stop on |dJ| < rel_tol * |J|
    mm_rel_tol: float = 1e-6         # inner MM stop on |dg| < tol * |g|
    sca_rel_tol: float = 1e-9        # inner SCA stop on |dq| < tol * |q|
    sdp_tol: float = 1e-7            # interior-point duality gap target
    n_rand: int = 200                # Gaussian randomisations per extraction
    init_mode: str = INIT_RANDOM_PHASES
    init_phases: PhaseProfile | None = None
    init_beam: Beamformer | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in (ALGORITHM_SDP, ALGORITHM_LC):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.inner_mm_iters < 1:
            raise ValueError("inner_mm_iters must be >= 1")
        if self.inner_sca_iters < 1:
            raise ValueError("inner_sca_iters must be >= 1")
        if self.sca_rel_tol < 0.0:
            raise ValueError("sca_rel_tol must be >= 0")
        if self.rel_tol < 0.0:
            raise ValueError("rel_tol must be >= 0")
        if not self.sdp_tol > 0.0:
            raise ValueError("sdp_tol must be > 0")
        if self.n_rand < 0:
            raise ValueError("n_rand must be >= 0")
        if self.init_mode not in (INIT_RANDOM_PHASES, INIT_ZERO_PHASES, INIT_GIVEN):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.init_mode == INIT_GIVEN and self.init_phases is None:
            raise ValueError("init_mode 'given' requires init_phases")


@dataclass(frozen=True)
class AoStep:
    """State snapshot after one half-step (or after initialisation)."""

    index: int                    # half-step counter, 0 = initialisation
    outer_iter: int               # outer iteration, 0 = initialisation
    stage: str                    # "init" | "w" | "v"
    objective: float              # composite J at this iterate
    harvested_sum: float          # eta * sum_k |h_tilde_k w|^2
    beampattern_sum: float        # sum_m gain toward target m
    elapsed_s: float              # wall time since run start
    w_error: float                # max | |w_n| - sqrt(p0/N) |
    v_error: float                # max | |v_l| - 1 |
    relaxed_objective: float | None = None  # SDP bound for this half-step


@dataclass
class AoTrace:
    """Full record of one run plus the final iterates."""

    steps: list[AoStep] = field(default_factory=list)
    beam: Beamformer | None = None
    phases: PhaseProfile | None = None
    converged: bool = False
    n_outer: int = 0
    failure: str | None = None

    def objectives(self) -> np.ndarray:
        return np.asarray([s.objective for s in self.steps])

    def final_objective(self) -> float:
        return self.steps[-1].objective

    def iteration_objectives(self) -> np.ndarray:
        """Objective after each completed outer iteration (index 0 = init)."""
        out = [s.objective for s in self.steps if s.stage in ("init", "v")]
        return np.asarray(out)


def _initial_iterates(config: SystemConfig, ao: AoConfig, channels: ChannelSet,
                      rng: np.random.Generator) -> tuple[PhaseProfile, Beamformer]:
    """Starting point: phases per init_mode, beamformer via one SCA step
    from the all-equal-phase feasible point (unless given explicitly)."""
    if ao.init_mode == INIT_GIVEN:
        phases = ao.init_phases
    elif ao.init_mode == INIT_ZERO_PHASES:
        phases = PhaseProfile(alpha=np.zeros(config.n_irs))
    else:
        phases = PhaseProfile(alpha=rng.uniform(-np.pi, np.pi, size=config.n_irs))
    if ao.init_beam is not None:
        return phases, ao.init_beam
    flat = Beamformer.from_phases(np.zeros(config.n_tx), config)
    ops = build_operators(channels, phases, flat, config)
    beam = lc.sca_update_w(ops.big_h, flat, config)
    return phases, beam


def run_ao(config: SystemConfig, ao: AoConfig, channels: ChannelSet,
           rng: np.random.Generator) -> AoTrace:
    """Run alternating optimization and return its trace.

    Deterministic given (config, ao, channels, rng state).  On SDP solver
    non-convergence the trace is truncated at the last completed half-step
    with `failure` describing the error.
    """
    t0 = time.perf_counter()
    trace = AoTrace()
    phases, beam = _initial_iterates(config, ao, channels, rng)

    def record(index: int, outer: int, stage: str,
               relaxed: float | None = None) -> float:
        j_val, harvested, sensing = solution_metrics(channels, phases, beam, config)
        trace.steps.append(AoStep(
            index=index, outer_iter=outer, stage=stage, objective=j_val,
            harvested_sum=harvested, beampattern_sum=sensing,
            elapsed_s=time.perf_counter() - t0,
            w_error=beam.modulus_error(config),
            v_error=phases.modulus_error(),
            relaxed_objective=relaxed))
        return j_val

    j_prev = record(0, 0, "init")
    if not np.isfinite(ao.rel_tol):
        # An infinite tolerance deems any change converged: report the
        # initialisation as the result without doing an outer iteration.
        trace.converged = True
        trace.beam, trace.phases = beam, phases
        return trace

    index = 0
    for outer in range(1, ao.max_outer_iters + 1):
        try:
            ops = build_operators(channels, phases, beam, config)
            relaxed_w: float | None = None
            if ao.algorithm == ALGORITHM_SDP:
                beam, relaxed_w = sdp.sdp_update_w(ops, config, rng,
                                                   tol=ao.sdp_tol, n_rand=ao.n_rand,
                                                   incumbent=beam)
            else:
                beam = lc.sca_solve(ops.big_h, beam, config,
                                    max_iters=ao.inner_sca_iters,
                                    rel_tol=ao.sca_rel_tol)
            index += 1
            record(index, outer, "w", relaxed_w)

            ops = build_operators(channels, phases, beam, config)
            relaxed_v: float | None = None
            if ao.algorithm == ALGORITHM_SDP:
                phases, relaxed_v = sdp.sdp_update_v(ops, config, rng,
                                                     tol=ao.sdp_tol, n_rand=ao.n_rand,
                                                     incumbent=phases)
            else:
                phases = lc.mm_solve(ops, phases, max_iters=ao.inner_mm_iters,
                                     rel_tol=ao.mm_rel_tol)
            index += 1
            j_new = record(index, outer, "v", relaxed_v)
        except sdp.SdpNonConvergence as exc:
            trace.failure = str(exc)
            break

        trace.n_outer = outer
        if abs(j_new - j_prev) < ao.rel_tol * max(abs(j_prev), 1e-300):
            trace.converged = True
            j_prev = j_new
            break
        j_prev = j_new

    trace.beam, trace.phases = beam, phases
    return trace


def run_rps(config: SystemConfig, channels: ChannelSet,
            rng: np.random.Generator, max_iters: int = 30,
            rel_tol: float = 1e-6) -> AoTrace:
    """Random-phase baseline: phases drawn uniformly once and frozen,
    beamformer still optimized by iterating SCA steps to convergence."""
    t0 = time.perf_counter()
    trace = AoTrace()
    phases = PhaseProfile(alpha=rng.uniform(-np.pi, np.pi, size=config.n_irs))
    beam = Beamformer.from_phases(np.zeros(config.n_tx), config)
    ops = build_operators(channels, phases, beam, config)

    j_prev = None
    for it in range(max_iters):
        beam = lc.sca_update_w(ops.big_h, beam, config)
        j_val, harvested, sensing = solution_metrics(channels, phases, beam, config)
        trace.steps.append(AoStep(
            index=it, outer_iter=it, stage="w", objective=j_val,
            harvested_sum=harvested, beampattern_sum=sensing,
            elapsed_s=time.perf_counter() - t0,
            w_error=beam.modulus_error(config),
            v_error=phases.modulus_error()))
        trace.n_outer = it + 1
        if j_prev is not None and abs(j_val - j_prev) < rel_tol * max(abs(j_prev), 1e-300):
            trace.converged = True
            break
        j_prev = j_val

    trace.beam, trace.phases = beam, phases
    return trace
