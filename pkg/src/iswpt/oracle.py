"""Brute-force reference optimizers over quantized phase grids.

These are deliberately simple exhaustive (or uniform random) searches used
as ground truth for the iterative algorithms on small instances.  The
phase grid has `phase_levels` points -pi + 2*pi*i/levels, i = 0..levels-1,
and exhaustive mode enumerates all levels**dim combinations in
lexicographic order over the digit vector (first element most
significant).  Objective values come from the shared batch evaluators in
`objective`, so the oracle measures exactly the J the algorithms optimise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import (Beamformer, PhaseProfile, objective_for_beam_batch,
                        objective_for_phase_batch)
from .scenario import ChannelSet, SystemConfig

MODE_EXHAUSTIVE = "exhaustive"
MODE_RANDOM = "random"

_CHUNK = 1 << 15


@dataclass(frozen=True)
class SearchBudget:
    """Grid resolution and evaluation cap of one brute-force search."""

    phase_levels: int = 8
    max_evals: int = 1 << 20
    mode: str = MODE_EXHAUSTIVE

    def __post_init__(self) -> None:
        if self.phase_levels < 2:
            raise ValueError("phase_levels must be >= 2")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.mode not in (MODE_EXHAUSTIVE, MODE_RANDOM):
            raise ValueError(f"unknown search mode {self.mode!r}")

    def grid(self) -> np.ndarray:
        """The quantized phase values in [-pi, pi)."""
        i = np.arange(self.phase_levels)
        return -np.pi + 2.0 * np.pi * i / self.phase_levels

    def check_dim(self, dim: int) -> int:
        """Total evaluation count for exhaustive mode; rejects overflow."""
        total = self.phase_levels ** dim
        if self.mode == MODE_EXHAUSTIVE and total > self.max_evals:
            raise ValueError(
                f"exhaustive search needs {total} evaluations for dim {dim}, "
                f"budget allows {self.max_evals}")
        return total


def _digit_block(start: int, stop: int, levels: int, dim: int) -> np.ndarray:
    """Rows start..stop-1 of the lexicographic digit enumeration."""
    idx = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((idx.size, dim), dtype=np.int64)
    for j in range(dim - 1, -1, -1):
        digits[:, j] = idx % levels
        idx = idx // levels
    return digits


def _best_of(scores: np.ndarray, base_index: int,
             best: tuple[float, int]) -> tuple[float, int, bool]:
    """Merge a chunk into the running (score, index) best; strict >
    comparisons keep the smallest index on ties."""
    local = int(np.argmax(scores))
    if float(scores[local]) > best[0]:
        return float(scores[local]), base_index + local, True
    return best[0], best[1], False


def quantized_phase_search(channels: ChannelSet, beam: Beamformer,
                           config: SystemConfig, budget: SearchBudget,
                           rng: np.random.Generator | None = None
                           ) -> tuple[PhaseProfile, float]:
    """Best quantized phase profile at a fixed beamformer.

    Exhaustive mode scans the full grid (chunked, order independent by the
    smallest-lexicographic-index tie rule); random mode scores max_evals
    uniform draws from the grid and requires `rng`.
    """
    dim = config.n_irs
    grid = budget.grid()
    best_score = -np.inf
    best_alpha: np.ndarray | None = None
    if budget.mode == MODE_EXHAUSTIVE:
        total = budget.check_dim(dim)
        best = (-np.inf, -1)
        for start in range(0, total, _CHUNK):
            stop = min(start + _CHUNK, total)
            alphas = grid[_digit_block(start, stop, budget.phase_levels, dim)]
            scores = objective_for_phase_batch(channels, beam, config,
                                               np.exp(1j * alphas))
            new_best = _best_of(scores, start, best)
            if new_best[2]:
                best = new_best[:2]
                best_alpha = alphas[best[1] - start]
        best_score = best[0]
    else:
        if rng is None:
            raise ValueError("random mode requires an rng")
        done = 0
        while done < budget.max_evals:
            count = min(_CHUNK, budget.max_evals - done)
            alphas = grid[rng.integers(0, budget.phase_levels, size=(count, dim))]
            scores = objective_for_phase_batch(channels, beam, config,
                                               np.exp(1j * alphas))
            local = int(np.argmax(scores))
            if float(scores[local]) > best_score:
                best_score = float(scores[local])
                best_alpha = alphas[local]
            done += count
    assert best_alpha is not None
    return PhaseProfile(alpha=best_alpha), best_score


def quantized_beam_search(channels: ChannelSet, phases: PhaseProfile,
                          config: SystemConfig, budget: SearchBudget,
                          rng: np.random.Generator | None = None
                          ) -> tuple[Beamformer, float]:
    """Best quantized constant-modulus beamformer at fixed phases."""
    dim = config.n_tx
    grid = budget.grid()
    amp = config.beam_amplitude
    best_score = -np.inf
    best_phase: np.ndarray | None = None
    if budget.mode == MODE_EXHAUSTIVE:
        total = budget.check_dim(dim)
        best = (-np.inf, -1)
        for start in range(0, total, _CHUNK):
            stop = min(start + _CHUNK, total)
            w_phase = grid[_digit_block(start, stop, budget.phase_levels, dim)]
            scores = objective_for_beam_batch(channels, phases, config,
                                              amp * np.exp(1j * w_phase))
            new_best = _best_of(scores, start, best)
            if new_best[2]:
                best = new_best[:2]
                best_phase = w_phase[best[1] - start]
        best_score = best[0]
    else:
        if rng is None:
            raise ValueError("random mode requires an rng")
        done = 0
        while done < budget.max_evals:
            count = min(_CHUNK, budget.max_evals - done)
            w_phase = grid[rng.integers(0, budget.phase_levels, size=(count, dim))]
            scores = objective_for_beam_batch(channels, phases, config,
                                              amp * np.exp(1j * w_phase))
            local = int(np.argmax(scores))
            if float(scores[local]) > best_score:
                best_score = float(scores[local])
                best_phase = w_phase[local]
            done += count
    assert best_phase is not None
    return Beamformer.from_phases(best_phase, config), best_score
