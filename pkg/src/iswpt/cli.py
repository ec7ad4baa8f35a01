"""Command-line experiment harness producing deterministic CSV artifacts.

Subcommands
-----------
convergence   per-outer-iteration objective traces for each algorithm/L/trial
sweep-l       mean harvested energy versus number of reflecting elements
sweep-rho     harvested energy and beampattern sum versus trade-off factor
beampattern   angular gain profile of one converged solution per algorithm/L
validate      run the built-in acceptance checks and print one line per check

Every CSV starts with a comment line ``# iswpt <version> seed=<seed>
config=<hash>`` followed by a header row; floats are written with 17
significant digits and LF line endings.  Output is a pure function of the
spec file and seed:

* the ``elapsed_ms`` column of ``convergence`` is a nominal per-iteration
  cost estimate (a fixed operation-count model charged at 1e6 operations
  per millisecond), not measured wall time, which would differ between
  otherwise identical runs;
* channels are drawn once per trial at the largest swept element count and
  sliced down for smaller L, so sweep points share randomness (common
  random numbers) and trends are not washed out by draw-to-draw noise;
* ``sweep-rho`` runs each trial as a continuation: the solution at one
  trade-off point warm-starts the next, and all of a trial's solutions
  form a candidate pool from which each point reports the best-scoring
  member at its own weights (see `sweep_rho_trial`).

Stream layout: channels from ``trial_stream(seed, 0, trial)``, algorithm
randomness from ``trial_stream(seed, 1, algo_id, point_idx, trial)`` with
algo ids sdp=0, lc=1, rps=2, shared initial phases from
``trial_stream(seed, 2, trial)``.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .ao import (ALGORITHM_LC, ALGORITHM_SDP, AoConfig, AoTrace, INIT_GIVEN,
                 run_ao, run_rps)
from .objective import PhaseProfile, beampattern_profile
from .scenario import ChannelSet, SystemConfig, config_from_mapping, \
    parse_kv_file, sample_channels, trial_stream

ALGORITHM_RPS = "rps"
_ALGO_STREAM_ID = {ALGORITHM_SDP: 0, ALGORITHM_LC: 1, ALGORITHM_RPS: 2}

_EXPERIMENT_INT_KEYS = {"n_trials", "max_outer_iters"}
_EXPERIMENT_FLOAT_KEYS = {"angle_step_deg", "rel_tol"}
_EXPERIMENT_STR_KEYS = {"algorithms", "out"}
_EXPERIMENT_LIST_KEYS = {"sweep_l", "sweep_rho"}
_EXPERIMENT_KEYS = (_EXPERIMENT_INT_KEYS | _EXPERIMENT_FLOAT_KEYS
                    | _EXPERIMENT_STR_KEYS | _EXPERIMENT_LIST_KEYS)

_DEFAULT_RHO_GRID = tuple(round(0.1 * i, 10) for i in range(1, 10))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a scenario plus sweep/averaging knobs."""

    config: SystemConfig
    algorithms: tuple[str, ...] = (ALGORITHM_SDP, ALGORITHM_LC)
    n_trials: int = 50
    sweep_l: tuple[int, ...] = (10, 20, 30, 40)
    sweep_rho: tuple[float, ...] = _DEFAULT_RHO_GRID
    angle_step_deg: float = 1.0
    max_outer_iters: int = 30
    rel_tol: float = 1e-4
    out: str | None = None

    def __post_init__(self) -> None:
        if not self.algorithms:
            raise ValueError("algorithms must be a nonempty list")
        for name in self.algorithms:
            if name not in _ALGO_STREAM_ID:
                raise ValueError(f"unknown algorithm {name!r}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError("duplicate algorithm in list")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not self.sweep_l or any(l < 1 for l in self.sweep_l):
            raise ValueError("sweep_l must be a nonempty list of positive ints")
        if not self.sweep_rho or any(not 0.0 <= r <= 1.0 for r in self.sweep_rho):
            raise ValueError("sweep_rho entries must lie in [0, 1]")
        if not self.angle_step_deg > 0.0:
            raise ValueError("angle_step_deg must be > 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.rel_tol < 0.0:
            raise ValueError("rel_tol must be >= 0")


def _parse_algorithms(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def experiment_from_mapping(mapping: dict[str, str],
                            **overrides: object) -> ExperimentSpec:
    """Build an ExperimentSpec from key=value text plus keyword overrides.

    Keys not recognised as experiment knobs are forwarded to the scenario
    parser, so one flat file configures both layers.
    """
    fields: dict[str, object] = {}
    scenario_items: dict[str, str] = {}
    for key, value in mapping.items():
        if key in _EXPERIMENT_INT_KEYS:
            fields[key] = int(value)
        elif key in _EXPERIMENT_FLOAT_KEYS:
            fields[key] = float(value)
        elif key == "algorithms":
            fields[key] = _parse_algorithms(value)
        elif key == "out":
            fields[key] = value
        elif key == "sweep_l":
            fields[key] = tuple(int(part) for part in value.split(","))
        elif key == "sweep_rho":
            fields[key] = tuple(float(part) for part in value.split(","))
        else:
            scenario_items[key] = value
    config = config_from_mapping(scenario_items)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "seed":
            config = dataclasses.replace(config, seed=int(value))
        elif key == "algorithms" and isinstance(value, str):
            fields[key] = _parse_algorithms(value)
        else:
            fields[key] = value
    return ExperimentSpec(config=config, **fields)


def load_experiment(path: str | None, **overrides: object) -> ExperimentSpec:
    mapping = parse_kv_file(path) if path is not None else {}
    return experiment_from_mapping(mapping, **overrides)


# ---------------------------------------------------------------------------
# CSV assembly


def _format_cell(value: object) -> str:
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean CSV cells are ambiguous; write 0/1 ints")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def config_digest(exp: ExperimentSpec, command: str) -> str:
    """Short stable hash of the full configuration behind one CSV."""
    items = dataclasses.asdict(exp.config)
    payload = [f"command={command}"]
    payload += [f"{key}={items[key]!r}" for key in sorted(items) if key != "seed"]
    payload += [
        f"algorithms={','.join(exp.algorithms)}",
        f"n_trials={exp.n_trials}",
        f"sweep_l={','.join(str(l) for l in exp.sweep_l)}",
        f"sweep_rho={','.join(repr(r) for r in exp.sweep_rho)}",
        f"angle_step_deg={exp.angle_step_deg!r}",
        f"max_outer_iters={exp.max_outer_iters}",
        f"rel_tol={exp.rel_tol!r}",
    ]
    return hashlib.sha256("\n".join(payload).encode()).hexdigest()[:12]


def render_csv(exp: ExperimentSpec, command: str, header: list[str],
               rows: list[tuple]) -> str:
    comment = f"# iswpt {__version__} seed={exp.config.seed} config={config_digest(exp, command)}"
    lines = [comment, ",".join(header)]
    lines += [",".join(_format_cell(cell) for cell in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write_output(text: str, path: str) -> None:
    try:
        with open(path, "w", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Shared runners


def _point_config(exp: ExperimentSpec, n_irs: int) -> SystemConfig:
    return dataclasses.replace(exp.config, n_irs=n_irs)


def _trial_channels(exp: ExperimentSpec, trial: int, l_max: int) -> ChannelSet:
    cfg = _point_config(exp, l_max)
    return sample_channels(cfg, trial_stream(exp.config.seed, 0, trial))


def _slice_channels(channels: ChannelSet, n_irs: int) -> ChannelSet:
    """Restrict a draw to the first n_irs reflecting elements.

    Entries are iid across elements, so the slice has the same law as a
    direct draw at the smaller size while staying coupled across sizes.
    """
    return ChannelSet(h_br=channels.h_br[:n_irs, :].copy(),
                      h_ru=channels.h_ru[:, :n_irs].copy(),
                      h_d=channels.h_d.copy())


def _algo_rng(exp: ExperimentSpec, algorithm: str, point_idx: int,
              trial: int) -> np.random.Generator:
    return trial_stream(exp.config.seed, 1, _ALGO_STREAM_ID[algorithm],
                        point_idx, trial)


def _run_point(exp: ExperimentSpec, algorithm: str, config: SystemConfig,
               channels: ChannelSet, point_idx: int, trial: int,
               init_phases: PhaseProfile | None = None,
               init_beam=None) -> AoTrace:
    rng = _algo_rng(exp, algorithm, point_idx, trial)
    if algorithm == ALGORITHM_RPS:
        return run_rps(config, channels, rng, max_iters=exp.max_outer_iters,
                       rel_tol=exp.rel_tol)
    if init_phases is not None:
        ao = AoConfig(algorithm=algorithm, max_outer_iters=exp.max_outer_iters,
                      rel_tol=exp.rel_tol, init_mode=INIT_GIVEN,
                      init_phases=init_phases, init_beam=init_beam)
    else:
        ao = AoConfig(algorithm=algorithm, max_outer_iters=exp.max_outer_iters,
                      rel_tol=exp.rel_tol)
    return run_ao(config, ao, channels, rng)


def _nominal_iteration_cost_ms(algorithm: str, n_tx: int, n_irs: int) -> float:
    """Deterministic work estimate for one outer iteration, in milliseconds.

    Counts nominal complex operations (inner-loop caps times quadratic or
    cubic stage costs) and charges them at 1e6 operations per millisecond.
    A wall clock would break byte-level reproducibility of the CSV.
    """
    lifted = n_irs + 1
    if algorithm == ALGORITHM_LC:
        ops = 50 * 16.0 * n_irs ** 2 + 50 * 16.0 * n_tx ** 2
    else:
        ops = 160.0 * (lifted ** 3 + n_tx ** 3)
    return ops / 1e6


# ---------------------------------------------------------------------------
# Subcommands


def cmd_convergence(exp: ExperimentSpec) -> str:
    for name in exp.algorithms:
        if name == ALGORITHM_RPS:
            raise ValueError("convergence traces outer iterations; "
                             "the rps baseline has none")
    header = ["algorithm", "L", "trial", "iteration", "objective", "elapsed_ms"]
    rows: list[tuple] = []
    l_max = max(exp.sweep_l)
    for algorithm in exp.algorithms:
        for point_idx, n_irs in enumerate(exp.sweep_l):
            config = _point_config(exp, n_irs)
            cost_ms = _nominal_iteration_cost_ms(algorithm, config.n_tx, n_irs)
            for trial in range(exp.n_trials):
                channels = _slice_channels(_trial_channels(exp, trial, l_max), n_irs)
                trace = _run_point(exp, algorithm, config, channels, point_idx, trial)
                rows.append((algorithm, n_irs, trial, 0,
                             trace.steps[0].objective, 0.0))
                for step in trace.steps:
                    if step.stage == "v":
                        rows.append((algorithm, n_irs, trial, step.outer_iter,
                                     step.objective, step.outer_iter * cost_ms))
    return render_csv(exp, "convergence", header, rows)


def cmd_sweep_l(exp: ExperimentSpec) -> str:
    header = ["algorithm", "L", "mean_harvested_energy", "std", "n_trials"]
    rows: list[tuple] = []
    l_max = max(exp.sweep_l)
    for algorithm in exp.algorithms:
        for point_idx, n_irs in enumerate(exp.sweep_l):
            config = _point_config(exp, n_irs)
            harvested = np.empty(exp.n_trials)
            for trial in range(exp.n_trials):
                channels = _slice_channels(_trial_channels(exp, trial, l_max), n_irs)
                trace = _run_point(exp, algorithm, config, channels, point_idx, trial)
                harvested[trial] = trace.steps[-1].harvested_sum
            std = float(np.std(harvested, ddof=1)) if exp.n_trials > 1 else 0.0
            rows.append((algorithm, n_irs, float(np.mean(harvested)), std,
                         exp.n_trials))
    return render_csv(exp, "sweep-l", header, rows)


def sweep_rho_trial(exp: ExperimentSpec, algorithm: str, trial: int,
                    channels: ChannelSet) -> tuple[np.ndarray, np.ndarray]:
    """Harvested energy and beampattern sum at each trade-off point.

    Optimizing algorithms run the sweep as a continuation (each point
    warm-starts the next) and every converged solution joins a shared
    candidate pool; each point then reports the pool member with the best
    objective at that point's weights (ties broken toward higher harvested
    energy).  Selecting from a common pool by objective value makes the
    reported per-trial curves obey the weighted-sum exchange argument:
    harvested energy cannot decrease, the beampattern sum cannot increase.
    """
    n_points = len(exp.sweep_rho)
    if algorithm == ALGORITHM_RPS:
        harvested = np.empty(n_points)
        sensing = np.empty(n_points)
        for point_idx, rho in enumerate(exp.sweep_rho):
            config = dataclasses.replace(exp.config, rho=float(rho))
            trace = _run_point(exp, algorithm, config, channels, point_idx, trial)
            harvested[point_idx] = trace.steps[-1].harvested_sum
            sensing[point_idx] = trace.steps[-1].beampattern_sum
        return harvested, sensing

    alpha = trial_stream(exp.config.seed, 2, trial).uniform(
        -np.pi, np.pi, exp.config.n_irs)
    init_phases = PhaseProfile(alpha=alpha)
    init_beam = None
    pool_e = np.empty(n_points)
    pool_s = np.empty(n_points)
    for point_idx, rho in enumerate(exp.sweep_rho):
        config = dataclasses.replace(exp.config, rho=float(rho))
        trace = _run_point(exp, algorithm, config, channels, point_idx, trial,
                           init_phases=init_phases, init_beam=init_beam)
        pool_e[point_idx] = trace.steps[-1].harvested_sum
        pool_s[point_idx] = trace.steps[-1].beampattern_sum
        init_phases, init_beam = trace.phases, trace.beam

    energy_scale = exp.config.eta * exp.config.p0
    harvested = np.empty(n_points)
    sensing = np.empty(n_points)
    for point_idx, rho in enumerate(exp.sweep_rho):
        scores = rho * energy_scale * pool_e + (1.0 - rho) * pool_s
        best = int(np.lexsort((pool_e, scores))[-1])
        harvested[point_idx] = pool_e[best]
        sensing[point_idx] = pool_s[best]
    return harvested, sensing


def cmd_sweep_rho(exp: ExperimentSpec) -> str:
    header = ["algorithm", "rho", "mean_harvested_energy",
              "mean_beampattern_sum", "std", "n_trials"]
    rows: list[tuple] = []
    n_points = len(exp.sweep_rho)
    for algorithm in exp.algorithms:
        harvested = np.empty((n_points, exp.n_trials))
        sensing = np.empty((n_points, exp.n_trials))
        for trial in range(exp.n_trials):
            channels = _trial_channels(exp, trial, exp.config.n_irs)
            harvested[:, trial], sensing[:, trial] = sweep_rho_trial(
                exp, algorithm, trial, channels)
        for point_idx, rho in enumerate(exp.sweep_rho):
            vals = harvested[point_idx]
            std = float(np.std(vals, ddof=1)) if exp.n_trials > 1 else 0.0
            rows.append((algorithm, float(rho), float(np.mean(vals)),
                         float(np.mean(sensing[point_idx])), std, exp.n_trials))
    return render_csv(exp, "sweep-rho", header, rows)


def cmd_beampattern(exp: ExperimentSpec) -> str:
    header = ["algorithm", "L", "rho", "angle_deg", "gain", "gain_db"]
    rows: list[tuple] = []
    step = exp.angle_step_deg
    angles_deg = np.arange(-90.0, 90.0 + 0.5 * step, step)
    angles_rad = np.radians(angles_deg)
    l_max = max(exp.sweep_l)
    for algorithm in exp.algorithms:
        for point_idx, n_irs in enumerate(exp.sweep_l):
            config = _point_config(exp, n_irs)
            channels = _slice_channels(_trial_channels(exp, 0, l_max), n_irs)
            trace = _run_point(exp, algorithm, config, channels, point_idx, 0)
            gains = beampattern_profile(channels, trace.phases, trace.beam,
                                        angles_rad, config.delta)
            for angle, gain in zip(angles_deg, gains):
                gain_db = 10.0 * np.log10(gain) if gain > 0.0 else -np.inf
                rows.append((algorithm, n_irs, config.rho, float(angle),
                             float(gain), float(gain_db)))
    return render_csv(exp, "beampattern", header, rows)


def cmd_validate() -> tuple[str, bool]:
    from .validate import run_all_criteria

    results = run_all_criteria()
    lines = [str(result) for result in results]
    all_passed = all(result.passed for result in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n", all_passed


# ---------------------------------------------------------------------------
# Entry point

_DEFAULT_OUT = {
    "convergence": "convergence.csv",
    "sweep-l": "sweep_l.csv",
    "sweep-rho": "sweep_rho.csv",
    "beampattern": "beampattern.csv",
}

_RUNNERS = {
    "convergence": cmd_convergence,
    "sweep-l": cmd_sweep_l,
    "sweep-rho": cmd_sweep_rho,
    "beampattern": cmd_beampattern,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iswpt",
        description="Joint beamforming / reflecting-surface experiments "
                    "written as deterministic CSV.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("convergence", "sweep-l", "sweep-rho", "beampattern", "validate"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--spec", default=None, help="key=value spec file")
        cmd.add_argument("--seed", type=int, default=None, help="override seed")
        cmd.add_argument("--out", default=None, help="output path")
        cmd.add_argument("--trials", type=int, default=None,
                         help="override n_trials")
        cmd.add_argument("--algo", default=None,
                         help="comma-separated algorithm list")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            report, all_passed = cmd_validate()
            sys.stdout.write(report)
            if args.out is not None:
                _write_output(report, args.out)
            return 0 if all_passed else 1
        exp = load_experiment(args.spec, seed=args.seed, n_trials=args.trials,
                              algorithms=args.algo, out=args.out)
        text = _RUNNERS[args.command](exp)
        out_path = exp.out if exp.out is not None else _DEFAULT_OUT[args.command]
        _write_output(text, out_path)
        return 0
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
