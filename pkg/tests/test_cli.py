"""Experiment CLI: CSV contracts, determinism, error handling."""

import csv
import io

import numpy as np
import pytest

from iswpt.cli import (ExperimentSpec, _format_cell, experiment_from_mapping,
                       main)
from iswpt.scenario import SystemConfig


BASE_SPEC = """
n_tx = 4
n_ehd = 2
n_targets = 2
target_angles_deg = -45, 45
seed = 9
n_trials = 1
sweep_l = 4, 6
sweep_rho = 0.3, 0.7
angle_step_deg = 15
max_outer_iters = 1
algorithms = sdp, lc
"""


def write_spec(tmp_path, text=BASE_SPEC, name="exp.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# iswpt ")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return lines[0], rows


def run_cli(args):
    return main(list(args))


def test_experiment_spec_validation():
    config = SystemConfig(n_tx=4, n_irs=4, n_ehd=2, n_targets=2,
                          target_angles=(-0.5, 0.5))
    with pytest.raises(ValueError):
        ExperimentSpec(config=config, algorithms=())
    with pytest.raises(ValueError):
        ExperimentSpec(config=config, algorithms=("lc", "lc"))
    with pytest.raises(ValueError):
        ExperimentSpec(config=config, algorithms=("gradient",))
    with pytest.raises(ValueError):
        ExperimentSpec(config=config, n_trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(config=config, sweep_rho=(1.5,))
    with pytest.raises(ValueError):
        ExperimentSpec(config=config, angle_step_deg=0.0)


def test_experiment_from_mapping_splits_layers():
    exp = experiment_from_mapping({
        "n_tx": "6",
        "p0_dbm": "30",
        "algorithms": "lc",
        "n_trials": "4",
        "sweep_l": "4, 8",
        "sweep_rho": "0.2, 0.8",
        "angle_step_deg": "2.5",
    }, seed=5)
    assert exp.config.n_tx == 6
    assert exp.config.p0 == pytest.approx(1000.0)
    assert exp.config.seed == 5
    assert exp.algorithms == ("lc",)
    assert exp.n_trials == 4
    assert exp.sweep_l == (4, 8)
    assert exp.sweep_rho == (0.2, 0.8)
    assert exp.angle_step_deg == 2.5


def test_format_cell():
    assert _format_cell(3) == "3"
    assert _format_cell("lc") == "lc"
    assert _format_cell(0.1) == "0.10000000000000001"  # 17 significant digits
    with pytest.raises(TypeError):
        _format_cell(True)


def test_convergence_row_count_contract(tmp_path):
    spec = write_spec(tmp_path)
    out = tmp_path / "conv.csv"
    assert run_cli(["convergence", "--spec", spec, "--out", str(out)]) == 0
    comment, rows = read_csv(out)
    assert "seed=9" in comment and "config=" in comment

    # One init row plus one row per completed outer iteration; with the
    # iteration cap at 1 that is exactly (algorithms x L values) rows
    # beyond the init rows.
    init_rows = [r for r in rows if r["iteration"] == "0"]
    step_rows = [r for r in rows if r["iteration"] != "0"]
    assert len(init_rows) == 2 * 2
    assert len(step_rows) == 2 * 2
    assert all(r["iteration"] == "1" for r in step_rows)
    assert all(float(r["elapsed_ms"]) == 0.0 for r in init_rows)
    assert all(float(r["elapsed_ms"]) > 0.0 for r in step_rows)


def test_convergence_lc_objective_nondecreasing(tmp_path):
    spec = write_spec(tmp_path, BASE_SPEC.replace("max_outer_iters = 1",
                                                  "max_outer_iters = 5")
                                         .replace("algorithms = sdp, lc",
                                                  "algorithms = lc")
                                         .replace("n_trials = 1",
                                                  "n_trials = 2"))
    out = tmp_path / "conv.csv"
    assert run_cli(["convergence", "--spec", spec, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    groups = {}
    for row in rows:
        key = (row["algorithm"], row["L"], row["trial"])
        groups.setdefault(key, []).append((int(row["iteration"]),
                                           float(row["objective"])))
    assert groups
    for steps in groups.values():
        steps.sort()
        values = [obj for _, obj in steps]
        for before, after in zip(values, values[1:]):
            assert after >= before - 1e-9 * max(1.0, abs(before))


def test_convergence_rejects_rps(tmp_path, capsys):
    spec = write_spec(tmp_path, BASE_SPEC.replace("algorithms = sdp, lc",
                                                  "algorithms = rps"))
    code = run_cli(["convergence", "--spec", spec,
                    "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_sweep_l_row_count_and_columns(tmp_path):
    spec = write_spec(tmp_path, BASE_SPEC.replace("algorithms = sdp, lc",
                                                  "algorithms = lc, rps")
                                         .replace("n_trials = 1",
                                                  "n_trials = 2"))
    out = tmp_path / "sweep.csv"
    assert run_cli(["sweep-l", "--spec", spec, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 2 * 2  # algorithms x L values
    assert {r["algorithm"] for r in rows} == {"lc", "rps"}
    for row in rows:
        assert int(row["n_trials"]) == 2
        assert float(row["mean_harvested_energy"]) > 0.0
        assert float(row["std"]) >= 0.0


def test_sweep_l_single_point(tmp_path):
    spec = write_spec(tmp_path, BASE_SPEC.replace("sweep_l = 4, 6",
                                                  "sweep_l = 5")
                                         .replace("algorithms = sdp, lc",
                                                  "algorithms = lc"))
    out = tmp_path / "sweep.csv"
    assert run_cli(["sweep-l", "--spec", spec, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 1
    assert rows[0]["L"] == "5"
    assert rows[0]["std"] == "0"  # single trial


def test_sweep_rho_boundary_trend(tmp_path):
    spec = write_spec(tmp_path, BASE_SPEC.replace("sweep_rho = 0.3, 0.7",
                                                  "sweep_rho = 0.0, 0.5, 1.0")
                                         .replace("algorithms = sdp, lc",
                                                  "algorithms = lc")
                                         .replace("max_outer_iters = 1",
                                                  "max_outer_iters = 10")
                                         .replace("n_trials = 1",
                                                  "n_trials = 2"))
    out = tmp_path / "rho.csv"
    assert run_cli(["sweep-rho", "--spec", spec, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 3
    rhos = [float(r["rho"]) for r in rows]
    assert rhos == sorted(rhos)
    energy = [float(r["mean_harvested_energy"]) for r in rows]
    sensing = [float(r["mean_beampattern_sum"]) for r in rows]
    # More weight on power transfer: harvested energy cannot drop and the
    # beampattern sum cannot rise.
    assert all(b >= a * (1.0 - 1e-9) for a, b in zip(energy, energy[1:]))
    assert all(b <= a * (1.0 + 1e-9) for a, b in zip(sensing, sensing[1:]))


def test_beampattern_grid_rows(tmp_path):
    spec = write_spec(tmp_path)
    out = tmp_path / "pattern.csv"
    assert run_cli(["beampattern", "--spec", spec, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    angles = np.arange(-90.0, 90.1, 15.0)
    assert len(rows) == 2 * 2 * len(angles)  # algorithms x L values x grid
    sdp_l4 = [r for r in rows if r["algorithm"] == "sdp" and r["L"] == "4"]
    np.testing.assert_allclose([float(r["angle_deg"]) for r in sdp_l4], angles)
    for row in rows[:30]:
        gain = float(row["gain"])
        gain_db = float(row["gain_db"])
        if gain > 0.0:
            assert gain_db == pytest.approx(10.0 * np.log10(gain), rel=1e-12)


def test_csv_determinism(tmp_path):
    spec = write_spec(tmp_path)
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert run_cli(["sweep-l", "--spec", spec, "--out", str(out_a)]) == 0
    assert run_cli(["sweep-l", "--spec", spec, "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()

    out_c = tmp_path / "c.csv"
    assert run_cli(["sweep-l", "--spec", spec, "--seed", "10",
                    "--out", str(out_c)]) == 0
    assert out_a.read_bytes() != out_c.read_bytes()


def test_cli_overrides(tmp_path):
    spec = write_spec(tmp_path)
    out = tmp_path / "o.csv"
    assert run_cli(["sweep-l", "--spec", spec, "--seed", "7", "--trials", "3",
                    "--algo", "lc", "--out", str(out)]) == 0
    comment, rows = read_csv(out)
    assert "seed=7" in comment
    assert {r["algorithm"] for r in rows} == {"lc"}
    assert all(int(r["n_trials"]) == 3 for r in rows)


def test_default_output_name(tmp_path, monkeypatch):
    spec = write_spec(tmp_path)
    monkeypatch.chdir(tmp_path)
    assert run_cli(["sweep-l", "--spec", spec]) == 0
    assert (tmp_path / "sweep_l.csv").exists()


def test_missing_spec_file_fails_cleanly(tmp_path, capsys):
    code = run_cli(["sweep-l", "--spec", str(tmp_path / "nope.txt"),
                    "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_algorithm_fails_cleanly(tmp_path, capsys):
    spec = write_spec(tmp_path)
    code = run_cli(["sweep-l", "--spec", spec, "--algo", "magic",
                    "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "error:" in capsys.readouterr().err
