import json
from fractions import Fraction

import numpy as np
import pytest

from vdeffuant import experiments as ex
from vdeffuant.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


def test_simulate_voter_reduction_reaches_consensus(tmp_path):
    assert run_cli("simulate", "--F", 1, "--theta", 1, "--sites", 64, "--t-max", 1e6, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["final_state"] == "Consensus"
    assert summary["meta"]["seed"] == 0
    assert summary["meta"]["config"]["F"] == 1
    header = (tmp_path / "timeseries.csv").read_text().splitlines()
    assert header[0].startswith("# version: ")
    assert "time,active_density,frozen_density,blockade_count,consensus_pairs_fraction" in header


def test_simulate_is_byte_identical(tmp_path):
    args = ("simulate", "--F", 3, "--theta", 2, "--sites", 128, "--t-max", 50, "--seed", 4,
            "--ledger", "--genealogy", "--out", tmp_path)
    assert run_cli(*args) == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir() if p.name != "timing.json"}
    assert run_cli(*args) == 0
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir() if p.name != "timing.json"}
    assert first == second
    assert {"timeseries.csv", "summary.json", "snapshot.csv", "ledger.csv", "probes.csv"} <= set(first)


def test_simulate_truncated_class(tmp_path):
    assert run_cli("simulate", "--F", 2, "--theta", 1, "--sites", 256, "--t-max", 5, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["final_state"] == "Truncated"


def test_alternating_blockades_fixate(tmp_path):
    from vdeffuant.engine import Engine
    cfg = ex.ExperimentConfig(F=3, theta=1, sites=64)
    op = np.tile(np.array([0, 7], dtype=np.uint64), 32)
    eng = Engine(cfg.model(), cfg.lattice(), op, np.random.default_rng(0))
    assert eng.run(cfg.stop()).reason.value == "FixatedFrozen"


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run_cli("simulate", "--F", 2, "--theta", 5, "--out", tmp_path) == 2
    assert run_cli("simulate", "--replicates", 0, "--out", tmp_path) == 2
    assert run_cli("simulate", "--rho", "1/2", "--F", 3, "--out", tmp_path) == 2
    with pytest.raises(SystemExit) as exc:
        run_cli("simulate", "--boundary", "torus")
    assert exc.value.code == 2


def test_io_error_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_cli("simulate", "--F", 1, "--theta", 1, "--sites", 8, "--out", blocker / "sub") == 3
    assert run_cli("simulate", "--config", tmp_path / "missing.toml") == 3


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'F = 2\ntheta = 1\nsites = 32\nt-max = 3.0\nseed = 9\nout = "{tmp_path / "a"}"\n')
    assert run_cli("simulate", "--config", cfg, "--seed", 11) == 0
    meta = json.loads((tmp_path / "a" / "summary.json").read_text())["meta"]
    assert meta["seed"] == 11 and meta["config"]["sites"] == 32 and meta["config"]["t_max"] == 3.0
    bad = tmp_path / "bad.toml"
    bad.write_text("colour = 3\n")
    assert run_cli("simulate", "--config", bad) == 2
    bad.write_text("F = = 3\n")
    assert run_cli("simulate", "--config", bad) == 2


def test_cluster_prob_at_time_zero(tmp_path):
    cfg = ex.ExperimentConfig(F=2, theta=1, sites=512, replicates=16, seed=3, out=str(tmp_path))
    rows = ex.cmd_cluster_prob(cfg, [1, 5], [0.0])
    for d, t, est, se, reps in rows:
        assert reps == 16
        assert abs(est - 0.25) < 3 * se
    meta, table = ex.read_table(tmp_path / "cluster_prob.csv")
    assert meta["seed"] == 3 and len(table) == 2


def test_cluster_prob_cli(tmp_path):
    assert run_cli("cluster-prob", "--F", 2, "--theta", 1, "--sites", 64, "--replicates", 2,
                   "--distances", "1,2", "--times", "0,1", "--out", tmp_path) == 0
    _, table = ex.read_table(tmp_path / "cluster_prob.csv")
    assert [(r["d"], r["time"]) for r in table] == [("1", "0.0"), ("1", "1.0"), ("2", "0.0"), ("2", "1.0")]


def test_sweep_empty_grid(tmp_path):
    assert run_cli("sweep", "--F", "3", "--theta", "5", "--out", tmp_path) == 0
    meta, rows = ex.read_table(tmp_path / "sweep.csv")
    assert rows == []
    header = [l for l in (tmp_path / "sweep.csv").read_text().splitlines() if not l.startswith("#")]
    assert header == [",".join(ex.SWEEP_COLUMNS)]


def test_sweep_phase_labels(tmp_path):
    assert run_cli("sweep", "--F", "2:7", "--theta", "1:6", "--analytic-only", "--out", tmp_path) == 0
    _, rows = ex.read_table(tmp_path / "sweep.csv")
    by_cell = {(int(r["F"]), int(r["theta"])): r for r in rows}
    assert len(by_cell) == sum(F - 1 for F in range(2, 8))
    assert by_cell[(3, 1)]["expected_weight"] == "0/1"
    assert by_cell[(3, 1)]["phase_region"] == "CoexistenceProvedUniform"
    assert by_cell[(7, 2)]["expected_weight_decimal"] == "0.296875"
    assert by_cell[(6, 3)]["phase_region"] == "Open"
    assert all(r["status"] == "ok" for r in rows)


def test_sweep_cells_are_independent(tmp_path):
    tmpl = ex.ExperimentConfig(sites=64, t_max=20, replicates=2, seed=5, out=str(tmp_path))
    grid = ex.SweepGrid.from_ranges([3, 4], [1, 2], [None, Fraction(1, 64)], tmpl)
    rows = ex.sweep(grid)
    alone = ex.sweep_cell(tmpl, 4, 1, Fraction(1, 64))
    assert alone in rows
    assert rows[::-1] == ex.sweep(ex.SweepGrid(grid.cells[::-1], tmpl))


def test_sweep_records_failed_cells():
    tmpl = ex.ExperimentConfig(sites=16, t_max=1, replicates=1)
    row = ex.sweep_cell(tmpl, 3, 1, None)
    assert row[-1] == "ok"
    grid = ex.SweepGrid([(3, 1, None)], tmpl)
    assert len(ex.sweep(grid)) == 1


def test_stats_zero_samples(tmp_path):
    cfg = ex.ExperimentConfig(F=3, theta=1, out=str(tmp_path))
    rows = ex.initial_stats(cfg, 0)
    assert all(r[2] == 0 and r[3] == 0 for r in rows)
    assert run_cli("stats", "--F", 3, "--theta", 1, "--N", 0, "--out", tmp_path) == 0


def test_stats_changeovers_uniform_f1():
    rows = ex.initial_stats(ex.ExperimentConfig(F=1, theta=1, seed=2), 10**6)
    z = [r for r in rows if r[0] == "changeover"][0]
    assert abs(z[2] / 10**6 - 0.5) < 0.002


def test_weights_and_phase_output(capsys):
    assert run_cli("weights", "--F", 7, "--theta", 2) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "quantity,j,exact,decimal"
    assert "expected_weight_uniform,,19/64,0.296875" in out
    assert "folded_bound_sharp,,19/64,0.296875" in out
    assert run_cli("weights", "--F", 3, "--theta", 1) == 0
    out = capsys.readouterr().out.splitlines()
    assert "threshold_one_margin,,15/1024,0.0146484375" in out
    assert run_cli("phase", "--F", "3", "--theta", "1:3") == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["F,theta,phase_region", "3,1,CoexistenceProvedUniform", "3,2,ClusteringProved",
                   "3,3,VoterReduction"]
