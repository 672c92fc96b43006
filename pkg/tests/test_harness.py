"""Experiment harness: generators, summaries, artifacts, CLI."""

import json
import os

import numpy as np
import pytest

from mpcmm import check_d_sparse, get_semiring, save_matrix
from mpcmm.cli import main
from mpcmm.experiment import ExperimentConfig, generate_instance, run_experiment
from mpcmm.instances import block_diagonal, random_d_sparse

INT = get_semiring("int")


def test_seed_repeat_yields_identical_matrices():
    config = ExperimentConfig(case="square", n=16, seed=42)
    a1, b1, _ = generate_instance(config, INT)
    a2, b2, _ = generate_instance(config, INT)
    assert a1 == a2 and b1 == b2
    other = ExperimentConfig(case="square", n=16, seed=43)
    a3, _, _ = generate_instance(other, INT)
    assert a1 != a3


def test_blockdiag_structure():
    m = block_diagonal(16, 4, INT, np.random.default_rng(0))
    for r, c, _ in m.entries:
        assert r // 4 == c // 4, "entry outside its diagonal block"
    assert len(m.entries) == 4 * 16


def test_random_sparse_passes_validator():
    m = random_d_sparse(32, 3, INT, np.random.default_rng(1))
    assert check_d_sparse(m, 3)


def test_square_experiment_summary(tmp_path):
    config = ExperimentConfig(case="square", n=16, alpha=1.0, seed=1)
    summary = run_experiment(config, out_dir=str(tmp_path))
    assert summary["ok"] and summary["rounds"] == 4
    assert summary["oracle_match"] and summary["bound"]["lower_rounds"] == 4
    assert os.path.exists(summary["summary_path"])
    assert os.path.exists(summary["transcript_path"])
    text = open(summary["transcript_path"]).read().splitlines()
    assert text[0] == "round,processor,words_sent,words_received,peak_memory"
    assert len(text) == 1 + 4 * 16  # header + rounds * processors


def test_cap_factor_one_surfaces_bandwidth_violation(tmp_path):
    config = ExperimentConfig(case="square", n=16, alpha=1.0, seed=1, cap_factor=1)
    summary = run_experiment(config, out_dir=str(tmp_path))
    assert summary["ok"] is False
    assert summary["violation"]["type"] == "BandwidthExceeded"
    assert summary["violation"]["round"] == 1


def test_rerun_is_byte_identical(tmp_path):
    config = ExperimentConfig(case="sparse-twophase", n=32, d=4, seed=7, instance="blockdiag")
    first = run_experiment(config, out_dir=str(tmp_path / "one"))
    second = run_experiment(config, out_dir=str(tmp_path / "two"))
    b1 = open(first["summary_path"], "rb").read()
    b2 = open(second["summary_path"], "rb").read()
    assert b1 == b2
    t1 = open(first["transcript_path"], "rb").read()
    t2 = open(second["transcript_path"], "rb").read()
    assert t1 == t2


def test_paired_sparse_rounds_in_summaries(tmp_path):
    base = dict(n=64, d=16, seed=3, instance="blockdiag")
    trivial = run_experiment(
        ExperimentConfig(case="sparse-trivial", **base), out_dir=str(tmp_path)
    )
    two = run_experiment(
        ExperimentConfig(case="sparse-twophase", **base), out_dir=str(tmp_path)
    )
    assert trivial["ok"] and two["ok"]
    assert two["rounds"] * 2 <= trivial["rounds"]
    assert two["decomposition"]["meets_layer_budget"]


def test_file_instance_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    a = random_d_sparse(16, 2, INT, rng)
    b = random_d_sparse(16, 2, INT, rng)
    pa, pb = tmp_path / "a.txt", tmp_path / "b.txt"
    save_matrix(a, pa)
    save_matrix(b, pb)
    config = ExperimentConfig(
        case="sparse-trivial", n=16, d=2, instance="file", file_a=str(pa), file_b=str(pb)
    )
    summary = run_experiment(config, out_dir=str(tmp_path))
    assert summary["ok"]


def test_outdir_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("MPCMM_OUTDIR", str(tmp_path / "envdir"))
    summary = run_experiment(ExperimentConfig(case="square", n=16, seed=2))
    assert str(tmp_path / "envdir") in summary["summary_path"]


class TestCli:
    def test_run_square(self, tmp_path, capsys):
        rc = main(["run", "square", "--n", "16", "--alpha", "1", "--seed", "2",
                   "--outdir", str(tmp_path)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0 and out["rounds"] == 4

    def test_run_dnd(self, tmp_path, capsys):
        rc = main(["run", "dnd", "--n", "64", "--d", "4", "--procs", "n",
                   "--outdir", str(tmp_path)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0 and out["bound"]["ok"]

    def test_bounds_command(self, capsys):
        rc = main(["bounds", "--case", "ndn", "--n", "16", "--d", "8"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0 and out["lower_rounds"] == 2 and out["measured_rounds"] == 2

    def test_verify_command(self, capsys):
        rc = main(["verify", "--case", "square", "--n", "16", "--seeds", "2"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert rc == 0 and len(lines) == 6 and all(l.startswith("PASS") for l in lines)

    def test_bench_command(self, capsys):
        rc = main(["bench", "--case", "square", "--sizes", "16", "25"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert rc == 0 and len(lines) == 2
        rows = [json.loads(l) for l in lines]
        assert rows[0]["rounds"] == 4 and rows[1]["rounds"] == 5

    def test_run_sparse_fail_exit_code(self, tmp_path, capsys):
        rc = main(["run", "square", "--n", "16", "--cap-factor", "1",
                   "--outdir", str(tmp_path)])
        assert rc == 1
