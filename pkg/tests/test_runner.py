import csv
import json
import math
from typing import get_args

import numpy as np
import pytest

from simplex_lab import cli
from simplex_lab.config import (
    CONSTANTS_ENV_VAR,
    DEFAULT_CONSTANTS_FILE,
    Subcommand,
    build_experiment_config,
    load_constants,
)
from simplex_lab.experiments import EXPERIMENTS, schroeder_numbers
from simplex_lab.runner import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    ExperimentRunner,
    config_digest,
    write_csv,
    write_json,
)

UNCOVERED = {"c_sep": 16, "c_comp": 2}


def make_runner(tmp_path, **data) -> ExperimentRunner:
    config = build_experiment_config({"output_dir": str(tmp_path), **data})
    return ExperimentRunner(
        config,
        constants=load_constants(DEFAULT_CONSTANTS_FILE),
        constants_path=DEFAULT_CONSTANTS_FILE,
    )


def test_schroeder_numbers():
    assert schroeder_numbers(6) == [1, 1, 3, 11, 45, 197]


def test_every_subcommand_has_an_experiment():
    assert set(EXPERIMENTS) == set(get_args(Subcommand))


class TestWriters:
    def test_csv_columns_are_the_union_of_keys(self, tmp_path):
        path = write_csv([{"a": 1, "b": 0.1}, {"b": [1, 2], "c": "x"}], tmp_path / "rows.csv")
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["a", "b", "c"]
        assert rows[1] == ["1", "0.1", ""]
        assert rows[2] == ["", "[1, 2]", "x"]

    def test_json_accepts_numpy_and_complex(self, tmp_path):
        data = {"array": np.arange(3), "scalar": np.float64(2.5), "z": 1 + 2j, "big": math.inf}
        loaded = json.loads(write_json(data, tmp_path / "data.json").read_text())
        assert loaded == {
            "array": [0, 1, 2],
            "scalar": 2.5,
            "z": {"real": 1.0, "imag": 2.0},
            "big": "inf",
        }


class TestExperimentRunner:
    def test_trees_artifacts(self, tmp_path):
        runner = make_runner(tmp_path, subcommand="trees", trees={"n": 3, "coverage_samples": 1000})
        outcome = runner.run()
        assert outcome.exit_code == EXIT_OK
        assert outcome.result.passed
        assert [p.name for p in outcome.artifacts] == ["trees.csv", "trees.json", "manifest.json"]

        with open(tmp_path / "trees.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 3
        assert list(rows[0]) == ["tree_id", "tree", "degree_sequence", "height", "hits"]

        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["subcommand"] == "trees"
        assert manifest["config_sha256"] == config_digest(runner.config)
        assert manifest["constants_version"] == "2024.06-1"
        assert manifest["artifacts"] == ["trees.csv", "trees.json"]
        assert manifest["passed"] is True

    def test_failed_check_without_check_flag(self, tmp_path):
        runner = make_runner(
            tmp_path,
            subcommand="trees",
            trees={"n": 3, "coverage_samples": 5000, "region": UNCOVERED},
        )
        outcome = runner.run()
        assert outcome.exit_code == EXIT_OK
        assert not outcome.result.checks["coverage"]

    def test_failed_check_with_check_flag(self, tmp_path):
        runner = make_runner(
            tmp_path,
            subcommand="trees",
            check=True,
            trees={"n": 3, "coverage_samples": 5000, "region": UNCOVERED},
        )
        assert runner.run().exit_code == EXIT_CHECK_FAILED

    def test_guard_errors_exit_with_three(self, tmp_path):
        runner = make_runner(
            tmp_path,
            subcommand="partition",
            partition={"n": 3, "samples": 2000, "region": UNCOVERED, "margin": 2.0},
        )
        outcome = runner.run()
        assert outcome.exit_code == 3
        assert outcome.result is None
        assert "uncovered" in outcome.error
        assert not (tmp_path / "manifest.json").exists()

    def test_sweeps_write_a_figure(self, tmp_path):
        runner = make_runner(
            tmp_path,
            subcommand="norm-scan",
            norm_scan={"arities": [2], "sizes": [16, 32], "trials": 2, "band": 2},
        )
        outcome = runner.run()
        assert outcome.exit_code == EXIT_OK
        assert (tmp_path / "norm-scan.svg").exists()
        assert "norm-scan.svg" in json.loads((tmp_path / "manifest.json").read_text())["artifacts"]

    @pytest.mark.parametrize(
        "data",
        [
            {"subcommand": "trees", "trees": {"n": 4, "coverage_samples": 2000}},
            {
                "subcommand": "apply",
                "ensemble": {"seed": 11},
                "apply": {
                    "oracle_arities": [2, 3],
                    "oracle_sizes": [16],
                    "oracle_trials": 3,
                    "bht_size": 64,
                    "bht_trials": 2,
                    "band": 2,
                },
            },
        ],
    )
    def test_rerun_reproduces_csv_bytes(self, tmp_path, data):
        first = make_runner(tmp_path / "first", **data).run()
        second = make_runner(tmp_path / "second", **data).run()
        assert first.exit_code == second.exit_code == EXIT_OK

        name = f"{data['subcommand']}.csv"
        first_bytes = (tmp_path / "first" / name).read_bytes()
        assert first_bytes
        assert first_bytes == (tmp_path / "second" / name).read_bytes()

    def test_bessel_runs_both_instances(self, tmp_path):
        runner = make_runner(
            tmp_path,
            subcommand="bessel",
            bessel={"k2_values": [3, 4], "trials": 1, "scales": [0, 1]},
        )
        outcome = runner.run()
        assert outcome.exit_code == EXIT_OK
        checks = outcome.result.checks
        assert set(checks) == {"decay", "bounded", "decay_multiscale", "bounded_multiscale"}
        assert {row["instance"] for row in outcome.result.rows} == {"unit", "multiscale"}
        assert outcome.result.metadata["multiscale"]["scales"] == [0, 1]
        assert (tmp_path / "bessel.svg").exists()

    def test_unknown_subcommand(self, tmp_path):
        with pytest.raises(ValueError, match="Unknown subcommand"):
            make_runner(tmp_path, subcommand="trees")._execute("launch")

    def test_missing_constants_file(self, tmp_path):
        config = build_experiment_config({"subcommand": "trees", "output_dir": str(tmp_path)})
        outcome = ExperimentRunner(config, constants_path=tmp_path / "absent.json").run()
        assert outcome.exit_code == 2


@pytest.fixture
def shipped_constants(monkeypatch):
    monkeypatch.setenv(CONSTANTS_ENV_VAR, str(DEFAULT_CONSTANTS_FILE))


class TestCli:
    def test_trees(self, tmp_path, shipped_constants):
        assert cli.trees(n=3, samples=100, output_dir=tmp_path) == 0
        assert (tmp_path / "trees.csv").exists()

    def test_config_file(self, tmp_path, shipped_constants):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"subcommand": "trees", "trees": {"n": 2}}))
        out = tmp_path / "out"
        assert cli.trees(config=path, samples=50, output_dir=out, seed=3) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["trees"]["n"] == 2
        assert manifest["config"]["ensemble"]["seed"] == 3

    def test_invalid_config_file(self, tmp_path, shipped_constants):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"subcommand": "trees", "colour": "blue"}))
        assert cli.trees(config=path, output_dir=tmp_path) == 2

    def test_empty_list_option_is_a_config_error(self, tmp_path, shipped_constants):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"subcommand": "audit", "audit": {"tile_counts": []}}))
        assert cli.audit(config=path, output_dir=tmp_path) == 2
        assert not (tmp_path / "manifest.json").exists()

    @pytest.mark.parametrize("nmax", [8, 100])
    def test_chirp_window_must_be_a_power_of_two(self, nmax):
        assert cli.chirp(nmax=nmax) == 2

    def test_configure_missing_file(self, tmp_path):
        assert cli.configure(tmp_path / "absent.json") == 2
