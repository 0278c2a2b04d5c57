import json
import os
import stat

import pytest

from simplex_lab import config as config_module
from simplex_lab.config import (
    CONSTANTS_ENV_VAR,
    DEFAULT_CONSTANTS_FILE,
    ExperimentConfig,
    GridConfig,
    build_experiment_config,
    get_constants_path,
    load_constants,
    load_experiment_config,
    merge_overrides,
    save_constants_path,
)
from simplex_lab.errors import ConfigError


@pytest.fixture
def user_config(tmp_path, monkeypatch):
    """Redirect the user config file and clear the constants override."""
    monkeypatch.setattr(config_module, "CONFIG_DIR", tmp_path / "config")
    monkeypatch.setattr(config_module, "CONFIG_FILE", tmp_path / "config" / "config.env")
    # setenv first so teardown removes whatever load_dotenv puts back
    monkeypatch.setenv(CONSTANTS_ENV_VAR, "")
    monkeypatch.delenv(CONSTANTS_ENV_VAR)
    return tmp_path / "config" / "config.env"


class TestConstants:
    def test_shipped_file(self):
        constants = load_constants(DEFAULT_CONSTANTS_FILE)
        assert constants.version == "2024.06-1"
        assert constants.c_jn > 1

    def test_default_path(self, user_config):
        assert get_constants_path() == DEFAULT_CONSTANTS_FILE

    def test_environment_override(self, user_config, monkeypatch, tmp_path):
        monkeypatch.setenv(CONSTANTS_ENV_VAR, str(tmp_path / "c.json"))
        assert get_constants_path() == tmp_path / "c.json"

    def test_saved_override(self, user_config, tmp_path):
        target = tmp_path / "calibrated.json"
        target.write_text(DEFAULT_CONSTANTS_FILE.read_text())
        save_constants_path(target)
        assert stat.S_IMODE(os.stat(user_config).st_mode) == 0o600
        assert get_constants_path() == target.resolve()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found") as info:
            load_constants(tmp_path / "absent.json")
        assert info.value.exit_code == 2

    def test_invalid_file(self, tmp_path):
        data = json.loads(DEFAULT_CONSTANTS_FILE.read_text())
        data["c_jn"] = 0.5
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ConfigError, match="Invalid constants"):
            load_constants(path)


class TestExperimentConfig:
    def test_defaults(self):
        config = build_experiment_config({"subcommand": "chirp"})
        assert config.grid.N == 1024
        assert config.chirp.grid_factor == 2
        assert config.tiles.scales == [3, 5, 7]
        assert not config.check

    @pytest.mark.parametrize(
        "data",
        [
            {"subcommand": "launch"},
            {"subcommand": "trees", "colour": "blue"},
            {"subcommand": "trees", "trees": {"n": 9}},
            {"subcommand": "partition", "partition": {"margin": 8.0}},
        ],
    )
    def test_rejected(self, data):
        with pytest.raises(ConfigError, match="Invalid experiment config"):
            build_experiment_config(data)

    @pytest.mark.parametrize(
        ("block", "field"),
        [
            ("apply", "oracle_arities"),
            ("apply", "oracle_sizes"),
            ("norm_scan", "arities"),
            ("norm_scan", "sizes"),
            ("chirp", "window_exponents"),
            ("tiles", "scales"),
            ("tiles", "rank1_scales"),
            ("tiles", "offsets"),
            ("audit", "scales"),
            ("audit", "tile_counts"),
            ("bessel", "k2_values"),
            ("bessel", "scales"),
            ("akns", "diagonal"),
        ],
    )
    def test_empty_lists_rejected(self, block, field):
        with pytest.raises(ConfigError, match=field):
            build_experiment_config({"subcommand": "audit", block: {field: []}})

    @pytest.mark.parametrize("N", [4, 100, 1000])
    def test_grid_size(self, N):
        with pytest.raises(ValueError, match="power of two"):
            GridConfig(N=N)

    def test_file_with_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"subcommand": "trees", "trees": {"n": 3}}))
        config = load_experiment_config(
            path, trees={"n": None, "coverage_samples": 10}, ensemble={"seed": 7}
        )
        assert config.trees.n == 3
        assert config.trees.coverage_samples == 10
        assert config.ensemble.seed == 7

    def test_unreadable_files(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_experiment_config(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{subcommand")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_experiment_config(broken)
        listed = tmp_path / "list.json"
        listed.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_experiment_config(listed)

    def test_json_round_trip(self):
        config = build_experiment_config({"subcommand": "tiles", "tiles": {"max_tiles": 16}})
        again = ExperimentConfig.model_validate_json(config.model_dump_json())
        assert again == config


class TestMergeOverrides:
    def test_none_values_are_ignored(self):
        assert merge_overrides({"a": 1}, {"a": None, "b": 2}) == {"a": 1, "b": 2}

    def test_nested_merge(self):
        merged = merge_overrides({"x": {"p": 1, "q": 2}}, {"x": {"q": 3, "r": None}})
        assert merged == {"x": {"p": 1, "q": 3}}

    def test_new_block_drops_none(self):
        assert merge_overrides({}, {"x": {"p": None, "q": 1}}) == {"x": {"q": 1}}

    def test_input_is_not_mutated(self):
        data = {"x": {"p": 1}}
        merge_overrides(data, {"x": {"p": 2}})
        assert data == {"x": {"p": 1}}
