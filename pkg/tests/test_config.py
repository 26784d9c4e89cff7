"""Tests for experiment configuration loading."""

from pathlib import Path

import pytest

from codband.errors import ConfigError
from codband.utils.config import (
    DEFAULT_GRID,
    DEFAULT_POLICIES,
    ExperimentConfig,
    GridRow,
    grid_rows,
    load_config,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text):
    path = tmp_path / "experiment.env"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.setenv("CODBAND_OUTPUT_DIR", "/tmp/codband-out")
        config = load_config()
        assert config.policies == DEFAULT_POLICIES
        assert config.env.n_users == 20
        assert config.settings.ridge == 1.0
        assert str(config.output_dir) == "/tmp/codband-out"
        assert config.policy_settings(config.env).resolved_window == 41

    def test_values_parsed(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nN_USERS=5\nNOISE_SD=0.13\nSETTING=dp\n"
                                "POLICIES=codband, linucb\nMIXTURE_WEIGHTS=1,1,2\nN_MODELS=3\n"
                                "WINDOW=60\nGIBBS_EVERY=4\n")
        config = load_config(path)
        assert config.env.n_users == 5
        assert config.env.noise_sd == 0.13
        assert config.env.setting == "dp"
        assert config.env.mixture_weights == (1.0, 1.0, 2.0)
        assert config.policies == ("codband", "linucb")
        assert config.settings.window == 60
        assert config.settings.gibbs_every == 4
        assert config.source == str(path)

    def test_schema_version_required(self, tmp_path):
        with pytest.raises(ConfigError, match="SCHEMA_VERSION"):
            load_config(_write(tmp_path, "N_USERS=5\n"))

    def test_unsupported_schema_version(self, tmp_path):
        with pytest.raises(ConfigError, match="unsupported version"):
            load_config(_write(tmp_path, "SCHEMA_VERSION=2\n"))

    def test_unknown_key_names_line(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nN_USERS=5\nDELTA_1=0.1\n")
        with pytest.raises(ConfigError, match=r"experiment\.env:3: DELTA_1: unknown key"):
            load_config(path)

    def test_unparseable_value(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nHORIZON=long\n")
        with pytest.raises(ConfigError, match=r":2: HORIZON: cannot parse"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.env")

    def test_overrides_win(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nSEED=3\nREPLICATIONS=4\n")
        config = load_config(path, seed=9, replications=None, output_dir=tmp_path / "out")
        assert config.seed == 9
        assert config.replications == 4
        assert config.output_dir == tmp_path / "out"

    def test_empty_policy_list(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(policies=())
        with pytest.raises(ConfigError, match="POLICIES"):
            load_config(_write(tmp_path, "SCHEMA_VERSION=1\nPOLICIES=\n"))

    def test_unknown_policy(self):
        with pytest.raises(ConfigError, match="unknown policies"):
            load_config(policies=("codband", "dlinucb"))

    @pytest.mark.parametrize("text", [
        "S_MIN=50\nS_MAX=10\n",
        "WINDOW=1\n",
        "GIBBS_EVERY=0\n",
        "REPLICATIONS=0\n",
        "DELTA1=1.5\n",
    ])
    def test_invalid_values(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "SCHEMA_VERSION=1\n" + text))

    def test_policy_noise_follows_environment(self, tmp_path):
        config = load_config(_write(tmp_path, "SCHEMA_VERSION=1\nNOISE_SD=0.16\n"))
        assert config.policy_settings(config.env).noise_sd == 0.16
        config = load_config(_write(tmp_path, "SCHEMA_VERSION=1\nNOISE_SD=0.16\nPOLICY_NOISE_SD=0.1\n"))
        assert config.policy_settings(config.env).noise_sd == 0.1

    def test_zero_jobs_names_line(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nSEED=2\nN_JOBS=0\n")
        with pytest.raises(ConfigError, match=r"experiment\.env:3: N_JOBS"):
            load_config(path)
        with pytest.raises(ConfigError, match="n_jobs"):
            load_config(n_jobs=0)
        assert load_config(path, n_jobs=-1).n_jobs == -1

    def test_noiseless_environment_needs_policy_noise(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nNOISE_SD=0\n")
        with pytest.raises(ConfigError, match=r"experiment\.env:2: NOISE_SD: .*POLICY_NOISE_SD"):
            load_config(path)
        config = load_config(_write(tmp_path, "SCHEMA_VERSION=1\nNOISE_SD=0\nPOLICY_NOISE_SD=0.1\n"))
        assert config.env.noise_sd == 0.0
        assert config.policy_settings(config.env).noise_sd == 0.1

    def test_nonpositive_policy_noise_names_line(self, tmp_path):
        path = _write(tmp_path, "SCHEMA_VERSION=1\nPOLICY_NOISE_SD=0\n")
        with pytest.raises(ConfigError, match=r"experiment\.env:2: POLICY_NOISE_SD"):
            load_config(path)

    def test_noiseless_grid_row_rejected(self):
        with pytest.raises(ConfigError, match="POLICY_NOISE_SD"):
            ExperimentConfig(grid=(GridRow(4, 3, 20, 40, 80, 0.0),))

    def test_manifest_dict(self):
        data = load_config(seed=4).to_dict()
        assert data["schema_version"] == "1"
        assert data["seed"] == 4
        assert data["policy_settings"]["window"] == 41
        assert data["grid"] is None

    @pytest.mark.parametrize("name", ["mixture_desk.env", "dp_desk.env", "stationary.env", "smoke.env"])
    def test_shipped_configs_load(self, name):
        assert load_config(CONFIGS / name).source.endswith(name)


class TestGrid:
    def test_parsed_rows(self, tmp_path):
        config = load_config(_write(tmp_path, "SCHEMA_VERSION=1\nGRID=4,3,20,40,80,0.1;5,2,10,20,60,0.2\n"))
        assert grid_rows(config) == [GridRow(4, 3, 20, 40, 80, 0.1), GridRow(5, 2, 10, 20, 60, 0.2)]

    def test_default_grid(self):
        rows = grid_rows(load_config())
        assert rows == list(DEFAULT_GRID)
        assert len(rows) == 8
        assert {row.n_users for row in rows} == {20}

    def test_bad_row(self, tmp_path):
        with pytest.raises(ConfigError, match="GRID"):
            load_config(_write(tmp_path, "SCHEMA_VERSION=1\nGRID=4,3,20\n"))

    def test_row_applies_to_environment(self):
        env = GridRow(4, 3, 20, 40, 80, 0.16).apply(load_config().env)
        assert (env.n_users, env.n_models, env.s_min, env.s_max, env.horizon, env.noise_sd) == (4, 3, 20, 40, 80, 0.16)
        assert env.dim == 10
