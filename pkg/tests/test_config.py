# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.

"""Unit tests for configuration functionality."""

from __future__ import annotations

import os
import json
import tempfile
from pathlib import Path

import yaml
import pytest

from dickebattery.config import (
    DESK_TOTAL_STEPS,
    GridConfig,
    ModelConfig,
    ExperimentConfig,
    set_else_none,
)
from dickebattery.errors import ConfigurationError


FULL_CONFIG = {
    "model": {"n_tls": 4, "omega0": 1.0, "lambda_max": 0.3, "rwa": True},
    "grid": {"g_tau": [0.6, 1.2], "g_dt": 0.06},
    "sac": {"total_steps": 480000, "hidden_sizes": [64, 32], "batch_size": 128},
    "experiment": {"n_repetitions": 2, "seed": 11, "output_dir": "out", "workers": 2},
    "metrics": {"prometheus": {"enabled": True, "port": 9100}},
}


def write_config(data, suffix: str = ".yaml", dump=yaml.dump) -> str:
    with tempfile.NamedTemporaryFile(mode="w", suffix=suffix, delete=False) as f:
        if isinstance(data, str):
            f.write(data)
        else:
            dump(data, f)
        return f.name


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("OUTPUT_DIR", "WORKERS", "CONFIG_FILE"):
        monkeypatch.delenv(f"DICKEBATTERY_{name}", raising=False)


class TestConfigDefaults:
    """Test default configuration values."""

    def test_default_values(self):
        """Test the built-in experiment."""
        config = ExperimentConfig()
        assert config.model.n_tls == (2, 4, 6)
        assert config.model.train_fock_multiplier == 2
        assert config.model.eval_fock_multiplier == 6
        assert config.grid.g_tau == (0.3, 0.6, 0.9, 1.2, 1.5)
        assert config.grid.g_dt is None
        assert config.sac.total_steps == DESK_TOTAL_STEPS
        assert config.n_repetitions == 4
        assert config.workers == 1
        assert not config.metrics.prometheus.enabled

    def test_empty_dict(self):
        """Test an empty document gives the defaults."""
        assert ExperimentConfig.from_dict({}) == ExperimentConfig()

    def test_model_params(self):
        """Test cutoffs follow the multipliers."""
        model = ModelConfig()
        assert model.params(4).n_fock == 8
        assert model.params(4, 6).n_fock == 24
        assert model.params(4).coupling_scale == 1.0

    def test_coupling_scale(self):
        """Test the interaction prefactor reaches the model and must be positive."""
        config = ExperimentConfig.from_dict({"model": {"coupling_scale": 2}})
        assert config.model.coupling_scale == 2.0
        assert config.model.params(4, 6).coupling_scale == 2.0
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"model": {"coupling_scale": 0}})

    def test_with_overrides_ignores_none(self):
        """Test None overrides keep existing values."""
        config = ExperimentConfig().with_overrides(seed=None, n_repetitions=2)
        assert config.seed == 0
        assert config.n_repetitions == 2


class TestConfigFromFile:
    """Test loading configuration files."""

    def test_yaml(self):
        """Test every section of a YAML file is read."""
        temp_file = write_config(FULL_CONFIG)
        try:
            config = ExperimentConfig.from_file(temp_file)
        finally:
            os.unlink(temp_file)
        assert config.model.n_tls == (4,)
        assert config.model.rwa
        assert config.grid.g_tau == (0.6, 1.2)
        assert config.grid.g_dt == 0.06
        assert config.sac.total_steps == 480000
        assert config.sac.hidden_sizes == (64, 32)
        assert config.n_repetitions == 2
        assert config.seed == 11
        assert config.output_dir == "out"
        assert config.workers == 2
        assert config.metrics.prometheus.enabled
        assert config.metrics.prometheus.port == 9100

    def test_json(self):
        """Test JSON files are accepted."""
        temp_file = write_config(FULL_CONFIG, suffix=".json", dump=json.dump)
        try:
            config = ExperimentConfig.from_file(temp_file)
        finally:
            os.unlink(temp_file)
        assert config.sac.batch_size == 128

    def test_from_file_env_variable(self, monkeypatch):
        """Test the configuration file can be named in the environment."""
        temp_file = write_config({"model": {"n_tls": [2]}})
        monkeypatch.setenv("DICKEBATTERY_CONFIG_FILE", temp_file)
        try:
            config = ExperimentConfig.from_file()
        finally:
            os.unlink(temp_file)
        assert config.model.n_tls == (2,)

    def test_output_dir_from_environment(self, monkeypatch, tmp_path):
        """Test the environment wins over the file for the output directory."""
        monkeypatch.setenv("DICKEBATTERY_OUTPUT_DIR", str(tmp_path))
        config = ExperimentConfig.from_dict({"experiment": {"output_dir": "out"}})
        assert config.output_dir == str(tmp_path.resolve())

    def test_workers_from_environment(self, monkeypatch):
        """Test the worker count falls back to the environment."""
        monkeypatch.setenv("DICKEBATTERY_WORKERS", "3")
        assert ExperimentConfig.from_dict({}).workers == 3
        config = ExperimentConfig.from_dict({"experiment": {"workers": 2}})
        assert config.workers == 2


class TestConfigExceptions:
    """Test configuration error handling."""

    def test_from_file_not_found(self):
        """Test loading non-existent configuration file."""
        with pytest.raises(FileNotFoundError):
            ExperimentConfig.from_file("/non/existent/path.yaml")

    def test_from_file_malformed_yaml(self):
        """Test loading malformed YAML file."""
        temp_file = write_config("invalid: yaml: content: [")
        try:
            with pytest.raises(ValueError, match="File is not valid YAML or JSON"):
                ExperimentConfig.from_file(temp_file)
        finally:
            os.unlink(temp_file)

    def test_unknown_section(self):
        """Test unknown top-level keys are rejected."""
        with pytest.raises(ConfigurationError, match="Configuration validation failed"):
            ExperimentConfig.from_dict({"services": {}})

    def test_unknown_sac_setting(self):
        """Test unknown SAC keys are reported with their section."""
        with pytest.raises(ConfigurationError, match="at sac"):
            ExperimentConfig.from_dict({"sac": {"learning_rate": 0.1}})

    def test_invalid_size(self):
        """Test a non-positive number of units is rejected."""
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"model": {"n_tls": 0}})

    def test_incommensurate_grid(self):
        """Test charging times that are not whole numbers of steps are rejected."""
        with pytest.raises(ConfigurationError, match="g_tau 0.31"):
            ExperimentConfig.from_dict({"grid": {"g_tau": [0.31]}})

    def test_grid_checked_on_construction(self):
        """Test direct construction validates the grid too."""
        with pytest.raises(ConfigurationError):
            ExperimentConfig(grid=GridConfig(g_tau=(0.5,), g_dt=0.07))

    def test_repetitions_positive(self):
        """Test at least one repetition is required."""
        with pytest.raises(ConfigurationError):
            ExperimentConfig(n_repetitions=0)


class TestConfigHelpers:
    """Test dictionary helpers."""

    def test_set_else_none(self):
        """Test set_else_none returns the default for missing keys."""
        assert set_else_none("seed", {}, 3) == 3
        assert set_else_none("seed", {"seed": 5}, 3) == 5


class TestShippedConfigs:
    """Test the example configuration files stay loadable."""

    @pytest.mark.parametrize("name", ["desk.yaml", "full.yaml", "rwa.yaml"])
    def test_loads(self, name, monkeypatch):
        """Test each example passes schema and grid validation."""
        monkeypatch.delenv("DICKEBATTERY_OUTPUT_DIR", raising=False)
        path = Path(__file__).resolve().parent.parent / "configs" / name
        config = ExperimentConfig.from_file(str(path))
        assert config.output_dir.startswith("results/")
