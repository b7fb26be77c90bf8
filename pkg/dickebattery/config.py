#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Experiment configuration files."""

from __future__ import annotations

import json
from typing import Any
from pathlib import Path
from dataclasses import field, replace, dataclass

import yaml
import jsonschema

from dickebattery.errors import GridMismatch, ConfigurationError
from dickebattery.logger import LOG
from dickebattery.hilbert import ModelParams
from dickebattery.protocol import time_grid
from dickebattery.settings import (
    NAMESPACE,
    get_workers,
    get_output_dir,
    get_config_file,
)
from dickebattery.sac.agent import SacConfig


DESK_TOTAL_STEPS = 100_000


def set_else_none(key: str, data: dict, default: Any) -> Any:
    """Get value from dict or return default if not present."""
    return data.get(key, default)


@dataclass(frozen=True)
class ModelConfig:
    """System sizes and truncation shared by every run of an experiment."""

    n_tls: tuple[int, ...] = (2, 4, 6)
    omega0: float = 1.0
    lambda_max: float = 0.3
    train_fock_multiplier: int = 2
    eval_fock_multiplier: int = 6
    rwa: bool = False
    coupling_scale: float = 1.0

    def params(self, n_tls: int, fock_multiplier: int | None = None) -> ModelParams:
        multiplier = fock_multiplier or self.train_fock_multiplier
        return ModelParams(
            n_tls=n_tls,
            omega0=self.omega0,
            lambda_max=self.lambda_max,
            n_fock=multiplier * n_tls,
            coupling_scale=self.coupling_scale,
        )


@dataclass(frozen=True)
class GridConfig:
    """Charging times as g~ tau; ``g_dt`` None selects the two-step rule."""

    g_tau: tuple[float, ...] = (0.3, 0.6, 0.9, 1.2, 1.5)
    g_dt: float | None = None

    def time_grid(self, g_tau: float, params: ModelParams) -> tuple[float, float]:
        return time_grid(g_tau, params, self.g_dt)


@dataclass(frozen=True)
class PrometheusConfig:
    """Prometheus metrics configuration."""

    enabled: bool = False
    host: str = "0.0.0.0"
    port: int = 9090
    textfile: bool = True


@dataclass(frozen=True)
class MetricsConfig:
    """Metrics and telemetry configuration."""

    prometheus: PrometheusConfig = field(default_factory=PrometheusConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an on-off sweep or an RL experiment needs."""

    model: ModelConfig = field(default_factory=ModelConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    sac: SacConfig = field(
        default_factory=lambda: SacConfig(total_steps=DESK_TOTAL_STEPS)
    )
    n_repetitions: int = 4
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def __post_init__(self):
        if self.n_repetitions < 1:
            raise ConfigurationError("experiment.n_repetitions must be positive")
        if self.workers < 1:
            raise ConfigurationError("experiment.workers must be positive")
        self.validate_grids()

    def validate_grids(self) -> None:
        """Every charging time must be a whole number of time steps."""
        for n_tls in self.model.n_tls:
            params = self.model.params(n_tls)
            for g_tau in self.grid.g_tau:
                try:
                    self.grid.time_grid(g_tau, params)
                except GridMismatch as error:
                    raise ConfigurationError(
                        f"grid -> g_tau {g_tau}: {error}"
                    ) from error

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Copy with top-level fields replaced; None values are ignored."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_file(cls, config_path: str | None = None) -> ExperimentConfig:
        """Load configuration from YAML or JSON file."""
        if config_path is None:
            config_path = get_config_file(NAMESPACE)

        config_file = Path(config_path)
        if not config_file.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        try:
            with open(config_file, encoding="utf-8") as f:
                config_data = yaml.safe_load(f)
            LOG.info("Loaded configuration from %s as YAML", config_path)
        except yaml.YAMLError as error:
            LOG.debug("YAML parsing failed, trying JSON")
            try:
                with open(config_file, encoding="utf-8") as f:
                    config_data = json.load(f)
                LOG.info("Loaded configuration from %s as JSON", config_path)
            except json.JSONDecodeError as json_error:
                raise ConfigurationError(
                    f"File is not valid YAML or JSON. YAML error: {error}, "
                    f"JSON error: {json_error}"
                ) from error

        return cls.from_dict(config_data or {})

    @classmethod
    def from_dict(cls, config_data: dict) -> ExperimentConfig:
        """Create configuration from dictionary."""
        cls.validate_schema(config_data)

        model_data = config_data.get("model", {})
        grid_data = config_data.get("grid", {})
        sac_data = dict(config_data.get("sac", {}))
        experiment_data = config_data.get("experiment", {})
        prometheus_data = config_data.get("metrics", {}).get("prometheus", {})

        n_tls = set_else_none("n_tls", model_data, [2, 4, 6])
        model = ModelConfig(
            n_tls=tuple([n_tls] if isinstance(n_tls, int) else n_tls),
            omega0=float(set_else_none("omega0", model_data, 1.0)),
            lambda_max=float(set_else_none("lambda_max", model_data, 0.3)),
            train_fock_multiplier=set_else_none("train_fock_multiplier", model_data, 2),
            eval_fock_multiplier=set_else_none("eval_fock_multiplier", model_data, 6),
            rwa=set_else_none("rwa", model_data, False),
            coupling_scale=float(set_else_none("coupling_scale", model_data, 1.0)),
        )
        grid = GridConfig(
            g_tau=tuple(
                float(value)
                for value in set_else_none("g_tau", grid_data, GridConfig.g_tau)
            ),
            g_dt=set_else_none("g_dt", grid_data, None),
        )
        sac_data.setdefault("total_steps", DESK_TOTAL_STEPS)
        metrics = MetricsConfig(
            prometheus=PrometheusConfig(
                enabled=set_else_none("enabled", prometheus_data, False),
                host=set_else_none("host", prometheus_data, "0.0.0.0"),
                port=set_else_none("port", prometheus_data, 9090),
                textfile=set_else_none("textfile", prometheus_data, True),
            )
        )

        # Environment wins for the output directory, the file wins for workers
        output_dir = get_output_dir(NAMESPACE) or set_else_none(
            "output_dir", experiment_data, "results"
        )
        workers = set_else_none("workers", experiment_data, None)
        if workers is None:
            workers = get_workers(NAMESPACE)

        return cls(
            model=model,
            grid=grid,
            sac=SacConfig.from_dict(sac_data),
            n_repetitions=set_else_none("n_repetitions", experiment_data, 4),
            seed=set_else_none("seed", experiment_data, 0),
            output_dir=output_dir,
            workers=workers,
            metrics=metrics,
        )

    @classmethod
    def validate_schema(cls, config_data: dict) -> None:
        """Validate configuration data against JSON schema."""
        schema_path = Path(__file__).parent / "config-schema.json"

        if not schema_path.exists():
            LOG.warning("JSON schema file not found at %s", schema_path)
            return

        try:
            with open(schema_path, encoding="utf-8") as f:
                schema = json.load(f)

            jsonschema.validate(config_data, schema)
            LOG.debug("Configuration validation against JSON schema passed")

        except jsonschema.ValidationError as error:
            error_path = (
                " -> ".join(str(p) for p in error.absolute_path)
                if error.absolute_path
                else "root"
            )
            LOG.error(
                "Configuration validation failed at %s: %s", error_path, error.message
            )
            raise ConfigurationError(
                f"Configuration validation failed at {error_path}: {error.message}"
            ) from error
        except jsonschema.SchemaError as error:
            LOG.error("JSON schema error: %s", error.message)
            raise ConfigurationError(f"Invalid JSON schema: {error.message}") from error
