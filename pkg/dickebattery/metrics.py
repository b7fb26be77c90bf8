#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Prometheus metrics for DickeBattery training and simulation runs."""

from __future__ import annotations

from pathlib import Path

import prometheus_client
from prometheus_client import (
    Info,
    Gauge,
    Counter,
    Histogram,
    CollectorRegistry,
    generate_latest,
    write_to_textfile,
    disable_created_metrics,
)

from dickebattery.logger import LOG


# Only DickeBattery metrics are exposed, no Python runtime collectors
for _collector in (
    prometheus_client.GC_COLLECTOR,
    prometheus_client.PLATFORM_COLLECTOR,
    prometheus_client.PROCESS_COLLECTOR,
):
    try:
        prometheus_client.REGISTRY.unregister(_collector)
    except KeyError:
        pass

disable_created_metrics()

REGISTRY = CollectorRegistry()

ENV_STEPS_TOTAL = Counter(
    "dickebattery_env_steps_total",
    "Total number of environment steps performed during training",
    registry=REGISTRY,
)

UPDATES_TOTAL = Counter(
    "dickebattery_sac_updates_total",
    "Total number of SAC gradient updates",
    registry=REGISTRY,
)

EPISODES_TOTAL = Counter(
    "dickebattery_episodes_total",
    "Total number of completed training episodes",
    registry=REGISTRY,
)

EPISODE_RETURN = Gauge(
    "dickebattery_episode_return",
    "Raw reward sum of the last completed episode",
    registry=REGISTRY,
)

FINAL_ERGOTROPY = Gauge(
    "dickebattery_final_ergotropy",
    "Single-unit ergotropy at the end of the last completed episode",
    registry=REGISTRY,
)

TEMPERATURE = Gauge(
    "dickebattery_sac_temperature",
    "Current SAC temperature alpha",
    registry=REGISTRY,
)

ENTROPY_TARGET = Gauge(
    "dickebattery_sac_entropy_target",
    "Current scheduled target entropy",
    registry=REGISTRY,
)

REWARD_BLEND = Gauge(
    "dickebattery_reward_blend",
    "Energy weight c(n) of the blended reward",
    registry=REGISTRY,
)

PROPAGATION_DURATION = Histogram(
    "dickebattery_propagation_duration_seconds",
    "Wall time of one propagation step",
    buckets=(1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1),
    registry=REGISTRY,
)

APP_INFO = Info(
    "dickebattery_app_info",
    "DickeBattery application information",
    registry=REGISTRY,
)


def init_metrics() -> None:
    """Initialize metrics with default values."""
    from dickebattery import __version__

    APP_INFO.info({"version": __version__, "name": "dickebattery"})
    LOG.debug("Prometheus metrics initialized with isolated registry")


def get_metrics() -> str:
    """Get metrics in Prometheus format."""
    try:
        return generate_latest(REGISTRY).decode("utf-8")
    except Exception as error:
        LOG.error("Failed to generate metrics: %s", error)
        return ""


def export_textfile(path: str | Path) -> None:
    """Write the registry in textfile-collector format."""
    try:
        write_to_textfile(str(path), REGISTRY)
        LOG.info("Metrics written to %s", path)
    except OSError as error:
        LOG.error("Failed to write metrics to %s: %s", path, error)


def record_propagation(duration: float) -> None:
    PROPAGATION_DURATION.observe(duration)


def record_env_step(count: int = 1) -> None:
    ENV_STEPS_TOTAL.inc(count)


def record_updates(count: int) -> None:
    UPDATES_TOTAL.inc(count)


def record_episode(
    episode_return: float,
    *,
    alpha: float,
    entropy_target: float,
    blend: float | None = None,
    final_ergotropy: float | None = None,
) -> None:
    """Publish the figures of a completed episode."""
    EPISODES_TOTAL.inc()
    EPISODE_RETURN.set(episode_return)
    TEMPERATURE.set(alpha)
    ENTROPY_TARGET.set(entropy_target)
    if blend is not None:
        REWARD_BLEND.set(blend)
    if final_ergotropy is not None:
        FINAL_ERGOTROPY.set(final_ergotropy)
