#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""
DickeBattery Environment Variables Configuration

All environment variables read by the package are defined here, under a single
configurable namespace.
"""

from __future__ import annotations

import os
from pathlib import Path


def get_dickebattery_namespace() -> str:
    return os.environ.get("DICKEBATTERY_NAMESPACE", "DICKEBATTERY_")


def get_config_file(namespace: str) -> str:
    config_file = os.environ.get(f"{namespace}CONFIG_FILE", "dickebattery.yaml")
    return str(Path(config_file).resolve())


def get_output_dir(namespace: str) -> str | None:
    """Output directory override, None when unset or empty."""
    raw_value = os.environ.get(f"{namespace}OUTPUT_DIR", "").strip()
    return str(Path(raw_value).resolve()) if raw_value else None


def _validate_log_level(log_level: str):
    """Validate log level, accepting case-insensitive values with fallback."""
    valid_levels = {"debug", "info", "warning", "error", "critical"}
    normalized_level = log_level.lower().strip()
    return normalized_level if normalized_level in valid_levels else "warning"


def get_log_level(namespace: str) -> str:
    """Get log level from environment with validation and fallback."""
    raw_level = os.environ.get(f"{namespace}LOG_LEVEL", "warning")
    return _validate_log_level(raw_level)


def get_workers(namespace: str) -> int:
    """Default number of worker processes for repetitions, at least 1."""
    raw_value = os.environ.get(f"{namespace}WORKERS", "1").strip()
    try:
        workers = int(raw_value)
    except ValueError:
        return 1
    return max(workers, 1)


NAMESPACE = get_dickebattery_namespace()

# Logging
LOG_LEVEL: str = get_log_level(NAMESPACE)
