#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

from __future__ import annotations

import json
import contextlib
import contextvars
import logging as logthings
from typing import Any
from collections.abc import Iterator

from . import __version__, __git_commit__
from .settings import LOG_LEVEL


_RUN_CONTEXT: contextvars.ContextVar[dict[str, Any] | None] = contextvars.ContextVar(
    "dickebattery_run_context", default=None
)


class SimpleJsonFormatter(logthings.Formatter):
    """Simple JSON formatter that always includes essential fields."""

    def format(self, record: logthings.LogRecord) -> str:
        data = {
            "timestamp": record.created,
            "levelname": record.levelname,
            "message": record.getMessage(),
            "name": record.name.split(".")[0],
        }

        # Version info only for INFO level logs (skip unknown/development values)
        if record.levelname == "INFO":
            if __version__ and __version__ not in ("unknown", "development", "none"):
                data["dickebattery.version"] = __version__
            if __git_commit__ and __git_commit__ not in (
                "unknown",
                "development",
                "none",
            ):
                data["dickebattery.git_commit"] = __git_commit__

        if hasattr(record, "run") and record.run:
            data["run"] = record.run

        if record.exc_info:
            data["exception"] = self.formatException(record.exc_info)
        elif record.exc_text:
            data["exception"] = record.exc_text

        return json.dumps(data, separators=(",", ":"), default=str)


class RunContextFilter(logthings.Filter):
    """Adds the active run context (experiment, N, tau, repetition) to records."""

    def filter(self, record: logthings.LogRecord) -> bool:
        context = _RUN_CONTEXT.get()
        record.run = dict(context) if context else {}
        return True


class RepeatedWarningFilter(logthings.Filter):
    """Demotes repeated numerical warnings to DEBUG after their first emission."""

    def __init__(self, name: str = "") -> None:
        super().__init__(name)
        self._seen: set[str] = set()

    def filter(self, record: logthings.LogRecord) -> bool:
        if record.levelno != logthings.WARNING:
            return True
        key = str(record.msg)
        if key in self._seen:
            record.levelno = logthings.DEBUG
            record.levelname = "DEBUG"
            return LOG.isEnabledFor(logthings.DEBUG)
        self._seen.add(key)
        return True

    def reset(self) -> None:
        self._seen.clear()


@contextlib.contextmanager
def run_context(**fields: Any) -> Iterator[dict[str, Any]]:
    """Attach fields to every log record emitted inside the block.

    Nested contexts merge with the enclosing one.
    """
    merged = dict(_RUN_CONTEXT.get() or {})
    merged.update(fields)
    token = _RUN_CONTEXT.set(merged)
    try:
        yield merged
    finally:
        _RUN_CONTEXT.reset(token)


def current_run_context() -> dict[str, Any]:
    return dict(_RUN_CONTEXT.get() or {})


def setup_logging() -> logthings.Logger:
    """Setup simple JSON logging."""
    formatter = SimpleJsonFormatter()

    handler = logthings.StreamHandler()
    handler.setFormatter(formatter)

    logger = logthings.getLogger("dickebattery")
    logger.addHandler(handler)
    logger.setLevel(getattr(logthings, LOG_LEVEL.upper(), logthings.INFO))
    logger.propagate = False

    logger.addFilter(RunContextFilter())
    logger.addFilter(REPEATED_WARNINGS)

    return logger


REPEATED_WARNINGS = RepeatedWarningFilter()

# Create logger instance
LOG = setup_logging()
