#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Atomic file output: readers never observe a partially written artifact."""

from __future__ import annotations

import os
from pathlib import Path

from dickebattery.logger import LOG


def atomic_write_bytes(path: str | Path, payload: bytes) -> Path:
    """Write ``payload`` to a sibling temp file, then rename it over ``path``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = target.with_name(f".{target.name}.{os.getpid()}.tmp")
    try:
        with open(tmp_path, "wb") as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, target)
    except OSError:
        tmp_path.unlink(missing_ok=True)
        raise
    LOG.debug("Wrote %d bytes to %s", len(payload), target)
    return target


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))
