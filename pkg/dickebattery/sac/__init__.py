#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Soft actor-critic written directly on numpy arrays."""

from __future__ import annotations

from dickebattery.sac.agent import (
    SacAgent,
    SacConfig,
    Temperature,
    critic_target,
    polyak_update,
    entropy_target,
)
from dickebattery.sac.buffer import Batch, ReplayBuffer
from dickebattery.sac.training import Trainer, EpisodeLog, TrainingLog, train
from dickebattery.sac.distributions import sample, squashed_gaussian_entropy


__all__ = [
    "Batch",
    "EpisodeLog",
    "ReplayBuffer",
    "SacAgent",
    "SacConfig",
    "Temperature",
    "Trainer",
    "TrainingLog",
    "critic_target",
    "entropy_target",
    "polyak_update",
    "sample",
    "squashed_gaussian_entropy",
    "train",
]
