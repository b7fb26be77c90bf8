#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""The SAC training schedule.

* Uniformly random actions for the first ``n_init_rand`` steps.
* From then on, actions sampled from the current policy.
* Every ``n_updates`` steps, once ``n_init_rand + n_init_no_update`` steps
  have been taken, ``n_updates`` updates in a row, so the number of updates
  tracks the number of actions.
"""

from __future__ import annotations

import csv
import math
import typing
import logging as logthings
from pathlib import Path
from dataclasses import field, astuple, fields, dataclass
from collections.abc import Callable

import numpy as np

from dickebattery.errors import TrainingDiverged
from dickebattery.logger import LOG
from dickebattery.metrics import record_updates, record_episode, record_env_step
from dickebattery.storage import atomic_write_text
from dickebattery.sac.agent import SacAgent, SacConfig, UpdateStats, entropy_target
from dickebattery.sac.buffer import ReplayBuffer


class TrainingEnvironment(typing.Protocol):
    state_dim: int
    lambda_max: float
    global_step: int

    def reset(self) -> np.ndarray: ...

    def step(self, action: float) -> tuple[np.ndarray, float, bool]: ...


@dataclass(frozen=True)
class EpisodeLog:
    episode: int
    global_step: int
    episode_return: float
    final_ergotropy: float
    final_energy: float
    blend: float
    alpha: float
    entropy_target: float
    policy_entropy: float
    critic_loss: float
    actor_loss: float
    updates: int


@dataclass
class TrainingLog:
    seed: int
    episodes: list[EpisodeLog] = field(default_factory=list)
    total_updates: int = 0
    stopped_early: bool = False

    @property
    def returns(self) -> list[float]:
        return [episode.episode_return for episode in self.episodes]

    def to_csv(self) -> str:
        header = ",".join(item.name for item in fields(EpisodeLog))
        rows = [
            ",".join(
                f"{value:.12g}" if isinstance(value, float) else str(value)
                for value in astuple(episode)
            )
            for episode in self.episodes
        ]
        return "\n".join([header, *rows]) + "\n"

    def save(self, path: str | Path) -> Path:
        return atomic_write_text(path, self.to_csv())

    @classmethod
    def load(cls, path: str | Path, seed: int = -1) -> TrainingLog:
        log = cls(seed=seed)
        with open(path, encoding="utf-8", newline="") as f:
            for row in csv.DictReader(f):
                values = {}
                for item in fields(EpisodeLog):
                    cast = int if item.type in ("int", int) else float
                    values[item.name] = cast(row[item.name])
                log.episodes.append(EpisodeLog(**values))
        return log


def updates_due(n_done: int, config: SacConfig) -> bool:
    """Whether an update group runs right after environment step ``n_done``."""
    warmup = config.n_init_rand + config.n_init_no_update
    return n_done >= warmup and n_done % config.n_updates == 0


class Trainer:
    """Runs the schedule on one environment; strictly sequential."""

    def __init__(
        self,
        env: TrainingEnvironment,
        config: SacConfig,
        seed: int,
        *,
        agent: SacAgent | None = None,
        rng: np.random.Generator | None = None,
        start_step: int = 0,
        repetition: int | None = None,
        reference_state: np.ndarray | None = None,
    ):
        self.env = env
        self.config = config
        self.seed = seed
        self.repetition = repetition
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.agent = agent or SacAgent(
            env.state_dim, env.lambda_max, config, self.rng
        )
        self.buffer = ReplayBuffer(config.buffer_size, env.state_dim)
        self.global_step = start_step
        self.log = TrainingLog(seed=seed)
        self._reference_state = reference_state

    def _random_action(self) -> float:
        return float(self.rng.uniform(-self.env.lambda_max, self.env.lambda_max))

    def _select_action(self, state: np.ndarray) -> float:
        if self.global_step < self.config.n_init_rand:
            return self._random_action()
        action, _log_prob = self.agent.act(state, self.rng)
        return action

    def _run_updates(self) -> list[UpdateStats]:
        target = entropy_target(self.global_step, self.config)
        stats = []
        for _ in range(self.config.n_updates):
            batch = self.buffer.sample(self.config.batch_size, self.rng)
            try:
                stats.append(self.agent.update(batch, target, self.rng))
            except TrainingDiverged as error:
                raise TrainingDiverged(
                    error.message,
                    step=self.global_step,
                    repetition=self.repetition,
                ) from error
        record_updates(len(stats))
        self.log.total_updates += len(stats)
        return stats

    def _episode_log(
        self, episode_return: float, stats: list[UpdateStats]
    ) -> EpisodeLog:
        reference = self._reference_state
        return EpisodeLog(
            episode=len(self.log.episodes),
            global_step=self.global_step,
            episode_return=float(episode_return),
            final_ergotropy=float(getattr(self.env, "ergotropy", math.nan)),
            final_energy=float(getattr(self.env, "energy_per_unit", math.nan)),
            blend=float(getattr(self.env, "blend", math.nan)),
            alpha=self.agent.temperature.alpha,
            entropy_target=entropy_target(self.global_step, self.config),
            policy_entropy=(
                self.agent.policy_entropy(reference)
                if reference is not None
                else math.nan
            ),
            critic_loss=(
                float(np.mean([s.critic_loss for s in stats])) if stats else math.nan
            ),
            actor_loss=(
                float(np.mean([s.actor_loss for s in stats])) if stats else math.nan
            ),
            updates=len(stats),
        )

    def checkpoint(self, path: str | Path) -> Path:
        return self.agent.save_checkpoint(
            path, rng=self.rng, global_step=self.global_step
        )

    def run(
        self,
        *,
        checkpoint_path: str | Path | None = None,
        should_stop: Callable[[], bool] | None = None,
    ) -> TrainingLog:
        """Train until ``total_steps``; ``should_stop`` is polled between episodes.

        An episode cut short by ``total_steps`` is not logged.
        """
        config = self.config
        LOG.info(
            "Training for %d steps from step %d (seed %d)",
            config.total_steps,
            self.global_step,
            self.seed,
        )
        while self.global_step < config.total_steps:
            if should_stop is not None and should_stop():
                LOG.warning("Stop requested at step %d", self.global_step)
                self.log.stopped_early = True
                break

            self.env.global_step = self.global_step
            state = self.env.reset()
            if self._reference_state is None:
                self._reference_state = state.copy()
            episode_return = 0.0
            episode_stats: list[UpdateStats] = []
            done = False
            while not done and self.global_step < config.total_steps:
                action = self._select_action(state)
                next_state, reward, done = self.env.step(action)
                self.buffer.add(state, action, reward, next_state, done)
                episode_return += reward
                state = next_state
                self.global_step += 1
                record_env_step()

                if updates_due(self.global_step, config):
                    episode_stats.extend(self._run_updates())
                if (
                    checkpoint_path is not None
                    and config.checkpoint_every
                    and self.global_step % config.checkpoint_every == 0
                ):
                    self.checkpoint(checkpoint_path)

            if not done:
                break
            entry = self._episode_log(episode_return, episode_stats)
            self.log.episodes.append(entry)
            record_episode(
                entry.episode_return,
                alpha=entry.alpha,
                entropy_target=entry.entropy_target,
                blend=None if math.isnan(entry.blend) else entry.blend,
                final_ergotropy=(
                    None if math.isnan(entry.final_ergotropy) else entry.final_ergotropy
                ),
            )
            level = (
                logthings.INFO
                if entry.episode % config.log_every == 0
                else logthings.DEBUG
            )
            LOG.log(
                level,
                "Episode %d step %d return %.6g ergotropy %.6g alpha %.4g H %.4g",
                entry.episode,
                entry.global_step,
                entry.episode_return,
                entry.final_ergotropy,
                entry.alpha,
                entry.policy_entropy,
            )

        if checkpoint_path is not None:
            self.checkpoint(checkpoint_path)
        LOG.info(
            "Training finished at step %d after %d episodes and %d updates",
            self.global_step,
            len(self.log.episodes),
            self.log.total_updates,
        )
        return self.log


def train(
    env: TrainingEnvironment,
    config: SacConfig,
    seed: int,
    *,
    repetition: int | None = None,
    checkpoint_path: str | Path | None = None,
    resume_from: str | Path | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> tuple[SacAgent, TrainingLog]:
    """Train a fresh agent, or continue one from ``resume_from``."""
    if resume_from is not None:
        rng = np.random.default_rng(seed)
        agent, metadata = SacAgent.load_checkpoint(resume_from, rng)
        trainer = Trainer(
            env,
            config,
            seed,
            agent=agent,
            rng=rng,
            start_step=int(metadata["global_step"]),
            repetition=repetition,
        )
    else:
        trainer = Trainer(env, config, seed, repetition=repetition)
    log = trainer.run(checkpoint_path=checkpoint_path, should_stop=should_stop)
    return trainer.agent, log
