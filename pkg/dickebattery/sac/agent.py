#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Soft actor-critic learner: twin critics, squashed Gaussian actor, temperature."""

from __future__ import annotations

import io
import json
import math
from typing import Any, NamedTuple
from pathlib import Path
from dataclasses import asdict, fields, replace, dataclass
from collections.abc import Callable

import numpy as np

from dickebattery.errors import CheckpointError, TrainingDiverged, ConfigurationError
from dickebattery.logger import LOG
from dickebattery.rl_env import SQRT12
from dickebattery.storage import atomic_write_bytes
from dickebattery.sac.buffer import Batch
from dickebattery.sac.networks import Mlp, Adam
from dickebattery.sac.distributions import (
    SquashedSample,
    sample,
    squash,
    sigma_from_raw,
    squashed_gaussian_entropy,
)


CHECKPOINT_FORMAT = "dickebattery-sac-checkpoint"
CHECKPOINT_VERSION = 1
CHECKPOINT_NOTE = (
    "Replay buffer contents are not stored. A resumed run starts with an empty "
    "buffer, so its losses match an uninterrupted run only once sampling no "
    "longer reaches transitions collected before the checkpoint."
)

QFunction = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class SacConfig:
    """Learner and schedule hyperparameters. Step counts are environment steps."""

    batch_size: int = 256
    total_steps: int = 480_000
    lr: float = 1e-3
    lr_alpha: float = 3e-3
    gamma: float = 0.993
    polyak: float = 0.995
    n_init_rand: int = 5_000
    n_init_no_update: int = 1_000
    n_updates: int = 50
    entropy_start: float = 0.72
    entropy_end: float = -3.0
    entropy_decay: float = 200_000
    c_mean: float = 40_000
    c_width: float = 20_000
    buffer_size: int = 180_000
    hidden_sizes: tuple[int, ...] = (512, 256)
    initial_log_alpha: float = 0.0
    initial_sigma: float = 1.0
    output_scale: float = 0.01
    checkpoint_every: int = 0
    log_every: int = 100

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        for name in ("batch_size", "total_steps", "n_updates", "buffer_size"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"sac.{name} must be positive")
        for name in ("n_init_rand", "n_init_no_update", "checkpoint_every"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"sac.{name} must not be negative")
        for name in ("lr", "lr_alpha", "entropy_decay", "c_width", "initial_sigma"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"sac.{name} must be positive")
        if not 0 < self.gamma <= 1:
            raise ConfigurationError(f"sac.gamma must lie in (0, 1]: {self.gamma}")
        if not 0 <= self.polyak <= 1:
            raise ConfigurationError(f"sac.polyak must lie in [0, 1]: {self.polyak}")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ConfigurationError(f"sac.hidden_sizes invalid: {self.hidden_sizes}")
        if self.log_every < 1:
            raise ConfigurationError("sac.log_every must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> SacConfig:
        data = dict(data or {})
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown sac settings: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["hidden_sizes"] = list(self.hidden_sizes)
        return data

    def with_overrides(self, **overrides: Any) -> SacConfig:
        return replace(self, **overrides)


def entropy_target(n: int, config: SacConfig) -> float:
    """H(n) = H_end + (H_start - H_end) exp(-n / H_decay)."""
    decay = math.exp(-n / config.entropy_decay)
    return config.entropy_end + (config.entropy_start - config.entropy_end) * decay


@dataclass
class Temperature:
    """alpha = exp(log_alpha), positive for any log_alpha."""

    log_alpha: float = 0.0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    def gradient(self, log_probs: np.ndarray, target: float) -> float:
        """d/d log_alpha of alpha * mean(-log pi - target)."""
        return self.alpha * float(np.mean(-np.asarray(log_probs) - target))

    def update(self, log_probs: np.ndarray, target: float, lr: float) -> float:
        self.log_alpha -= lr * self.gradient(log_probs, target)
        return self.alpha


class ActorStep(NamedTuple):
    loss: float
    log_probs: np.ndarray


class UpdateStats(NamedTuple):
    critic_loss: float
    actor_loss: float
    alpha: float
    entropy: float


def critic_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    next_q_min: np.ndarray,
    next_log_probs: np.ndarray,
    alpha: float,
    gamma: float,
) -> np.ndarray:
    """y = r + gamma (1 - done) (min_j Q_targ,j(s', a') - alpha log pi(a'|s'))."""
    soft_value = np.asarray(next_q_min) - alpha * np.asarray(next_log_probs)
    return np.asarray(rewards) + gamma * (1.0 - np.asarray(dones)) * soft_value


def critic_loss_and_grad(
    critic: Mlp, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean squared Bellman residual and its flat parameter gradient."""
    prediction, cache = critic.forward(inputs)
    residual = prediction[:, 0] - targets
    loss = float(np.mean(residual**2))
    grad, _ = critic.backward(cache, (2.0 * residual / residual.size)[:, None])
    return loss, grad


def actor_loss_and_grad(
    policy: Mlp,
    states: np.ndarray,
    xi: np.ndarray,
    alpha: float,
    q_fn: QFunction,
    low: float,
    high: float,
) -> tuple[float, np.ndarray, SquashedSample]:
    """mean(alpha log pi(a|s) - Q(s, a)) with a reparameterized by fixed ``xi``.

    ``q_fn(states, actions)`` returns Q and dQ/da per row.
    """
    output, cache = policy.forward(states)
    mu, raw = output[:, 0], output[:, 1]
    sigma = sigma_from_raw(raw)
    draw = sample(mu, sigma, xi, low, high)
    q_values, dq_da = q_fn(states, draw.action)
    loss = float(np.mean(alpha * draw.log_prob - q_values))

    batch = mu.size
    t = draw.tanh_u
    da_du = draw.half_width * (1.0 - t**2)
    grad_mu = (alpha * 2.0 * t - dq_da * da_du) / batch
    grad_sigma = (alpha * (-1.0 / sigma + 2.0 * t * xi) - dq_da * da_du * xi) / batch
    grad, _ = policy.backward(cache, np.column_stack([grad_mu, grad_sigma * 2.0 * raw]))
    return loss, grad, draw


def polyak_update(target: Mlp, online: Mlp, rho: float) -> None:
    """target <- rho target + (1 - rho) online, in place."""
    if target.sizes != online.sizes:
        raise ValueError(
            f"Target network {target.sizes} and online network {online.sizes} differ"
        )
    target.set_flat(rho * target.get_flat() + (1.0 - rho) * online.get_flat())


class SacAgent:
    """Actor, twin critics with target copies, their optimizers and alpha.

    Actions live in [-lambda_max, lambda_max]; critics see them rescaled to
    [-sqrt(12), sqrt(12)] like the rest of the observation.
    """

    def __init__(
        self,
        state_dim: int,
        lambda_max: float,
        config: SacConfig,
        rng: np.random.Generator,
    ):
        self.state_dim = state_dim
        self.lambda_max = lambda_max
        self.config = config
        hidden = config.hidden_sizes
        self.policy = Mlp.initialize(
            (state_dim, *hidden, 2),
            rng,
            output_scale=config.output_scale,
            output_bias=[0.0, math.sqrt(config.initial_sigma)],
        )
        self.q1 = Mlp.initialize((state_dim + 1, *hidden, 1), rng)
        self.q2 = Mlp.initialize((state_dim + 1, *hidden, 1), rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.policy_optimizer = Adam(self.policy.n_params, lr=config.lr)
        self.q1_optimizer = Adam(self.q1.n_params, lr=config.lr)
        self.q2_optimizer = Adam(self.q2.n_params, lr=config.lr)
        self.temperature = Temperature(config.initial_log_alpha)
        self.update_count = 0

    @property
    def low(self) -> float:
        return -self.lambda_max

    @property
    def high(self) -> float:
        return self.lambda_max

    def policy_moments(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        output = self.policy(states)
        return output[:, 0], sigma_from_raw(output[:, 1])

    def sample_actions(
        self, states: np.ndarray, rng: np.random.Generator
    ) -> SquashedSample:
        mu, sigma = self.policy_moments(states)
        return sample(mu, sigma, rng.standard_normal(mu.size), self.low, self.high)

    def act(self, state: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
        """Stochastic action for one observation and its log-probability."""
        draw = self.sample_actions(np.atleast_2d(state), rng)
        return float(draw.action[0]), float(draw.log_prob[0])

    def deterministic_action(self, state: np.ndarray) -> float:
        mu, _sigma = self.policy_moments(np.atleast_2d(state))
        return float(squash(mu, self.low, self.high)[0])

    def policy_entropy(self, state: np.ndarray) -> float:
        """Reference-interval entropy of the policy at one observation."""
        mu, sigma = self.policy_moments(np.atleast_2d(state))
        return squashed_gaussian_entropy(float(mu[0]), float(sigma[0]))

    def critic_inputs(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.column_stack([states, SQRT12 * np.asarray(actions) / self.lambda_max])

    def q_min_and_grad(
        self, states: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """min(Q1, Q2) of the online critics and its derivative in the action."""
        inputs = self.critic_inputs(states, actions)
        q1, cache1 = self.q1.forward(inputs)
        q2, cache2 = self.q2.forward(inputs)
        first = q1[:, 0] <= q2[:, 0]
        q_min = np.where(first, q1[:, 0], q2[:, 0])
        _, grad1 = self.q1.backward(cache1, first[:, None].astype(float))
        _, grad2 = self.q2.backward(cache2, (~first)[:, None].astype(float))
        dq_da = (grad1[:, -1] + grad2[:, -1]) * SQRT12 / self.lambda_max
        return q_min, dq_da

    def compute_targets(self, batch: Batch, rng: np.random.Generator) -> np.ndarray:
        """Bellman targets with one shared fresh a' per transition."""
        draw = self.sample_actions(batch.next_states, rng)
        inputs = self.critic_inputs(batch.next_states, draw.action)
        next_q = np.minimum(self.q1_target(inputs)[:, 0], self.q2_target(inputs)[:, 0])
        return critic_target(
            batch.rewards,
            batch.dones,
            next_q,
            draw.log_prob,
            self.temperature.alpha,
            self.config.gamma,
        )

    def update_critics(
        self, batch: Batch, rng: np.random.Generator
    ) -> tuple[float, float]:
        targets = self.compute_targets(batch, rng)
        inputs = self.critic_inputs(batch.states, batch.actions)
        loss1, grad1 = critic_loss_and_grad(self.q1, inputs, targets)
        loss2, grad2 = critic_loss_and_grad(self.q2, inputs, targets)
        self.q1_optimizer.apply(self.q1, grad1)
        self.q2_optimizer.apply(self.q2, grad2)
        return loss1, loss2

    def update_actor(
        self,
        states: np.ndarray,
        rng: np.random.Generator,
        q_fn: QFunction | None = None,
    ) -> ActorStep:
        """One step on the policy; critics are only read."""
        xi = rng.standard_normal(states.shape[0])
        loss, grad, draw = actor_loss_and_grad(
            self.policy,
            states,
            xi,
            self.temperature.alpha,
            q_fn or self.q_min_and_grad,
            self.low,
            self.high,
        )
        self.policy_optimizer.apply(self.policy, grad)
        return ActorStep(loss=loss, log_probs=draw.log_prob)

    def update_temperature(self, log_probs: np.ndarray, target: float) -> float:
        return self.temperature.update(log_probs, target, self.config.lr_alpha)

    def update_targets(self) -> None:
        polyak_update(self.q1_target, self.q1, self.config.polyak)
        polyak_update(self.q2_target, self.q2, self.config.polyak)

    def update(
        self, batch: Batch, target_entropy: float, rng: np.random.Generator
    ) -> UpdateStats:
        """Critics, then actor, then temperature, then target tracking."""
        loss1, loss2 = self.update_critics(batch, rng)
        actor = self.update_actor(batch.states, rng)
        alpha = self.update_temperature(actor.log_probs, target_entropy)
        self.update_targets()
        self.update_count += 1

        stats = UpdateStats(
            critic_loss=0.5 * (loss1 + loss2),
            actor_loss=actor.loss,
            alpha=alpha,
            entropy=float(-np.mean(actor.log_probs)),
        )
        if not all(math.isfinite(value) for value in stats):
            raise TrainingDiverged(
                f"Non-finite SAC loss {stats._asdict()}", step=self.update_count
            )
        return stats

    def _networks(self) -> dict[str, Mlp]:
        return {
            "policy": self.policy,
            "q1": self.q1,
            "q2": self.q2,
            "q1_target": self.q1_target,
            "q2_target": self.q2_target,
        }

    def _optimizers(self) -> dict[str, Adam]:
        return {
            "policy_optimizer": self.policy_optimizer,
            "q1_optimizer": self.q1_optimizer,
            "q2_optimizer": self.q2_optimizer,
        }

    def save_checkpoint(
        self,
        path: str | Path,
        *,
        rng: np.random.Generator,
        global_step: int,
        extra: dict[str, Any] | None = None,
    ) -> Path:
        """Write parameters, optimizer moments, alpha, RNG state and step count."""
        arrays: dict[str, np.ndarray] = {
            name: net.get_flat() for name, net in self._networks().items()
        }
        for name, optimizer in self._optimizers().items():
            arrays[f"{name}_m"] = optimizer.m
            arrays[f"{name}_v"] = optimizer.v
        metadata = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "note": CHECKPOINT_NOTE,
            "state_dim": self.state_dim,
            "lambda_max": self.lambda_max,
            "config": self.config.to_dict(),
            "global_step": global_step,
            "update_count": self.update_count,
            "log_alpha": self.temperature.log_alpha,
            "optimizer_steps": {
                name: optimizer.t for name, optimizer in self._optimizers().items()
            },
            "rng_state": rng.bit_generator.state,
            "extra": extra or {},
        }
        arrays["metadata"] = np.array(json.dumps(metadata))
        payload = io.BytesIO()
        np.savez(payload, **arrays)
        target = atomic_write_bytes(path, payload.getvalue())
        LOG.info("Checkpoint at step %d written to %s", global_step, target)
        return target

    @classmethod
    def load_checkpoint(
        cls, path: str | Path, rng: np.random.Generator | None = None
    ) -> tuple[SacAgent, dict[str, Any]]:
        """Rebuild an agent; ``rng`` gets the saved generator state."""
        try:
            with np.load(path, allow_pickle=False) as data:
                arrays = {name: data[name] for name in data.files}
            metadata = json.loads(str(arrays.pop("metadata")[()]))
        except (OSError, ValueError, KeyError) as error:
            raise CheckpointError(f"Cannot read checkpoint {path}: {error}") from error

        if metadata.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} file")
        if metadata.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"Unsupported checkpoint version {metadata.get('version')!r}"
            )

        try:
            agent = cls(
                state_dim=metadata["state_dim"],
                lambda_max=metadata["lambda_max"],
                config=SacConfig.from_dict(metadata["config"]),
                rng=np.random.default_rng(0),
            )
            for name, net in agent._networks().items():
                net.set_flat(arrays[name])
            for name, optimizer in agent._optimizers().items():
                moments = arrays[f"{name}_m"], arrays[f"{name}_v"]
                if any(m.shape != (optimizer.n_params,) for m in moments):
                    raise ValueError(f"{name} moments do not match the network")
                optimizer.m, optimizer.v = (m.copy() for m in moments)
                optimizer.t = int(metadata["optimizer_steps"][name])
            agent.temperature.log_alpha = float(metadata["log_alpha"])
            agent.update_count = int(metadata["update_count"])
            if rng is not None:
                rng.bit_generator.state = metadata["rng_state"]
        except (KeyError, ValueError, ConfigurationError) as error:
            raise CheckpointError(f"Incompatible checkpoint {path}: {error}") from error
        LOG.info("Loaded checkpoint from %s at step %d", path, metadata["global_step"])
        return agent, metadata
