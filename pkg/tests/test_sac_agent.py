#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Unit tests for the SAC learner."""

from __future__ import annotations

import os
import json
import math
import tempfile

import numpy as np
import pytest

from dickebattery.errors import CheckpointError, TrainingDiverged, ConfigurationError
from dickebattery.sac.agent import (
    SacAgent,
    SacConfig,
    Temperature,
    polyak_update,
    critic_target,
    entropy_target,
)
from dickebattery.sac.buffer import Batch
from dickebattery.sac.networks import Mlp
from dickebattery.selftest import (
    smooth_critic,
    check_actor_gradient,
    check_critic_gradient,
    check_temperature_gradient,
)


SMALL = SacConfig(hidden_sizes=(16, 16), batch_size=8)


def make_agent(state_dim: int = 4, seed: int = 0, config: SacConfig = SMALL):
    return SacAgent(state_dim, 0.3, config, np.random.default_rng(seed))


def make_batch(size: int = 8, state_dim: int = 4, seed: int = 1, **overrides):
    rng = np.random.default_rng(seed)
    fields = {
        "states": rng.standard_normal((size, state_dim)),
        "actions": rng.uniform(-0.3, 0.3, size),
        "rewards": rng.standard_normal(size),
        "next_states": rng.standard_normal((size, state_dim)),
        "dones": np.zeros(size),
    }
    fields.update(overrides)
    return Batch(**fields)


class TestSacConfig:
    """Test hyperparameter validation."""

    def test_defaults(self):
        """Test the default schedule and learner settings."""
        config = SacConfig()
        assert config.batch_size == 256
        assert config.gamma == 0.993
        assert config.polyak == 0.995
        assert config.hidden_sizes == (512, 256)
        assert config.buffer_size == 180_000

    def test_dict_round_trip(self):
        """Test to_dict and from_dict are inverse."""
        config = SacConfig(hidden_sizes=[32, 8], n_updates=5)
        assert SacConfig.from_dict(config.to_dict()) == config

    def test_unknown_setting(self):
        """Test unknown keys are rejected."""
        with pytest.raises(ConfigurationError):
            SacConfig.from_dict({"learning_rate": 1e-3})

    @pytest.mark.parametrize(
        "overrides",
        [
            {"batch_size": 0},
            {"n_init_rand": -1},
            {"gamma": 0.0},
            {"polyak": 1.5},
            {"lr": 0.0},
            {"hidden_sizes": ()},
            {"log_every": 0},
        ],
    )
    def test_invalid(self, overrides):
        """Test out-of-range settings raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            SacConfig(**overrides)


class TestEntropyTarget:
    """Test the entropy target schedule."""

    def test_start_and_end(self):
        """Test H(0) = 0.72 and H decays to -3."""
        config = SacConfig()
        assert entropy_target(0, config) == pytest.approx(0.72)
        assert entropy_target(10**8, config) == pytest.approx(-3.0)

    def test_decay_constant(self):
        """Test one decay length covers 1 - 1/e of the range."""
        config = SacConfig()
        expected = -3.0 + 3.72 / math.e
        assert entropy_target(200_000, config) == pytest.approx(expected)


class TestTemperature:
    """Test the temperature update."""

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        """Test the analytic gradient against finite differences."""
        result = check_temperature_gradient(seed)
        assert result.passed, result

    def test_too_much_entropy_lowers_alpha(self):
        """Test alpha decreases when the policy entropy exceeds the target."""
        temperature = Temperature()
        alpha = temperature.update(np.full(4, -5.0), target=0.0, lr=0.1)
        assert alpha < 1.0

    def test_too_little_entropy_raises_alpha(self):
        """Test alpha increases when the policy entropy is below the target."""
        temperature = Temperature()
        alpha = temperature.update(np.full(4, 2.0), target=0.0, lr=0.1)
        assert alpha > 1.0

    def test_alpha_positive(self):
        """Test alpha stays positive for any log alpha."""
        assert Temperature(log_alpha=-800.0).alpha >= 0.0
        assert Temperature(log_alpha=-20.0).alpha > 0.0


class TestLosses:
    """Test losses, targets and their gradients."""

    def test_critic_target(self):
        """Test terminal transitions do not bootstrap."""
        targets = critic_target(
            rewards=np.array([1.0, 2.0]),
            dones=np.array([0.0, 1.0]),
            next_q_min=np.array([3.0, 4.0]),
            next_log_probs=np.array([0.5, 0.5]),
            alpha=0.2,
            gamma=0.9,
        )
        assert targets == pytest.approx([1.0 + 0.9 * (3.0 - 0.1), 2.0])

    @pytest.mark.parametrize("seed", range(10))
    def test_critic_gradient(self, seed):
        """Test the critic loss gradient against finite differences."""
        result = check_critic_gradient(seed)
        assert result.passed, result

    @pytest.mark.parametrize("seed", range(10))
    def test_actor_gradient(self, seed):
        """Test the reparameterized actor gradient against finite differences."""
        result = check_actor_gradient(seed)
        assert result.passed, result

    def test_polyak(self):
        """Test the target moves a fraction 1 - rho towards the online network."""
        rng = np.random.default_rng(0)
        target = Mlp.initialize((3, 4, 1), rng)
        online = Mlp.initialize((3, 4, 1), rng)
        before = target.get_flat()
        polyak_update(target, online, 0.995)
        expected = 0.995 * before + 0.005 * online.get_flat()
        assert target.get_flat() == pytest.approx(expected)

    def test_polyak_identity(self):
        """Test rho = 1 leaves the target unchanged."""
        rng = np.random.default_rng(0)
        target = Mlp.initialize((3, 4, 1), rng)
        before = target.get_flat()
        polyak_update(target, Mlp.initialize((3, 4, 1), rng), 1.0)
        assert np.array_equal(target.get_flat(), before)

    def test_polyak_shapes(self):
        """Test networks of different shapes are rejected."""
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            polyak_update(
                Mlp.initialize((3, 4, 1), rng), Mlp.initialize((3, 5, 1), rng), 0.5
            )


class TestSacAgent:
    """Test the agent."""

    def test_initial_policy(self):
        """Test the policy starts centred with sigma close to one."""
        agent = make_agent()
        states = np.random.default_rng(2).standard_normal((10, 4))
        mu, sigma = agent.policy_moments(states)
        assert np.max(np.abs(mu)) < 0.1
        assert sigma == pytest.approx(np.ones(10), abs=0.1)

    def test_actions_bounded(self):
        """Test sampled and deterministic actions lie in the control interval."""
        agent = make_agent()
        rng = np.random.default_rng(3)
        state = rng.standard_normal(4)
        for _ in range(50):
            action, log_prob = agent.act(state, rng)
            assert -0.3 <= action <= 0.3
            assert math.isfinite(log_prob)
        assert abs(agent.deterministic_action(state)) <= 0.3

    def test_critic_inputs_scaled(self):
        """Test actions reach the critics rescaled to sqrt(12) at the bound."""
        agent = make_agent(state_dim=2)
        inputs = agent.critic_inputs(np.zeros((2, 2)), np.array([0.3, -0.15]))
        assert inputs[:, -1] == pytest.approx([math.sqrt(12), -math.sqrt(12) / 2])

    def test_q_min_action_gradient(self):
        """Test dQ/da of the critic minimum against finite differences."""
        agent = make_agent()
        rng = np.random.default_rng(4)
        states = rng.standard_normal((6, 4))
        actions = rng.uniform(-0.25, 0.25, 6)
        _q, analytic = agent.q_min_and_grad(states, actions)
        eps = 1e-6
        upper, _ = agent.q_min_and_grad(states, actions + eps)
        lower, _ = agent.q_min_and_grad(states, actions - eps)
        numeric = (upper - lower) / (2 * eps)
        assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-8)

    def test_actor_follows_critic(self):
        """Test actor steps move the deterministic action towards larger Q."""
        agent = make_agent()
        agent.temperature.log_alpha = math.log(1e-4)
        states = np.tile(np.random.default_rng(5).standard_normal(4), (16, 1))
        before = agent.deterministic_action(states[0])
        rng = np.random.default_rng(6)
        for _ in range(200):
            agent.update_actor(states, rng, smooth_critic(center=0.3))
        after = agent.deterministic_action(states[0])
        assert after > before + 0.05

    def test_bandit_critic(self):
        """Test critics regress onto the reward of terminal transitions."""
        agent = make_agent()
        batch = make_batch(rewards=np.ones(8), dones=np.ones(8))
        rng = np.random.default_rng(7)
        for _ in range(1000):
            agent.update_critics(batch, rng)
        inputs = agent.critic_inputs(batch.states, batch.actions)
        assert agent.q1(inputs)[:, 0] == pytest.approx(np.ones(8), abs=0.05)
        assert agent.q2(inputs)[:, 0] == pytest.approx(np.ones(8), abs=0.05)

    def test_update(self):
        """Test one update reports finite statistics and tracks the critics."""
        agent = make_agent()
        target_before = agent.q1_target.get_flat()
        stats = agent.update(make_batch(), -1.0, np.random.default_rng(8))
        assert all(math.isfinite(value) for value in stats)
        assert agent.update_count == 1
        assert not np.array_equal(agent.q1_target.get_flat(), target_before)
        assert agent.policy_optimizer.t == 1

    def test_critic_step_leaves_targets(self):
        """Test a critic step moves only the online critics."""
        agent = make_agent()
        frozen = {
            "q1_target": agent.q1_target.get_flat(),
            "q2_target": agent.q2_target.get_flat(),
            "policy": agent.policy.get_flat(),
        }
        online = agent.q1.get_flat()
        agent.update_critics(make_batch(), np.random.default_rng(10))
        for name, before in frozen.items():
            assert np.array_equal(getattr(agent, name).get_flat(), before), name
        assert not np.array_equal(agent.q1.get_flat(), online)

    def test_targets_track_by_polyak_only(self):
        """Test the targets move exactly rho towards the updated critics."""
        agent = make_agent()
        rho = agent.config.polyak
        before = (agent.q1_target.get_flat(), agent.q2_target.get_flat())
        agent.update_critics(make_batch(), np.random.default_rng(11))
        agent.update_targets()
        for target, online, previous in zip(
            (agent.q1_target, agent.q2_target), (agent.q1, agent.q2), before
        ):
            expected = rho * previous + (1 - rho) * online.get_flat()
            assert target.get_flat() == pytest.approx(expected, abs=1e-14)

    def test_divergence_detected(self):
        """Test non-finite losses raise TrainingDiverged."""
        agent = make_agent()
        batch = make_batch(rewards=np.full(8, np.nan))
        with pytest.raises(TrainingDiverged):
            agent.update(batch, -1.0, np.random.default_rng(9))


class TestCheckpoint:
    """Test saving and restoring agents."""

    def test_round_trip(self):
        """Test a restored agent and generator continue exactly."""
        agent = make_agent()
        rng = np.random.default_rng(10)
        agent.update(make_batch(), -1.0, rng)
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "agent.npz")
            agent.save_checkpoint(path, rng=rng, global_step=123, extra={"seed": 4})
            restored_rng = np.random.default_rng(0)
            restored, metadata = SacAgent.load_checkpoint(path, restored_rng)
        assert metadata["global_step"] == 123
        assert metadata["extra"] == {"seed": 4}
        assert restored.config == agent.config
        assert restored.update_count == 1
        assert restored.temperature.log_alpha == agent.temperature.log_alpha
        for name in ("policy", "q1", "q2", "q1_target", "q2_target"):
            assert np.array_equal(
                getattr(restored, name).get_flat(), getattr(agent, name).get_flat()
            )
        assert np.array_equal(restored.q1_optimizer.v, agent.q1_optimizer.v)
        assert restored.policy_optimizer.t == agent.policy_optimizer.t
        assert restored_rng.random() == rng.random()

    def test_missing_file(self):
        """Test a missing checkpoint raises CheckpointError."""
        with pytest.raises(CheckpointError):
            SacAgent.load_checkpoint("/nonexistent/agent.npz")

    def test_not_a_checkpoint(self):
        """Test arbitrary files are rejected."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "agent.npz")
            with open(path, "w", encoding="utf-8") as f:
                f.write("not numpy")
            with pytest.raises(CheckpointError):
                SacAgent.load_checkpoint(path)

    def test_wrong_format(self):
        """Test npz files from elsewhere are rejected."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "other.npz")
            np.savez(path, metadata=np.array(json.dumps({"format": "other"})))
            with pytest.raises(CheckpointError):
                SacAgent.load_checkpoint(path)
