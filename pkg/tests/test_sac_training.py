#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Unit tests for the SAC training schedule."""

from __future__ import annotations

import os
import math
import tempfile

import numpy as np
import pytest

from dickebattery.errors import TrainingDiverged
from dickebattery.selftest import OneStepEnv, check_toy_convergence
from dickebattery.sac.agent import SacConfig
from dickebattery.sac.training import Trainer, TrainingLog, train, updates_due


TINY = SacConfig(
    batch_size=8,
    total_steps=60,
    n_init_rand=20,
    n_init_no_update=0,
    n_updates=10,
    buffer_size=100,
    hidden_sizes=(8,),
    log_every=1_000,
)


class ThreeStepEnv(OneStepEnv):
    """Episodes of three steps with a constant reward."""

    def __init__(self):
        super().__init__()
        self.steps = 0

    def reset(self) -> np.ndarray:
        self.steps = 0
        return np.zeros(self.state_dim)

    def step(self, action: float):
        self.global_step += 1
        self.steps += 1
        return np.full(self.state_dim, self.steps), 1.0, self.steps == 3


class NanEnv(OneStepEnv):
    def step(self, action: float):
        state, _reward, done = super().step(action)
        return state, math.nan, done


class TestUpdatesDue:
    """Test when update groups run."""

    def test_default_schedule(self):
        """Test the first group follows the warm-up, then every n_updates steps."""
        config = SacConfig()
        assert not updates_due(5_999, config)
        assert updates_due(6_000, config)
        assert not updates_due(6_025, config)
        assert updates_due(6_050, config)

    def test_unaligned_warmup(self):
        """Test groups stay on multiples of n_updates."""
        config = SacConfig(n_init_rand=10, n_init_no_update=5, n_updates=4)
        due = [n for n in range(30) if updates_due(n, config)]
        assert due == [16, 20, 24, 28]


class TestTrainer:
    """Test the training loop."""

    def test_counts(self):
        """Test steps, episodes and updates of a short run."""
        trainer = Trainer(OneStepEnv(), TINY, seed=0)
        log = trainer.run()
        assert trainer.global_step == 60
        assert len(log.episodes) == 60
        assert log.total_updates == 50
        assert len(trainer.buffer) == 60
        assert trainer.agent.update_count == 50
        assert not log.stopped_early

    def test_episode_log(self):
        """Test episode entries carry schedule values."""
        log = Trainer(OneStepEnv(), TINY, seed=0).run()
        first, last = log.episodes[0], log.episodes[-1]
        assert first.episode == 0
        assert first.global_step == 1
        assert first.updates == 0
        assert math.isnan(first.critic_loss)
        assert math.isnan(first.final_ergotropy)
        assert last.updates == 10
        assert math.isfinite(last.critic_loss)
        assert math.isfinite(last.policy_entropy)
        assert first.entropy_target > last.entropy_target

    def test_deterministic(self):
        """Test equal seeds give identical runs."""
        first = Trainer(OneStepEnv(), TINY, seed=3)
        second = Trainer(OneStepEnv(), TINY, seed=3)
        assert first.run().returns == second.run().returns
        assert np.array_equal(
            first.agent.policy.get_flat(), second.agent.policy.get_flat()
        )

    def test_seeds_differ(self):
        """Test different seeds give different runs."""
        assert Trainer(OneStepEnv(), TINY, seed=1).run().returns != (
            Trainer(OneStepEnv(), TINY, seed=2).run().returns
        )

    def test_truncated_episode_not_logged(self):
        """Test an episode cut by total_steps is dropped."""
        trainer = Trainer(ThreeStepEnv(), TINY.with_overrides(total_steps=10), seed=0)
        log = trainer.run()
        assert trainer.global_step == 10
        assert len(log.episodes) == 3
        assert log.returns == [3.0, 3.0, 3.0]

    def test_stop_requested(self):
        """Test should_stop is polled between episodes."""
        calls = []

        def should_stop():
            calls.append(1)
            return len(calls) > 5

        trainer = Trainer(OneStepEnv(), TINY, seed=0)
        log = trainer.run(should_stop=should_stop)
        assert log.stopped_early
        assert len(log.episodes) == 5

    def test_divergence_reports_step(self):
        """Test TrainingDiverged names the step and repetition."""
        trainer = Trainer(NanEnv(), TINY, seed=0, repetition=3)
        with pytest.raises(TrainingDiverged) as error:
            trainer.run()
        assert error.value.step == 20
        assert error.value.repetition == 3


class TestTrainingLog:
    """Test training log persistence."""

    def test_csv_round_trip(self):
        """Test a saved log loads back to the same table."""
        log = Trainer(OneStepEnv(), TINY, seed=0).run()
        with tempfile.TemporaryDirectory() as temp_dir:
            path = log.save(os.path.join(temp_dir, "log.csv"))
            loaded = TrainingLog.load(path, seed=0)
        assert loaded.to_csv() == log.to_csv()
        assert isinstance(loaded.episodes[0].updates, int)

    def test_header(self):
        """Test the header names every column."""
        header = TrainingLog(seed=0).to_csv().splitlines()[0]
        assert header.startswith("episode,global_step,episode_return")


class TestResume:
    """Test checkpointed training."""

    def test_checkpoint_written(self):
        """Test periodic and final checkpoints are written."""
        config = TINY.with_overrides(checkpoint_every=20)
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "run.npz")
            Trainer(OneStepEnv(), config, seed=0).run(checkpoint_path=path)
            assert os.path.exists(path)

    def test_resume_continues_from_step(self):
        """Test a resumed run picks up the step count, updates and generator."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "run.npz")
            first_config = TINY.with_overrides(total_steps=40)
            agent, _log = train(OneStepEnv(), first_config, 0, checkpoint_path=path)
            resumed, log = train(OneStepEnv(), TINY, 0, resume_from=path)
        assert len(log.episodes) == 20
        assert log.episodes[0].global_step == 41
        assert resumed.update_count == agent.update_count + 20


@pytest.mark.slow
class TestToyConvergence:
    """Test learning on a one-step task with a known optimum."""

    def test_optimum_found(self):
        """Test the deterministic action approaches the optimum."""
        result = check_toy_convergence()
        assert result.passed, result
