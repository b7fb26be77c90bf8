#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""The charging problem as an episodic decision process.

Observations are the full wavefunction plus the last control and the time-step
index, each affinely mapped onto [-sqrt(12), sqrt(12)]::

    [sqrt12 Re c, sqrt12 Im c, sqrt12 lam_prev / lambda_max,
     sqrt12 (2 i / n_steps - 1)]

The reward blends the stored energy and the single-unit ergotropy increments,
with a weight that moves from energy to ergotropy as training progresses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from dickebattery.errors import EpisodeFinished, InvalidModelParams
from dickebattery.hilbert import DickeModel, ModelParams, Wavefunction
from dickebattery.dynamics import Propagator, propagate_step
from dickebattery.protocol import n_segments
from dickebattery.observables import battery_energy, reduced_density_1


SQRT12 = math.sqrt(12.0)


def blend_coefficient(
    n_steps: int, c_mean: float = 40_000, c_width: float = 20_000
) -> float:
    """Energy weight c(n) = 1 / (1 + exp((n - c_mean) / c_width))."""
    return float(expit(-(n_steps - c_mean) / c_width))


@dataclass(frozen=True)
class EnvConfig:
    """``n_steps`` is the number of controls per episode."""

    params: ModelParams
    dt: float
    n_steps: int
    c_mean: float = 40_000
    c_width: float = 20_000
    rwa: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidModelParams(f"dt must be positive: {self.dt}")
        if self.n_steps < 1:
            raise InvalidModelParams(
                f"An episode needs at least one control step: {self.n_steps}"
            )
        if not self.c_width > 0:
            raise InvalidModelParams(f"c_width must be positive: {self.c_width}")

    @classmethod
    def for_charging_time(
        cls, params: ModelParams, tau: float, dt: float, **kwargs
    ) -> EnvConfig:
        return cls(params=params, dt=dt, n_steps=n_segments(tau, dt), **kwargs)

    @property
    def tau(self) -> float:
        return self.dt * self.n_steps


class ChargingEnv:
    """Single-threaded environment owning one mutable wavefunction.

    ``global_step`` counts every step taken by this instance and selects the
    reward blend, frozen at each :meth:`reset`.
    """

    def __init__(
        self,
        config: EnvConfig,
        *,
        model: DickeModel | None = None,
        global_step: int = 0,
    ):
        self.config = config
        self.model = model or DickeModel.build(config.params, rwa=config.rwa)
        if self.model.params != config.params:
            raise InvalidModelParams("Model parameters differ from the environment's")
        self.propagator = Propagator.for_model(self.model, config.dt)
        self.global_step = global_step
        self._psi: Wavefunction | None = None
        self._step_index = 0
        self._last_action = 0.0
        self._blend = blend_coefficient(global_step, config.c_mean, config.c_width)
        self._energy = 0.0
        self._ergotropy = 0.0

    @property
    def params(self) -> ModelParams:
        return self.config.params

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def lambda_max(self) -> float:
        return self.config.params.lambda_max

    @property
    def state_dim(self) -> int:
        return 2 * self.model.layout.dim + 2

    @property
    def blend(self) -> float:
        """Energy weight frozen for the current episode."""
        return self._blend

    @property
    def step_index(self) -> int:
        return self._step_index

    @property
    def done(self) -> bool:
        return self._psi is not None and self._step_index >= self.config.n_steps

    @property
    def wavefunction(self) -> Wavefunction:
        if self._psi is None:
            raise EpisodeFinished("Environment has not been reset")
        return self._psi.copy()

    @property
    def energy_per_unit(self) -> float:
        """E^(N) / (N omega0) of the current state."""
        return self._energy

    @property
    def ergotropy(self) -> float:
        return self._ergotropy

    def _measure(self) -> None:
        params = self.params
        self._energy = battery_energy(self._psi, params) / (
            params.n_tls * params.omega0
        )
        self._ergotropy = reduced_density_1(self._psi).ergotropy(params.omega0)

    def reset(self) -> np.ndarray:
        self._psi = self.model.initial_state()
        self._step_index = 0
        self._last_action = 0.0
        self._blend = blend_coefficient(
            self.global_step, self.config.c_mean, self.config.c_width
        )
        self._measure()
        return self.encode()

    def step(self, action: float) -> tuple[np.ndarray, float, bool]:
        if self._psi is None:
            raise EpisodeFinished("Environment has not been reset")
        if self.done:
            raise EpisodeFinished(
                f"Episode already finished after {self.config.n_steps} steps"
            )
        lam = float(action)
        self.propagator.check_control(lam)

        energy_before, ergotropy_before = self._energy, self._ergotropy
        self._psi = propagate_step(self.propagator, self._psi, lam)
        self._measure()
        energy_gain = self._energy - energy_before
        ergotropy_gain = self._ergotropy - ergotropy_before
        reward = self._blend * energy_gain + (1.0 - self._blend) * ergotropy_gain

        self._step_index += 1
        self._last_action = lam
        self.global_step += 1
        return self.encode(), reward, self.done

    def encode(self) -> np.ndarray:
        if self._psi is None:
            raise EpisodeFinished("Environment has not been reset")
        amplitudes = self._psi.amplitudes
        return np.concatenate(
            [
                SQRT12 * amplitudes.real,
                SQRT12 * amplitudes.imag,
                [
                    SQRT12 * self._last_action / self.params.lambda_max,
                    SQRT12 * (2.0 * self._step_index / self.config.n_steps - 1.0),
                ],
            ]
        )

    def decode(self, encoded: np.ndarray) -> tuple[Wavefunction, float, int]:
        """Wavefunction, last action and step index behind an observation."""
        encoded = np.asarray(encoded, dtype=float)
        if encoded.shape != (self.state_dim,):
            raise ValueError(
                f"Observation of shape {encoded.shape} does not match "
                f"({self.state_dim},)"
            )
        dim = self.model.layout.dim
        amplitudes = (encoded[:dim] + 1j * encoded[dim : 2 * dim]) / SQRT12
        last_action = float(encoded[-2]) * self.params.lambda_max / SQRT12
        step_index = round((encoded[-1] / SQRT12 + 1.0) * self.config.n_steps / 2.0)
        psi = Wavefunction(amplitudes, self.model.layout)
        return psi, last_action, int(step_index)

    def restore(self, encoded: np.ndarray) -> None:
        """Continue from an observation; the current reward blend is kept."""
        psi, last_action, step_index = self.decode(encoded)
        if not 0 <= step_index <= self.config.n_steps:
            raise ValueError(f"Step index {step_index} outside the episode")
        self._psi = psi
        self._last_action = last_action
        self._step_index = step_index
        self._measure()
