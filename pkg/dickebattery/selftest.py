#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Independent oracles for the simulator and the learner.

Each check recomputes a quantity by a route that shares no code with the
production path (brute-force qubit space, adaptive ODE integration, finite
differences, Monte-Carlo sampling) and compares.
"""

from __future__ import annotations

import math
import itertools
from dataclasses import dataclass
from collections.abc import Callable

import numpy as np
from scipy import integrate
from scipy.special import comb

from dickebattery.logger import LOG
from dickebattery.hilbert import DickeModel, ModelParams, Wavefunction
from dickebattery.dynamics import Propagator, rollout
from dickebattery.protocol import Protocol
from dickebattery.observables import record, reduced_density_1
from dickebattery.sac.agent import (
    SacConfig,
    Temperature,
    actor_loss_and_grad,
    critic_loss_and_grad,
)
from dickebattery.sac.networks import Mlp
from dickebattery.sac.training import train
from dickebattery.sac.distributions import sample, squashed_gaussian_entropy


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


def symmetric_embedding(psi: Wavefunction) -> np.ndarray:
    """Amplitudes on the full 2^N qubit space times the cavity, (2^N, n_fock + 1).

    A symmetric-sector amplitude with k excitations is spread evenly over the
    C(N, k) bit strings with k ones. The first qubit is the most significant bit.
    """
    n_tls = psi.layout.n_tls
    grid = psi.as_grid()
    full = np.zeros((2**n_tls, psi.layout.fock_dim), dtype=complex)
    for bits in itertools.product((0, 1), repeat=n_tls):
        index = int("".join(map(str, bits)), 2)
        k = sum(bits)
        full[index] = grid[k] / math.sqrt(comb(n_tls, k, exact=True))
    return full


def brute_force_unit_state(psi: Wavefunction) -> np.ndarray:
    """Partial trace over every qubit but the first, and over the cavity."""
    full = symmetric_embedding(psi)
    first = full.reshape(2, -1)
    return first @ first.conj().T


def haar_random_state(layout, rng: np.random.Generator) -> np.ndarray:
    amplitudes = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    return amplitudes / np.linalg.norm(amplitudes)


def check_reduced_density(
    sizes: tuple[int, ...] = (2, 3, 4), n_states: int = 100, seed: int = 0
) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n_tls in sizes:
        model = DickeModel.build(ModelParams(n_tls=n_tls))
        for _ in range(n_states):
            psi = Wavefunction(haar_random_state(model.layout, rng), model.layout)
            difference = reduced_density_1(psi).matrix - brute_force_unit_state(psi)
            worst = max(worst, float(np.max(np.abs(difference))))
    return CheckResult("reduced density matrix vs partial trace", worst, 1e-10)


def ode_reference(
    hamiltonian: np.ndarray, psi0: np.ndarray, times: np.ndarray
) -> np.ndarray:
    """Schrodinger equation by adaptive Runge-Kutta, one row per time."""
    solution = integrate.solve_ivp(
        lambda _t, y: -1j * (hamiltonian @ y),
        (float(times[0]), float(times[-1])),
        psi0.astype(complex),
        method="DOP853",
        t_eval=times,
        rtol=1e-12,
        atol=1e-12,
    )
    if not solution.success:
        raise RuntimeError(f"Reference integration failed: {solution.message}")
    return solution.y.T


def check_propagator(
    lam: float = 0.3, n_steps: int = 200, dt: float = 0.1
) -> tuple[CheckResult, CheckResult]:
    params = ModelParams(n_tls=1, lambda_max=max(lam, 0.3))
    model = DickeModel.build(params)
    trajectory = rollout(
        Propagator.for_model(model, dt),
        model.initial_state(),
        Protocol(dt=dt, values=(lam,) * n_steps, lambda_max=params.lambda_max),
    )
    exact = ode_reference(
        model.h0.combine(model.hint, lam),
        model.initial_state().amplitudes,
        trajectory.times,
    )
    simulated = np.array([state.amplitudes for state in trajectory.states])
    amplitude_error = float(np.max(np.abs(simulated - exact)))
    drift = max(abs(state.norm - 1.0) for state in trajectory.states)
    return (
        CheckResult("propagator vs adaptive ODE", amplitude_error, 1e-8),
        CheckResult("propagator norm drift", drift, 1e-10),
    )


def check_free_evolution(n_tls: int = 4, n_steps: int = 500, dt: float = 0.1):
    """Largest deviation of the figures of merit from their charge-free values."""
    model = DickeModel.build(ModelParams(n_tls=n_tls))
    trajectory = rollout(
        Propagator.for_model(model, dt),
        model.initial_state(),
        Protocol(dt=dt, values=(0.0,) * n_steps, lambda_max=model.params.lambda_max),
    )
    worst = 0.0
    for state, t in zip(trajectory.states, trajectory.times):
        row = record(model, state, 0.0, t)
        worst = max(
            worst,
            abs(row.energy_per_unit),
            abs(row.ergotropy1),
            abs(row.variance1),
            abs(row.entropy1),
            abs(row.etot_ratio - 1.0),
        )
    return CheckResult("free evolution stays uncharged", worst, 1e-10)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def central_difference(
    loss: Callable[[np.ndarray], float], params: np.ndarray, eps: float = 1e-6
) -> np.ndarray:
    gradient = np.zeros_like(params)
    for index in range(params.size):
        shifted = params.copy()
        shifted[index] = params[index] + eps
        upper = loss(shifted)
        shifted[index] = params[index] - eps
        lower = loss(shifted)
        gradient[index] = (upper - lower) / (2.0 * eps)
    return gradient


def _network_loss(network: Mlp, evaluate: Callable[[], float]):
    def loss(flat: np.ndarray) -> float:
        saved = network.get_flat()
        network.set_flat(flat)
        try:
            return evaluate()
        finally:
            network.set_flat(saved)

    return loss


def check_critic_gradient(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    critic = Mlp.initialize((4, 8, 6, 1), rng)
    inputs = rng.standard_normal((16, 4))
    targets = rng.standard_normal(16)
    _, analytic = critic_loss_and_grad(critic, inputs, targets)
    numeric = central_difference(
        _network_loss(critic, lambda: critic_loss_and_grad(critic, inputs, targets)[0]),
        critic.get_flat(),
    )
    return CheckResult("critic loss gradient", relative_error(analytic, numeric), 1e-4)


def smooth_critic(center: float = 0.1, curvature: float = 3.0):
    """Q(s, a) = -curvature (a - center)^2 + sum(s), with its action derivative."""

    def q_fn(states: np.ndarray, actions: np.ndarray):
        offset = np.asarray(actions) - center
        return (
            -curvature * offset**2 + np.sum(states, axis=1),
            -2.0 * curvature * offset,
        )

    return q_fn


def check_actor_gradient(seed: int = 0, alpha: float = 0.7) -> CheckResult:
    rng = np.random.default_rng(seed)
    policy = Mlp.initialize((3, 8, 6, 2), rng, output_bias=[0.0, 0.8])
    states = rng.standard_normal((16, 3))
    xi = rng.standard_normal(16)
    q_fn = smooth_critic()
    low, high = -0.3, 0.3

    def evaluate() -> float:
        return actor_loss_and_grad(policy, states, xi, alpha, q_fn, low, high)[0]

    _, analytic, _ = actor_loss_and_grad(policy, states, xi, alpha, q_fn, low, high)
    numeric = central_difference(_network_loss(policy, evaluate), policy.get_flat())
    return CheckResult("actor loss gradient", relative_error(analytic, numeric), 1e-4)


def check_temperature_gradient(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    log_probs = rng.standard_normal(32)
    target = -1.2
    temperature = Temperature(log_alpha=-0.4)

    def loss(log_alpha: np.ndarray) -> float:
        return math.exp(log_alpha[0]) * float(np.mean(-log_probs - target))

    numeric = central_difference(loss, np.array([temperature.log_alpha]))
    analytic = np.array([temperature.gradient(log_probs, target)])
    return CheckResult(
        "temperature loss gradient", relative_error(analytic, numeric), 1e-4
    )


def check_squashed_entropy(
    mu: float = 0.0, sigma: float = 1.0, n_samples: int = 1_000_000, seed: int = 0
) -> CheckResult:
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(n_samples)
    draw = sample(np.full(n_samples, mu), np.full(n_samples, sigma), xi, -1.0, 1.0)
    estimate = float(-np.mean(draw.log_prob_true))
    return CheckResult(
        "squashed Gaussian entropy vs Monte-Carlo",
        abs(estimate - squashed_gaussian_entropy(mu, sigma)),
        0.003,
    )


class OneStepEnv:
    """Single-step task with reward -(a - optimum)^2 and a constant observation."""

    state_dim = 2

    def __init__(self, lambda_max: float = 0.3, optimum: float = 0.1):
        self.lambda_max = lambda_max
        self.optimum = optimum
        self.global_step = 0

    def reset(self) -> np.ndarray:
        return np.ones(self.state_dim)

    def step(self, action: float) -> tuple[np.ndarray, float, bool]:
        self.global_step += 1
        return np.ones(self.state_dim), -((action - self.optimum) ** 2), True


TOY_CONFIG = SacConfig(
    batch_size=128,
    total_steps=20_000,
    lr=1e-3,
    lr_alpha=1e-2,
    gamma=0.99,
    n_init_rand=2_000,
    n_init_no_update=0,
    n_updates=10,
    entropy_decay=2_000,
    buffer_size=20_000,
    hidden_sizes=(64, 64),
    log_every=5_000,
)


def check_toy_convergence(seed: int = 0, config: SacConfig = TOY_CONFIG) -> CheckResult:
    env = OneStepEnv()
    agent, _log = train(env, config, seed)
    action = agent.deterministic_action(env.reset())
    return CheckResult("one-step task optimum", abs(action - env.optimum), 0.02)


def run_selftest(*, full: bool = False, seed: int = 0) -> list[CheckResult]:
    """Run every oracle; ``full`` adds the learning run on the one-step task."""
    results = [
        check_reduced_density(seed=seed),
        *check_propagator(),
        check_free_evolution(),
        check_critic_gradient(seed),
        check_actor_gradient(seed),
        check_temperature_gradient(seed),
        check_squashed_entropy(seed=seed),
    ]
    if full:
        results.append(check_toy_convergence(seed))
    for result in results:
        if result.passed:
            LOG.info("PASS %s: %.3e", result.name, result.value)
        else:
            LOG.error(
                "FAIL %s: %.3e > %.1e", result.name, result.value, result.tolerance
            )
    return results
