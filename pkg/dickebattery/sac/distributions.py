#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Gaussian squashed by tanh onto a bounded control interval [low, high].

With u = mu + sigma xi and h = (high - low) / 2 the action is
``low + h (1 + tanh u)``. Its log-density is the Gaussian log-density of u
minus ``log h + log(1 - tanh(u)^2)``. The reference variant omits ``log h``,
scoring the sample as if it lived on [-1, 1], so entropy targets do not depend
on the physical bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats


SIGMA_FLOOR = 1e-7
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
LN2 = math.log(2.0)


def sigma_from_raw(raw: np.ndarray) -> np.ndarray:
    """sigma = m^2 + 1e-7, positive for every network output m."""
    return np.square(raw) + SIGMA_FLOOR


def log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2) as 2 (ln 2 - u - softplus(-2u)), finite for any u."""
    return 2.0 * (LN2 - u - np.logaddexp(0.0, -2.0 * u))


def squash(u: np.ndarray, low: float, high: float) -> np.ndarray:
    half_width = 0.5 * (high - low)
    return low + half_width * (1.0 + np.tanh(u))


@dataclass(frozen=True, eq=False)
class SquashedSample:
    """One reparameterized draw per row, with what its gradients need."""

    action: np.ndarray
    log_prob: np.ndarray
    log_prob_true: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    xi: np.ndarray
    tanh_u: np.ndarray
    half_width: float


def sample(
    mu: np.ndarray, sigma: np.ndarray, xi: np.ndarray, low: float, high: float
) -> SquashedSample:
    """Squashed draw for given standard-normal noise ``xi``.

    ``log_prob`` is the reference-interval log-density, ``log_prob_true`` the
    density of the action on [low, high]; they differ by exactly log h.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    xi = np.asarray(xi, dtype=float)
    half_width = 0.5 * (high - low)
    u = mu + sigma * xi
    log_prob = -0.5 * xi**2 - np.log(sigma) - LOG_SQRT_2PI - log1m_tanh_sq(u)
    return SquashedSample(
        action=squash(u, low, high),
        log_prob=log_prob,
        log_prob_true=log_prob - math.log(half_width),
        mu=mu,
        sigma=sigma,
        xi=xi,
        tanh_u=np.tanh(u),
        half_width=half_width,
    )


def log_prob_of_action(
    action: np.ndarray,
    mu: np.ndarray,
    sigma: np.ndarray,
    low: float,
    high: float,
    *,
    reference: bool = True,
) -> np.ndarray:
    """Log-density of given actions strictly inside (low, high)."""
    half_width = 0.5 * (high - low)
    y = (np.asarray(action, dtype=float) - low) / half_width - 1.0
    u = np.arctanh(y)
    log_prob = stats.norm.logpdf(u, loc=mu, scale=sigma) - log1m_tanh_sq(u)
    return log_prob if reference else log_prob - math.log(half_width)


def squashed_gaussian_entropy(
    mu: float, sigma: float, half_width: float = 1.0
) -> float:
    """Differential entropy of the squashed Gaussian by quadrature.

    H = 1/2 log(2 pi e sigma^2) + log h + E[log(1 - tanh(u)^2)], u ~ N(mu, sigma).
    """
    gaussian = stats.norm(loc=mu, scale=sigma)
    jacobian, _error = integrate.quad(
        lambda u: gaussian.pdf(u) * log1m_tanh_sq(u),
        mu - 40.0 * sigma,
        mu + 40.0 * sigma,
        points=[mu],
        limit=200,
    )
    return float(gaussian.entropy() + math.log(half_width) + jacobian)
