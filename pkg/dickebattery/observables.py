#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Figures of merit of a charged Dicke battery.

All single-unit quantities come from the 2x2 reduced density matrix of one
two-level system, obtained from the symmetric-sector amplitudes without ever
building the 2^N dimensional qubit space.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import astuple, dataclass

import numpy as np
from scipy.special import gammaln

from dickebattery.errors import NumericalNegativity
from dickebattery.hilbert import DickeModel, ModelParams, Wavefunction


NEGATIVITY_ERROR = 1e-8
CLAMP_TOLERANCE = 1e-10
ENTROPY_CUTOFF = 1e-15
INVARIANT_TOLERANCE = 1e-9

CSV_HEADER = (
    "t",
    "lambda",
    "energy_per_unit",
    "ergotropy1",
    "variance1",
    "entropy1",
    "etot_ratio",
)


@dataclass(frozen=True, eq=False)
class QubitDensityMatrix:
    """Reduced state of one battery unit, basis order (|0>, |1>)."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = float(np.real(np.trace(matrix)))
        if abs(trace - 1.0) > CLAMP_TOLERANCE:
            raise NumericalNegativity(f"Reduced density matrix trace {trace!r} != 1")
        raw = np.linalg.eigvalsh(matrix)
        if raw[0] < -NEGATIVITY_ERROR or raw[-1] > 1.0 + NEGATIVITY_ERROR:
            raise NumericalNegativity(
                f"Reduced density matrix eigenvalues {raw.tolist()} outside [0, 1]"
            )
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_eigenvalues", np.clip(raw, 0.0, 1.0))

    @property
    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues clamped to [0, 1]."""
        return self._eigenvalues

    @property
    def excited_population(self) -> float:
        return float(np.real(self.matrix[1, 1]))

    @property
    def min_eigenvalue(self) -> float:
        return float(self._eigenvalues[0])

    @property
    def bloch_length(self) -> float:
        return float(self._eigenvalues[1] - self._eigenvalues[0])

    def ergotropy(self, omega0: float) -> float:
        raw = omega0 * (self.excited_population - self.min_eigenvalue)
        if raw < -CLAMP_TOLERANCE * omega0:
            raise NumericalNegativity(f"Negative ergotropy {raw!r}")
        return max(raw, 0.0)

    def entropy(self) -> float:
        values = self._eigenvalues[self._eigenvalues > ENTROPY_CUTOFF]
        return float(-np.sum(values * np.log(values)))

    def variance(self, omega0: float) -> float:
        p_excited = min(max(self.excited_population, 0.0), 1.0)
        return omega0**2 * p_excited * (1.0 - p_excited)


@dataclass(frozen=True)
class StepRecord:
    t: float
    lam: float
    energy_per_unit: float
    ergotropy1: float
    variance1: float
    entropy1: float
    etot_ratio: float

    def violations(self, omega0: float = 1.0) -> list[str]:
        """Invariants this record breaks, empty when valid."""
        tol = INVARIANT_TOLERANCE
        problems = []
        if not all(math.isfinite(value) for value in astuple(self)):
            problems.append("non-finite field")
        if not -tol <= self.energy_per_unit <= omega0 + tol:
            problems.append(f"energy_per_unit {self.energy_per_unit} outside [0, w0]")
        if not -tol <= self.ergotropy1 <= self.energy_per_unit + tol:
            problems.append(
                f"ergotropy1 {self.ergotropy1} outside [0, {self.energy_per_unit}]"
            )
        if not -tol <= self.entropy1 <= math.log(2) + tol:
            problems.append(f"entropy1 {self.entropy1} outside [0, ln 2]")
        if not -tol <= self.variance1 <= omega0**2 / 4 + tol:
            problems.append(f"variance1 {self.variance1} outside [0, w0^2/4]")
        return problems

    def as_row(self) -> list[str]:
        return [f"{value:.12g}" for value in astuple(self)]


@lru_cache(maxsize=64)
def _contraction_weights(n_tls: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weights w_{s s'}(e) = C(N-1,e) / sqrt(C(N,e+s) C(N,e+s')) for e=0..N-1.

    Evaluated in log space so large N neither overflows nor loses precision.
    """

    def log_binom(n: int, k: np.ndarray) -> np.ndarray:
        return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)

    e = np.arange(n_tls, dtype=float)
    degeneracy = log_binom(n_tls - 1, e)
    ground = log_binom(n_tls, e)
    excited = log_binom(n_tls, e + 1)
    w00 = np.exp(degeneracy - ground)
    w11 = np.exp(degeneracy - excited)
    w10 = np.exp(degeneracy - 0.5 * (ground + excited))
    for weights in (w00, w11, w10):
        weights.flags.writeable = False
    return w00, w11, w10


def battery_matrix(psi: Wavefunction) -> np.ndarray:
    """rho_{M,M'} = sum_n c_{M,n} conj(c_{M',n}) after tracing out the cavity."""
    grid = psi.as_grid()
    return grid @ grid.conj().T


def battery_energy(psi: Wavefunction, params: ModelParams) -> float:
    """<H_B> = omega0 * sum |c_{M,n}|^2 (M + N/2)."""
    populations = np.sum(np.abs(psi.as_grid()) ** 2, axis=1)
    excitations = np.arange(psi.layout.spin_dim)
    return params.omega0 * float(populations @ excitations)


def reduced_density_1(psi: Wavefunction) -> QubitDensityMatrix:
    n_tls = psi.layout.n_tls
    rho = battery_matrix(psi)
    w00, w11, w10 = _contraction_weights(n_tls)
    e = np.arange(n_tls)

    p_ground = float(np.real(np.sum(w00 * rho[e, e])))
    p_excited = float(np.real(np.sum(w11 * rho[e + 1, e + 1])))
    coherence = complex(np.sum(w10 * rho[e + 1, e]))
    return QubitDensityMatrix(
        np.array([[p_ground, np.conj(coherence)], [coherence, p_excited]])
    )


def ergotropy_1(psi: Wavefunction, params: ModelParams) -> float:
    """E^(N)/N - r1*omega0 with r1 the smaller eigenvalue of the unit state.

    The diagonal of the reduced state already equals E^(N)/(N omega0) by
    permutation symmetry, so the mean energy is read from it.
    """
    return reduced_density_1(psi).ergotropy(params.omega0)


def energy_variance_1(psi: Wavefunction, params: ModelParams) -> float:
    return reduced_density_1(psi).variance(params.omega0)


def entropy_1(psi: Wavefunction) -> float:
    return reduced_density_1(psi).entropy()


def total_energy(model: DickeModel, psi: Wavefunction, lam: float) -> float:
    """<H0 + lam Hint>."""
    amplitudes = psi.amplitudes
    energy = model.h0.expectation(amplitudes)
    if lam != 0.0:
        energy += lam * model.hint.expectation(amplitudes)
    return energy


def record(model: DickeModel, psi: Wavefunction, lam: float, t: float) -> StepRecord:
    """All figures of merit of ``psi`` at time ``t``.

    ``etot_ratio`` is taken with the coupling switched off after ``t``, the
    energy left in charger plus battery once they are decoupled, relative to
    the initial N omega0.
    """
    params = model.params
    unit = reduced_density_1(psi)
    return StepRecord(
        t=float(t),
        lam=float(lam),
        energy_per_unit=battery_energy(psi, params) / params.n_tls,
        ergotropy1=unit.ergotropy(params.omega0),
        variance1=unit.variance(params.omega0),
        entropy1=unit.entropy(),
        etot_ratio=total_energy(model, psi, 0.0) / (params.n_tls * params.omega0),
    )
