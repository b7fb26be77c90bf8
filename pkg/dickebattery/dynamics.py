#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Exact piecewise-constant propagation of the charger-battery wavefunction."""

from __future__ import annotations

import time
import threading
from typing import TYPE_CHECKING
from collections import OrderedDict
from dataclasses import field, dataclass

import numpy as np
from scipy import linalg

from dickebattery.errors import NormDrift, GridMismatch, ControlOutOfRange
from dickebattery.logger import LOG
from dickebattery.hilbert import DickeModel, Wavefunction, HermitianOperator
from dickebattery.metrics import record_propagation


if TYPE_CHECKING:
    from dickebattery.protocol import Protocol


NORM_WARN_TOLERANCE = 1e-10
NORM_ERROR_TOLERANCE = 1e-9
GRID_TOLERANCE = 1e-9


@dataclass(frozen=True)
class _Spectrum:
    energies: np.ndarray
    vectors: np.ndarray


@dataclass
class Propagator:
    """U(lam) = exp(-i (H0 + lam Hint) dt) from the Hermitian eigendecomposition.

    Spectra are cached per exact control value; a cached entry is the same
    decomposition that would be recomputed, so results do not depend on cache
    state.
    """

    h0: HermitianOperator
    hint: HermitianOperator
    dt: float
    lambda_max: float
    cache_size: int = 64
    _cache: OrderedDict[float, _Spectrum] = field(
        default_factory=OrderedDict, init=False, repr=False
    )
    _cache_lock: threading.RLock = field(
        default_factory=threading.RLock, init=False, repr=False
    )

    def __post_init__(self):
        if not self.dt > 0:
            raise GridMismatch(f"Time step must be positive: {self.dt}")
        if self.h0.dim != self.hint.dim:
            raise ValueError(
                f"H0 ({self.h0.dim}) and Hint ({self.hint.dim}) dimensions differ"
            )

    @classmethod
    def for_model(cls, model: DickeModel, dt: float, **kwargs) -> Propagator:
        return cls(
            h0=model.h0,
            hint=model.hint,
            dt=dt,
            lambda_max=model.params.lambda_max,
            **kwargs,
        )

    def spectrum(self, lam: float) -> _Spectrum:
        key = float(lam)
        with self._cache_lock:
            cached = self._cache.get(key)
            if cached is not None:
                self._cache.move_to_end(key)
                return cached
        energies, vectors = linalg.eigh(self.h0.combine(self.hint, key))
        spectrum = _Spectrum(energies=energies, vectors=vectors)
        if self.cache_size > 0:
            with self._cache_lock:
                self._cache[key] = spectrum
                while len(self._cache) > self.cache_size:
                    self._cache.popitem(last=False)
        return spectrum

    def unitary(self, lam: float, *, backward: bool = False) -> np.ndarray:
        spectrum = self.spectrum(lam)
        step = -self.dt if backward else self.dt
        phases = np.exp(-1j * spectrum.energies * step)
        return (spectrum.vectors * phases) @ spectrum.vectors.conj().T

    def check_control(self, lam: float) -> None:
        if not np.isfinite(lam) or abs(lam) > self.lambda_max:
            raise ControlOutOfRange(float(lam), self.lambda_max)


@dataclass
class Trajectory:
    states: list[Wavefunction]
    controls: list[float]
    dt: float

    def __post_init__(self):
        if len(self.states) != len(self.controls) + 1:
            raise ValueError(
                f"Trajectory needs one more state ({len(self.states)}) than "
                f"controls ({len(self.controls)})"
            )

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.states))

    @property
    def final(self) -> Wavefunction:
        return self.states[-1]


def _renormalize(amplitudes: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(amplitudes)
    deviation = abs(norm - 1.0)
    if deviation > NORM_ERROR_TOLERANCE:
        raise NormDrift(deviation, NORM_ERROR_TOLERANCE)
    if deviation > NORM_WARN_TOLERANCE:
        LOG.warning("Norm drift %.3e after propagation step, renormalizing", deviation)
        return amplitudes / norm
    return amplitudes


def propagate_step(
    prop: Propagator, psi: Wavefunction, lam: float, *, backward: bool = False
) -> Wavefunction:
    """Apply one constant-lam segment of duration dt (or -dt when backward)."""
    prop.check_control(lam)
    started = time.perf_counter()
    spectrum = prop.spectrum(lam)
    step = -prop.dt if backward else prop.dt
    phases = np.exp(-1j * spectrum.energies * step)
    evolved = spectrum.vectors @ (phases * (spectrum.vectors.conj().T @ psi.amplitudes))
    record_propagation(time.perf_counter() - started)
    return Wavefunction(_renormalize(evolved), psi.layout)


def rollout(prop: Propagator, psi0: Wavefunction, protocol: Protocol) -> Trajectory:
    """Iterate :func:`propagate_step` over every segment of ``protocol``."""
    if abs(protocol.dt - prop.dt) > GRID_TOLERANCE * max(prop.dt, protocol.dt):
        raise GridMismatch(
            f"Protocol time step {protocol.dt!r} differs from propagator "
            f"time step {prop.dt!r}"
        )
    states = [psi0]
    for lam in protocol.values:
        states.append(propagate_step(prop, states[-1], lam))
    return Trajectory(states=states, controls=list(protocol.values), dt=prop.dt)


def excitation_leakage(trajectory: Trajectory, excitations: HermitianOperator) -> float:
    """Largest |<N_exc>(t) - <N_exc>(0)| along the trajectory.

    Zero for excitation-conserving (RWA) dynamics; nonzero values measure the
    counter-rotating contribution.
    """
    reference = excitations.expectation(trajectory.states[0].amplitudes)
    return max(
        abs(excitations.expectation(state.amplitudes) - reference)
        for state in trajectory.states
    )
