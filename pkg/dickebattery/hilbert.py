#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Truncated Dicke x Fock product space and the operators of the battery model.

Basis states are |J=N/2, M> (x) |n>. The collective spin is labelled by
``m_index = M + N/2`` (number of excited units) and the flat index puts the
photon number n fastest::

    flat = m_index * (n_fock + 1) + n
"""

from __future__ import annotations

from typing import NamedTuple
from dataclasses import field, replace, dataclass

import numpy as np

from dickebattery.errors import InvalidModelParams, NonHermitianOperator


HERMITICITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Physical and truncation parameters of a Dicke battery.

    ``n_fock`` defaults to ``2 * n_tls``, the cutoff used during training.
    ``coupling_scale`` multiplies omega0 (J_+ + J_-)(a + a^dag); at 1 the
    interaction is omega0 sum_j sigma_x^j (a + a^dag).
    """

    n_tls: int
    omega0: float = 1.0
    lambda_max: float = 0.3
    n_fock: int | None = None
    coupling_scale: float = 1.0

    def __post_init__(self):
        if self.n_fock is None:
            object.__setattr__(self, "n_fock", 2 * self.n_tls)
        if not isinstance(self.n_tls, (int, np.integer)) or self.n_tls < 1:
            raise InvalidModelParams(f"n_tls must be a positive integer: {self.n_tls}")
        if not isinstance(self.n_fock, (int, np.integer)) or self.n_fock < 1:
            raise InvalidModelParams(
                f"n_fock must be a positive integer: {self.n_fock}"
            )
        if self.n_fock < self.n_tls:
            raise InvalidModelParams(
                f"n_fock ({self.n_fock}) must be >= n_tls ({self.n_tls}) so the "
                "initial N-photon Fock state is representable"
            )
        if not self.omega0 > 0:
            raise InvalidModelParams(f"omega0 must be positive: {self.omega0}")
        if not self.lambda_max > 0:
            raise InvalidModelParams(f"lambda_max must be positive: {self.lambda_max}")
        if not self.coupling_scale > 0:
            raise InvalidModelParams(
                f"coupling_scale must be positive: {self.coupling_scale}"
            )

    @property
    def g_tilde(self) -> float:
        """Largest effective coupling omega0 * lambda_max."""
        return self.omega0 * self.lambda_max

    def with_fock_multiplier(self, multiplier: int) -> ModelParams:
        """Same system with the cutoff set to ``multiplier * n_tls``."""
        return replace(self, n_fock=multiplier * self.n_tls)


@dataclass(frozen=True)
class BasisLayout:
    n_tls: int
    n_fock: int

    @property
    def spin_dim(self) -> int:
        return self.n_tls + 1

    @property
    def fock_dim(self) -> int:
        return self.n_fock + 1

    @property
    def dim(self) -> int:
        return self.spin_dim * self.fock_dim

    def index(self, m_index: int, n: int) -> int:
        if not 0 <= m_index <= self.n_tls:
            raise IndexError(f"m_index {m_index} outside 0..{self.n_tls}")
        if not 0 <= n <= self.n_fock:
            raise IndexError(f"photon number {n} outside 0..{self.n_fock}")
        return m_index * self.fock_dim + n

    def unravel(self, flat: int) -> tuple[int, int]:
        """Inverse of :meth:`index`."""
        if not 0 <= flat < self.dim:
            raise IndexError(f"flat index {flat} outside 0..{self.dim - 1}")
        return divmod(flat, self.fock_dim)

    def excitations(self) -> np.ndarray:
        """Battery excitation count m_index for every flat index."""
        return np.repeat(np.arange(self.spin_dim), self.fock_dim)

    def photons(self) -> np.ndarray:
        """Photon number n for every flat index."""
        return np.tile(np.arange(self.fock_dim), self.spin_dim)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense Hermitian matrix, validated and made read-only on construction."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise NonHermitianOperator(f"Operator must be square: {matrix.shape}")
        defect = hermiticity_defect(matrix)
        if defect > HERMITICITY_TOLERANCE:
            raise NonHermitianOperator(
                f"Hermiticity defect {defect:.3e} exceeds {HERMITICITY_TOLERANCE}"
            )
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, amplitudes: np.ndarray) -> float:
        return float(np.real(np.vdot(amplitudes, self.matrix @ amplitudes)))

    def combine(self, other: HermitianOperator, weight: float) -> np.ndarray:
        """Plain matrix ``self + weight * other``."""
        return self.matrix + weight * other.matrix


class CollectiveOperators(NamedTuple):
    jz: HermitianOperator
    jplus: np.ndarray
    jminus: np.ndarray
    a: np.ndarray
    adag: np.ndarray


@dataclass
class Wavefunction:
    """Joint charger-battery pure state in a :class:`BasisLayout`."""

    amplitudes: np.ndarray
    layout: BasisLayout = field(repr=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.layout.dim,):
            raise ValueError(
                f"Amplitude vector of shape {self.amplitudes.shape} does not match "
                f"basis dimension {self.layout.dim}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def as_grid(self) -> np.ndarray:
        """Amplitudes reshaped to ``c[m_index, n]``."""
        return self.amplitudes.reshape(self.layout.spin_dim, self.layout.fock_dim)

    def copy(self) -> Wavefunction:
        return Wavefunction(self.amplitudes.copy(), self.layout)


def hermiticity_defect(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


def build_basis(params: ModelParams) -> BasisLayout:
    return BasisLayout(n_tls=params.n_tls, n_fock=params.n_fock)


def _spin_ladder(n_tls: int) -> np.ndarray:
    """J_+ on the spin factor: J_+|k> = sqrt(J(J+1) - M(M+1)) |k+1>, M = k - J."""
    j = n_tls / 2
    jplus = np.zeros((n_tls + 1, n_tls + 1))
    for k in range(n_tls):
        m = k - j
        jplus[k + 1, k] = np.sqrt(j * (j + 1) - m * (m + 1))
    return jplus


def _annihilation(n_fock: int) -> np.ndarray:
    """Truncated a; its adjoint maps |n_fock> to 0."""
    return np.diag(np.sqrt(np.arange(1, n_fock + 1, dtype=float)), k=1)


def build_collective_ops(params: ModelParams) -> CollectiveOperators:
    layout = build_basis(params)
    spin_eye = np.eye(layout.spin_dim)
    fock_eye = np.eye(layout.fock_dim)

    jplus_spin = _spin_ladder(params.n_tls)
    jz_spin = np.diag(np.arange(layout.spin_dim) - params.n_tls / 2)
    a_fock = _annihilation(params.n_fock)

    jplus = np.kron(jplus_spin, fock_eye).astype(complex)
    a = np.kron(spin_eye, a_fock).astype(complex)
    return CollectiveOperators(
        jz=HermitianOperator(np.kron(jz_spin, fock_eye)),
        jplus=jplus,
        jminus=jplus.conj().T.copy(),
        a=a,
        adag=a.conj().T.copy(),
    )


def build_H0(params: ModelParams) -> HermitianOperator:
    """omega0 * (a^dag a) + omega0 * (J_z + N/2); diagonal with entries omega0*(k+n)."""
    layout = build_basis(params)
    energies = params.omega0 * (layout.excitations() + layout.photons())
    return HermitianOperator(np.diag(energies.astype(float)))


def build_Hint(params: ModelParams) -> HermitianOperator:
    """s omega0 (J_+ + J_-)(a + a^dag) with s = coupling_scale."""
    ops = build_collective_ops(params)
    spin = ops.jplus + ops.jminus
    field_ = ops.a + ops.adag
    scale = params.coupling_scale * params.omega0
    return HermitianOperator(scale * (spin @ field_))


def build_Hint_rwa(params: ModelParams) -> HermitianOperator:
    """s omega0 (J_+ a + J_- a^dag), s = coupling_scale: excitations conserved."""
    ops = build_collective_ops(params)
    scale = params.coupling_scale * params.omega0
    return HermitianOperator(scale * (ops.jplus @ ops.a + ops.jminus @ ops.adag))


def excitation_number(params: ModelParams) -> HermitianOperator:
    """J_z + N/2 + a^dag a, conserved by the RWA interaction."""
    layout = build_basis(params)
    return HermitianOperator(
        np.diag((layout.excitations() + layout.photons()).astype(float))
    )


def initial_state(
    params: ModelParams, layout: BasisLayout | None = None
) -> Wavefunction:
    """|G> (x) |N>: battery discharged, cavity holding N photons."""
    layout = layout or build_basis(params)
    if layout.n_fock < params.n_tls:
        raise InvalidModelParams(
            f"n_fock ({layout.n_fock}) cannot represent the {params.n_tls}-photon state"
        )
    amplitudes = np.zeros(layout.dim, dtype=complex)
    amplitudes[layout.index(0, params.n_tls)] = 1.0
    return Wavefunction(amplitudes, layout)


@dataclass(frozen=True, eq=False)
class DickeModel:
    """Operators of one battery configuration, shareable read-only."""

    params: ModelParams
    layout: BasisLayout
    h0: HermitianOperator
    hint: HermitianOperator
    rwa: bool = False

    @classmethod
    def build(cls, params: ModelParams, *, rwa: bool = False) -> DickeModel:
        return cls(
            params=params,
            layout=build_basis(params),
            h0=build_H0(params),
            hint=build_Hint_rwa(params) if rwa else build_Hint(params),
            rwa=rwa,
        )

    def initial_state(self) -> Wavefunction:
        return initial_state(self.params, self.layout)
