#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Exceptions raised by DickeBattery."""

from __future__ import annotations


class DickeBatteryError(Exception):
    """Base class for all package errors."""


class InvalidModelParams(DickeBatteryError, ValueError):
    """Model parameters violate their invariants."""


class NonHermitianOperator(DickeBatteryError, ValueError):
    """An operator expected to be Hermitian is not."""


class NormDrift(DickeBatteryError, ArithmeticError):
    """Wavefunction norm drifted beyond tolerance during propagation."""

    def __init__(self, deviation: float, tolerance: float):
        self.deviation = deviation
        self.tolerance = tolerance
        super().__init__(
            f"Wavefunction norm deviates from 1 by {deviation:.3e} "
            f"(tolerance {tolerance:.1e})"
        )


class ControlOutOfRange(DickeBatteryError, ValueError):
    """A coupling value lies outside [-lambda_max, lambda_max]."""

    def __init__(self, value: float, lambda_max: float):
        self.value = value
        self.lambda_max = lambda_max
        super().__init__(
            f"Control value {value!r} outside [-{lambda_max}, {lambda_max}]"
        )


class GridMismatch(DickeBatteryError, ValueError):
    """Durations or grids are not commensurate with the time step."""


class NumericalNegativity(DickeBatteryError, ArithmeticError):
    """A density matrix has a genuinely negative eigenvalue."""


class EpisodeFinished(DickeBatteryError, RuntimeError):
    """The environment was stepped after its episode ended."""


class ProtocolFormatError(DickeBatteryError, ValueError):
    """A protocol file could not be parsed or violates its schema."""

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        column: int | None = None,
        field: str | None = None,
    ):
        self.path = path
        self.line = line
        self.column = column
        self.field = field
        location = []
        if path:
            location.append(path)
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if field:
            location.append(f"field {field}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class TrainingDiverged(DickeBatteryError, ArithmeticError):
    """A SAC loss became non-finite."""

    def __init__(self, message: str, *, step: int, repetition: int | None = None):
        self.message = message
        self.step = step
        self.repetition = repetition
        where = f"step {step}"
        if repetition is not None:
            where = f"repetition {repetition}, {where}"
        super().__init__(f"{message} ({where})")


class CheckpointError(DickeBatteryError, ValueError):
    """A checkpoint file is missing, corrupt, or incompatible."""


class ConfigurationError(DickeBatteryError, ValueError):
    """Experiment configuration is invalid."""


class RecordInvariantError(DickeBatteryError, ValueError):
    """A figure-of-merit record violates its physical bounds."""


class RunInterrupted(DickeBatteryError, RuntimeError):
    """A stop was requested before every repetition finished training."""

    def __init__(self, stem: str, completed: int, total: int):
        self.stem = stem
        self.completed = completed
        self.total = total
        super().__init__(
            f"{stem}: stopped with {completed} of {total} repetitions trained; "
            "checkpoints are kept for --resume"
        )
