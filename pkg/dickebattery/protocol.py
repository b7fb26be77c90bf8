#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Piecewise-constant charging protocols: generation and the JSON file format.

A protocol file is a JSON object::

    {
      "omega0": 1.0,
      "lambda_max": 0.29999999999999999,
      "dt": 0.10000000000000001,
      "values": [
        0.29999999999999999,
        ...
      ]
    }

Numbers are written with 17 significant digits so every double survives a
save/load cycle bit for bit.
"""

from __future__ import annotations

import re
import json
import math
import typing
from pathlib import Path
from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np
import jsonschema

from dickebattery.errors import GridMismatch, ControlOutOfRange, ProtocolFormatError
from dickebattery.logger import LOG
from dickebattery.storage import atomic_write_text


if typing.TYPE_CHECKING:
    from dickebattery.hilbert import ModelParams


GRID_TOLERANCE = 1e-9
SWITCH_G_TAU = 0.6
FINE_G_DT = 0.03
COARSE_G_DT = 0.06

SCHEMA_PATH = Path(__file__).parent / "protocol-schema.json"

_NUMBER = re.compile(r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_CONSTANT = re.compile(r"-?(?:NaN|Infinity)")


@dataclass(frozen=True)
class Protocol:
    """Coupling lam_i held constant on [i dt, (i + 1) dt]."""

    dt: float
    values: tuple[float, ...]
    lambda_max: float
    omega0: float = 1.0

    def __post_init__(self):
        values = tuple(float(value) for value in self.values)
        object.__setattr__(self, "values", values)
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise GridMismatch(f"Protocol time step must be positive: {self.dt!r}")
        if not (math.isfinite(self.lambda_max) and self.lambda_max > 0):
            raise ValueError(f"lambda_max must be positive: {self.lambda_max!r}")
        for value in values:
            if not math.isfinite(value) or abs(value) > self.lambda_max:
                raise ControlOutOfRange(value, self.lambda_max)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration(self) -> float:
        return self.dt * len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "lambda_max": self.lambda_max,
            "dt": self.dt,
            "values": list(self.values),
        }


class DeterministicPolicy(typing.Protocol):
    def deterministic_action(self, state: np.ndarray) -> float: ...


class EpisodicEnvironment(typing.Protocol):
    dt: float
    params: ModelParams
    global_step: int

    def reset(self) -> np.ndarray: ...

    def step(self, action: float) -> tuple[np.ndarray, float, bool]: ...


def n_segments(tau: float, dt: float) -> int:
    """Number k of segments with k dt == tau, within a relative 1e-9."""
    if tau < 0:
        raise GridMismatch(f"Charging time must be non-negative: {tau!r}")
    if not dt > 0:
        raise GridMismatch(f"Time step must be positive: {dt!r}")
    k = round(tau / dt)
    if abs(k * dt - tau) > GRID_TOLERANCE * max(abs(tau), dt):
        raise GridMismatch(
            f"Charging time {tau!r} is not a multiple of time step {dt!r}"
        )
    return int(k)


def on_off(
    tau: float, dt: float, lambda_max: float, *, omega0: float = 1.0
) -> Protocol:
    """Coupling at lambda_max for the whole window [0, tau]."""
    return Protocol(
        dt=dt,
        values=(lambda_max,) * n_segments(tau, dt),
        lambda_max=lambda_max,
        omega0=omega0,
    )


def default_g_dt(g_tau: float) -> float:
    """Dimensionless step g~ dt: 0.03 below g~ tau = 0.6, 0.06 from there on."""
    return FINE_G_DT if g_tau < SWITCH_G_TAU else COARSE_G_DT


def time_grid(
    g_tau: float, params: ModelParams, g_dt: float | None = None
) -> tuple[float, float]:
    """Physical (tau, dt) for a dimensionless charging time g~ tau.

    ``g_dt`` fixes the step explicitly; otherwise :func:`default_g_dt` applies.
    """
    g_tilde = params.g_tilde
    step = default_g_dt(g_tau) if g_dt is None else g_dt
    tau = g_tau / g_tilde
    dt = step / g_tilde
    n_segments(tau, dt)
    return tau, dt


def from_policy(policy: DeterministicPolicy, env: EpisodicEnvironment) -> Protocol:
    """Roll out one episode with the policy's deterministic action.

    The environment's global step counter is left as found.
    """
    saved_step = env.global_step
    values: list[float] = []
    try:
        state = env.reset()
        done = False
        while not done:
            action = float(policy.deterministic_action(state))
            state, _reward, done = env.step(action)
            values.append(action)
    finally:
        env.global_step = saved_step
    return Protocol(
        dt=env.dt,
        values=tuple(values),
        lambda_max=env.params.lambda_max,
        omega0=env.params.omega0,
    )


def _format_number(value: float) -> str:
    text = f"{value:.17g}"
    if not any(marker in text for marker in ".e"):
        text += ".0"
    return text


def dumps(protocol: Protocol) -> str:
    lines = [
        "{",
        f'  "omega0": {_format_number(protocol.omega0)},',
        f'  "lambda_max": {_format_number(protocol.lambda_max)},',
        f'  "dt": {_format_number(protocol.dt)},',
    ]
    if protocol.values:
        lines.append('  "values": [')
        body = [f"    {_format_number(value)}" for value in protocol.values]
        lines.append(",\n".join(body))
        lines.append("  ]")
    else:
        lines.append('  "values": []')
    lines.append("}")
    return "\n".join(lines) + "\n"


def save(protocol: Protocol, path: str | Path) -> Path:
    target = atomic_write_text(path, dumps(protocol))
    LOG.info("Saved %d-segment protocol to %s", len(protocol), target)
    return target


def _line_of(text: str, position: int) -> tuple[int, int]:
    line = text.count("\n", 0, position) + 1
    column = position - (text.rfind("\n", 0, position) + 1) + 1
    return line, column


def _key_position(text: str, key: str) -> int | None:
    position = text.find(f'"{key}"')
    return position if position >= 0 else None


def _value_position(text: str, index: int) -> int | None:
    start = _key_position(text, "values")
    if start is None:
        return None
    bracket = text.find("[", start)
    if bracket < 0:
        return None
    for count, match in enumerate(_NUMBER.finditer(text, bracket)):
        if count == index:
            return match.start()
    return None


def _locate(text: str, path: Sequence[str | int]) -> tuple[int | None, int | None]:
    position = None
    if len(path) >= 2 and path[0] == "values" and isinstance(path[1], int):
        position = _value_position(text, path[1])
    elif path:
        position = _key_position(text, str(path[0]))
    if position is None:
        return None, None
    return _line_of(text, position)


def _field_name(path: Sequence[str | int]) -> str:
    return " -> ".join(str(part) for part in path) if path else "root"


class _ConstantRejected(Exception):
    pass


def _reject_constant(name: str):
    raise _ConstantRejected(name)


def _load_schema() -> dict:
    with open(SCHEMA_PATH, encoding="utf-8") as f:
        return json.load(f)


def loads(text: str, *, source: str | None = None) -> Protocol:
    """Parse and validate protocol JSON, reporting line and field on failure."""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except _ConstantRejected as error:
        match = _CONSTANT.search(text)
        line, column = _line_of(text, match.start()) if match else (None, None)
        raise ProtocolFormatError(
            f"Non-finite number {error.args[0]} is not allowed",
            path=source,
            line=line,
            column=column,
        ) from None
    except json.JSONDecodeError as error:
        raise ProtocolFormatError(
            f"Invalid JSON: {error.msg}",
            path=source,
            line=error.lineno,
            column=error.colno,
        ) from error

    validator = jsonschema.Draft7Validator(_load_schema())
    schema_error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if schema_error is not None:
        path = list(schema_error.absolute_path)
        if schema_error.validator == "required":
            missing = re.search(r"'([^']+)'", schema_error.message)
            path = [missing.group(1)] if missing else path
        line, column = _locate(text, path)
        raise ProtocolFormatError(
            schema_error.message,
            path=source,
            line=line,
            column=column,
            field=_field_name(path),
        )

    lambda_max = float(data["lambda_max"])
    for index, value in enumerate(data["values"]):
        if abs(value) > lambda_max:
            line, column = _locate(text, ["values", index])
            raise ProtocolFormatError(
                f"|lambda| = {abs(value)!r} exceeds lambda_max {lambda_max!r}",
                path=source,
                line=line,
                column=column,
                field=_field_name(["values", index]),
            )

    try:
        return Protocol(
            dt=float(data["dt"]),
            values=tuple(float(value) for value in data["values"]),
            lambda_max=lambda_max,
            omega0=float(data["omega0"]),
        )
    except (ValueError, GridMismatch) as error:
        raise ProtocolFormatError(str(error), path=source) from error


def load(path: str | Path) -> Protocol:
    source = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise ProtocolFormatError(
            f"Cannot read protocol: {error}", path=source
        ) from error
    protocol = loads(text, source=source)
    LOG.debug("Loaded %d-segment protocol from %s", len(protocol), source)
    return protocol
