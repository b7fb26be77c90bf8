#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Dense ReLU networks with hand-written backpropagation, and Adam."""

from __future__ import annotations

from dataclasses import field, dataclass

import numpy as np


@dataclass
class ForwardCache:
    """Layer inputs and pre-activations kept for :meth:`Mlp.backward`."""

    inputs: list[np.ndarray]
    preactivations: list[np.ndarray]


@dataclass
class Mlp:
    """Fully connected network, ReLU on every hidden layer, linear output.

    Parameters are exposed as one flat vector laid out layer by layer as
    ``W.ravel()`` followed by ``b``, which is also the layout of gradients.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("An Mlp needs one bias vector per weight matrix")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if weight.ndim != 2 or bias.shape != (weight.shape[1],):
                raise ValueError(
                    f"Layer {index}: weight {weight.shape} and bias {bias.shape} "
                    "do not match"
                )
            if index and self.weights[index - 1].shape[1] != weight.shape[0]:
                raise ValueError(f"Layer {index} input size does not chain")

    @classmethod
    def initialize(
        cls,
        sizes: tuple[int, ...] | list[int],
        rng: np.random.Generator,
        *,
        output_scale: float = 1.0,
        output_bias: np.ndarray | None = None,
    ) -> Mlp:
        """Uniform fan-in initialization, bound 1/sqrt(fan_in) per layer.

        ``output_scale`` shrinks the last layer; ``output_bias`` overrides its
        bias.
        """
        if len(sizes) < 2:
            raise ValueError(f"Need at least input and output sizes: {sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        weights[-1] *= output_scale
        biases[-1] *= output_scale
        if output_bias is not None:
            biases[-1] = np.array(output_bias, dtype=float).reshape(sizes[-1])
        return cls(weights=weights, biases=biases)

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_flat(self) -> np.ndarray:
        return np.concatenate(
            [part for w, b in zip(self.weights, self.biases) for part in (w.ravel(), b)]
        )

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError(
                f"Flat parameters of shape {flat.shape}, expected ({self.n_params},)"
            )
        offset = 0
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[index] = flat[offset : offset + w.size].reshape(w.shape).copy()
            offset += w.size
            self.biases[index] = flat[offset : offset + b.size].copy()
            offset += b.size

    def copy(self) -> Mlp:
        return Mlp(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        activation = np.atleast_2d(np.asarray(x, dtype=float))
        cache = ForwardCache(inputs=[], preactivations=[])
        last = len(self.weights) - 1
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache.inputs.append(activation)
            z = activation @ w + b
            cache.preactivations.append(z)
            activation = z if index == last else np.maximum(z, 0.0)
        return activation, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, cache: ForwardCache, grad_output: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Flat parameter gradient and input gradient, given dL/d(output)."""
        grad = np.asarray(grad_output, dtype=float).reshape(
            cache.preactivations[-1].shape
        )
        grads_w: list[np.ndarray] = [None] * len(self.weights)
        grads_b: list[np.ndarray] = [None] * len(self.weights)
        for index in reversed(range(len(self.weights))):
            grads_w[index] = cache.inputs[index].T @ grad
            grads_b[index] = grad.sum(axis=0)
            grad = grad @ self.weights[index].T
            if index:
                grad = grad * (cache.preactivations[index - 1] > 0.0)
        flat = np.concatenate(
            [part for gw, gb in zip(grads_w, grads_b) for part in (gw.ravel(), gb)]
        )
        return flat, grad


@dataclass
class Adam:
    """Adaptive-moment optimizer over a flat parameter vector."""

    n_params: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.n_params)
        if self.v is None:
            self.v = np.zeros(self.n_params)
        if self.m.shape != (self.n_params,) or self.v.shape != (self.n_params,):
            raise ValueError("Moment vectors do not match the parameter count")

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def apply(self, network: Mlp, grad: np.ndarray) -> None:
        network.set_flat(self.step(network.get_flat(), grad))
