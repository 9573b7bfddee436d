# -*- coding: utf-8 -*-
#
# Copyright 2019-2023 Marco Favorito, Roberto Cipollone, Luca Iocchi
#
# ------------------------------
#
# This file is part of gym-consensus.
#
# gym-consensus is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# gym-consensus is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with gym-consensus.  If not, see <https://www.gnu.org/licenses/>.
#

"""Small differentiable networks on numpy arrays.

Every network exposes `forward_cache(x) -> (y, cache)` and
`backward(cache, grad_y) -> (grad_x, flat_param_grads)`, with parameters
read and written as one flat vector. Inputs are batch-first.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from scipy.special import softmax

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")
MANIFEST_HEADER = "gym-consensus-parameters"
MANIFEST_VERSION = 1


class DivergenceError(RuntimeError):
    """Values became non-finite or too large during training."""


def check_finite(value: np.ndarray, what: str) -> np.ndarray:
    """Raise DivergenceError if `value` has NaN or infinite entries."""
    if not np.all(np.isfinite(value)):
        raise DivergenceError(f"Non-finite values in {what}")
    return value


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - a**2
    return np.ones_like(z)


class DenseNet:
    """A fully connected network y = f_L(... f_1(x W_1 + b_1) ... W_L + b_L)."""

    def __init__(
        self,
        sizes: Sequence[int],
        activation: str = "relu",
        output_activation: str = "identity",
        rng: Optional[np.random.Generator] = None,
    ):
        """
        Initialize with Glorot-normal weights and zero biases.

        :param sizes: input size, hidden sizes, output size.
        :param activation: activation of the hidden layers.
        :param output_activation: activation of the last layer.
        :param rng: the random generator of the initialization.
        """
        if len(sizes) < 2:
            raise ValueError("A network needs an input and an output size")
        for name in (activation, output_activation):
            if name not in ACTIVATIONS:
                raise ValueError(f"Unknown activation {name!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.sizes = tuple(int(s) for s in sizes)
        self.activations = tuple(
            [activation] * (len(sizes) - 2) + [output_activation]
        )
        self.weights = [
            rng.normal(0.0, np.sqrt(2.0 / (m + n)), size=(m, n))
            for m, n in zip(self.sizes[:-1], self.sizes[1:])
        ]
        self.biases = [np.zeros(n) for n in self.sizes[1:]]

    @property
    def input_size(self) -> int:
        """Get the input size."""
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        """Get the output size."""
        return self.sizes[-1]

    @property
    def n_params(self) -> int:
        """Get the number of parameters."""
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_flat(self) -> np.ndarray:
        """Parameters as one vector."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.extend([w.reshape(-1), b])
        return np.concatenate(parts)

    def set_flat(self, vector: np.ndarray):
        """Load parameters from one vector."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.n_params,):
            raise ValueError(f"Expected {self.n_params} parameters, got {vector.shape}")
        offset = 0
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[k] = vector[offset : offset + w.size].reshape(w.shape).copy()
            offset += w.size
            self.biases[k] = vector[offset : offset + b.size].copy()
            offset += b.size

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        """Forward pass keeping what the backward pass needs."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_size:
            raise ValueError(f"Expected inputs of size {self.input_size}, got {x.shape}")
        lead = x.shape[:-1]
        a = x.reshape(-1, self.input_size)
        memory = [(a, None, None)]
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = a @ w + b
            a = _activate(name, z)
            memory.append((a, z, name))
        check_finite(a, "network output")
        return a.reshape(lead + (self.output_size,)), (lead, memory)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Forward pass."""
        return self.forward_cache(x)[0]

    def backward(self, cache: Any, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Reverse-mode pass.

        :param cache: the cache of 'forward_cache'.
        :param grad_out: gradient of the loss with respect to the output.
        :return: the gradients with respect to the input and to the flat parameters.
        """
        lead, memory = cache
        grad = np.asarray(grad_out, dtype=float).reshape(-1, self.output_size)
        weight_grads: list[np.ndarray] = []
        bias_grads: list[np.ndarray] = []
        for k in reversed(range(len(self.weights))):
            a, z, name = memory[k + 1]
            a_prev = memory[k][0]
            grad_z = grad * _activation_grad(name, z, a)
            weight_grads.append(a_prev.T @ grad_z)
            bias_grads.append(grad_z.sum(axis=0))
            grad = grad_z @ self.weights[k].T
        parts = []
        for gw, gb in zip(reversed(weight_grads), reversed(bias_grads)):
            parts.extend([gw.reshape(-1), gb])
        return grad.reshape(lead + (self.input_size,)), np.concatenate(parts)

    def copy(self) -> "DenseNet":
        """A deep copy."""
        net = DenseNet.__new__(DenseNet)
        net.sizes = self.sizes
        net.activations = self.activations
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net


def canonical_order(elements: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Order of the elements of each set sorted lexicographically.

    Ties between equal elements are broken by their weight, so that equal
    multisets of (element, weight) pairs are accumulated in the same order.

    :param elements: array of shape (B, M, D).
    :param weights: array of shape (B, M).
    :return: integer array of shape (B, M).
    """
    order = np.argsort(weights, axis=1, kind="stable")
    for d in reversed(range(elements.shape[2])):
        keys = np.take_along_axis(elements[:, :, d], order, axis=1)
        order = np.take_along_axis(order, np.argsort(keys, axis=1, kind="stable"), axis=1)
    return order


class SetPoolNet:
    """Encoder per element, weighted mean or max pooling, then a head.

    The output does not depend on the order of the elements: they are
    sorted into a canonical order before pooling.
    """

    def __init__(
        self,
        element_size: int,
        hidden: int = 32,
        output_size: int = 1,
        pooling: str = "mean",
        rng: Optional[np.random.Generator] = None,
    ):
        """Initialize."""
        if pooling not in ("mean", "max"):
            raise ValueError(f"Unknown pooling {pooling!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.pooling = pooling
        self.encoder = DenseNet([element_size, hidden, hidden], "relu", "relu", rng)
        self.head = DenseNet([hidden, hidden, output_size], "relu", "identity", rng)

    @property
    def element_size(self) -> int:
        """Get the size of one element."""
        return self.encoder.input_size

    @property
    def n_params(self) -> int:
        """Get the number of parameters."""
        return self.encoder.n_params + self.head.n_params

    def get_flat(self) -> np.ndarray:
        """Parameters as one vector."""
        return np.concatenate([self.encoder.get_flat(), self.head.get_flat()])

    def set_flat(self, vector: np.ndarray):
        """Load parameters from one vector."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.n_params,):
            raise ValueError(f"Expected {self.n_params} parameters, got {vector.shape}")
        self.encoder.set_flat(vector[: self.encoder.n_params])
        self.head.set_flat(vector[self.encoder.n_params :])

    def forward_cache(
        self, elements: np.ndarray, weights: Optional[np.ndarray] = None
    ) -> tuple[np.ndarray, Any]:
        """
        Forward pass on a batch of sets.

        :param elements: array of shape (B, M, D), or (M, D) for one set.
        :param weights: non-negative weights of shape (B, M); 1 by default.
            Elements with weight 0 are left out of the pooling.
        :return: the outputs, of shape (B, out) or (out,), and the cache.
        """
        elements = np.asarray(elements, dtype=float)
        single = elements.ndim == 2
        if single:
            elements = elements[None]
        if elements.ndim != 3 or elements.shape[2] != self.element_size:
            raise ValueError(f"Expected sets of elements of size {self.element_size}")
        b, m, d = elements.shape
        weights = np.ones((b, m)) if weights is None else np.asarray(weights, dtype=float)
        weights = weights.reshape(b, m)
        if np.any(weights < 0.0) or np.any(weights.sum(axis=1) <= 0.0):
            raise ValueError("Every set needs a positive total weight")

        order = canonical_order(elements, weights)
        sorted_elements = np.take_along_axis(elements, order[:, :, None], axis=1)
        sorted_weights = np.take_along_axis(weights, order, axis=1)
        encoded, encoder_cache = self.encoder.forward_cache(sorted_elements.reshape(b * m, d))
        encoded = encoded.reshape(b, m, -1)

        if self.pooling == "mean":
            total = sorted_weights.sum(axis=1, keepdims=True)
            pooled = (sorted_weights[:, :, None] * encoded).sum(axis=1) / total
            extra: Any = total
        else:
            masked = np.where(sorted_weights[:, :, None] > 0.0, encoded, -np.inf)
            extra = np.argmax(masked, axis=1)
            pooled = np.take_along_axis(encoded, extra[:, None, :], axis=1)[:, 0, :]
        out, head_cache = self.head.forward_cache(pooled)
        cache = (single, order, sorted_weights, encoded, pooled, extra, encoder_cache, head_cache)
        return (out[0] if single else out), cache

    def forward(self, elements: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
        """Forward pass."""
        return self.forward_cache(elements, weights)[0]

    def backward(
        self, cache: Any, grad_out: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Reverse-mode pass.

        :return: the gradients with respect to the elements (B, M, D), to the
            weights (B, M), and to the flat parameters. Max pooling does not
            propagate into the weights.
        """
        single, order, sorted_weights, encoded, pooled, extra, encoder_cache, head_cache = cache
        b, m, h = encoded.shape
        grad_out = np.asarray(grad_out, dtype=float)
        if single:
            grad_out = grad_out[None]
        grad_pooled, head_grads = self.head.backward(head_cache, grad_out)

        if self.pooling == "mean":
            total = extra
            grad_encoded = sorted_weights[:, :, None] * grad_pooled[:, None, :] / total[:, :, None]
            grad_sorted_weights = (
                np.einsum("bmh,bh->bm", encoded - pooled[:, None, :], grad_pooled) / total
            )
        else:
            grad_encoded = np.zeros_like(encoded)
            np.put_along_axis(grad_encoded, extra[:, None, :], grad_pooled[:, None, :], axis=1)
            grad_sorted_weights = np.zeros((b, m))

        grad_sorted_elements, encoder_grads = self.encoder.backward(
            encoder_cache, grad_encoded.reshape(b * m, h)
        )
        grad_sorted_elements = grad_sorted_elements.reshape(b, m, -1)
        grad_elements = np.zeros_like(grad_sorted_elements)
        np.put_along_axis(grad_elements, order[:, :, None], grad_sorted_elements, axis=1)
        grad_weights = np.zeros((b, m))
        np.put_along_axis(grad_weights, order, grad_sorted_weights, axis=1)
        flat = np.concatenate([encoder_grads, head_grads])
        if single:
            return grad_elements[0], grad_weights[0], flat
        return grad_elements, grad_weights, flat

    def copy(self) -> "SetPoolNet":
        """A deep copy."""
        net = SetPoolNet.__new__(SetPoolNet)
        net.pooling = self.pooling
        net.encoder = self.encoder.copy()
        net.head = self.head.copy()
        return net


Network = Union[DenseNet, SetPoolNet]


def forward_backward(
    net: DenseNet, inputs: np.ndarray, upstream_grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Run a forward and a backward pass.

    >>> net = DenseNet([2, 1], output_activation="identity")
    >>> net.set_flat(np.array([2.0, 3.0, 0.5]))
    >>> out, grad_in, grad_params = forward_backward(net, np.array([[1.0, 1.0]]), np.array([[1.0]]))
    >>> out.tolist(), grad_in.tolist(), grad_params.tolist()
    ([[5.5]], [[2.0, 3.0]], [1.0, 1.0, 1.0])

    :param net: the network.
    :param inputs: a batch of inputs.
    :param upstream_grad: the gradient of the loss with respect to the outputs.
    :return: the outputs, the input gradients and the parameter gradients.
    """
    out, cache = net.forward_cache(inputs)
    grad_in, grad_params = net.backward(cache, upstream_grad)
    return out, grad_in, grad_params


def soft_update(target: Network, source: Network, rate: float):
    """Move the target parameters towards the source: w <- (1 - rate) w + rate w'."""
    target.set_flat((1.0 - rate) * target.get_flat() + rate * source.get_flat())


class GumbelSampler:
    """Source of Gumbel(0, 1) noise."""

    def __init__(self, temperature: float = 1.0, rng: Optional[np.random.Generator] = None):
        """Initialize."""
        if temperature <= 0.0:
            raise ValueError("The temperature must be positive")
        self.temperature = temperature
        self.rng = rng if rng is not None else np.random.default_rng()

    def noise(self, shape: Sequence[int]) -> np.ndarray:
        """Draw Gumbel noise."""
        u = self.rng.uniform(np.finfo(float).tiny, 1.0, size=tuple(shape))
        return -np.log(-np.log(u))


@dataclass(frozen=True)
class StraightThrough:
    """Backward hook of a straight-through sample."""

    soft: np.ndarray
    temperature: float

    def __call__(self, grad: np.ndarray) -> np.ndarray:
        """Map the gradient wrt the one-hot sample to the gradient wrt the logits."""
        grad = np.asarray(grad, dtype=float)
        inner = (self.soft * grad).sum(axis=-1, keepdims=True)
        return self.soft * (grad - inner) / self.temperature


def gumbel_st_sample(
    sampler: GumbelSampler, logits: np.ndarray, noise: Optional[np.ndarray] = None
) -> tuple[np.ndarray, StraightThrough]:
    """
    Draw a one-hot sample, differentiable through the relaxed softmax.

    :param sampler: the noise source and temperature.
    :param logits: array of shape (..., K) with K >= 2.
    :param noise: fixed Gumbel noise of the same shape; drawn if None.
    :return: the one-hot sample and its backward hook.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.shape[-1] < 2:
        raise ValueError("At least two categories are needed")
    g = sampler.noise(logits.shape) if noise is None else noise
    y = logits + g
    soft = softmax(y / sampler.temperature, axis=-1)
    hard = np.zeros_like(soft)
    np.put_along_axis(hard, np.argmax(y, axis=-1)[..., None], 1.0, axis=-1)
    return hard, StraightThrough(soft, sampler.temperature)


@dataclass
class AdamState:
    """Moments of the Adam optimizer."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape: Union[int, Sequence[int]], learning_rate: float = 0.001) -> "AdamState":
        """Fresh state for parameters of the given shape."""
        return cls(np.zeros(shape), np.zeros(shape), learning_rate=learning_rate)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """
    One Adam descent step with bias correction; the state is updated in place.

    :param state: the optimizer state.
    :param params: the current parameters.
    :param grads: the gradient of the loss.
    :return: the new parameters.
    """
    grads = np.asarray(grads, dtype=float)
    if grads.shape != state.m.shape or np.shape(params) != state.m.shape:
        raise ValueError(f"Optimizer state has shape {state.m.shape}, got {grads.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class ParameterManifest:
    """Names, offsets and sizes of the networks in a parameter file."""

    entries: list[tuple[str, int, int]] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    def dumps(self) -> str:
        """Encode as text."""
        lines = [f"{MANIFEST_HEADER} {self.version}"]
        lines.extend(f"{name} {offset} {size}" for name, offset, size in self.entries)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ParameterManifest":
        """Decode from text."""
        lines = [line.split() for line in text.splitlines() if line.strip()]
        if not lines or len(lines[0]) != 2 or lines[0][0] != MANIFEST_HEADER:
            raise ValueError("Not a parameter manifest")
        version = int(lines[0][1])
        if version != MANIFEST_VERSION:
            raise ValueError(f"Unsupported manifest version {version}")
        entries = [(name, int(offset), int(size)) for name, offset, size in lines[1:]]
        return cls(entries, version)


def save_parameters(path: Union[str, Path], nets: dict[str, Network]):
    """Write '<path>.npy' with all parameters and '<path>.manifest' with their layout."""
    path = Path(path)
    manifest = ParameterManifest()
    offset = 0
    vectors = []
    for name, net in nets.items():
        vector = net.get_flat()
        manifest.entries.append((name, offset, vector.size))
        offset += vector.size
        vectors.append(vector)
    np.save(path.with_suffix(".npy"), np.concatenate(vectors) if vectors else np.zeros(0))
    path.with_suffix(".manifest").write_text(manifest.dumps(), encoding="utf-8")
    logger.debug("saved %d parameters to %s", offset, path)


def load_parameters(path: Union[str, Path], nets: dict[str, Network]):
    """Load the parameters written by 'save_parameters' into the given networks."""
    path = Path(path)
    manifest = ParameterManifest.loads(path.with_suffix(".manifest").read_text(encoding="utf-8"))
    vector = np.load(path.with_suffix(".npy"))
    layout = {name: (offset, size) for name, offset, size in manifest.entries}
    for name, net in nets.items():
        if name not in layout:
            raise ValueError(f"No parameters for {name!r} in {path}")
        offset, size = layout[name]
        if size != net.n_params:
            raise ValueError(f"{name!r} has {net.n_params} parameters, the file has {size}")
        net.set_flat(vector[offset : offset + size])
