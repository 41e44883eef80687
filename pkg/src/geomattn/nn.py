"""Parameters, layers and checkpoints on top of :mod:`geomattn.tensor`."""
from __future__ import annotations

import json
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = [
    "Param",
    "ParameterStore",
    "dense",
    "layer_norm",
    "relu",
    "swish",
    "masked_softmax",
    "log_softmax",
    "dropout",
    "embedding",
    "Dense",
    "LayerNorm",
    "Activation",
    "Dropout",
    "Sequential",
    "save_checkpoint",
    "load_checkpoint",
    "ACTIVATIONS",
    "CHECKPOINT_FORMAT",
]

LAYER_NORM_EPS = 1e-5
CHECKPOINT_FORMAT = "geomattn-checkpoint"
CHECKPOINT_VERSION = 1


class Param(Tensor):
    """A named, persistent tensor owned by a :class:`ParameterStore`."""

    def __init__(self, name: str, data: np.ndarray, init: str, trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.init = init
        self.trainable = trainable

    def assign(self, value) -> None:
        value = np.asarray(value, dtype=self.data.dtype)
        if value.shape != self.data.shape:
            raise ValueError(f"cannot assign shape {value.shape} to parameter {self.name!r} of shape {self.shape}")
        self.data = value.copy()

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.shape})"


class ParameterStore:
    """Ordered collection of uniquely named parameters.

    Initializers: ``glorot_uniform`` (limit ``sqrt(6 / (fan_in + fan_out))``),
    ``zeros``, ``ones``, ``normal`` (unit standard deviation) and
    ``constant:<value>``.
    """

    def __init__(self, seed: int = 0, dtype=np.float64):
        self.rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self._params: "OrderedDict[str, Param]" = OrderedDict()

    def add(self, name: str, shape: Sequence[int], init: str = "glorot_uniform", trainable: bool = True) -> Param:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        shape = tuple(int(n) for n in shape)
        param = Param(name, self._initialize(shape, init), init, trainable)
        self._params[name] = param
        return param

    def _initialize(self, shape, init: str) -> np.ndarray:
        if init == "glorot_uniform":
            fan_in, fan_out = shape[0], shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            data = self.rng.uniform(-limit, limit, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "normal":
            data = self.rng.standard_normal(shape)
        elif init.startswith("constant:"):
            data = np.full(shape, float(init.split(":", 1)[1]))
        else:
            raise ValueError(f"unknown initializer {init!r}")
        return data.astype(self.dtype)

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Param]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def trainable(self) -> list[Param]:
        return [p for p in self._params.values() if p.trainable]

    def count(self) -> int:
        """Total number of scalar weights."""
        return int(sum(p.size for p in self._params.values()))

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, p.data.copy()) for n, p in self._params.items())

    def load_state_dict(self, state) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(f"checkpoint mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, value in state.items():
            self._params[name].assign(value)


def save_checkpoint(store: ParameterStore, path) -> None:
    """Write parameters as versioned JSON (``repr`` floats round-trip exactly)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dtype": store.dtype.name,
        "params": {
            p.name: {"shape": list(p.shape), "values": [float(x) for x in p.data.ravel()]}
            for p in store
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path, store: ParameterStore | None = None):
    """Read a checkpoint; load it into ``store`` if given, else return the arrays."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    dtype = np.dtype(payload["dtype"])
    state = OrderedDict(
        (name, np.asarray(entry["values"], dtype=dtype).reshape(entry["shape"]))
        for name, entry in payload["params"].items()
    )
    if store is not None:
        store.load_state_dict(state)
    return state


# -- functional layers -------------------------------------------------------


def dense(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map over the last axis."""
    x = T.as_tensor(x)
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"dense: input width {x.shape[-1]} does not match weight {W.shape}")
    y = T.matmul(x, W) if x.ndim >= 2 else T.reshape(T.matmul(T.reshape(x, (1, -1)), W), (W.shape[1],))
    if b is not None:
        y = y + b
    return y


def layer_norm(x: Tensor, gain: Tensor | None = None, bias: Tensor | None = None, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Standardize the last axis: ``(x - mean) / sqrt(var + eps)``, then scale and shift."""
    mu = T.mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = T.mean(centered * centered, axis=-1, keepdims=True)
    y = centered * T.power(var + eps, -0.5)
    if gain is not None:
        y = y * gain
    if bias is not None:
        y = y + bias
    return y


def relu(x: Tensor) -> Tensor:
    x = T.as_tensor(x)
    return T.where(x.data > 0, x, np.zeros((), dtype=x.dtype))


def swish(x: Tensor) -> Tensor:
    x = T.as_tensor(x)
    return x * T.sigmoid(x)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "swish": swish,
    "sigmoid": T.sigmoid,
    "linear": lambda x: x,
}


def masked_softmax(logits: Tensor, mask=None, axes=-1) -> Tensor:
    """Softmax normalized jointly over ``axes``; masked entries are exactly zero.

    Raises
    ------
    ValueError
        If some reduction group has no unmasked entry.
    """
    logits = T.as_tensor(logits)
    axes = T._norm_axes(axes, logits.ndim)
    if mask is None:
        mask = np.ones(logits.shape, dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    if not np.all(np.any(mask, axis=axes)):
        raise ValueError("masked_softmax: a reduction group is fully masked")
    shift = np.max(np.where(mask, logits.data, -np.inf), axis=axes, keepdims=True)
    zero = np.zeros((), dtype=logits.dtype)
    z = T.where(mask, logits - shift, zero)
    e = T.where(mask, T.exp(z), zero)
    return e / T.tensor_sum(e, axes, keepdims=True)


def log_softmax(logits: Tensor, axis: int = -1) -> Tensor:
    shift = np.max(logits.data, axis=axis, keepdims=True)
    z = logits - shift
    return z - T.log(T.tensor_sum(T.exp(z), axis, keepdims=True))


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)`` during training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.shape) >= rate
    return x * (keep / (1.0 - rate)).astype(x.dtype)


def embedding(indices, table: Tensor) -> Tensor:
    """Gather rows of ``table``; gradients scatter back to the gathered rows."""
    indices = np.asarray(indices)
    if not np.issubdtype(indices.dtype, np.integer):
        raise TypeError("embedding indices must be integers")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise IndexError(f"embedding index out of range for table with {table.shape[0]} rows")
    return T.getitem(table, indices)


# -- layer objects -------------------------------------------------------------


class Dense:
    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int,
                 activation: str | None = None, use_bias: bool = True,
                 kernel_init: str = "glorot_uniform", bias_init: str = "zeros"):
        self.W = store.add(f"{name}/kernel", (d_in, d_out), kernel_init)
        self.b = store.add(f"{name}/bias", (d_out,), bias_init) if use_bias else None
        self.activation = ACTIVATIONS[activation or "linear"]

    def __call__(self, x, training=False, rng=None):
        return self.activation(dense(x, self.W, self.b))


class LayerNorm:
    def __init__(self, store: ParameterStore, name: str, dim: int):
        self.gain = store.add(f"{name}/gain", (dim,), "ones")
        self.bias = store.add(f"{name}/bias", (dim,), "zeros")

    def __call__(self, x, training=False, rng=None):
        return layer_norm(x, self.gain, self.bias)


class Activation:
    def __init__(self, kind: str):
        self.fn = ACTIVATIONS[kind]

    def __call__(self, x, training=False, rng=None):
        return self.fn(x)


class Dropout:
    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def __call__(self, x, training=False, rng=None):
        return dropout(x, self.rate, training, rng)


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    def __call__(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer(x, training=training, rng=rng)
        return x
