"""
Dense float64 tensors with tape-based reverse-mode differentiation.

This module provides the numerics every network in the model runs on:

- ``Tensor``: a thin wrapper around a float64 ``numpy`` array.
- ``GradTape``: records primitive operations on watched parameters so that
  ``value_and_grad`` can replay them backwards.
- ``Mlp`` with ``mlp_forward`` / ``init_params``: small multilayer perceptrons.
- ``AdamState`` with ``adam_step``: Adam with decoupled weight decay.

Operations only record onto a tape while one is active on the current thread
and at least one input is a watched parameter, so plain evaluation costs no
bookkeeping.
"""

import logging
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, InvalidShape, NumericalError

logger = logging.getLogger(__name__)

DIFFCORE_FORMAT_VERSION = 1

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _active_tape() -> Optional["GradTape"]:
    return getattr(_local, "tape", None)


def _check_finite(values: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"Non-finite value produced by {op}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "tracked", "parents", "backward_fn")

    def __init__(self, data: Any):
        self.data = np.asarray(data, dtype=np.float64)
        self.tracked = False
        self.parents: Tuple["Tensor", ...] = ()
        self.backward_fn: Optional[BackwardFn] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise InvalidShape(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, tracked={self.tracked})"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other: Any) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return add(as_tensor(other), self)

    def __sub__(self, other: Any) -> "Tensor":
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other: Any) -> "Tensor":
        return add(as_tensor(other), neg(self))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __mul__(self, other: Any) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return mul(as_tensor(other), self)

    def __truediv__(self, other: Any) -> "Tensor":
        return div(self, other)

    def __matmul__(self, other: Any) -> "Tensor":
        return matmul(self, other)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)


ParameterRegistry = Dict[str, Tensor]


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn, op: str) -> Tensor:
    _check_finite(data, op)
    out = Tensor(data)
    tape = _active_tape()
    if tape is not None and any(p.tracked for p in parents):
        out.tracked = True
        out.parents = tuple(parents)
        out.backward_fn = backward
        tape.record(out)
    return out


# primitives -----------------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data ** 2), b.shape),
        ),
        "div",
    )


def matmul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise InvalidShape(f"Cannot multiply {a.shape} by {b.shape}")
    return _result(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
        "matmul",
    )


def tensor_sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis=axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return div(tensor_sum(a, axis=axis), float(max(count, 1)))


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _result(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    s = expit(a.data)
    return _result(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def softplus(a: Tensor) -> Tensor:
    """``log(1 + exp(a))`` evaluated without overflow."""
    s = expit(a.data)
    return _result(np.logaddexp(0.0, a.data), (a,), lambda g: (g * s,), "softplus")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if len(tensors) == 1:
        return tensors[0]
    ax = axis % tensors[0].ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(tensors))
        )

    return _result(np.concatenate([t.data for t in tensors], axis=ax), tensors, backward, "concat")


def take(a: Tensor, indices: Sequence[int], axis: int = 0) -> Tensor:
    """Gather slices along ``axis``; repeated indices accumulate gradient."""
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros_like(a.data)
        moved = np.moveaxis(grad, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return (grad,)

    return _result(np.take(a.data, idx, axis=axis), (a,), backward, "take")


def segment_sum(a: Tensor, segment_ids: Sequence[int], num_segments: int) -> Tensor:
    """Sum the rows of ``a`` into ``num_segments`` buckets.

    Rows are accumulated in index order, so a bucket's value depends only on
    the order of its own rows.
    """
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape[0] != a.shape[0]:
        raise InvalidShape(f"{ids.shape[0]} segment ids for {a.shape[0]} rows")
    out = np.zeros((num_segments,) + a.shape[1:], dtype=np.float64)
    np.add.at(out, ids, a.data)
    return _result(out, (a,), lambda g: (g[ids],), "segment_sum")


# tape -----------------------------------------------------------------------


class GradTape:
    """Records tracked operations in creation order.

    Creation order is a topological order of the computation, so the
    backward pass simply walks the record in reverse.
    """

    def __init__(self, params: ParameterRegistry):
        self.params = params
        self.nodes: List[Tensor] = []
        self._previous: Optional[GradTape] = None
        self._watched: List[Tensor] = []

    def __enter__(self) -> "GradTape":
        self._previous = _active_tape()
        _local.tape = self
        for p in self.params.values():
            if not p.tracked:
                p.tracked = True
                self._watched.append(p)
        return self

    def __exit__(self, *exc: Any) -> None:
        for p in self._watched:
            p.tracked = False
        self._watched = []
        _local.tape = self._previous

    def record(self, node: Tensor) -> None:
        self.nodes.append(node)

    def gradient(self, root: Tensor) -> Dict[str, np.ndarray]:
        if root.data.size != 1:
            raise InvalidShape(f"Gradient root must be scalar, got shape {root.shape}")
        grads: Dict[int, np.ndarray] = {}
        if root.tracked:
            grads[id(root)] = np.ones_like(root.data)
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None or node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.tracked:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg
        result = {}
        for name, p in self.params.items():
            g = grads.get(id(p))
            g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64).reshape(p.shape)
            _check_finite(g, f"gradient of {name}")
            result[name] = g
        return result


def value_and_grad(
    objective: Callable[[], Tensor], params: ParameterRegistry
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Evaluate a scalar objective and its gradient w.r.t. every parameter."""
    with GradTape(params) as tape:
        out = objective()
        grads = tape.gradient(out)
    return float(out.data.reshape(-1)[0]), grads


def finite_difference_grad(
    objective: Callable[[], Tensor], params: ParameterRegistry, h: float = 1e-6
) -> Dict[str, np.ndarray]:
    """Central finite differences of ``objective``, one coordinate at a time."""
    grads = {}
    for name, p in params.items():
        if not p.data.flags.c_contiguous:
            p.data = p.data.copy()
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up = objective().item()
            flat[i] = original - h
            down = objective().item()
            flat[i] = original
            g.reshape(-1)[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def copy_parameters(params: ParameterRegistry) -> Dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in params.items()}


def load_parameters(params: ParameterRegistry, values: Dict[str, np.ndarray]) -> None:
    for name, p in params.items():
        p.data = np.array(values[name], dtype=np.float64)


# networks -------------------------------------------------------------------


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"


class OutputActivation(str, Enum):
    IDENTITY = "identity"
    SIGMOID = "sigmoid"


_HIDDEN = {
    Activation.RELU: relu,
    Activation.TANH: tanh,
    Activation.IDENTITY: lambda x: x,
}


@dataclass
class Mlp:
    """Fully connected network ``x @ W + b`` per layer, weights shaped (d_in, d_out)."""

    layer_dims: List[int]
    weights: List[Tensor] = field(default_factory=list)
    biases: List[Tensor] = field(default_factory=list)
    activation: Activation = Activation.RELU
    output_activation: OutputActivation = OutputActivation.IDENTITY
    dropout_rate: float = 0.0

    def __post_init__(self) -> None:
        self.layer_dims = [int(d) for d in self.layer_dims]
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ConfigError(f"Invalid layer dims {self.layer_dims}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"Dropout rate must lie in [0, 1), got {self.dropout_rate}")
        self.activation = Activation(self.activation)
        self.output_activation = OutputActivation(self.output_activation)
        pairs = list(zip(self.layer_dims[:-1], self.layer_dims[1:]))
        if not self.weights:
            self.weights = [Tensor(np.zeros((i, o))) for i, o in pairs]
            self.biases = [Tensor(np.zeros(o)) for _, o in pairs]
        self.weights = [as_tensor(w) for w in self.weights]
        self.biases = [as_tensor(b) for b in self.biases]
        if len(self.weights) != len(pairs) or len(self.biases) != len(pairs):
            raise InvalidShape("Number of weight matrices does not match layer dims")
        for (i, o), w, b in zip(pairs, self.weights, self.biases):
            if w.shape != (i, o) or b.shape != (o,):
                raise InvalidShape(f"Layer expects W{(i, o)} and b{(o,)}, got {w.shape} and {b.shape}")

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def parameter_count(self) -> int:
        return sum(i * o + o for i, o in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def named_parameters(self, prefix: str = "") -> ParameterRegistry:
        params = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"{prefix}w{k}"] = w
            params[f"{prefix}b{k}"] = b
        return params


def mlp_forward(
    net: Mlp, input: Any, training: bool = False, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Apply ``net`` to the last axis of ``input`` (a vector or a row batch)."""
    x = as_tensor(input)
    squeeze = x.ndim == 1
    if squeeze:
        x = reshape(x, (1, x.shape[0]))
    if x.ndim != 2 or x.shape[-1] != net.in_dim:
        raise InvalidShape(f"Network expects width {net.in_dim}, got input of shape {x.shape}")
    hidden = _HIDDEN[net.activation]
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = add(matmul(x, w), b)
        if k < last:
            x = hidden(x)
            if training and net.dropout_rate > 0.0:
                gen = rng if rng is not None else np.random.default_rng()
                keep = gen.random(x.shape) >= net.dropout_rate
                x = mul(x, keep / (1.0 - net.dropout_rate))
    if net.output_activation == OutputActivation.SIGMOID:
        x = sigmoid(x)
    if squeeze:
        x = reshape(x, (x.shape[1],))
    return x


def init_params(net: Mlp, seed: int) -> Mlp:
    """Glorot-uniform weights and zero biases, reproducible per seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(net.layer_dims[:-1], net.layer_dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        weights.append(Tensor(rng.uniform(-limit, limit, size=(d_in, d_out))))
        biases.append(Tensor(np.zeros(d_out)))
    return replace(net, weights=weights, biases=biases)


Transform = Union[Mlp, Callable[[Tensor], Tensor], None]


def apply_transform(
    transform: Transform, x: Tensor, training: bool = False, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Apply a network slot: an ``Mlp``, a fixed callable, or identity for ``None``."""
    if transform is None:
        return x
    if isinstance(transform, Mlp):
        return mlp_forward(transform, x, training=training, rng=rng)
    return transform(x)


def transform_parameters(transform: Transform, prefix: str) -> ParameterRegistry:
    return transform.named_parameters(prefix) if isinstance(transform, Mlp) else {}


# optimiser ------------------------------------------------------------------


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState, params: ParameterRegistry, grads: Dict[str, np.ndarray]
) -> ParameterRegistry:
    """One Adam update with decoupled weight decay, applied in place."""
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise InvalidShape(f"Gradient for {name} has shape {grads[name].shape}, expected {p.shape}")
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        m = state.first_moment.get(name, np.zeros_like(p.data))
        v = state.second_moment.get(name, np.zeros_like(p.data))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        update = m_hat / (np.sqrt(v_hat) + state.epsilon) + state.weight_decay * p.data
        p.data = p.data - state.learning_rate * update
    return params


# serialisation --------------------------------------------------------------


def mlp_to_dict(net: Transform) -> Optional[Dict[str, Any]]:
    if net is None:
        return None
    if not isinstance(net, Mlp):
        raise ConfigError("Fixed callables cannot be written to a checkpoint")
    return {
        "format_version": DIFFCORE_FORMAT_VERSION,
        "layer_dims": list(net.layer_dims),
        "activation": net.activation.value,
        "output_activation": net.output_activation.value,
        "dropout_rate": net.dropout_rate,
        "weights": [w.data.reshape(-1).tolist() for w in net.weights],
        "biases": [b.data.tolist() for b in net.biases],
    }


def mlp_from_dict(data: Optional[Dict[str, Any]]) -> Optional[Mlp]:
    if data is None:
        return None
    dims = data["layer_dims"]
    pairs = list(zip(dims[:-1], dims[1:]))
    return Mlp(
        layer_dims=dims,
        weights=[Tensor(np.asarray(w, dtype=np.float64).reshape(i, o)) for (i, o), w in zip(pairs, data["weights"])],
        biases=[Tensor(np.asarray(b, dtype=np.float64)) for b in data["biases"]],
        activation=data.get("activation", "relu"),
        output_activation=data.get("output_activation", "identity"),
        dropout_rate=data.get("dropout_rate", 0.0),
    )
