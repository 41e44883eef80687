"""Dense tensors with tape-based reverse-mode differentiation.

Operations on :class:`Tensor` objects are recorded on every active
:class:`Tape` that tracks one of their inputs. A tape's backward pass walks
its record in reverse execution order. Each vector-Jacobian product is
itself written with tensor operations, so a backward pass run while an
outer tape is active is recorded by that outer tape. This is how
gradients of gradients (forces inside a force-matching loss) are obtained::

    with Tape() as outer:
        with Tape() as inner:
            inner.watch(coords)
            energy = model.energy(coords)
        forces = -inner.gradient(energy, [coords])[0]
        loss = mse(forces, target)
    grads = outer.gradient(loss, params)
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "exp",
    "log",
    "sigmoid",
    "where",
    "matmul",
    "tensor_sum",
    "reshape",
    "transpose",
    "broadcast_to",
    "sum_to",
    "getitem",
    "scatter_add",
    "concatenate",
    "bilinear",
    "safe_norm",
    "expand_dims",
    "mean",
    "check_finite",
]

_ACTIVE: list["Tape"] = []
_CHECK_FINITE = [True]


def check_finite(enabled: bool) -> None:
    """Toggle the non-finite check run after every forward operation."""
    _CHECK_FINITE[0] = bool(enabled)


class Tensor:
    """An n-dimensional array that can take part in differentiation.

    ``requires_grad`` marks a leaf whose gradient every tape reports without
    an explicit :meth:`Tape.watch` (model parameters use this).
    """

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    """Wrap ``x`` as a constant tensor (tensors pass through unchanged)."""
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


class _Entry:
    __slots__ = ("out", "inputs", "vjp", "name")

    def __init__(self, out, inputs, vjp, name):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp
        self.name = name


class Tape:
    """Ordered record of executed operations.

    Parameters
    ----------
    persistent : bool
        Allow more than one backward pass over the same record. A
        non-persistent tape is consumed by its first backward pass.
    """

    def __init__(self, persistent: bool = False):
        self.persistent = persistent
        self._entries: list[_Entry] = []
        self._tracked: set[int] = set()
        self._watched: list[Tensor] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        if self._consumed:
            raise RuntimeError("cannot reuse a consumed tape")
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self._entries)

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            if not isinstance(t, Tensor):
                raise TypeError("only Tensors can be watched")
            self._watched.append(t)
            self._tracked.add(id(t))

    def _tracks(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._tracked

    def _record(self, out, inputs, vjp, name):
        if any(self._tracks(x) for x in inputs):
            self._entries.append(_Entry(out, inputs, vjp, name))
            self._tracked.add(id(out))

    def _run_backward(self, target: Tensor, seed: Tensor) -> dict[int, Tensor]:
        if self._consumed:
            raise RuntimeError("backward called on a consumed tape")
        grads: dict[int, Tensor] = {id(target): seed}
        reentrant = self in _ACTIVE
        if reentrant:
            _ACTIVE.remove(self)
        try:
            for entry in reversed(self._entries):
                g = grads.get(id(entry.out))
                if g is None:
                    continue
                needs = tuple(self._tracks(x) for x in entry.inputs)
                in_grads = entry.vjp(g, needs)
                for x, gx, need in zip(entry.inputs, in_grads, needs):
                    if not need or gx is None:
                        continue
                    key = id(x)
                    prev = grads.get(key)
                    grads[key] = gx if prev is None else add(prev, gx)
        finally:
            if reentrant:
                _ACTIVE.append(self)
        if not self.persistent:
            self._consumed = True
            self._entries = []
        return grads

    def gradient(
        self,
        target: Tensor,
        sources: Sequence[Tensor],
        output_gradient: Tensor | None = None,
    ) -> list[Tensor | None]:
        """Gradients of ``target`` with respect to each of ``sources``.

        Sources that do not influence ``target`` get ``None``.
        """
        if output_gradient is None:
            output_gradient = Tensor(np.ones_like(target.data))
        grads = self._run_backward(target, as_tensor(output_gradient, target))
        return [grads.get(id(s)) for s in sources]

    def backward(self, output: Tensor) -> dict[Tensor, Tensor]:
        """Gradients of a scalar ``output`` for every parameter and watched input.

        Returns a dict keyed by the leaf tensors themselves.
        """
        if output.size != 1:
            raise ValueError(f"backward needs a scalar output, got shape {output.shape}")
        leaves = {id(t): t for t in self._watched}
        for entry in self._entries:
            for x in entry.inputs:
                if x.requires_grad:
                    leaves[id(x)] = x
        grads = self._run_backward(output, Tensor(np.ones_like(output.data)))
        return {leaves[k]: g for k, g in grads.items() if k in leaves}


def _make(name: str, data: np.ndarray, inputs: tuple, vjp: Callable) -> Tensor:
    # a sum is non-finite whenever any element is (or on overflow, also an error)
    if _CHECK_FINITE[0] and data.dtype.kind == "f" and not np.isfinite(np.add.reduce(data, axis=None)):
        raise FloatingPointError(f"non-finite values produced by {name}")
    out = Tensor(data)
    for tape in _ACTIVE:
        tape._record(out, inputs, vjp, name)
    return out


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    b = as_tensor(b)
    return as_tensor(a, b), b


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _pair(a, b)

    def vjp(g, needs):
        return (sum_to(g, a.shape) if needs[0] else None, sum_to(g, b.shape) if needs[1] else None)

    return _make("add", a.data + b.data, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)

    def vjp(g, needs):
        return (sum_to(g, a.shape) if needs[0] else None, sum_to(neg(g), b.shape) if needs[1] else None)

    return _make("sub", a.data - b.data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)

    def vjp(g, needs):
        return (
            sum_to(mul(g, b), a.shape) if needs[0] else None,
            sum_to(mul(g, a), b.shape) if needs[1] else None,
        )

    return _make("mul", a.data * b.data, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = _pair(a, b)

    def vjp(g, needs):
        ga = sum_to(div(g, b), a.shape) if needs[0] else None
        gb = sum_to(neg(div(mul(g, out), b)), b.shape) if needs[1] else None
        return ga, gb

    out = _make("div", a.data / b.data, (a, b), vjp)
    return out


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _make("neg", -a.data, (a,), lambda g, needs: (neg(g),))


def power(a: Tensor, p: float) -> Tensor:
    """``a ** p`` for a constant real exponent ``p``."""
    a = as_tensor(a)
    p = float(p)

    def vjp(g, needs):
        if p == 1.0:
            return (g,)
        return (mul(g, mul(power(a, p - 1.0), p)),)

    return _make("power", a.data**p, (a,), vjp)


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = _make("exp", np.exp(a.data), (a,), lambda g, needs: (mul(g, out),))
    return out


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _make("log", np.log(a.data), (a,), lambda g, needs: (div(g, a),))


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    data = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def vjp(g, needs):
        return (mul(g, mul(out, sub(1.0, out))),)

    out = _make("sigmoid", data, (a,), vjp)
    return out


def where(cond, a, b) -> Tensor:
    """Elementwise select with a constant boolean condition."""
    cond = np.asarray(cond, dtype=bool)
    a, b = _pair(a, b)
    zero = np.zeros((), dtype=a.dtype)

    def vjp(g, needs):
        return (
            sum_to(where(cond, g, zero), a.shape) if needs[0] else None,
            sum_to(where(cond, zero, g), b.shape) if needs[1] else None,
        )

    return _make("where", np.where(cond, a.data, b.data), (a, b), vjp)


# -- linear algebra ----------------------------------------------------------


def _swap(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, tuple(axes))


def matmul(a, b) -> Tensor:
    """Matrix product with numpy broadcasting; both operands need ``ndim >= 2``."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands need at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def vjp(g, needs):
        ga = gb = None
        if needs[0]:
            ga = sum_to(matmul(g, _swap(b)), a.shape)
        if needs[1]:
            if b.ndim == 2:
                k, n = b.shape
                gb = matmul(_swap(reshape(a, (-1, k))), reshape(g, (-1, n)))
            else:
                gb = sum_to(matmul(_swap(a), g), b.shape)
        return ga, gb

    return _make("matmul", a.data @ b.data, (a, b), vjp)


def bilinear(x, y, structure: np.ndarray) -> Tensor:
    """``out[..., k] = sum_ij x[..., i] y[..., j] structure[i, j, k]``.

    Leading axes broadcast. The geometric product is the case of the
    8x8x8 multivector structure constants.
    """
    x, y = _pair(x, y)
    structure = np.asarray(structure, dtype=x.dtype)
    ni, nj, nk = structure.shape
    if x.shape[-1] != ni or y.shape[-1] != nj:
        raise ValueError("bilinear operand sizes do not match the structure tensor")
    outer = x.data[..., :, None] * y.data[..., None, :]
    data = outer.reshape(outer.shape[:-2] + (ni * nj,)) @ structure.reshape(ni * nj, nk)

    def vjp(g, needs):
        gx = gy = None
        if needs[0]:
            gx = sum_to(bilinear(g, y, structure.transpose(2, 1, 0)), x.shape)
        if needs[1]:
            gy = sum_to(bilinear(x, g, structure.transpose(0, 2, 1)), y.shape)
        return gx, gy

    return _make("bilinear", data, (x, y), vjp)


def safe_norm(x: Tensor, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis`` whose gradient at the origin is zero."""
    x = as_tensor(x)
    axis = axis % x.ndim
    data = np.sqrt(np.sum(x.data * x.data, axis=axis))

    def vjp(g, needs):
        nonzero = out.data > 0
        denom = where(nonzero, out, np.ones((), dtype=out.dtype))
        scale = mul(div(g, denom), nonzero.astype(out.dtype))
        return (mul(expand_dims(scale, axis), x),)

    out = _make("safe_norm", data, (x,), vjp)
    return out


# -- reductions and shape ----------------------------------------------------


def _norm_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    kept_shape = tuple(1 if i in axes else n for i, n in enumerate(a.shape))

    def vjp(g, needs):
        return (broadcast_to(reshape(g, kept_shape), a.shape),)

    return _make("sum", np.sum(a.data, axis=axes, keepdims=keepdims), (a,), vjp)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return mul(tensor_sum(a, axes, keepdims), 1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    return _make("reshape", a.data.reshape(shape), (a,), lambda g, needs: (reshape(g, a.shape),))


def expand_dims(a: Tensor, axis: int) -> Tensor:
    a = as_tensor(a)
    return reshape(a, np.expand_dims(a.data, axis).shape)


def transpose(a: Tensor, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _make("transpose", a.data.transpose(axes), (a,), lambda g, needs: (transpose(g, inverse),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    return _make(
        "broadcast_to",
        np.ascontiguousarray(np.broadcast_to(a.data, shape)),
        (a,),
        lambda g, needs: (sum_to(g, a.shape),),
    )


def sum_to(a: Tensor, shape) -> Tensor:
    """Sum ``a`` down to ``shape``, undoing numpy broadcasting."""
    shape = tuple(shape)
    if a.shape == shape:
        return a
    lead = a.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        lead + i for i, n in enumerate(shape) if n == 1 and a.shape[lead + i] != 1
    )
    data = np.sum(a.data, axis=axes, keepdims=True)
    data = data.reshape(shape)
    return _make("sum_to", data, (a,), lambda g, needs: (broadcast_to(g, a.shape),))


def getitem(a: Tensor, key) -> Tensor:
    a = as_tensor(a)
    return _make("getitem", a.data[key], (a,), lambda g, needs: (scatter_add(g, key, a.shape),))


def scatter_add(g: Tensor, key, shape) -> Tensor:
    """Zeros of ``shape`` with ``g`` accumulated at ``key`` (repeats add up)."""
    g = as_tensor(g)
    data = np.zeros(shape, dtype=g.dtype)
    np.add.at(data, key, g.data)
    return _make("scatter_add", data, (g,), lambda gg, needs: (getitem(gg, key),))


def concatenate(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def vjp(g, needs):
        outs = []
        for need, lo, hi in zip(needs, bounds[:-1], bounds[1:]):
            if not need:
                outs.append(None)
                continue
            key = (slice(None),) * axis + (slice(int(lo), int(hi)),)
            outs.append(getitem(g, key))
        return tuple(outs)

    return _make("concatenate", np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    return concatenate([expand_dims(t, axis) for t in tensors], axis=axis)


__all__.append("stack")
