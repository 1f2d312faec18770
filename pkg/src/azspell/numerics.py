"""Small dense-tensor engine with tape-based reverse-mode differentiation.

Tensors wrap read-only float64 numpy arrays. Operations executed while a
:class:`GradTape` is active are recorded on it; :func:`backward` replays the
tape in reverse to produce exact gradients.

Broadcasting is deliberately narrow: binary ops accept operands of equal
shape or a scalar operand. Anything wider goes through :func:`broadcast_to`
so that every gradient reduction is explicit.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

DTYPE = np.float64

_state = threading.local()
_check_finite = False


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


def set_check_finite(enabled: bool) -> None:
    """Toggle the (slow) finiteness check on every created tensor."""
    global _check_finite
    _check_finite = bool(enabled)


class Tensor:
    """Immutable n-dimensional array of float64 values."""

    __slots__ = ("data", "__weakref__")

    def __init__(self, data, copy: bool = True):
        arr = np.array(data, dtype=DTYPE, copy=True) if copy else np.asarray(data, dtype=DTYPE)
        arr.flags.writeable = False
        if _check_finite and not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite values in tensor")
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={np.array2string(self.data, threshold=8)})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(arr: np.ndarray) -> Tensor:
    # internal fast path; arr is freshly computed and owned by the result
    return Tensor(arr, copy=False)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class GradTape:
    """Records differentiable operations in execution order.

    Use as a context manager; tapes nest per thread, and only the innermost
    active tape records.
    """

    nodes: list[_Node] = field(default_factory=list)

    def __enter__(self) -> "GradTape":
        stack = getattr(_state, "stack", None)
        if stack is None:
            stack = _state.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.stack.pop()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], vjp) -> None:
        self.nodes.append(_Node(out, inputs, vjp))

    def __len__(self) -> int:
        return len(self.nodes)


def _active_tape() -> GradTape | None:
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


def _record(out: Tensor, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    tape = _active_tape()
    if tape is not None:
        tape.record(out, inputs, vjp)
    return out


def backward(tape: GradTape, loss: Tensor, params: Iterable[Tensor] | Mapping[str, Tensor]):
    """Reverse-mode gradients of a scalar ``loss`` with respect to ``params``.

    ``params`` may be a mapping (gradients come back keyed the same way) or
    an iterable (a list is returned). Parameters the loss does not depend on
    get zero gradients.
    """
    if loss.size != 1:
        raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")
    if not any(node.out is loss for node in reversed(tape.nodes)):
        raise TapeError("loss was not produced on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=DTYPE)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.vjp(g)):
            if gi is None:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi

    def grad_of(p: Tensor) -> Tensor:
        g = grads.get(id(p))
        return _wrap(np.zeros(p.shape, dtype=DTYPE) if g is None else np.asarray(g, dtype=DTYPE).reshape(p.shape))

    if isinstance(params, Mapping):
        return {name: grad_of(p) for name, p in params.items()}
    return [grad_of(p) for p in params]


# ----------------------------------------------------------------------------
# elementwise


def _binary_shapes(a: Tensor, b: Tensor, opname: str) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{opname}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "add")
    out = _wrap(a.data + b.data)
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "sub")
    out = _wrap(a.data - b.data)
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _binary_shapes(a, b, "mul")
    out = _wrap(a.data * b.data)
    return _record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _record(_wrap(y), (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    # exp of a non-positive argument only, so no overflow for large |x|
    z = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _record(_wrap(y), (x,), lambda g: (g * y * (1.0 - y),))


_ELEMENTWISE = {"add": add, "mul": mul, "tanh": tanh, "sigmoid": sigmoid, "sub": sub}


def elementwise(op: str, *args) -> Tensor:
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


# ----------------------------------------------------------------------------
# linear algebra and shape manipulation


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; 3-d operands are treated as batches of matrices.

    A 2-d right operand is shared across the batch of a 3-d left operand.
    """
    if a.ndim not in (2, 3) or b.ndim not in (2, 3):
        raise ShapeError(f"matmul: expected 2-d or 3-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or (b.ndim == 3 and (a.ndim != 3 or a.shape[0] != b.shape[0])):
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    out = _wrap(a.data @ b.data)

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2 and a.ndim == 3:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return _record(out, (a, b), vjp)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = _wrap(x.data.reshape(shape))
    return _record(out, (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Numpy-style broadcast of ``x`` (same rank, size-1 axes expand)."""
    shape = tuple(shape)
    if x.ndim != len(shape) or any(s != 1 and s != t for s, t in zip(x.shape, shape)):
        raise ShapeError(f"broadcast_to: cannot broadcast {x.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(x.shape, shape)) if s == 1 and t != 1)
    out = _wrap(np.broadcast_to(x.data, shape).copy())
    return _record(out, (x,), lambda g: (np.sum(g, axis=axes, keepdims=True),))


def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    if axis is None:
        out = _wrap(np.sum(x.data))
        return _record(out, (x,), lambda g: (np.broadcast_to(g, x.shape),))
    out = _wrap(np.sum(x.data, axis=axis))
    return _record(out, (x,), lambda g: (np.broadcast_to(np.expand_dims(g, axis), x.shape),))


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    """``x[..., start:stop]``."""
    out = _wrap(x.data[..., start:stop].copy())

    def vjp(g):
        full = np.zeros(x.shape, dtype=DTYPE)
        full[..., start:stop] = g
        return (full,)

    return _record(out, (x,), vjp)


def index(x: Tensor, i: int, axis: int = 0) -> Tensor:
    """Select position ``i`` along ``axis``, dropping that axis."""
    out = _wrap(np.take(x.data, i, axis=axis))

    def vjp(g):
        full = np.zeros(x.shape, dtype=DTYPE)
        idx = [slice(None)] * x.ndim
        idx[axis] = i
        full[tuple(idx)] = g
        return (full,)

    return _record(out, (x,), vjp)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = tuple(xs)
    out = _wrap(np.concatenate([x.data for x in xs], axis=axis))
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _record(out, xs, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = tuple(xs)
    out = _wrap(np.stack([x.data for x in xs], axis=axis))
    n = len(xs)
    return _record(
        out, xs, lambda g: tuple(np.take(g, i, axis=axis) for i in range(n))
    )


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup ``table[ids]``; ``ids`` is an integer array of any shape."""
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise TypeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range [0, {table.shape[0]})")
    out = _wrap(table.data[ids])

    def vjp(g):
        full = np.zeros(table.shape, dtype=DTYPE)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (full,)

    return _record(out, (table,), vjp)


# ----------------------------------------------------------------------------
# normalisation and loss


def softmax(x: Tensor, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``; positions where ``mask`` is 0 get weight exactly 0.

    Every slice along ``axis`` must keep at least one unmasked position.
    """
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not np.all(np.any(mask, axis=axis)):
            raise ValueError("softmax: a slice has no unmasked positions")
        z = np.where(mask, z, -np.inf)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _record(_wrap(y), (x,), vjp)


def masked_sparse_crossentropy(logits: Tensor, targets, mask) -> Tensor:
    """Mean of ``-log softmax(logits)[target]`` over positions where ``mask`` is 1.

    Args:
        logits: [batch, steps, vocab] scores.
        targets: integer array [batch, steps].
        mask: 0/1 array [batch, steps].
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=DTYPE)
    if logits.ndim != 3 or targets.shape != logits.shape[:2] or mask.shape != targets.shape:
        raise ShapeError(
            f"crossentropy: logits {logits.shape}, targets {targets.shape}, mask {mask.shape}"
        )
    vocab = logits.shape[2]
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise IndexError(f"target ids must lie in [0, {vocab})")
    count = mask.sum()
    if count == 0:
        raise ValueError("no unmasked positions")

    z = logits.data - np.max(logits.data, axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    logp = z - lse
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = -np.sum(picked * mask) / count

    def vjp(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        return (g * (p - onehot) * (mask / count)[..., None],)

    return _record(_wrap(np.asarray(loss)), (logits,), vjp)


# ----------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7


def adam_step(
    params: Mapping[str, Tensor], grads: Mapping[str, Tensor], state: AdamState
) -> tuple[dict[str, Tensor], AdamState]:
    """One bias-corrected Adam update. Returns fresh parameter tensors.

    ``state`` is updated in place (moments and step counter) and also
    returned for convenience.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    new = {}
    for name, p in params.items():
        g = grads[name].data
        if g.shape != p.shape:
            raise ShapeError(f"adam: gradient for {name} has shape {g.shape}, param {p.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros(p.shape, dtype=DTYPE)
            v = np.zeros(p.shape, dtype=DTYPE)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / corr1
        v_hat = v / corr2
        new[name] = _wrap(p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return new, state
