"""Reverse-mode automatic differentiation over small numpy tensors.

Every op records its parents and a vector-Jacobian product written in terms
of other ops.  Running those products with graph recording switched on yields
a differentiable gradient (``grad_as_node``), which is what the gradient
penalty needs: the norm of an input gradient, differentiated again with
respect to the critic parameters.

All values are float64 arrays of rank 0, 1 or 2.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Node",
    "Tape",
    "AdamState",
    "GradientError",
    "parameter",
    "constant",
    "no_grad",
    "enable_grad",
    "grad",
    "grad_as_node",
    "backward",
    "adam_step",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "broadcast_to",
    "sum_to",
    "sum",
    "mean",
    "square",
    "sqrt",
    "exp",
    "log",
    "tanh",
    "relu",
    "leaky_relu",
    "concat",
    "columns",
    "softmax",
    "batchnorm",
    "dropout",
]


class GradientError(ValueError):
    """Raised for malformed differentiation requests."""


_state = threading.local()


def _recording() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def _set_recording(flag: bool):
    prev = _recording()
    _state.enabled = flag
    try:
        yield
    finally:
        _state.enabled = prev


def no_grad():
    """Context manager: ops inside produce constants with no history."""
    return _set_recording(False)


def enable_grad():
    return _set_recording(True)


class Node:
    """A value in the computation graph."""

    __slots__ = ("value", "parents", "op", "requires_grad", "grad", "name", "_vjp", "_fwd")

    def __init__(self, value, parents=(), op="leaf", requires_grad=False, name=None):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim > 2:
            raise GradientError(f"rank {arr.ndim} tensors are not supported")
        self.value = arr
        self.parents: tuple[Node, ...] = tuple(parents)
        self.op = op
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._vjp: Callable | None = None
        self._fwd: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def T(self) -> "Node":
        return transpose(self)

    def item(self) -> float:
        return float(self.value)

    def detach(self) -> "Node":
        return Node(self.value)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Node({self.op}{tag}, shape={self.shape})"

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

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


def parameter(value, name: str | None = None) -> Node:
    """Leaf that gradients are taken with respect to."""
    return Node(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def constant(value) -> Node:
    return value if isinstance(value, Node) else Node(value)


def _make(value, parents: Sequence[Node], op: str, vjp: Callable, fwd: Callable) -> Node:
    value = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite value produced by {op}")
    if _recording() and any(p.requires_grad for p in parents):
        node = Node(value, parents, op, requires_grad=True)
        node._vjp = vjp
        node._fwd = fwd
        return node
    return Node(value, (), op)


# ----------------------------------------------------------------- primitives


def _unbroadcast_shape_check(a: tuple, b: tuple) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError as exc:
        raise GradientError(f"shape mismatch: {a} vs {b}") from exc


def add(a, b) -> Node:
    a, b = constant(a), constant(b)
    _unbroadcast_shape_check(a.shape, b.shape)
    return _make(
        a.value + b.value,
        (a, b),
        "add",
        lambda g: (sum_to(g, a.shape), sum_to(g, b.shape)),
        lambda x, y: x + y,
    )


def sub(a, b) -> Node:
    a, b = constant(a), constant(b)
    _unbroadcast_shape_check(a.shape, b.shape)
    return _make(
        a.value - b.value,
        (a, b),
        "sub",
        lambda g: (sum_to(g, a.shape), sum_to(neg(g), b.shape)),
        lambda x, y: x - y,
    )


def neg(a) -> Node:
    a = constant(a)
    return _make(-a.value, (a,), "neg", lambda g: (neg(g),), lambda x: -x)


def mul(a, b) -> Node:
    a, b = constant(a), constant(b)
    _unbroadcast_shape_check(a.shape, b.shape)
    return _make(
        a.value * b.value,
        (a, b),
        "mul",
        lambda g: (sum_to(mul(g, b), a.shape), sum_to(mul(g, a), b.shape)),
        lambda x, y: x * y,
    )


def div(a, b) -> Node:
    a, b = constant(a), constant(b)
    _unbroadcast_shape_check(a.shape, b.shape)
    out_holder = []

    def vjp(g):
        out = out_holder[0]
        return sum_to(div(g, b), a.shape), sum_to(neg(mul(g, div(out, b))), b.shape)

    out = _make(a.value / b.value, (a, b), "div", vjp, lambda x, y: x / y)
    out_holder.append(out)
    return out


def matmul(a, b) -> Node:
    a, b = constant(a), constant(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise GradientError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _make(
        a.value @ b.value,
        (a, b),
        "matmul",
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)),
        lambda x, y: x @ y,
    )


def transpose(a) -> Node:
    a = constant(a)
    return _make(a.value.T, (a,), "transpose", lambda g: (transpose(g),), lambda x: x.T)


def reshape(a, shape) -> Node:
    a = constant(a)
    shape = tuple(shape)
    src = a.shape
    return _make(
        a.value.reshape(shape), (a,), "reshape", lambda g: (reshape(g, src),), lambda x: x.reshape(shape)
    )


def broadcast_to(a, shape) -> Node:
    a = constant(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    src = a.shape
    return _make(
        np.broadcast_to(a.value, shape).copy(),
        (a,),
        "broadcast_to",
        lambda g: (sum_to(g, src),),
        lambda x: np.broadcast_to(x, shape).copy(),
    )


def _sum_to_array(x: np.ndarray, shape: tuple) -> np.ndarray:
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and x.shape[i + lead] != 1
    )
    out = x.sum(axis=axes, keepdims=True)
    return out.reshape(shape)


def sum_to(a, shape) -> Node:
    """Sum a broadcast result back down to ``shape``."""
    a = constant(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    src = a.shape
    return _make(
        _sum_to_array(a.value, shape),
        (a,),
        "sum_to",
        lambda g: (broadcast_to(g, src),),
        lambda x: _sum_to_array(x, shape),
    )


def sum(a, axis: int | None = None, keepdims: bool = False) -> Node:  # noqa: A001
    a = constant(a)
    src = a.shape
    kept = np.sum(a.value, axis=axis, keepdims=True).shape

    def vjp(g):
        return (broadcast_to(reshape(g, kept), src),)

    def fwd(x):
        return np.sum(x, axis=axis, keepdims=keepdims)

    return _make(fwd(a.value), (a,), "sum", vjp, fwd)


def mean(a, axis: int | None = None, keepdims: bool = False) -> Node:
    a = constant(a)
    count = a.value.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def square(a) -> Node:
    a = constant(a)
    return _make(a.value * a.value, (a,), "square", lambda g: (mul(g, mul(a, 2.0)),), lambda x: x * x)


def sqrt(a) -> Node:
    a = constant(a)
    if np.any(a.value < 0):
        raise FloatingPointError("sqrt of a negative value")
    holder = []
    out = _make(
        np.sqrt(a.value), (a,), "sqrt", lambda g: (div(mul(g, 0.5), holder[0]),), np.sqrt
    )
    holder.append(out)
    return out


def exp(a) -> Node:
    a = constant(a)
    holder = []
    out = _make(np.exp(a.value), (a,), "exp", lambda g: (mul(g, holder[0]),), np.exp)
    holder.append(out)
    return out


def log(a) -> Node:
    a = constant(a)
    return _make(np.log(a.value), (a,), "log", lambda g: (div(g, a),), np.log)


def tanh(a) -> Node:
    a = constant(a)
    holder = []

    def vjp(g):
        y = holder[0]
        return (mul(g, sub(1.0, square(y))),)

    out = _make(np.tanh(a.value), (a,), "tanh", vjp, np.tanh)
    holder.append(out)
    return out


def relu(a) -> Node:
    # subgradient at 0 is 0
    return leaky_relu(a, 0.0)


def leaky_relu(a, slope: float = 0.2) -> Node:
    """max(x, 0) + slope * min(x, 0); the derivative at 0 uses ``slope``."""
    a = constant(a)
    mask = np.where(a.value > 0, 1.0, slope)
    return _make(
        a.value * mask,
        (a,),
        "relu" if slope == 0 else "leaky_relu",
        lambda g: (mul(g, Node(mask)),),
        lambda x: x * np.where(x > 0, 1.0, slope),
    )


def columns(a, start: int, stop: int) -> Node:
    """Column slice ``a[:, start:stop]``."""
    a = constant(a)
    width = a.shape[1]

    def vjp(g):
        return (_pad_columns(g, width, start),)

    return _make(a.value[:, start:stop], (a,), "columns", vjp, lambda x: x[:, start:stop])


def _pad_columns(g: Node, width: int, start: int) -> Node:
    stop = start + g.shape[1]

    def fwd(x):
        out = np.zeros((x.shape[0], width))
        out[:, start:stop] = x
        return out

    return _make(fwd(g.value), (g,), "pad_columns", lambda h: (columns(h, start, stop),), fwd)


def concat(nodes: Sequence, axis: int = 1) -> Node:
    if axis != 1:
        raise GradientError("concat supports axis=1 only")
    nodes = [constant(n) for n in nodes]
    rows = {n.shape[0] for n in nodes}
    if len(rows) != 1 or any(n.ndim != 2 for n in nodes):
        raise GradientError(f"concat shape mismatch: {[n.shape for n in nodes]}")
    bounds = np.cumsum([0] + [n.shape[1] for n in nodes])

    def vjp(g):
        return tuple(columns(g, int(bounds[i]), int(bounds[i + 1])) for i in range(len(nodes)))

    return _make(
        np.concatenate([n.value for n in nodes], axis=1),
        nodes,
        "concat",
        vjp,
        lambda *xs: np.concatenate(xs, axis=1),
    )


# ----------------------------------------------------------------- composites


def softmax(a) -> Node:
    """Row-wise softmax."""
    a = constant(a)
    shift = Node(a.value.max(axis=1, keepdims=True))
    e = exp(sub(a, shift))
    return div(e, sum(e, axis=1, keepdims=True))


def batchnorm(
    x,
    scale,
    shift,
    train: bool,
    running: dict | None = None,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Node:
    """Per-feature batch normalization followed by an affine map.

    ``running`` holds ``mean`` and ``var`` arrays.  In train mode the batch
    statistics are used and, when ``running`` is given, folded into it as
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    x = constant(x)
    if train:
        mu = mean(x, axis=0, keepdims=True)
        centred = sub(x, mu)
        var = mean(square(centred), axis=0, keepdims=True)
        xhat = div(centred, sqrt(add(var, eps)))
        if running is not None:
            running["mean"] = momentum * running["mean"] + (1 - momentum) * mu.value.ravel()
            running["var"] = momentum * running["var"] + (1 - momentum) * var.value.ravel()
    else:
        if running is None:
            raise GradientError("eval-mode batchnorm needs running statistics")
        xhat = div(sub(x, Node(running["mean"][None, :])), Node(np.sqrt(running["var"][None, :] + eps)))
    return add(mul(xhat, scale), shift)


def dropout(x, rate: float, rng: np.random.Generator | None, train: bool) -> Node:
    """Inverted dropout; identity in eval mode."""
    x = constant(x)
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise GradientError("train-mode dropout needs a random generator")
    keep = rng.random(x.shape) >= rate
    return mul(x, Node(keep / (1.0 - rate)))


# ---------------------------------------------------------------- traversal


def _toposort(output: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack = [(output, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


@dataclass
class Tape:
    """Topologically ordered record of one forward pass."""

    nodes: list[Node]

    @classmethod
    def from_output(cls, output: Node) -> "Tape":
        return cls(_toposort(output))

    @property
    def leaves(self) -> list[Node]:
        return [n for n in self.nodes if not n.parents]

    def replay(self, feeds: Mapping[Node, np.ndarray] | None = None) -> np.ndarray:
        """Recompute every value, optionally substituting leaf values."""
        feeds = {id(k): np.asarray(v, dtype=np.float64) for k, v in (feeds or {}).items()}
        values: dict[int, np.ndarray] = {}
        for node in self.nodes:
            if not node.parents:
                values[id(node)] = feeds.get(id(node), node.value)
            else:
                args = [values.get(id(p), p.value) for p in node.parents]
                values[id(node)] = node._fwd(*args)
        return values[id(self.nodes[-1])]


def grad(
    output: Node, wrt: Sequence[Node], create_graph: bool = False, allow_unused: bool = False
) -> list[Node]:
    """Gradients of scalar ``output`` with respect to each node in ``wrt``.

    With ``create_graph`` the returned nodes carry history and can be
    differentiated again.  ``allow_unused`` returns zeros for nodes the output
    does not depend on instead of raising.
    """
    if output.value.size != 1:
        raise GradientError(f"gradient of a non-scalar output of shape {output.shape}")
    tape = _toposort(output) if output.requires_grad else []
    targets = {id(w) for w in wrt}
    # only nodes with a path back to some target need their products
    relevant: set[int] = set()
    for node in tape:
        if id(node) in targets or any(id(p) in relevant for p in node.parents):
            relevant.add(id(node))
    grads: dict[int, Node] = {id(output): Node(np.ones_like(output.value))}
    with _set_recording(create_graph):
        for node in reversed(tape):
            g = grads.get(id(node))
            if g is None or node._vjp is None or id(node) not in relevant:
                continue
            for parent, pg in zip(node.parents, node._vjp(g)):
                if pg is None or id(parent) not in relevant:
                    continue
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else add(prev, pg)
    out = []
    for w in wrt:
        g = grads.get(id(w))
        if g is None and allow_unused:
            g = Node(np.zeros_like(w.value))
        elif g is None:
            raise GradientError(f"{w!r} is not reachable from the output")
        out.append(g)
    return out


def grad_as_node(output: Node, wrt: Node) -> Node:
    """Differentiable gradient of ``output`` with respect to ``wrt``."""
    return grad(output, [wrt], create_graph=True)[0]


def backward(output: Node, accumulate: bool = False) -> None:
    """Store d(output)/d(leaf) in ``leaf.grad`` for every reachable leaf."""
    leaves = [n for n in _toposort(output) if not n.parents and n.requires_grad]
    grads = grad(output, leaves) if leaves else []
    for leaf, g in zip(leaves, grads):
        if accumulate and leaf.grad is not None:
            leaf.grad = leaf.grad + g.value
        else:
            leaf.grad = g.value.copy()


# --------------------------------------------------------------------- Adam


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.0,
    beta2: float = 0.9,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.  Inputs are left untouched."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        if np.shape(g) != np.shape(params[name]):
            raise GradientError(f"gradient shape {np.shape(g)} != parameter shape for {name!r}")
    t = state.step + 1
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m[name] = beta1 * state.m.get(name, 0.0) + (1 - beta1) * g
        v[name] = beta2 * state.v.get(name, 0.0) + (1 - beta2) * g * g
        m_hat = m[name] / (1 - beta1**t)
        v_hat = v[name] / (1 - beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(t, m, v)


def leaves_from(params: Mapping[str, np.ndarray]) -> dict[str, Node]:
    return {k: parameter(v, name=k) for k, v in params.items()}


def values_of(nodes: Iterable[Node]) -> list[np.ndarray]:
    return [n.value for n in nodes]
