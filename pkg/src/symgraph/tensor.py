"""Dense float64 tensors with taped reverse-mode differentiation and SGD.

The tape (``Tape``) records one step per primitive op, in execution order.
``backward`` replays the steps in reverse and accumulates gradients into the
``grad`` buffers of every ``Parameter`` the loss depends on.  The tape is
rebuilt on every forward pass, so graphs of any shape can be differentiated.

All ops accept an optional ``tape``; with ``tape=None`` they are plain
numpy computations, which is what evaluation uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, TrainingError


def _as_f64(data):
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    """A dense float64 array, optionally attached to a differentiation tape.

    ``node_id`` is None for constants; traced tensors carry the id of the
    tape step that produced them (or of their watch registration).
    """

    __slots__ = ("data", "node_id")

    def __init__(self, data, node_id=None):
        self.data = _as_f64(data)
        if not np.all(np.isfinite(self.data)):
            raise DomainError("tensor contains non-finite values")
        self.node_id = node_id

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, traced={self.node_id is not None})"


@dataclass
class Parameter:
    """A trainable tensor with an accumulating gradient buffer."""

    value: np.ndarray
    name: str
    grad: np.ndarray = field(default=None)

    def __post_init__(self):
        self.value = _as_f64(self.value)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        assert self.grad.shape == self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0


class _Step:
    __slots__ = ("out_id", "in_ids", "back")

    def __init__(self, out_id, in_ids, back):
        self.out_id = out_id
        self.in_ids = in_ids
        self.back = back  # grad_out -> list of grads aligned with in_ids


class Tape:
    """Ordered record of primitive ops; inputs of every step precede it."""

    def __init__(self):
        self.steps = []
        self.params = {}  # node_id -> Parameter
        self._next = 0

    def _new_id(self):
        self._next += 1
        return self._next

    def watch(self, param: Parameter) -> Tensor:
        """Register a parameter and return its traced tensor."""
        nid = self._new_id()
        self.params[nid] = param
        return Tensor(param.value, node_id=nid)

    def record(self, out_data, inputs, back) -> Tensor:
        """Create the output tensor for a step, tracing it when needed."""
        if any(x.node_id is not None for x in inputs):
            out = Tensor(out_data, node_id=self._new_id())
            self.steps.append(_Step(out.node_id, [x.node_id for x in inputs], back))
            return out
        return Tensor(out_data)


def _emit(tape, out_data, inputs, back):
    if tape is None:
        return Tensor(out_data)
    return tape.record(out_data, inputs, back)


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a: Tensor, b: Tensor, tape: Tape = None) -> Tensor:
    """Matrix product; supports (m,k)@(k,n) and (m,k)@(k,)."""
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise DimensionError(f"matmul needs a matrix lhs: {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def back(g):
        if bd.ndim == 1:
            return [np.outer(g, bd), ad.T @ g]
        return [g @ bd.T, ad.T @ g]

    return _emit(tape, out, [a, b], back)


def transpose(a: Tensor, tape: Tape = None) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {a.shape}")
    return _emit(tape, a.data.T.copy(), [a], lambda g: [g.T])


def add(a: Tensor, b: Tensor, tape: Tape = None) -> Tensor:
    """Elementwise sum; also broadcasts a (m,) bias over (n,m)."""
    if a.shape != b.shape and not (
        a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]
    ):
        raise DimensionError(f"add shapes disagree: {a.shape} + {b.shape}")
    bcast = a.shape != b.shape

    def back(g):
        return [g, g.sum(axis=0) if bcast else g]

    return _emit(tape, a.data + b.data, [a, b], back)


def mul(a: Tensor, b: Tensor, tape: Tape = None) -> Tensor:
    """Elementwise (Hadamard) product of same-shape tensors."""
    if a.shape != b.shape:
        raise DimensionError(f"mul shapes disagree: {a.shape} * {b.shape}")
    ad, bd = a.data, b.data
    return _emit(tape, ad * bd, [a, b], lambda g: [g * bd, g * ad])


def scale(a: Tensor, c: float, tape: Tape = None) -> Tensor:
    return _emit(tape, a.data * c, [a], lambda g: [g * c])


def add_const(a: Tensor, c: float, tape: Tape = None) -> Tensor:
    return _emit(tape, a.data + c, [a], lambda g: [g])


def smul(s: Tensor, a: Tensor, tape: Tape = None) -> Tensor:
    """Scalar tensor times tensor."""
    if s.data.ndim != 0:
        raise DimensionError(f"smul scalar has shape {s.shape}")
    sd, ad = s.data, a.data
    return _emit(tape, sd * ad, [s, a], lambda g: [np.sum(g * ad), g * sd])


def relu(a: Tensor, tape: Tape = None) -> Tensor:
    mask = a.data > 0
    return _emit(tape, np.where(mask, a.data, 0.0), [a], lambda g: [g * mask])


def sigmoid(a: Tensor, tape: Tape = None) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _emit(tape, y, [a], lambda g: [g * y * (1.0 - y)])


def log(a: Tensor, tape: Tape = None) -> Tensor:
    ad = a.data
    return _emit(tape, np.log(ad), [a], lambda g: [g / ad])


def softmax(a: Tensor, tape: Tape = None) -> Tensor:
    """Stable softmax over a 1-D tensor (max subtraction)."""
    if a.data.ndim != 1 or a.data.size < 1:
        raise DomainError(f"softmax needs a nonempty vector, got shape {a.shape}")
    z = a.data - a.data.max()
    e = np.exp(z)
    y = e / e.sum()
    return _emit(tape, y, [a], lambda g: [y * (g - np.dot(g, y))])


def sum_all(a: Tensor, tape: Tape = None) -> Tensor:
    shp = a.data.shape
    return _emit(tape, a.data.sum(), [a], lambda g: [np.broadcast_to(g, shp).copy()])


def sum_rows(a: Tensor, tape: Tape = None) -> Tensor:
    """Column-wise sum of an (n,m) matrix -> (m,) vector."""
    if a.data.ndim != 2:
        raise DimensionError(f"sum_rows needs a matrix, got shape {a.shape}")
    n = a.data.shape[0]
    return _emit(tape, a.data.sum(axis=0), [a], lambda g: [np.tile(g, (n, 1))])


def concat(parts, tape: Tape = None) -> Tensor:
    """Concatenate 1-D tensors."""
    for p in parts:
        if p.data.ndim != 1:
            raise DimensionError(f"concat needs vectors, got shape {p.shape}")
    sizes = [p.data.size for p in parts]
    offs = np.cumsum([0] + sizes)

    def back(g):
        return [g[offs[i]:offs[i + 1]] for i in range(len(sizes))]

    return _emit(tape, np.concatenate([p.data for p in parts]), list(parts), back)


def stack(scalars, tape: Tape = None) -> Tensor:
    """Stack scalar tensors into a 1-D tensor."""
    for s in scalars:
        if s.data.ndim != 0:
            raise DimensionError(f"stack needs scalars, got shape {s.shape}")
    return _emit(
        tape,
        np.array([s.data for s in scalars]),
        list(scalars),
        lambda g: [g[i] for i in range(len(scalars))],
    )


def index(a: Tensor, i: int, tape: Tape = None) -> Tensor:
    """Pick one entry of a 1-D tensor as a scalar."""
    if a.data.ndim != 1:
        raise DimensionError(f"index needs a vector, got shape {a.shape}")
    n = a.data.size

    def back(g):
        gi = np.zeros(n)
        gi[i] = g
        return [gi]

    return _emit(tape, a.data[i], [a], back)


def neighbor_mean(states: Tensor, neighbors, tape: Tape = None) -> Tensor:
    """Row i of the output is the mean of ``states`` over ``neighbors[i]``.

    Every neighbor list must be nonempty (callers insert self-loops for
    isolated nodes).  Sources may repeat; multiplicity counts.
    """
    sd = states.data
    if sd.ndim != 2:
        raise DimensionError(f"neighbor_mean needs a matrix, got shape {states.shape}")
    n = sd.shape[0]
    if len(neighbors) != n:
        raise DimensionError(f"{len(neighbors)} neighbor lists for {n} rows")
    out = np.empty_like(sd)
    for i, nbrs in enumerate(neighbors):
        if not nbrs:
            raise DomainError(f"node {i} has an empty neighbor list")
        out[i] = sd[list(nbrs)].mean(axis=0)

    def back(g):
        gs = np.zeros_like(sd)
        for i, nbrs in enumerate(neighbors):
            contrib = g[i] / len(nbrs)
            for j in nbrs:
                gs[j] += contrib
        return [gs]

    return _emit(tape, out, [states], back)


# ---------------------------------------------------------------------------
# reverse pass and optimizer


def backward(tape: Tape, loss: Tensor):
    """Accumulate d(loss)/d(param) into every watched parameter's grad.

    Replaying twice (without a new forward) accumulates twice the gradient.
    """
    if loss.data.ndim != 0:
        raise DomainError(f"loss must be scalar, got shape {loss.shape}")
    if loss.node_id is None:
        return  # loss depends on no traced input; all grads are zero
    grads = {loss.node_id: np.ones(())}
    for step in reversed(tape.steps):
        g = grads.get(step.out_id)
        if g is None:
            continue
        for in_id, gin in zip(step.in_ids, step.back(g)):
            if in_id is None:
                continue
            if in_id in grads:
                grads[in_id] = grads[in_id] + gin
            else:
                grads[in_id] = gin
    for nid, param in tape.params.items():
        if nid in grads:
            param.grad += grads[nid]


def sgd_step(params, lr: float):
    """value <- value - lr * grad for every parameter, then zero the grads."""
    params = list(params)
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient for parameter '{p.name}'")
    for p in params:
        p.value -= lr * p.grad
        p.zero_grad()
