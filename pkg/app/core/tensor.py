"""
Dense float64 tensors with tape-based reverse-mode differentiation.

Every primitive takes tensors, computes its output with numpy and, when any
input requires gradients, attaches a ComputationRecord holding the inputs
and the backward rule. Records are also appended to the innermost active
``Tape``. ``backward`` walks the records reachable from a scalar loss in
reverse topological order, or replays a tape in reverse execution order.

Broadcasting is limited to adding a bias vector to every row of a matrix.
"""
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import GradientError, ShapeError

DTYPE = np.float64

_local = threading.local()


class Tensor:
    """Dense array of 64-bit floats with an optional gradient slot."""

    __slots__ = ('values', 'grad', 'requires_grad', 'name', '_record')

    def __init__(self, values, requires_grad=False, name=None, copy=True):
        if copy or not isinstance(values, np.ndarray):
            values = np.array(values, dtype=DTYPE)
        elif values.dtype != DTYPE:
            values = values.astype(DTYPE)
        self.values = values
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._record = None

    def __repr__(self):
        label = f' {self.name!r}' if self.name else ''
        return (f'<Tensor{label} shape={self.shape} '
                f'requires_grad={self.requires_grad}>')

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_leaf(self) -> bool:
        return self._record is None

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError('item', self.shape)
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> 'Tensor':
        """Same values, cut off from the graph."""
        return Tensor(self.values, copy=False, name=self.name)

    def zero_grad(self):
        self.grad = None

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, key):
        return index(self, key)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


@dataclass(eq=False)
class ComputationRecord:
    """One executed primitive: inputs, output and its backward rule."""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(eq=False)
class Tape:
    """Collects the records produced while it is active."""
    records: list = field(default_factory=list)

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        _tape_stack().remove(self)
        return False

    def __len__(self):
        return len(self.records)


def _tape_stack():
    stack = getattr(_local, 'tapes', None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def _as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _result(op, inputs, values, backward):
    out = Tensor(values, copy=False)
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        record = ComputationRecord(op, tuple(inputs), out, backward)
        out._record = record
        stack = _tape_stack()
        if stack:
            stack[-1].records.append(record)
    return out


def parameter(values, name=None) -> Tensor:
    """Trainable leaf tensor."""
    return Tensor(values, requires_grad=True, name=name)


# Primitives

def matmul(a, b) -> Tensor:
    """(k,) @ (k, n) -> (n,) and (m, k) @ (k, n) -> (m, n)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError('matmul', a.shape, b.shape)
    av, bv = a.values, b.values

    def backward(g):
        if av.ndim == 1:
            return g @ bv.T, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return _result('matmul', (a, b), av @ bv, backward)


def _bias_shapes_ok(a, b):
    if a.shape == b.shape:
        return True
    return a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]


def add(a, b) -> Tensor:
    """Elementwise sum; a 1-D ``b`` is added to every row of a 2-D ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    if not _bias_shapes_ok(a, b):
        raise ShapeError('add', a.shape, b.shape)
    rows = a.shape != b.shape

    def backward(g):
        return g, (g.sum(axis=0) if rows else g)

    return _result('add', (a, b), a.values + b.values, backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _bias_shapes_ok(a, b):
        raise ShapeError('sub', a.shape, b.shape)
    rows = a.shape != b.shape

    def backward(g):
        return g, -(g.sum(axis=0) if rows else g)

    return _result('sub', (a, b), a.values - b.values, backward)


def mul(a, b) -> Tensor:
    """Elementwise product of equally shaped tensors."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError('elementwise_mul', a.shape, b.shape)
    av, bv = a.values, b.values

    def backward(g):
        return g * bv, g * av

    return _result('elementwise_mul', (a, b), av * bv, backward)


def scale(a, factor: float) -> Tensor:
    a = _as_tensor(a)
    factor = float(factor)
    return _result('scale', (a,), a.values * factor,
                   lambda g: (g * factor,))


def concat(tensors: Sequence[Tensor], axis=-1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError('concat', ())
    ndim = tensors[0].ndim
    axis = axis % ndim if ndim else 0
    for t in tensors[1:]:
        other = [d for i, d in enumerate(t.shape) if i != axis]
        first = [d for i, d in enumerate(tensors[0].shape) if i != axis]
        if t.ndim != ndim or other != first:
            raise ShapeError('concat', tensors[0].shape, t.shape)
    cuts = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return np.split(g, cuts, axis=axis)

    values = np.concatenate([t.values for t in tensors], axis=axis)
    return _result('concat', tensors, values, backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError('stack', ())
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeError('stack', tensors[0].shape, t.shape)

    def backward(g):
        return list(g)

    values = np.stack([t.values for t in tensors])
    return _result('stack', tensors, values, backward)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError('transpose', a.shape)
    return _result('transpose', (a,), a.values.T.copy(), lambda g: (g.T,))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.values))
    return _result('sigmoid', (a,), s, lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.values)
    return _result('tanh', (a,), t, lambda g: (g * (1.0 - t * t),))


def _softmax(values):
    shifted = values - values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _logsumexp(values):
    top = values.max(axis=-1, keepdims=True)
    out = top + np.log(np.exp(values - top).sum(axis=-1, keepdims=True))
    return out[..., 0]


def softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = _as_tensor(a)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise ShapeError('softmax', a.shape)
    s = _softmax(a.values)

    def backward(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _result('softmax', (a,), s, backward)


def log_softmax(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise ShapeError('log_softmax', a.shape)
    out = a.values - _logsumexp(a.values)[..., None]

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _result('log_softmax', (a,), out, backward)


def log_sum_exp(a) -> Tensor:
    """log(sum(exp(a))) over the last axis, stable for large inputs."""
    a = _as_tensor(a)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise ShapeError('log_sum_exp', a.shape)
    out = _logsumexp(a.values)
    weights = _softmax(a.values)

    def backward(g):
        return (np.asarray(g)[..., None] * weights,)

    return _result('log_sum_exp', (a,), out, backward)


def mean_over_axis(a, axis=0) -> Tensor:
    a = _as_tensor(a)
    if a.ndim == 0 or a.shape[axis] == 0:
        raise ShapeError('mean_over_axis', a.shape)
    count = a.shape[axis]

    def backward(g):
        expanded = np.expand_dims(g, axis) / count
        return (np.broadcast_to(expanded, a.shape).copy(),)

    return _result('mean_over_axis', (a,), a.values.mean(axis=axis), backward)


def total(a) -> Tensor:
    """Sum of every element, as a scalar."""
    a = _as_tensor(a)
    return _result('sum', (a,), np.asarray(a.values.sum()),
                   lambda g: (np.full(a.shape, float(g)),))


def index(a, key) -> Tensor:
    """numpy-style indexing (slices, integers or integer arrays)."""
    a = _as_tensor(a)
    try:
        values = np.array(a.values[key], dtype=DTYPE)
    except IndexError:
        raise ShapeError('slice', a.shape, np.shape(key)) from None

    def backward(g):
        grad = np.zeros(a.shape)
        np.add.at(grad, key, g)
        return (grad,)

    return _result('slice', (a,), values, backward)


def take(table, ids) -> Tensor:
    """Gather rows of a 2-D table."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2 or ids.ndim != 1:
        raise ShapeError('take', table.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError('take', table.shape, (int(ids.max()),))

    def backward(g):
        grad = np.zeros(table.shape)
        np.add.at(grad, ids, g)
        return (grad,)

    return _result('take', (table,), table.values[ids], backward)


PRIMITIVES = {
    'matmul': matmul,
    'add': add,
    'elementwise_mul': mul,
    'concat': concat,
    'sigmoid': sigmoid,
    'tanh': tanh,
    'softmax': softmax,
    'log_sum_exp': log_sum_exp,
    'mean_over_axis': mean_over_axis,
    'slice': index,
}


def primitive_forward(op_kind, inputs, **kwargs) -> Tensor:
    """Dispatch one of the named primitives."""
    try:
        fn = PRIMITIVES[op_kind]
    except KeyError:
        raise ValueError(f'unknown primitive {op_kind!r}') from None
    if op_kind == 'concat':
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)


# Reverse pass

def _topological(loss):
    order, seen = [], set()
    stack = [(loss._record, False)]
    while stack:
        record, expanded = stack.pop()
        if expanded:
            order.append(record)
            continue
        if id(record) in seen:
            continue
        seen.add(id(record))
        stack.append((record, True))
        for t in record.inputs:
            if t._record is not None and id(t._record) not in seen:
                stack.append((t._record, False))
    return order


def _accumulate(tensor, g):
    g = np.asarray(g, dtype=DTYPE).reshape(tensor.shape)
    tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g


def backward(loss: Tensor, tape: Tape = None):
    """Accumulate d(loss)/d(leaf) into ``grad`` of every reachable leaf.

    Records are walked in reverse topological order from the loss. With
    ``tape`` they are replayed in reverse execution order instead; the tape
    must hold every record the loss depends on.
    """
    if loss.size != 1:
        raise GradientError(
            f'backward needs a scalar loss, got shape {loss.shape}')
    if not loss.requires_grad:
        raise GradientError('loss does not depend on any trainable tensor')
    if loss._record is None:
        _accumulate(loss, np.ones(loss.shape))
        return
    records = _topological(loss) if tape is None else tape.records
    pending = {id(loss): np.ones(loss.shape)}
    for record in reversed(records):
        g = pending.pop(id(record.output), None)
        if g is None:
            continue
        for tensor, tg in zip(record.inputs, record.backward(g)):
            if tg is None or not tensor.requires_grad:
                continue
            if tensor._record is None:
                _accumulate(tensor, tg)
            elif id(tensor) in pending:
                pending[id(tensor)] = pending[id(tensor)] + tg
            else:
                pending[id(tensor)] = np.asarray(tg, dtype=DTYPE)
    if pending:
        raise GradientError(f'{len(pending)} recorded tensor(s) on the path '
                            f'to the loss are missing from the tape')
