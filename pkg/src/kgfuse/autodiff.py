"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations the prediction engine needs are implemented: dense
matmul, elementwise arithmetic, relu, softmax, row gather/scatter for
embedding tables, concatenation, and a clamped log for cross-entropy.
Gradients are exact (up to float64 arithmetic) for every op.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

# Per-thread switch: when False, no graph is recorded and backward() is
# unavailable. Evaluation loops run inside no_grad() for speed; the
# flag is thread-local so concurrent evaluation workers cannot clobber
# each other's (or the trainer's) mode.
_GRAD_STATE = threading.local()


def _grad_enabled() -> bool:
    return getattr(_GRAD_STATE, "enabled", True)

# When a list is registered here, every relu records the smallest
# |pre-activation| it saw. Gradient checks use this to detect inputs
# sitting on the relu kink, where finite differences are meaningless.
_KINK_WATCH: list[float] | None = None


@contextmanager
def no_grad():
    prev = _grad_enabled()
    _GRAD_STATE.enabled = False
    try:
        yield
    finally:
        _GRAD_STATE.enabled = prev


@contextmanager
def kink_watch(records: list[float]):
    """Collect min |x| over relu pre-activations evaluated in this scope."""
    global _KINK_WATCH
    prev = _KINK_WATCH
    _KINK_WATCH = records
    try:
        yield records
    finally:
        _KINK_WATCH = prev


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    """A float64 ndarray plus the backward closure that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- graph construction helpers -------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    # -- operations ------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))

        return Tensor._make(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        a = self

        def backward(g):
            if a.requires_grad:
                a._accumulate(-g)

        return Tensor._make(-a.data, (a,), backward)

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __matmul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other
        out_data = a.data @ b.data

        def backward(g):
            if a.data.ndim == 1 and b.data.ndim == 1:
                # dot product: g is scalar
                if a.requires_grad:
                    a._accumulate(g * b.data)
                if b.requires_grad:
                    b._accumulate(g * a.data)
            elif a.data.ndim == 1:
                # (k,) @ (k,n) -> (n,)
                if a.requires_grad:
                    a._accumulate(b.data @ g)
                if b.requires_grad:
                    b._accumulate(np.outer(a.data, g))
            elif b.data.ndim == 1:
                # (m,k) @ (k,) -> (m,)
                if a.requires_grad:
                    a._accumulate(np.outer(g, b.data))
                if b.requires_grad:
                    b._accumulate(a.data.T @ g)
            else:
                if a.requires_grad:
                    a._accumulate(g @ b.data.T)
                if b.requires_grad:
                    b._accumulate(a.data.T @ g)

        return Tensor._make(out_data, (a, b), backward)

    def relu(self) -> "Tensor":
        a = self
        if _KINK_WATCH is not None and a.data.size:
            _KINK_WATCH.append(float(np.min(np.abs(a.data))))
        mask = a.data > 0.0

        def backward(g):
            if a.requires_grad:
                a._accumulate(g * mask)

        return Tensor._make(np.where(mask, a.data, 0.0), (a,), backward)

    def sum(self) -> "Tensor":
        a = self

        def backward(g):
            if a.requires_grad:
                a._accumulate(np.full_like(a.data, g))

        return Tensor._make(np.asarray(a.data.sum()), (a,), backward)

    def index(self, idx: int) -> "Tensor":
        """Scalar element of a 1-D tensor."""
        a = self

        def backward(g):
            if a.requires_grad:
                ga = np.zeros_like(a.data)
                ga[idx] = g
                a._accumulate(ga)

        return Tensor._make(np.asarray(a.data[idx]), (a,), backward)

    def gather_rows(self, rows: np.ndarray) -> "Tensor":
        """Select rows of a 2-D tensor; repeated indices allowed."""
        a = self
        rows = np.asarray(rows, dtype=np.intp)

        def backward(g):
            if a.requires_grad:
                ga = np.zeros_like(a.data)
                np.add.at(ga, rows, g)
                a._accumulate(ga)

        return Tensor._make(a.data[rows], (a,), backward)

    def scatter_sum(self, index: np.ndarray, out_rows: int) -> "Tensor":
        """Sum rows of a 2-D tensor into `out_rows` buckets given by `index`."""
        a = self
        index = np.asarray(index, dtype=np.intp)
        data = np.zeros((out_rows, a.data.shape[1]), dtype=np.float64)
        np.add.at(data, index, a.data)

        def backward(g):
            if a.requires_grad:
                a._accumulate(g[index])

        return Tensor._make(data, (a,), backward)

    def softmax(self) -> "Tensor":
        """Numerically stable softmax of a 1-D tensor."""
        a = self
        shifted = a.data - np.max(a.data)
        e = np.exp(shifted)
        p = e / e.sum()

        def backward(g):
            if a.requires_grad:
                a._accumulate(p * (g - np.dot(g, p)))

        return Tensor._make(p, (a,), backward)

    def log_clamped(self, floor: float = 1e-30) -> "Tensor":
        """log(max(x, floor)); zero gradient where the clamp is active."""
        a = self
        clamped = np.maximum(a.data, floor)
        active = a.data > floor

        def backward(g):
            if a.requires_grad:
                a._accumulate(np.where(active, g / clamped, 0.0))

        return Tensor._make(np.log(clamped), (a,), backward)

    # -- backward --------------------------------------------------------

    def backward(self, seed=1.0) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad.

        Interior nodes also receive .grad during the sweep; it is freed
        with the graph. Leaves keep accumulating across calls, which is
        how per-example gradients sum over a batch.
        """
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that requires no grad")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        self._accumulate(np.broadcast_to(_as_array(seed), self.data.shape).copy())
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    parts = list(tensors)
    data = np.concatenate([t.data for t in parts], axis=axis)
    sizes = [t.data.shape[axis] for t in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor._make(data, tuple(parts), backward)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64), requires_grad=requires_grad)


def constant(data) -> Tensor:
    return Tensor(data)
