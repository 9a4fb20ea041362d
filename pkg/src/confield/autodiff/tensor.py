"""Reverse-mode automatic differentiation over dense numpy arrays.

Define-by-run: every op on a `Tensor` records its parents and a local
vector-Jacobian closure. `backward()` replays the recording in reverse
creation order, so two identical passes produce bit-identical gradients.
The tape lives in the tensors themselves and is rebuilt each step.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Callable, Iterable, Mapping

import numpy as np

from ..errors import ContractError, DimensionError

_IDS = itertools.count()
_GRAD_ENABLED = [True]
_DTYPE = [np.float32]


def default_dtype() -> np.dtype:
    """Scalar dtype new tensors are created with (float32 by default)."""
    return _DTYPE[0]


@contextmanager
def precision(dtype):
    """Temporarily switch the default dtype (float64 for gradient checks)."""
    prev = _DTYPE[0]
    _DTYPE[0] = np.dtype(dtype).type
    try:
        yield
    finally:
        _DTYPE[0] = prev


@contextmanager
def no_grad():
    """Disable tape recording inside the block (rendering, evaluation)."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


def grad_enabled() -> bool:
    return _GRAD_ENABLED[-1]


def _bmm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-slice 2-D matmuls: numpy's 3-D matmul bypasses BLAS on strided
    operands, so an explicit loop over contiguous slices is much faster."""
    if not a.flags.c_contiguous:
        a = np.ascontiguousarray(a)
    if not b.flags.c_contiguous:
        b = np.ascontiguousarray(b)
    k = a.shape[0]
    out = np.empty((k, a.shape[1], b.shape[2]), dtype=np.result_type(a, b))
    for i in range(k):
        np.matmul(a[i], b[i], out=out[i])
    return out


def _sum_to_shape(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to the parent's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    """A dense array plus the tape node that produced it.

    `data` is always a numpy array; `requires_grad` marks leaves that
    `backward` should report gradients for. Interior nodes carry a `_vjp`
    closure mapping the output cotangent to per-parent cotangents.
    """

    __slots__ = ("data", "requires_grad", "_parents", "_vjp", "_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or default_dtype())
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple] | None = None
        self._id = next(_IDS)

    # -- construction -----------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple["Tensor", ...], vjp) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.requires_grad = False
        out._id = next(_IDS)
        if grad_enabled() and any(p.requires_grad or p._vjp is not None for p in parents):
            out._parents = parents
            out._vjp = vjp
        else:
            out._parents = ()
            out._vjp = None
        return out

    # -- basic properties ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        """Same values, cut from the tape (stop-gradient)."""
        return Tensor(self.data, dtype=self.data.dtype)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other, self.data.dtype)
        a, b = self, other
        return Tensor._make(
            a.data + b.data, (a, b),
            lambda g: (_sum_to_shape(g, a.data.shape), _sum_to_shape(g, b.data.shape)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = _as_tensor(other, self.data.dtype)
        a, b = self, other
        return Tensor._make(
            a.data - b.data, (a, b),
            lambda g: (_sum_to_shape(g, a.data.shape), _sum_to_shape(-g, b.data.shape)),
        )

    def __rsub__(self, other):
        return _as_tensor(other, self.data.dtype) - self

    def __mul__(self, other):
        other = _as_tensor(other, self.data.dtype)
        a, b = self, other
        return Tensor._make(
            a.data * b.data, (a, b),
            lambda g: (_sum_to_shape(g * b.data, a.data.shape),
                       _sum_to_shape(g * a.data, b.data.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other, self.data.dtype)
        a, b = self, other
        inv = 1.0 / b.data
        return Tensor._make(
            a.data * inv, (a, b),
            lambda g: (_sum_to_shape(g * inv, a.data.shape),
                       _sum_to_shape(-g * a.data * inv * inv, b.data.shape)),
        )

    def __rtruediv__(self, other):
        return _as_tensor(other, self.data.dtype) / self

    def __pow__(self, exponent: float):
        if not np.isscalar(exponent):
            raise DimensionError("only scalar exponents are supported")
        a = self
        out = a.data ** exponent
        return Tensor._make(
            out, (a,),
            lambda g: (g * exponent * a.data ** (exponent - 1),),
        )

    def __matmul__(self, other):
        other = _as_tensor(other, self.data.dtype)
        a, b = self, other
        if a.data.ndim == 2 and b.data.ndim == 2:
            if a.data.shape[1] != b.data.shape[0]:
                raise DimensionError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
            return Tensor._make(
                a.data @ b.data, (a, b),
                lambda g: (g @ b.data.T, a.data.T @ g),
            )
        if a.data.ndim == 3 and b.data.ndim == 3:
            # batched matrix product: (K, m, n) @ (K, n, p)
            if a.data.shape[0] != b.data.shape[0] or a.data.shape[2] != b.data.shape[1]:
                raise DimensionError(f"batched matmul shapes differ: {a.data.shape} @ {b.data.shape}")

            def vjp(g):
                k = g.shape[0]
                da = np.empty(a.data.shape, dtype=g.dtype)
                db = np.empty(b.data.shape, dtype=g.dtype)
                for i in range(k):
                    np.matmul(g[i], b.data[i].T, out=da[i])
                    np.matmul(a.data[i].T, g[i], out=db[i])
                return da, db

            return Tensor._make(_bmm(a.data, b.data), (a, b), vjp)
        raise DimensionError(f"matmul expects 2-D or 3-D operands, got {a.data.shape} @ {b.data.shape}")

    # -- elementwise functions ------------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self):
        a = self
        return Tensor._make(np.log(a.data), (a,), lambda g: (g / a.data,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sin(self):
        a = self
        return Tensor._make(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))

    def cos(self):
        a = self
        return Tensor._make(np.cos(a.data), (a,), lambda g: (g * -np.sin(a.data),))

    def relu(self):
        out = np.maximum(self.data, 0.0)
        return Tensor._make(out, (self,), lambda g: (g * (out > 0),))

    def sigmoid(self):
        out = 1.0 / (1.0 + np.exp(-self.data))
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def softplus(self):
        a = self
        out = np.logaddexp(0.0, a.data).astype(a.data.dtype)
        sig = 1.0 / (1.0 + np.exp(-a.data))
        return Tensor._make(out, (a,), lambda g: (g * sig,))

    def clip(self, lo: float | None, hi: float | None):
        """Clamp to constant bounds; gradient is zero where clamped."""
        mask = np.ones(self.data.shape, dtype=bool)
        if lo is not None:
            mask &= self.data >= lo
        if hi is not None:
            mask &= self.data <= hi
        return Tensor._make(np.clip(self.data, lo, hi), (self,), lambda g: (g * mask,))

    # -- reductions / structure -------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, a.data.shape),)

        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def cumsum(self, axis: int):
        a = self

        def vjp(g):
            rev = np.flip(g, axis=axis)
            return (np.flip(np.cumsum(rev, axis=axis), axis=axis),)

        return Tensor._make(np.cumsum(a.data, axis=axis), (a,), vjp)

    def reshape(self, *shape):
        a = self
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))

    def transpose(self, *axes):
        a = self
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        return Tensor._make(a.data.transpose(axes), (a,),
                            lambda g: (g.transpose(inverse),))

    def broadcast_to(self, shape):
        a = self
        shape = tuple(shape)
        return Tensor._make(np.broadcast_to(a.data, shape), (a,),
                            lambda g: (_sum_to_shape(g, a.data.shape),))

    def __getitem__(self, key):
        a = self

        def vjp(g):
            out = np.zeros(a.data.shape, dtype=g.dtype)
            out[key] = g
            return (out,)

        return Tensor._make(a.data[key], (a,), vjp)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def as_tensor(x, dtype=None) -> Tensor:
    """Wrap an array-like as a constant Tensor (no gradient)."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along `axis`; backward slices the cotangent apart."""
    ts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    datas = [t.data for t in ts]
    ax = axis if axis >= 0 else datas[0].ndim + axis
    sizes = [d.shape[ax] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        pieces = []
        sl = [slice(None)] * g.ndim
        for i in range(len(datas)):
            sl[ax] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    # Preallocate so the result is C-contiguous even when inputs are
    # broadcast views; BLAS is far slower on strided operands.
    shape = list(datas[0].shape)
    shape[ax] = int(offsets[-1])
    out = np.empty(shape, dtype=np.result_type(*datas))
    np.concatenate(datas, axis=ax, out=out)
    return Tensor._make(out, tuple(ts), vjp)


def stack(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    """Stack along a new axis; backward takes per-parent slices."""
    ts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    datas = [t.data for t in ts]
    ax = axis if axis >= 0 else datas[0].ndim + 1 + axis

    def vjp(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(datas)))

    return Tensor._make(np.stack(datas, axis=ax), tuple(ts), vjp)


def gather_rows(t: Tensor, index: np.ndarray) -> Tensor:
    """Row lookup `t[index]`; backward scatter-adds into the source rows."""
    index = np.asarray(index)

    def vjp(g):
        out = np.zeros(t.data.shape, dtype=g.dtype)
        np.add.at(out, index, g)
        return (out,)

    return Tensor._make(t.data[index], (t,), vjp)


def where_mask(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select from `a` where `mask` else `b`; mask is a constant."""
    a = as_tensor(a)
    b = as_tensor(b)
    return Tensor._make(
        np.where(mask, a.data, b.data), (a, b),
        lambda g: (_sum_to_shape(g * mask, a.data.shape),
                   _sum_to_shape(g * ~mask, b.data.shape)),
    )


def backward(loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Reverse sweep from a scalar loss.

    Returns d(loss)/d(p) for every entry of `params`; parameters that do not
    influence the loss get exact zeros. Accumulation order is fixed by node
    creation order, so results are deterministic.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.data.shape}")

    # Reachable sub-tape, found through parent links.
    nodes: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id in nodes:
            continue
        nodes[t._id] = t
        stack.extend(t._parents)

    grads: dict[int, np.ndarray] = {
        loss._id: np.ones_like(loss.data)
    }
    for nid in sorted(nodes, reverse=True):
        t = nodes[nid]
        if t._vjp is None:
            continue  # leaf: keep its accumulated gradient for collection below
        g = grads.pop(nid, None)
        if g is None:
            continue
        for parent, pg in zip(t._parents, t._vjp(g)):
            if pg is None:
                continue
            pg = np.asarray(pg)  # 0-d ops yield immutable numpy scalars
            acc = grads.get(parent._id)
            if acc is None:
                writeable = pg.flags.owndata and pg.flags.writeable
                grads[parent._id] = pg if writeable else pg.copy()
            else:
                acc += pg

    out: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads.get(p._id)
        out[name] = np.zeros_like(p.data) if g is None else g.astype(p.data.dtype, copy=False)
    return out
