"""Reverse-mode differentiation over dense numpy arrays.

A deliberately small op set: matrix multiply, additions, constant scaling,
SiLU, row-wise RMS normalization, embedding lookup, row concat/slice, and the
two loss reductions (mean-L1, mean cosine distance). Graphs are built eagerly;
``backward`` walks the DAG once in reverse topological order. ``stop_gradient``
cuts the graph, so anything upstream of it receives an exactly-zero gradient.
"""

import numpy as np

from . import backend
from .errors import DegenerateInputError, ShapeError

RMSNORM_EPS = 1e-6


class Tensor:
    """A node in the compute graph: cached output plus a backward closure."""

    __slots__ = ("data", "grad", "_parents", "_bwd")

    def __init__(self, data, parents=(), bwd=None):
        self.data = data
        self.grad = None
        self._parents = parents
        self._bwd = bwd

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def leaf(data, dtype=np.float32):
    """Wrap an array as a graph leaf (no copy if dtype already matches)."""
    return Tensor(np.ascontiguousarray(data, dtype=dtype))


def _accum(t, g):
    t.grad = g if t.grad is None else t.grad + g


def stop_gradient(x):
    """Identity on values; contributes nothing to any upstream gradient."""
    return Tensor(x.data)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out._bwd = bwd
    return out


def add(a, b):
    """Elementwise add, or row-broadcast bias add of a 1-D b onto a 2-D a."""
    if a.data.shape == b.data.shape:
        out = Tensor(a.data + b.data, parents=(a, b))

        def bwd(g):
            _accum(a, g)
            _accum(b, g)

    elif a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]:
        out = Tensor(a.data + b.data, parents=(a, b))

        def bwd(g):
            _accum(a, g)
            _accum(b, g.sum(axis=0))

    else:
        raise ShapeError(f"add: incompatible shapes {a.data.shape} + {b.data.shape}")
    out._bwd = bwd
    return out


def add_const(a, c):
    """Add a constant array (no gradient into c)."""
    c = np.asarray(c, dtype=a.data.dtype)
    out = Tensor(a.data + c, parents=(a,))
    out._bwd = lambda g: _accum(a, g)
    return out


def mul_const(a, c):
    """Multiply by a constant scalar or broadcastable constant array."""
    c = np.asarray(c, dtype=a.data.dtype)
    out = Tensor(a.data * c, parents=(a,))
    out._bwd = lambda g: _accum(a, g * c)
    return out


def scale(a, s):
    return mul_const(a, float(s))


def silu(x):
    out = Tensor(backend.kernels.silu_fwd(x.data), parents=(x,))
    out._bwd = lambda g: _accum(x, backend.kernels.silu_bwd(x.data, g))
    return out


def rms_normalize(x, eps=RMSNORM_EPS):
    """Row-wise x / sqrt(mean(x_i^2) + eps); a 1-D input is one row."""
    if x.data.size == 0:
        raise ShapeError("rms_normalize: empty input")
    if eps <= 0:
        x2 = x.data if x.data.ndim == 2 else x.data.reshape(1, -1)
        if np.any(np.mean(x2 * x2, axis=-1) < 1e-24):
            raise DegenerateInputError("rms_normalize: zero row with eps <= 0")
    y, inv = backend.kernels.rmsnorm_fwd(x.data, eps)
    out = Tensor(y, parents=(x,))
    out._bwd = lambda g: _accum(x, backend.kernels.rmsnorm_bwd(x.data, inv, g))
    return out


def embedding(table, idx):
    """Select rows of table by integer index array; scatter-add on backward."""
    idx = np.asarray(idx)
    out = Tensor(table.data[idx], parents=(table,))

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        _accum(table, gt)

    out._bwd = bwd
    return out


def concat_rows(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise ShapeError(f"concat_rows: incompatible {a.data.shape}, {b.data.shape}")
    n = a.data.shape[0]
    out = Tensor(np.concatenate([a.data, b.data], axis=0), parents=(a, b))

    def bwd(g):
        _accum(a, g[:n])
        _accum(b, g[n:])

    out._bwd = bwd
    return out


def slice_rows(x, start, stop):
    out = Tensor(x.data[start:stop], parents=(x,))

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        _accum(x, gx)

    out._bwd = bwd
    return out


def sum_all(x):
    out = Tensor(np.asarray(x.data.sum(), dtype=x.data.dtype), parents=(x,))
    out._bwd = lambda g: _accum(x, np.full_like(x.data, g))
    return out


def mean_all(x):
    out = Tensor(np.asarray(x.data.mean(), dtype=x.data.dtype), parents=(x,))
    out._bwd = lambda g: _accum(x, np.full_like(x.data, g / x.data.size))
    return out


def l1_loss(a, b):
    """Mean absolute difference over all elements (scalar output)."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"l1_loss: shapes differ {a.data.shape} vs {b.data.shape}")
    v = backend.kernels.l1_fwd(a.data, b.data)
    out = Tensor(np.asarray(v, dtype=a.data.dtype), parents=(a, b))

    def bwd(g):
        ga = backend.kernels.l1_bwd(a.data, b.data, float(g))
        _accum(a, ga)
        _accum(b, -ga)

    out._bwd = bwd
    return out


def cosine_loss(a, b):
    """Mean over rows of 1 - cos(a_r, b_r), in [0, 2]; a 1-D input is one row."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"cosine_loss: shapes differ {a.data.shape} vs {b.data.shape}")
    v, dot, na, nb = backend.kernels.cosine_fwd(a.data, b.data)
    if np.any(na < 1e-12) or np.any(nb < 1e-12):
        raise DegenerateInputError("cosine_loss: zero-norm row")
    out = Tensor(np.asarray(v, dtype=a.data.dtype), parents=(a, b))

    def bwd(g):
        ga, gb = backend.kernels.cosine_bwd(a.data, b.data, dot, na, nb, float(g))
        _accum(a, ga)
        _accum(b, gb)

    out._bwd = bwd
    return out


def _topo(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root):
    """Populate .grad on every node reachable from a scalar root."""
    if root.data.shape != ():
        raise ShapeError(f"backward: root must be scalar, got shape {root.data.shape}")
    order = _topo(root)
    root.grad = np.ones((), dtype=root.data.dtype)
    for node in reversed(order):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


def gradients(root, leaves):
    """Run backward and return one gradient per leaf (zeros if unreachable)."""
    backward(root)
    return [
        t.grad if t.grad is not None else np.zeros_like(t.data) for t in leaves
    ]
