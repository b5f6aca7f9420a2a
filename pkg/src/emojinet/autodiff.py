"""Dense tensors with a reverse-mode gradient tape.

Every operation that sees a gradient-requiring input appends a record
(output, inputs, backward rule) to the ambient tape. The append order is a
topological order of the computation, so ``backward`` is a single reverse
sweep: pop the output's adjoint, feed it to the record's backward rule,
accumulate the returned adjoints into the inputs. Leaf tensors (parameters)
collect their adjoints into ``.grad``; intermediate adjoints are dropped as
soon as their record is consumed.

Default dtype is float32; building tensors as float64 switches the whole
downstream computation to 64-bit, which is what the finite-difference
gradient checks use.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .rng import SeededRNG

DEFAULT_DTYPE = np.float32


class Tensor:
    """N-dimensional array plus an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not (isinstance(data, (np.ndarray, np.generic)) and np.issubdtype(arr.dtype, np.floating)):
            # python scalars/lists default to float32; numpy float data keeps its precision
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


class ShapeError(ValueError):
    pass


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered log of executed operations; inputs always precede their uses."""

    def __init__(self):
        self.records: list[_Record] = []
        self.enabled = True
        self.backward_calls = 0
        self._produced: set[int] = set()

    def record(self, out: Tensor, inputs, backward) -> None:
        if self.enabled and any(t is not None and t.requires_grad for t in inputs):
            out.requires_grad = True
            self.records.append(_Record(out, inputs, backward))
            self._produced.add(id(out))

    def reset(self) -> None:
        self.records.clear()
        self._produced.clear()

    def is_leaf(self, t: Tensor) -> bool:
        return id(t) not in self._produced

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every reachable leaf's .grad."""
        if loss.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._produced:
            raise ValueError("loss is not on the tape (no recorded op produced it)")
        adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        holders: dict[int, Tensor] = {id(loss): loss}
        for rec in reversed(self.records):
            g = adjoints.pop(id(rec.out), None)
            if g is None:
                continue
            holders.pop(id(rec.out), None)
            for t, gi in zip(rec.inputs, rec.backward(g)):
                if t is None or gi is None or not t.requires_grad:
                    continue
                acc = adjoints.get(id(t))
                adjoints[id(t)] = gi if acc is None else acc + gi
                holders[id(t)] = t
        for tid, g in adjoints.items():
            t = holders[tid]
            if self.is_leaf(t):
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += g.astype(t.data.dtype, copy=False)
        self.backward_calls += 1


_TAPE = Tape()


def active_tape() -> Tape:
    return _TAPE


def backward(loss: Tensor) -> None:
    _TAPE.backward(loss)


@contextmanager
def no_grad():
    prev = _TAPE.enabled
    _TAPE.enabled = False
    try:
        yield
    finally:
        _TAPE.enabled = prev


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to the shape the operand had before broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)
    _TAPE.record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data)
    _TAPE.record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))
    return out


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    if isinstance(b, (int, float)):
        c = float(b)
        out = Tensor(a.data * c)
        _TAPE.record(out, (a,), lambda g: (g * c,))
        return out
    b = _as_tensor(b)
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data
    _TAPE.record(out, (a, b), lambda g: (_unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)))
    return out


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data))
    od = out.data
    _TAPE.record(out, (x,), lambda g: (g * od,))
    return out


def pow_const(x: Tensor, p: float) -> Tensor:
    """Elementwise x**p for a fixed exponent (x must stay nonnegative for fractional p)."""
    p = float(p)
    out = Tensor(x.data ** p)
    if p == 0.0:
        _TAPE.record(out, (x,), lambda g: (np.zeros_like(x.data),))
        return out
    xd = x.data
    _TAPE.record(out, (x,), lambda g: (g * p * xd ** (p - 1.0),))
    return out


def clamp_min(x: Tensor, floor: float) -> Tensor:
    out = Tensor(np.maximum(x.data, floor))
    keep = x.data > floor
    _TAPE.record(out, (x,), lambda g: (g * keep,))
    return out


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    out = Tensor(x.data.reshape(shape))
    _TAPE.record(out, (x,), lambda g: (g.reshape(old),))
    return out


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(x.data.transpose(axes))
    _TAPE.record(out, (x,), lambda g: (g.transpose(inv),))
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    _TAPE.record(out, tuple(tensors), bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.asarray(x.data.sum(), dtype=x.dtype))
    _TAPE.record(out, (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))
    return out


def mean_all(x: Tensor) -> Tensor:
    n = x.size
    out = Tensor(np.asarray(x.data.mean(), dtype=x.dtype))
    _TAPE.record(out, (x,), lambda g: (np.broadcast_to(g / n, x.shape).astype(x.dtype, copy=False),))
    return out


def sum_axis(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    _TAPE.record(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    out = Tensor(np.matmul(a.data, b.data))
    ad, bd = a.data, b.data

    def bwd(g):
        ga = _unbroadcast(np.matmul(g, bd.swapaxes(-1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(ad.swapaxes(-1, -2), g), b.shape)
        return ga, gb

    _TAPE.record(out, (a, b), bwd)
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = matmul(x, w)
    return out if b is None else add(out, b)


def embedding_lookup(table: Tensor, ids: np.ndarray, pad_id: int | None = None) -> Tensor:
    """Rows of ``table`` gathered by integer ids; gradient scatters back additively.

    With ``pad_id`` set, that row's gradient is zeroed (frozen padding vector).
    """
    ids = np.asarray(ids)
    vocab = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise IndexError(f"embedding id out of range: ids in [{ids.min()}, {ids.max()}], table has {vocab} rows")
    out = Tensor(table.data[ids])

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        if pad_id is not None:
            gt[pad_id] = 0.0
        return (gt,)

    _TAPE.record(out, (table,), bwd)
    return out


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor | None = None) -> Tensor:
    """Valid cross-correlation over the sequence axis.

    x: (batch, L, d_in); kernels: (d_out, w, d_in); out: (batch, L-w+1, d_out).
    """
    if x.ndim != 3 or kernels.ndim != 3 or x.shape[2] != kernels.shape[2]:
        raise ShapeError(f"conv1d: incompatible shapes x={x.shape} kernels={kernels.shape}")
    batch, length, d_in = x.shape
    d_out, width, _ = kernels.shape
    if length < width:
        raise ShapeError(f"conv1d: sequence length {length} shorter than kernel width {width}")
    positions = length - width + 1
    xd = np.ascontiguousarray(x.data)
    s0, s1, s2 = xd.strides
    windows = np.lib.stride_tricks.as_strided(
        xd, shape=(batch, positions, width, d_in), strides=(s0, s1, s1, s2), writeable=False
    )
    res = np.tensordot(windows, kernels.data, axes=((2, 3), (1, 2)))  # (batch, positions, d_out)
    if bias is not None:
        res = res + bias.data
    out = Tensor(res)
    kd = kernels.data

    def bwd(g):
        gx = np.zeros_like(xd)
        gk = np.zeros_like(kd)
        for j in range(width):
            # out[b,p,o] consumed x[b,p+j,:] through kernels[:,j,:]
            gx[:, j:j + positions, :] += np.matmul(g, kd[:, j, :])
            gk[:, j, :] = np.tensordot(g, xd[:, j:j + positions, :], axes=((0, 1), (0, 1)))
        gb = g.sum(axis=(0, 1)) if bias is not None else None
        return gx, gk, gb

    _TAPE.record(out, (x, kernels, bias), bwd)
    return out


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0))
    keep = x.data > 0
    _TAPE.record(out, (x,), lambda g: (g * keep,))
    return out


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, computed shift-invariantly (row max subtracted)."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)

    def bwd(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - dot),)

    _TAPE.record(out, (x,), bwd)
    return out


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    out = Tensor(logp)
    p = np.exp(logp)

    def bwd(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    _TAPE.record(out, (x,), bwd)
    return out


def dropout(x: Tensor, p: float, rng: SeededRNG, train: bool) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-p) in train mode, identity in eval."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    out = Tensor(x.data * mask)
    _TAPE.record(out, (x,), lambda g: (g * mask,))
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize over the last axis (population variance), then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gamma.data + beta.data)
    d = x.shape[-1]
    gd = gamma.data

    def bwd(g):
        sum_axes = tuple(range(g.ndim - 1))
        gbeta = g.sum(axis=sum_axes)
        ggamma = (g * xhat).sum(axis=sum_axes)
        gxhat = g * gd
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return gx.astype(x.dtype, copy=False), ggamma, gbeta

    _TAPE.record(out, (x, gamma, beta), bwd)
    return out


# ---------------------------------------------------------------------------
# masked sequence reductions
# ---------------------------------------------------------------------------

def _check_mask(x: Tensor, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != x.shape[:2]:
        raise ShapeError(f"mask shape {mask.shape} does not match sequence shape {x.shape[:2]}")
    if (mask.sum(axis=1) == 0).any():
        raise ValueError("masked reduction over a row with no unmasked positions")
    return mask.astype(bool)


def max_over_sequence(x: Tensor, mask: np.ndarray) -> Tensor:
    """Per-dimension max over unmasked positions; gradient to the first argmax."""
    mask = _check_mask(x, mask)
    neg = np.where(mask[:, :, None], x.data, -np.inf)
    idx = neg.argmax(axis=1)  # (batch, d); argmax takes the first index on ties
    b = np.arange(x.shape[0])[:, None]
    d = np.arange(x.shape[2])[None, :]
    out = Tensor(x.data[b, idx, d])

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (b, idx, d), g)
        return (gx,)

    _TAPE.record(out, (x,), bwd)
    return out


def mean_over_sequence(x: Tensor, mask: np.ndarray) -> Tensor:
    """Per-dimension mean over unmasked positions (sum / count)."""
    mask = _check_mask(x, mask)
    m = mask.astype(x.dtype)
    counts = m.sum(axis=1, keepdims=True)  # (batch, 1)
    out = Tensor((x.data * m[:, :, None]).sum(axis=1) / counts)

    def bwd(g):
        return ((g[:, None, :] / counts[:, :, None]) * m[:, :, None],)

    _TAPE.record(out, (x,), bwd)
    return out


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """out[i] = x[i, idx[i]] for a 2-D tensor."""
    idx = np.asarray(idx)
    rows = np.arange(x.shape[0])
    out = Tensor(x.data[rows, idx])

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, idx), g)
        return (gx,)

    _TAPE.record(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    batch, length, d = x.shape
    return transpose(reshape(x, (batch, length, num_heads, d // num_heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    batch, heads, length, dh = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (batch, length, heads * dh))


def _key_mask_bias(mask: np.ndarray, dtype) -> Tensor:
    # (batch, 1, 1, L); masked-out keys get -inf pre-softmax, exact zero weight after
    bias = np.where(np.asarray(mask, dtype=bool), 0.0, -np.inf).astype(dtype)
    return Tensor(bias[:, None, None, :])


def multi_head_self_attention(
    x: Tensor,
    mask: np.ndarray,
    num_heads: int,
    wq: Tensor, wk: Tensor, wv: Tensor, wo: Tensor,
    bq: Tensor, bk: Tensor, bv: Tensor, bo: Tensor,
) -> Tensor:
    """Scaled dot-product self-attention with masked keys, heads merged by a linear map."""
    d = x.shape[-1]
    if d % num_heads != 0:
        raise ShapeError(f"model width {d} is not divisible by {num_heads} heads")
    q = _split_heads(linear(x, wq, bq), num_heads)
    k = _split_heads(linear(x, wk, bk), num_heads)
    v = _split_heads(linear(x, wv, bv), num_heads)
    scale = 1.0 / np.sqrt(d // num_heads)
    scores = add(mul(matmul(q, transpose(k, (0, 1, 3, 2))), scale), _key_mask_bias(mask, x.dtype))
    ctx = matmul(softmax(scores), v)
    return linear(_merge_heads(ctx), wo, bo)


def attention_pool(
    x: Tensor,
    mask: np.ndarray,
    num_heads: int,
    query: Tensor,
    wq: Tensor, wk: Tensor, wv: Tensor, wo: Tensor,
    bq: Tensor, bk: Tensor, bv: Tensor, bo: Tensor,
) -> Tensor:
    """Reduce a sequence to one vector by attending a learned query over unmasked tokens."""
    batch, _, d = x.shape
    if d % num_heads != 0:
        raise ShapeError(f"model width {d} is not divisible by {num_heads} heads")
    dh = d // num_heads
    q = reshape(linear(reshape(query, (1, 1, d)), wq, bq), (1, 1, num_heads, dh))
    q = transpose(q, (0, 2, 1, 3))  # (1, heads, 1, dh), broadcast over batch
    k = _split_heads(linear(x, wk, bk), num_heads)
    v = _split_heads(linear(x, wv, bv), num_heads)
    scale = 1.0 / np.sqrt(dh)
    scores = add(mul(matmul(q, transpose(k, (0, 1, 3, 2))), scale), _key_mask_bias(mask, x.dtype))
    ctx = matmul(softmax(scores), v)  # (batch, heads, 1, dh)
    pooled = reshape(transpose(ctx, (0, 2, 1, 3)), (batch, d))
    return linear(pooled, wo, bo)
