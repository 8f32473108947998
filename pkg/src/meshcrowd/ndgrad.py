"""Dense f64 tensor arithmetic with tape-based reverse-mode autodiff.

A :class:`Tensor` wraps a row-major float64 numpy array. Operations
executed while a :class:`Tape` is active record one entry each; calling
:func:`backward` replays the tape once in reverse and returns gradients
for the requested leaves. Tensors that never touch a tape are plain
immutable values.

Shape discipline: elementwise binary ops require identical shapes, or a
scalar (shape ``()``) on one side. Any other broadcasting must go through
an explicit :func:`broadcast_to`, so shape mistakes fail loudly instead
of silently expanding ranks.

Every differentiable kernel is registered in :data:`KERNELS`; the
gradient-check suite enumerates that registry so no backward rule can go
unchecked.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "GradCheckError",
    "GradCheckReport",
    "KERNELS",
    "as_tensor",
    "backward",
    "current_tape",
    "grad_check",
    "stack",
]


class ShapeError(ValueError):
    """Operand shapes do not conform for an operation."""


class GradCheckError(RuntimeError):
    """A gradient check could not be evaluated (e.g. non-finite output)."""


_ids = itertools.count()
_tls = threading.local()

# name -> kernel function; the gradcheck suite iterates this
KERNELS: dict[str, Callable] = {}


def _register(name: str):
    def deco(fn):
        KERNELS[name] = fn
        return fn

    return deco


def _tape_stack() -> list:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = _tls.stack = []
    return stack


def current_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Row-major float64 array plus a requires-grad flag and a unique id."""

    __slots__ = ("data", "requires_grad", "id")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.id = next(_ids)

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

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic sugar; scalars are lifted to shape-() constants
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

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None) -> "Tensor":
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        return tmean(self, axis, keepdims)

    def abs(self) -> "Tensor":
        return tabs(self)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


@dataclass
class TapeEntry:
    op: str
    input_ids: tuple[int, ...]
    output_id: int
    backward_fn: Callable[[np.ndarray], Iterable[tuple[int, np.ndarray]]]


class Tape:
    """Ordered record of operations; entries are appended in execution
    order, which is a topological order by construction.

    A tape is single-threaded: one forward plus one backward at a time.
    Parallelism happens across independent tapes.
    """

    def __init__(self):
        self.entries: list[TapeEntry] = []
        self._tensors: dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self

    def _record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn):
        for t in inputs:
            self._tensors.setdefault(t.id, t)
        self._tensors[output.id] = output
        self.entries.append(TapeEntry(op, tuple(t.id for t in inputs), output.id, backward_fn))

    def leaves(self) -> list[Tensor]:
        """Tensors consumed but never produced on this tape, with grad."""
        produced = {e.output_id for e in self.entries}
        out, seen = [], set()
        for e in self.entries:
            for tid in e.input_ids:
                if tid in produced or tid in seen:
                    continue
                seen.add(tid)
                t = self._tensors[tid]
                if t.requires_grad:
                    out.append(t)
        return out


def _record(op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn) -> None:
    tape = current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape._record(op, inputs, output, backward_fn)


def backward(tape: Tape, loss: Tensor, leaves: Sequence[Tensor] | None = None) -> dict[int, Tensor]:
    """Reverse sweep over ``tape`` from scalar ``loss``.

    Returns a map from leaf tensor id to its gradient tensor. Leaves that
    do not reach the loss get zero gradients. Each tape entry is visited
    exactly once.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.data.shape}")
    if leaves is None:
        leaves = tape.leaves()

    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
    for entry in reversed(tape.entries):
        g = grads.pop(entry.output_id, None)
        if g is None:
            continue
        for tid, contrib in entry.backward_fn(g):
            acc = grads.get(tid)
            grads[tid] = contrib if acc is None else acc + contrib

    out = {}
    for leaf in leaves:
        g = grads.get(leaf.id)
        out[leaf.id] = Tensor(g if g is not None else np.zeros_like(leaf.data))
    return out


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _check_elementwise(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not match "
                         "(explicit broadcast_to required)")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # collapse a gradient onto a scalar operand
    if shape == () and g.shape != ():
        return np.asarray(g.sum())
    return g


@_register("add")
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("add", a, b)
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def bw(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a.id, _reduce_to(g, a.shape)))
        if b.requires_grad:
            pairs.append((b.id, _reduce_to(g, b.shape)))
        return pairs

    _record("add", (a, b), out, bw)
    return out


@_register("sub")
def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("sub", a, b)
    out = Tensor(a.data - b.data, a.requires_grad or b.requires_grad)

    def bw(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a.id, _reduce_to(g, a.shape)))
        if b.requires_grad:
            pairs.append((b.id, _reduce_to(-g, b.shape)))
        return pairs

    _record("sub", (a, b), out, bw)
    return out


@_register("mul")
def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("mul", a, b)
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)
    a_data, b_data = a.data, b.data

    def bw(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a.id, _reduce_to(g * b_data, a.shape)))
        if b.requires_grad:
            pairs.append((b.id, _reduce_to(g * a_data, b.shape)))
        return pairs

    _record("mul", (a, b), out, bw)
    return out


@_register("div")
def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("div", a, b)
    out = Tensor(a.data / b.data, a.requires_grad or b.requires_grad)
    a_data, b_data = a.data, b.data

    def bw(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a.id, _reduce_to(g / b_data, a.shape)))
        if b.requires_grad:
            pairs.append((b.id, _reduce_to(-g * a_data / (b_data * b_data), b.shape)))
        return pairs

    _record("div", (a, b), out, bw)
    return out


@_register("neg")
def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data, a.requires_grad)
    _record("neg", (a,), out, lambda g: [(a.id, -g)])
    return out


@_register("matmul")
def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad)
    a_data, b_data = a.data, b.data

    def bw(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a.id, g @ b_data.T))
        if b.requires_grad:
            pairs.append((b.id, a_data.T @ g))
        return pairs

    _record("matmul", (a, b), out, bw)
    return out


@_register("transpose")
def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.transpose(a.data, axes), a.requires_grad)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))
    _record("transpose", (a,), out, lambda g: [(a.id, np.transpose(g, inv))])
    return out


@_register("reshape")
def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    try:
        out_data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from e
    out = Tensor(out_data, a.requires_grad)
    orig = a.shape
    _record("reshape", (a,), out, lambda g: [(a.id, g.reshape(orig))])
    return out


@_register("broadcast_to")
def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    try:
        out_data = np.broadcast_to(a.data, shape).copy()
    except ValueError as e:
        raise ShapeError(f"broadcast_to: cannot broadcast {a.shape} to {shape}") from e
    out = Tensor(out_data, a.requires_grad)
    orig = a.shape

    def bw(g):
        extra = g.ndim - len(orig)
        if extra:
            g = g.sum(axis=tuple(range(extra)))
        keep = tuple(i for i, s in enumerate(orig) if s == 1 and g.shape[i] != 1)
        if keep:
            g = g.sum(axis=keep, keepdims=True)
        return [(a.id, g)]

    _record("broadcast_to", (a,), out, bw)
    return out


@_register("concat")
def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: need at least one tensor")
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis),
                 any(t.requires_grad for t in ts))
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        pairs = []
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                pairs.append((t.id, g[tuple(idx)]))
        return pairs

    _record("concat", ts, out, bw)
    return out


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Stack along a new axis (composed from reshape + concat)."""
    ts = [as_tensor(t) for t in tensors]
    shape = ts[0].shape
    new_shape = shape[:axis] + (1,) + shape[axis:]
    return concat([reshape(t, new_shape) for t in ts], axis=axis)


@_register("getitem")
def getitem(a, key) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.array(a.data[key]), a.requires_grad)
    orig_shape = a.shape

    def bw(g):
        z = np.zeros(orig_shape)
        z[key] = g
        return [(a.id, z)]

    _record("getitem", (a,), out, bw)
    return out


@_register("sum")
def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), a.requires_grad)
    orig_shape = a.shape

    def bw(g):
        if axis is None:
            return [(a.id, np.broadcast_to(g, orig_shape).copy())]
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            axes = tuple(ax % len(orig_shape) for ax in axes)
            gshape = tuple(1 if i in axes else s for i, s in enumerate(orig_shape))
            g = g.reshape(gshape)
        return [(a.id, np.broadcast_to(g, orig_shape).copy())]

    _record("sum", (a,), out, bw)
    return out


@_register("mean")
def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims), a.requires_grad)
    orig_shape = a.shape
    count = a.data.size if axis is None else a.data.size // out.data.size if out.data.size else 1

    def bw(g):
        if axis is None:
            return [(a.id, np.broadcast_to(g / count, orig_shape).copy())]
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            axes = tuple(ax % len(orig_shape) for ax in axes)
            gshape = tuple(1 if i in axes else s for i, s in enumerate(orig_shape))
            g = g.reshape(gshape)
        return [(a.id, np.broadcast_to(g / count, orig_shape).copy())]

    _record("mean", (a,), out, bw)
    return out


def _unary(name: str, fwd, dfx):
    """Build an elementwise unary kernel: dfx(x, y) returns dy/dx."""

    def kernel(a) -> Tensor:
        a = as_tensor(a)
        y = fwd(a.data)
        out = Tensor(y, a.requires_grad)
        x_data, y_data = a.data, out.data
        _record(name, (a,), out, lambda g: [(a.id, g * dfx(x_data, y_data))])
        return out

    kernel.__name__ = name
    return _register(name)(kernel)


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


tabs = _unary("abs", np.abs, lambda x, y: np.sign(x))  # subgradient 0 at 0
texp = _unary("exp", np.exp, lambda x, y: y)
tlog = _unary("log", np.log, lambda x, y: 1.0 / x)
tsqrt = _unary("sqrt", np.sqrt, lambda x, y: 0.5 / y)
tsin = _unary("sin", np.sin, lambda x, y: np.cos(x))
tcos = _unary("cos", np.cos, lambda x, y: -np.sin(x))
tanh = _unary("tanh", np.tanh, lambda x, y: 1.0 - y * y)
sigmoid = _unary("sigmoid", _sigmoid_np, lambda x, y: y * (1.0 - y))
softplus = _unary("softplus", lambda x: np.logaddexp(0.0, x), lambda x, y: _sigmoid_np(x))


@_register("softmax")
def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, a.requires_grad)

    def bw(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return [(a.id, s * (g - dot))]

    _record("softmax", (a,), out, bw)
    return out


@_register("l2norm")
def l2norm(a, axis: int, keepdims: bool = False) -> Tensor:
    """Euclidean norm along one axis. Gradient is x / norm, clamped away
    from zero; callers keep inputs off the origin."""
    a = as_tensor(a)
    n_keep = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    out = Tensor(n_keep if keepdims else np.squeeze(n_keep, axis=axis), a.requires_grad)
    x_data = a.data

    def bw(g):
        gk = g if keepdims else np.expand_dims(g, axis)
        return [(a.id, gk * x_data / np.maximum(n_keep, 1e-30))]

    _record("l2norm", (a,), out, bw)
    return out


@_register("bilinear2d")
def bilinear2d(fmap, pts, mode: str = "zeros") -> Tensor:
    """Sample a C x H x W map at N fractional (x, y) pixel positions.

    Returns an N x C tensor. ``mode="zeros"``: positions outside the map
    contribute zero; ``mode="periodic"``: indices wrap (used by the
    shift-equivariance tests). Differentiable in both the map values and
    the positions.
    """
    fmap, pts = as_tensor(fmap), as_tensor(pts)
    if fmap.ndim != 3:
        raise ShapeError(f"bilinear2d: map must be C x H x W, got {fmap.shape}")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"bilinear2d: points must be N x 2, got {pts.shape}")
    if mode not in ("zeros", "periodic"):
        raise ValueError(f"bilinear2d: unknown mode {mode!r}")

    C, H, W = fmap.shape
    flat = fmap.data.reshape(C, H * W).T  # (H*W, C)
    px, py = pts.data[:, 0], pts.data[:, 1]
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    lx, ly = px - x0, py - y0

    corners = []
    for dy in (0, 1):
        for dx in (0, 1):
            xc, yc = x0 + dx, y0 + dy
            if mode == "periodic":
                xi, yi = xc % W, yc % H
                m = np.ones_like(px)
            else:
                m = ((xc >= 0) & (xc < W) & (yc >= 0) & (yc < H)).astype(np.float64)
                xi, yi = np.clip(xc, 0, W - 1), np.clip(yc, 0, H - 1)
            idx = yi * W + xi
            w = (lx if dx else 1.0 - lx) * (ly if dy else 1.0 - ly)
            corners.append((idx, m, w, flat[idx] * m[:, None]))

    out_data = np.zeros((pts.shape[0], C))
    for idx, m, w, v in corners:
        out_data += w[:, None] * v
    out = Tensor(out_data, fmap.requires_grad or pts.requires_grad)

    def bw(g):
        pairs = []
        if fmap.requires_grad:
            dflat = np.zeros_like(flat)
            for idx, m, w, v in corners:
                np.add.at(dflat, idx, g * (w * m)[:, None])
            pairs.append((fmap.id, dflat.T.reshape(C, H, W)))
        if pts.requires_grad:
            (i00, m00, w00, v00), (i10, m10, w10, v10), \
                (i01, m01, w01, v01), (i11, m11, w11, v11) = corners
            ddx = (v10 - v00) * (1.0 - ly)[:, None] + (v11 - v01) * ly[:, None]
            ddy = (v01 - v00) * (1.0 - lx)[:, None] + (v11 - v10) * lx[:, None]
            dpts = np.stack([(g * ddx).sum(axis=1), (g * ddy).sum(axis=1)], axis=1)
            pairs.append((pts.id, dpts))
        return pairs

    _record("bilinear2d", (fmap, pts), out, bw)
    return out


@_register("unfold2d")
def unfold2d(x, kernel: int, stride: int = 1, padding: int = 0) -> Tensor:
    """im2col for a C x H x W input: returns (C*k*k) x (OH*OW).

    Column ordering is channel-major, then kernel row, then kernel col, so
    a convolution is ``weight @ unfold2d(x, k, s, p)`` with weight shaped
    (C_out, C_in*k*k).
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"unfold2d: input must be C x H x W, got {x.shape}")
    C, H, W = x.shape
    k, s, p = kernel, stride, padding
    OH = (H + 2 * p - k) // s + 1
    OW = (W + 2 * p - k) // s + 1
    if OH <= 0 or OW <= 0:
        raise ShapeError(f"unfold2d: kernel {k} stride {s} too large for {x.shape}")

    xp = np.pad(x.data, ((0, 0), (p, p), (p, p))) if p else x.data
    cols = np.empty((C, k, k, OH, OW))
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i:i + OH * s:s, j:j + OW * s:s]
    out = Tensor(cols.reshape(C * k * k, OH * OW), x.requires_grad)

    def bw(g):
        gc = g.reshape(C, k, k, OH, OW)
        gp = np.zeros((C, H + 2 * p, W + 2 * p))
        for i in range(k):
            for j in range(k):
                gp[:, i:i + OH * s:s, j:j + OW * s:s] += gc[:, i, j]
        if p:
            gp = gp[:, p:-p, p:-p]
        return [(x.id, gp)]

    _record("unfold2d", (x,), out, bw)
    return out


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    """Outcome of one AD-vs-finite-difference comparison."""

    name: str
    max_rel_error: float
    tolerance: float
    passed: bool = field(init=False)
    coords_checked: int = 0

    def __post_init__(self):
        self.max_rel_error = float(self.max_rel_error)
        self.passed = bool(self.max_rel_error <= self.tolerance)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5,
               tol: float = 1e-4, max_coords: int | None = None,
               rng: np.random.Generator | None = None, name: str = "") -> GradCheckReport:
    """Compare the tape gradient of ``f`` at ``x`` against central finite
    differences.

    Relative error per coordinate is |g_ad - g_fd| / max(1e-8, |g_ad| +
    |g_fd|). For large tensors, ``max_coords`` randomly subsamples the
    coordinates that get a finite-difference probe.
    """
    if step <= 0:
        raise ValueError("grad_check: step must be positive")
    was = x.requires_grad
    x.requires_grad = True
    try:
        with Tape() as tape:
            y = f(x)
        if y.data.size != 1:
            raise GradCheckError(f"grad_check {name or '?'}: f must return a scalar")
        g_ad = backward(tape, y, [x])[x.id].data
    finally:
        x.requires_grad = was

    n = x.data.size
    if max_coords is not None and max_coords < n:
        if rng is None:
            rng = np.random.default_rng(0)
        coords = rng.choice(n, size=max_coords, replace=False)
    else:
        coords = np.arange(n)

    flat = x.data.reshape(-1)
    max_rel = 0.0
    for c in coords:
        c = int(c)
        orig = flat[c]
        flat[c] = orig + step
        y_plus = float(f(x).data)
        flat[c] = orig - step
        y_minus = float(f(x).data)
        flat[c] = orig
        if not (np.isfinite(y_plus) and np.isfinite(y_minus)):
            raise GradCheckError(
                f"grad_check {name or '?'}: non-finite value at perturbed coordinate {c}")
        g_fd = (y_plus - y_minus) / (2.0 * step)
        g_a = g_ad.reshape(-1)[c]
        rel = abs(g_a - g_fd) / max(1e-8, abs(g_a) + abs(g_fd))
        max_rel = max(max_rel, rel)

    return GradCheckReport(name=name, max_rel_error=max_rel, tolerance=tol,
                           coords_checked=len(coords))
