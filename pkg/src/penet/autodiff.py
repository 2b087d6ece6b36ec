"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Tensors wrap contiguous float64 arrays.  Ops executed while a
:class:`GradTape` is active append nodes to it (creation order is a
topological order), and ``tape.backward(loss)`` accumulates d(loss)/d(leaf)
into every leaf tensor's ``grad``.  A tape is single-use.

The op set is exactly what the estimation network needs: 1-D convolution,
max pooling, a fused stacked-LSTM, mean pooling over time, affine maps,
ELU, batch normalization, feature concatenation and a weighted L1 loss,
plus a few elementwise helpers used by tests.

Tensors and tapes are confined to one thread; distinct model replicas on
distinct threads are independent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """An operand had an incompatible shape; the message names the axis."""


# set PENET_DEBUG_FINITE=1 to assert finite forward values after every op
DEBUG_CHECK_FINITE = os.environ.get("PENET_DEBUG_FINITE", "") == "1"


class Tensor:
    """Dense float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim > 0 and not data.flags["C_CONTIGUOUS"]:
            data = np.ascontiguousarray(data)
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._tape: GradTape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


_TAPE_STACK: list["GradTape"] = []


class GradTape:
    """Append-only record of executed ops, consumed by one backward pass."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self.consumed = False

    def __enter__(self) -> "GradTape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every leaf's grad; consumes the tape."""
        if self.consumed:
            raise RuntimeError("tape already consumed by a previous backward call")
        if loss.data.size != 1:
            raise ValueError(f"backward root must be scalar, got shape {loss.data.shape}")
        produced = {id(out) for out, _, _ in self.nodes}
        if id(loss) not in produced:
            raise ValueError("loss was not produced on this tape")
        flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, parents, backward_fn in reversed(self.nodes):
            g = flowing.pop(id(out), None)
            if g is None:
                continue
            for parent, pg in zip(parents, backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in produced:
                    seen = flowing.get(id(parent))
                    flowing[id(parent)] = pg if seen is None else seen + pg
                else:
                    parent.accumulate_grad(pg)
        self.consumed = True
        self.nodes.clear()


def active_tape() -> GradTape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(loss: Tensor) -> None:
    """Backward through the tape that produced ``loss``."""
    if loss._tape is None:
        raise ValueError("loss was not produced on a tape")
    loss._tape.backward(loss)


def _require_tensor(x, opname: str) -> Tensor:
    if not isinstance(x, Tensor):
        raise TypeError(f"{opname} expects Tensor operands, got {type(x).__name__}")
    return x


def _record(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    if DEBUG_CHECK_FINITE and not np.isfinite(data).all():
        raise FloatingPointError("non-finite value in forward op")
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and not tape.consumed and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._tape = tape
        tape.nodes.append((out, parents, backward_fn))
    return out


def _check_same_shape(a: Tensor, b: Tensor, opname: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{opname}: operand shapes {a.data.shape} and {b.data.shape} differ")


# ---------------------------------------------------------------------------
# elementwise and linear-algebra primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _require_tensor(a, "add"), _require_tensor(b, "add")
    _check_same_shape(a, b, "add")
    return _record(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _require_tensor(a, "sub"), _require_tensor(b, "sub")
    _check_same_shape(a, b, "sub")
    return _record(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _require_tensor(a, "mul"), _require_tensor(b, "mul")
    _check_same_shape(a, b, "mul")
    return _record(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    a = _require_tensor(a, "scale")
    c = float(c)
    return _record(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _require_tensor(a, "matmul"), _require_tensor(b, "matmul")
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul: operands must be rank 2")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: inner axes differ, {a.data.shape[1]} vs {b.data.shape[0]}"
        )
    return _record(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def sigmoid(x: Tensor) -> Tensor:
    x = _require_tensor(x, "sigmoid")
    y = 1.0 / (1.0 + np.exp(-x.data))
    return _record(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    x = _require_tensor(x, "tanh")
    y = np.tanh(x.data)
    return _record(y, (x,), lambda g: (g * (1.0 - y * y),))


def elu(x: Tensor) -> Tensor:
    """Exponential linear unit: x for x > 0, exp(x) - 1 otherwise."""
    x = _require_tensor(x, "elu")
    positive = x.data > 0.0
    y = np.where(positive, x.data, np.expm1(x.data))
    return _record(y, (x,), lambda g: (g * np.where(positive, 1.0, y + 1.0),))


def sum_all(x: Tensor) -> Tensor:
    x = _require_tensor(x, "sum_all")
    return _record(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, x.data.shape).copy(),))


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map x @ weight + bias for x of shape (B, D_in)."""
    x, weight, bias = (_require_tensor(t, "linear") for t in (x, weight, bias))
    if x.data.ndim != 2:
        raise ShapeError(f"linear: input must be rank 2, got {x.data.shape}")
    if weight.data.ndim != 2 or x.data.shape[1] != weight.data.shape[0]:
        raise ShapeError(
            f"linear: feature axis {x.data.shape[1]} does not match weight {weight.data.shape}"
        )
    if bias.data.shape != (weight.data.shape[1],):
        raise ShapeError(f"linear: bias shape {bias.data.shape} does not match output axis")
    out = x.data @ weight.data + bias.data

    def bwd(g):
        return g @ weight.data.T, x.data.T @ g, g.sum(axis=0)

    return _record(out, (x, weight, bias), bwd)


# ---------------------------------------------------------------------------
# sequence ops


def _with_batch(x: np.ndarray, rank: int, opname: str) -> tuple[np.ndarray, bool]:
    if x.ndim == rank:
        return x[None], False
    if x.ndim == rank + 1:
        return x, True
    raise ShapeError(f"{opname}: expected rank {rank} or {rank + 1} input, got {x.ndim}")


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Same-length 1-D cross-correlation with zero padding.

    x: (C_in, L) or (B, C_in, L); kernels: (C_out, C_in, k) with odd k;
    bias: (C_out,).
    """
    x, kernels, bias = (_require_tensor(t, "conv1d") for t in (x, kernels, bias))
    xb, batched = _with_batch(x.data, 2, "conv1d")
    if kernels.data.ndim != 3:
        raise ShapeError(f"conv1d: kernels must be rank 3, got {kernels.data.shape}")
    c_out, c_in, k = kernels.data.shape
    if k % 2 != 1:
        raise ShapeError(f"conv1d: kernel width must be odd, got {k}")
    if xb.shape[1] != c_in:
        raise ShapeError(f"conv1d: input channel axis {xb.shape[1]} does not match kernels {c_in}")
    if bias.data.shape != (c_out,):
        raise ShapeError(f"conv1d: bias shape {bias.data.shape} does not match output channels")
    length = xb.shape[2]
    pad = (k - 1) // 2
    xp = np.pad(xb, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(xp, k, axis=2)  # (B, C_in, L, k)
    out = np.einsum("bclt,oct->bol", windows, kernels.data, optimize=True)
    out += bias.data[None, :, None]

    def bwd(g):
        if not batched:
            g = g[None]
        gk = np.einsum("bol,bclt->oct", g, windows, optimize=True)
        gb = g.sum(axis=(0, 2))
        gp = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1)))
        gwin = sliding_window_view(gp, k, axis=2)  # (B, C_out, L + 2*pad, k)
        flipped = kernels.data[:, :, ::-1]
        gxp = np.einsum("bojt,oct->bcj", gwin, flipped, optimize=True)
        gx = gxp[:, :, pad:pad + length]
        return (gx if batched else gx[0]), gk, gb

    return _record(out if batched else out[0], (x, kernels, bias), bwd)


def maxpool1d(x: Tensor, window: int, stride: int) -> Tensor:
    """Per-window maximum along the last axis; ties route to the first index."""
    x = _require_tensor(x, "maxpool1d")
    if window < 1 or stride < 1:
        raise ValueError(f"window and stride must be >= 1, got {window}, {stride}")
    xb, batched = _with_batch(x.data, 2, "maxpool1d")
    b, c, length = xb.shape
    if length < window:
        raise ShapeError(f"maxpool1d: length axis {length} shorter than window {window}")
    l_out = (length - window) // stride + 1
    windows = sliding_window_view(xb, window, axis=2)[:, :, ::stride][:, :, :l_out]
    arg = windows.argmax(axis=3)
    out = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]

    def bwd(g):
        if not batched:
            g = g[None]
        gx = np.zeros_like(xb)
        position = np.arange(l_out) * stride + arg
        bi = np.arange(b)[:, None, None]
        ci = np.arange(c)[None, :, None]
        np.add.at(gx, (bi, ci, position), g)
        return (gx if batched else gx[0],)

    return _record(out if batched else out[0], (x,), bwd)


def lstm_forward(x: Tensor, layers: list[tuple[Tensor, Tensor, Tensor]]) -> Tensor:
    """Stacked LSTM over the time axis; returns the top layer's hidden sequence.

    x: (L, D_in) or (B, L, D_in).  Each layer is (W, U, b) with W of shape
    (D_layer_in, 4H), U (H, 4H), b (4H,); gate order along the 4H axis is
    input, forget, output, candidate (the three sigmoid gates are packed
    together so one exp call covers them).  h0 and c0 are zeros.
    """
    x = _require_tensor(x, "lstm_forward")
    xb, batched = _with_batch(x.data, 2, "lstm_forward")
    if not layers:
        raise ValueError("lstm_forward needs at least one layer")
    flat_weights: list[Tensor] = []
    for w, u, bias in layers:
        flat_weights += [_require_tensor(w, "lstm_forward"),
                         _require_tensor(u, "lstm_forward"),
                         _require_tensor(bias, "lstm_forward")]
    hidden = layers[0][1].data.shape[0]
    b, n_steps, _ = xb.shape
    expected_in = xb.shape[2]
    for li, (w, u, bias) in enumerate(layers):
        if u.data.shape != (hidden, 4 * hidden):
            raise ShapeError(f"lstm_forward: layer {li} recurrent weight shape {u.data.shape}")
        if w.data.shape != (expected_in, 4 * hidden):
            raise ShapeError(
                f"lstm_forward: layer {li} input weight shape {w.data.shape},"
                f" expected ({expected_in}, {4 * hidden})"
            )
        if bias.data.shape != (4 * hidden,):
            raise ShapeError(f"lstm_forward: layer {li} bias shape {bias.data.shape}")
        expected_in = hidden

    saved = []
    seq = xb
    for w, u, bias in layers:
        xw = seq.reshape(b * n_steps, -1) @ w.data
        xw = xw.reshape(b, n_steps, 4 * hidden) + bias.data
        gates_i = np.empty((n_steps, b, hidden))
        gates_f = np.empty_like(gates_i)
        gates_g = np.empty_like(gates_i)
        gates_o = np.empty_like(gates_i)
        cells = np.empty_like(gates_i)
        tanh_c = np.empty_like(gates_i)
        hs = np.empty_like(gates_i)
        h = np.zeros((b, hidden))
        c = np.zeros((b, hidden))
        for t in range(n_steps):
            a = xw[:, t] + h @ u.data
            sig = 1.0 / (1.0 + np.exp(-a[:, :3 * hidden]))
            ig = sig[:, :hidden]
            fg = sig[:, hidden:2 * hidden]
            og = sig[:, 2 * hidden:]
            gg = np.tanh(a[:, 3 * hidden:])
            c = fg * c + ig * gg
            tc = np.tanh(c)
            h = og * tc
            gates_i[t], gates_f[t], gates_g[t], gates_o[t] = ig, fg, gg, og
            cells[t], tanh_c[t], hs[t] = c, tc, h
        saved.append((seq, gates_i, gates_f, gates_g, gates_o, cells, tanh_c, hs))
        seq = hs.transpose(1, 0, 2)

    def bwd(g):
        if not batched:
            g = g[None]
        dseq = np.ascontiguousarray(g.transpose(1, 0, 2))  # (L, B, H)
        grads: list[np.ndarray | None] = [None] * (1 + 3 * len(layers))
        for li in range(len(layers) - 1, -1, -1):
            w, u, bias = layers[li]
            seq_in, gi, gf, gg, go, cells, tanh_c, hs = saved[li]
            dw = np.zeros_like(w.data)
            du = np.zeros_like(u.data)
            db = np.zeros_like(bias.data)
            dx_seq = np.empty((n_steps, b, seq_in.shape[2]))
            dh_rec = np.zeros((b, hidden))
            dc_rec = np.zeros((b, hidden))
            da = np.empty((b, 4 * hidden))
            for t in range(n_steps - 1, -1, -1):
                dh = dseq[t] + dh_rec
                do = dh * tanh_c[t]
                dc = dc_rec + dh * go[t] * (1.0 - tanh_c[t] ** 2)
                di = dc * gg[t]
                dg = dc * gi[t]
                c_prev = cells[t - 1] if t > 0 else 0.0
                df = dc * c_prev
                dc_rec = dc * gf[t]
                da[:, :hidden] = di * gi[t] * (1.0 - gi[t])
                da[:, hidden:2 * hidden] = df * gf[t] * (1.0 - gf[t])
                da[:, 2 * hidden:3 * hidden] = do * go[t] * (1.0 - go[t])
                da[:, 3 * hidden:] = dg * (1.0 - gg[t] ** 2)
                x_t = seq_in[:, t]
                dw += x_t.T @ da
                h_prev = hs[t - 1] if t > 0 else None
                if h_prev is not None:
                    du += h_prev.T @ da
                db += da.sum(axis=0)
                dx_seq[t] = da @ w.data.T
                dh_rec = da @ u.data.T
            grads[1 + 3 * li] = dw
            grads[2 + 3 * li] = du
            grads[3 + 3 * li] = db
            dseq = dx_seq
        gx = dseq.transpose(1, 0, 2)
        grads[0] = gx if batched else gx[0]
        return tuple(grads)

    out = seq
    return _record(out if batched else out[0], tuple([x] + flat_weights), bwd)


def mean_pool_time(y: Tensor) -> Tensor:
    """Arithmetic mean over the time axis of (L, D) or (B, L, D)."""
    y = _require_tensor(y, "mean_pool_time")
    yb, batched = _with_batch(y.data, 2, "mean_pool_time")
    n_steps = yb.shape[1]
    if n_steps < 1:
        raise ShapeError("mean_pool_time: empty time axis")
    out = yb.mean(axis=1)

    def bwd(g):
        if not batched:
            g = g[None]
        gy = np.repeat(g[:, None, :] / n_steps, n_steps, axis=1)
        return (gy if batched else gy[0],)

    return _record(out if batched else out[0], (y,), bwd)


def swap_channels_time(x: Tensor) -> Tensor:
    """(B, C, L) -> (B, L, C) (or rank-2 equivalent)."""
    x = _require_tensor(x, "swap_channels_time")
    if x.data.ndim == 2:
        return _record(x.data.T.copy(), (x,), lambda g: (g.T.copy(),))
    if x.data.ndim == 3:
        return _record(
            np.ascontiguousarray(x.data.transpose(0, 2, 1)),
            (x,),
            lambda g: (np.ascontiguousarray(g.transpose(0, 2, 1)),),
        )
    raise ShapeError(f"swap_channels_time: expected rank 2 or 3, got {x.data.ndim}")


# ---------------------------------------------------------------------------
# batch normalization


@dataclass
class BatchNormState:
    """Running statistics of one batch normalization layer.

    ``last_batch_*`` mirror the statistics of the most recent training-mode
    call so a training loop can aggregate exact epoch-level statistics
    (length-bucketed batches make the momentum average alone a poor
    estimator of the population statistics).
    """

    mean: np.ndarray
    var: np.ndarray
    last_batch_mean: np.ndarray | None = None
    last_batch_var: np.ndarray | None = None
    last_batch_size: int = 0

    @classmethod
    def initial(cls, width: int) -> "BatchNormState":
        return cls(np.zeros(width), np.ones(width))


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Batch normalization over the batch axis of (B, D).

    Training mode normalizes with batch statistics and updates the running
    averages in ``state``; inference mode uses the running averages only,
    so per-example outputs do not depend on batch composition.
    """
    x, gamma, beta = (_require_tensor(t, "batchnorm") for t in (x, gamma, beta))
    if x.data.ndim != 2:
        raise ShapeError(f"batchnorm: input must be rank 2, got {x.data.shape}")
    width = x.data.shape[1]
    if gamma.data.shape != (width,) or beta.data.shape != (width,):
        raise ShapeError("batchnorm: gamma/beta do not match the feature axis")
    if state.mean.shape != (width,):
        raise ShapeError("batchnorm: running statistics do not match the feature axis")
    if training:
        batch = x.data.shape[0]
        if batch < 2:
            raise RuntimeError("batchnorm in training mode needs batch size >= 2")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.mean[:] = (1.0 - momentum) * state.mean + momentum * mu
        state.var[:] = (1.0 - momentum) * state.var + momentum * var
        state.last_batch_mean = mu
        state.last_batch_var = var
        state.last_batch_size = batch
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv_std
        out = gamma.data * xhat + beta.data

        def bwd(g):
            dxhat = g * gamma.data
            dvar = (dxhat * (x.data - mu)).sum(axis=0) * (-0.5) * inv_std ** 3
            dmu = -(dxhat.sum(axis=0)) * inv_std + dvar * (-2.0 / batch) * (x.data - mu).sum(axis=0)
            gx = dxhat * inv_std + dvar * 2.0 * (x.data - mu) / batch + dmu / batch
            return gx, (g * xhat).sum(axis=0), g.sum(axis=0)

        return _record(out, (x, gamma, beta), bwd)

    inv_std = 1.0 / np.sqrt(state.var + eps)
    xhat = (x.data - state.mean) * inv_std
    out = gamma.data * xhat + beta.data

    def bwd_eval(g):
        return g * gamma.data * inv_std, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _record(out, (x, gamma, beta), bwd_eval)


# ---------------------------------------------------------------------------
# concatenation and loss


def concat_features(parts: list[Tensor]) -> Tensor:
    """Concatenate (B, D_i) blocks along the feature axis."""
    if not parts:
        raise ValueError("concat_features needs at least one part")
    parts = [_require_tensor(p, "concat_features") for p in parts]
    batch = parts[0].data.shape[0]
    for p in parts:
        if p.data.ndim != 2 or p.data.shape[0] != batch:
            raise ShapeError(
                f"concat_features: expected (batch={batch}, features), got {p.data.shape}"
            )
    widths = [p.data.shape[1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)
    offsets = np.cumsum([0] + widths)

    def bwd(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _record(out, tuple(parts), bwd)


def concat_batch(parts: list[Tensor]) -> Tensor:
    """Stack (B_i, D) blocks along the batch axis."""
    if not parts:
        raise ValueError("concat_batch needs at least one part")
    parts = [_require_tensor(p, "concat_batch") for p in parts]
    width = parts[0].data.shape[1]
    for p in parts:
        if p.data.ndim != 2 or p.data.shape[1] != width:
            raise ShapeError(
                f"concat_batch: expected (rows, {width}) blocks, got {p.data.shape}"
            )
    out = np.concatenate([p.data for p in parts], axis=0)
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def bwd(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _record(out, tuple(parts), bwd)


def concat_scalar(vec: Tensor, scalars: Tensor) -> Tensor:
    """Append one scalar feature per sample: (B, D) + (B,) -> (B, D+1)."""
    vec = _require_tensor(vec, "concat_scalar")
    scalars = _require_tensor(scalars, "concat_scalar")
    if scalars.data.ndim != 1 or scalars.data.shape[0] != vec.data.shape[0]:
        raise ShapeError(
            f"concat_scalar: scalar axis {scalars.data.shape} does not match batch {vec.data.shape[0]}"
        )
    out = np.concatenate([vec.data, scalars.data[:, None]], axis=1)

    def bwd(g):
        return g[:, :-1], g[:, -1]

    return _record(out, (vec, scalars), bwd)


def weighted_l1_loss(pred: Tensor, target: Tensor, weights) -> Tensor:
    """Mean over the batch of sum_i weights[i] * |pred_i - target_i|.

    The subgradient at exact ties is 0.
    """
    pred = _require_tensor(pred, "weighted_l1_loss")
    target = _require_tensor(target, "weighted_l1_loss")
    _check_same_shape(pred, target, "weighted_l1_loss")
    if pred.data.ndim != 2:
        raise ShapeError(f"weighted_l1_loss: expected (batch, M), got {pred.data.shape}")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (pred.data.shape[1],):
        raise ShapeError(f"weighted_l1_loss: weights shape {weights.shape} does not match M")
    if not (weights > 0.0).all():
        raise ValueError("weighted_l1_loss: weights must be positive")
    batch = pred.data.shape[0]
    diff = pred.data - target.data
    out = np.asarray((np.abs(diff) * weights).sum() / batch)

    def bwd(g):
        gp = g * weights * np.sign(diff) / batch
        return gp, -gp

    return _record(out, (pred, target), bwd)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()
