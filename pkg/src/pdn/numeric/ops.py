"""Differentiable primitives.

Every op takes and returns :class:`Tensor` objects and, when a tape is
active and some input requires a gradient, records its backward closure.
Leading dimensions are treated as batch dimensions throughout.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, active_tape

SELU_ALPHA = 1.6732632423543772
SELU_SCALE = 1.0507009873554805
LOG_EPS = 1e-12


class ShapeError(ValueError):
    pass


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    tape = active_tape()
    if needs and tape is not None:
        tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- linear algebra ---------------------------------------------------------

def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """``W @ x + b`` applied to the last axis of ``x``."""
    x, W, b = _as_tensor(x), _as_tensor(W), _as_tensor(b)
    if W.data.ndim != 2 or b.data.shape != (W.data.shape[0],) or x.data.shape[-1] != W.data.shape[1]:
        raise ShapeError(
            f"affine dimension mismatch: x{x.dims} W{W.dims} b{b.dims}")
    out = x.data @ W.data.T + b.data

    def backward(g):
        if x.requires_grad:
            x.accumulate(g @ W.data)
        if W.requires_grad:
            W.accumulate(g.reshape(-1, g.shape[-1]).T @ x.data.reshape(-1, x.data.shape[-1]))
        if b.requires_grad:
            b.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return _emit(out, (x, W, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return _emit(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _emit(out, (a, b), backward)


def sum_all(x: Tensor) -> Tensor:
    x = _as_tensor(x)

    def backward(g):
        x.accumulate(np.broadcast_to(g, x.data.shape))

    return _emit(np.asarray(x.data.sum()), (x,), backward)


def mean(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size

    def backward(g):
        x.accumulate(np.broadcast_to(g / n, x.data.shape))

    return _emit(np.asarray(x.data.mean()), (x,), backward)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([p.data.shape[axis] for p in parts])[:-1]

    def backward(g):
        for p, piece in zip(parts, np.split(g, bounds, axis=axis)):
            if p.requires_grad:
                p.accumulate(piece)

    return _emit(out, tuple(parts), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]``; ids is an integer array of any shape."""
    ids = np.asarray(ids)
    out = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        table.accumulate(full)

    return _emit(out, (table,), backward)


# -- activations ------------------------------------------------------------

def selu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    pos = x.data > 0
    neg_branch = SELU_SCALE * SELU_ALPHA * np.expm1(np.minimum(x.data, 0.0))
    out = np.where(pos, SELU_SCALE * x.data, neg_branch)

    def backward(g):
        local = np.where(pos, SELU_SCALE, neg_branch + SELU_SCALE * SELU_ALPHA)
        x.accumulate(g * local)

    return _emit(out, (x,), backward)


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    pos = x.data > 0
    out = np.where(pos, x.data, 0.0).astype(x.data.dtype, copy=False)

    def backward(g):
        x.accumulate(g * pos)

    return _emit(out, (x,), backward)


def tanh_act(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def backward(g):
        x.accumulate(g * (1.0 - out * out))

    return _emit(out, (x,), backward)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow in exp for large |z|
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = _sigmoid(x.data)

    def backward(g):
        x.accumulate(g * out * (1.0 - out))

    return _emit(out, (x,), backward)


def _softmax_backward(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    return y * (g - (g * y).sum(axis=-1, keepdims=True))


def softmax(logits: Tensor) -> Tensor:
    logits = _as_tensor(logits)
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        logits.accumulate(_softmax_backward(y, g))

    return _emit(y, (logits,), backward)


def masked_softmax(logits: Tensor, mask) -> Tensor:
    """Softmax over the last axis restricted to entries where ``mask`` is 1.

    Masked-out entries come out as exactly zero.
    """
    logits = _as_tensor(logits)
    m = np.asarray(mask, dtype=bool)
    if m.shape != logits.data.shape:
        raise ShapeError(f"mask dims {m.shape} do not match logits {logits.dims}")
    if not m.any(axis=-1).all():
        raise ValueError("empty attention support")
    shifted = np.where(m, logits.data, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(m, np.exp(shifted), 0.0)
    y = (e / e.sum(axis=-1, keepdims=True)).astype(logits.data.dtype, copy=False)

    def backward(g):
        logits.accumulate(_softmax_backward(y, g))

    return _emit(y, (logits,), backward)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None
            ) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1/(1-p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    x = _as_tensor(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return mul(x, Tensor(keep))


# -- losses -----------------------------------------------------------------

def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean of ``-log(probs[label] + 1e-12)`` over the batch."""
    probs = _as_tensor(probs)
    p = probs.data
    single = p.ndim == 1
    p2 = p[None, :] if single else p
    lab = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    C = p2.shape[-1]
    if lab.shape[0] != p2.shape[0]:
        raise ShapeError(f"{lab.shape[0]} labels for {p2.shape[0]} probability rows")
    if (lab < 0).any() or (lab >= C).any():
        raise ValueError(f"label out of range [0, {C}): {lab.tolist()}")
    if (p2 < 0).any() or np.abs(p2.sum(axis=-1) - 1.0).max() > 1e-5:
        raise ValueError("probabilities must be nonnegative and sum to 1")
    rows = np.arange(p2.shape[0])
    picked = p2[rows, lab] + LOG_EPS
    out = np.asarray(-np.log(picked).mean(), dtype=p.dtype)

    def backward(g):
        full = np.zeros_like(p2)
        full[rows, lab] = -1.0 / (picked * p2.shape[0])
        full *= g
        probs.accumulate(full[0] if single else full)

    return _emit(out, (probs,), backward)


# -- sequence ops -----------------------------------------------------------

def scale_steps(h: Tensor, weights: np.ndarray, _break_gradient: bool = False) -> Tensor:
    """Multiply each time step of ``h[..., t, :]`` by a constant ``weights[..., t]``.

    No gradient reaches ``weights``. ``_break_gradient`` deliberately drops the
    scaling in the backward pass; it exists for the gradient-check negative control.
    """
    w = np.asarray(weights, dtype=h.data.dtype)[..., None]
    out = h.data * w

    def backward(g):
        h.accumulate(g if _break_gradient else g * w)

    return _emit(out, (h,), backward)


def weighted_sum(alpha: Tensor, Z: Tensor) -> Tensor:
    """``sum_t alpha[..., t] * Z[..., t, :]``."""
    if alpha.data.shape != Z.data.shape[:-1]:
        raise ShapeError(f"weights {alpha.dims} do not match sequence {Z.dims}")
    out = np.einsum("...t,...td->...d", alpha.data, Z.data)

    def backward(g):
        if alpha.requires_grad:
            alpha.accumulate(np.einsum("...d,...td->...t", g, Z.data))
        if Z.requires_grad:
            Z.accumulate(alpha.data[..., None] * g[..., None, :])

    return _emit(out, (alpha, Z), backward)


def masked_sum(x: Tensor, mask) -> Tensor:
    """Sum over the time axis (second to last) of steps where mask is 1."""
    m = np.asarray(mask, dtype=x.data.dtype)[..., None]
    out = (x.data * m).sum(axis=-2)

    def backward(g):
        x.accumulate(g[..., None, :] * m)

    return _emit(out, (x,), backward)


def take_steps(h: Tensor, index) -> Tensor:
    """Select ``h[b, index[b], :]`` for each batch row."""
    idx = np.asarray(index, dtype=np.int64)
    rows = np.arange(h.data.shape[0])
    out = h.data[rows, idx]

    def backward(g):
        full = np.zeros_like(h.data)
        full[rows, idx] = g
        h.accumulate(full)

    return _emit(out, (h,), backward)


def lstm(x: Tensor, W_ih: Tensor, W_hh: Tensor, b: Tensor) -> Tensor:
    """Single-layer unidirectional LSTM over ``x`` of dims (B, n, D).

    Gate rows of the weight matrices are ordered input, forget, candidate,
    output. Starts from zero hidden and cell state and returns every hidden
    state, dims (B, n, H).
    """
    B, n, D = x.data.shape
    H = W_hh.data.shape[1]
    if W_ih.data.shape != (4 * H, D) or W_hh.data.shape != (4 * H, H) or b.data.shape != (4 * H,):
        raise ShapeError(
            f"lstm dimension mismatch: x{x.dims} W_ih{W_ih.dims} W_hh{W_hh.dims} b{b.dims}")
    dt = x.data.dtype
    xw = x.data @ W_ih.data.T + b.data
    Whh_T = W_hh.data.T
    hs = np.zeros((B, n + 1, H), dtype=dt)
    cs = np.zeros((B, n + 1, H), dtype=dt)
    gates = np.empty((B, n, 4 * H), dtype=dt)
    tcs = np.empty((B, n, H), dtype=dt)
    for t in range(n):
        a = xw[:, t] + hs[:, t] @ Whh_T
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = _sigmoid(a[:, 3 * H:])
        c = f * cs[:, t] + i * g
        tc = np.tanh(c)
        cs[:, t + 1] = c
        hs[:, t + 1] = o * tc
        gates[:, t, :H] = i
        gates[:, t, H:2 * H] = f
        gates[:, t, 2 * H:3 * H] = g
        gates[:, t, 3 * H:] = o
        tcs[:, t] = tc
    out = hs[:, 1:].copy()

    def backward(gout):
        da_all = np.empty((B, n, 4 * H), dtype=dt)
        dh_next = np.zeros((B, H), dtype=dt)
        dc_next = np.zeros((B, H), dtype=dt)
        W = W_hh.data
        for t in range(n - 1, -1, -1):
            i = gates[:, t, :H]
            f = gates[:, t, H:2 * H]
            g = gates[:, t, 2 * H:3 * H]
            o = gates[:, t, 3 * H:]
            tc = tcs[:, t]
            dh = gout[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            da = da_all[:, t]
            da[:, :H] = dc * g * i * (1.0 - i)
            da[:, H:2 * H] = dc * cs[:, t] * f * (1.0 - f)
            da[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
            da[:, 3 * H:] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = da @ W
        flat_da = da_all.reshape(-1, 4 * H)
        if W_hh.requires_grad:
            W_hh.accumulate(flat_da.T @ hs[:, :-1].reshape(-1, H))
        if W_ih.requires_grad:
            W_ih.accumulate(flat_da.T @ x.data.reshape(-1, D))
        if b.requires_grad:
            b.accumulate(flat_da.sum(axis=0))
        if x.requires_grad:
            x.accumulate(da_all @ W_ih.data)

    return _emit(out, (x, W_ih, W_hh, b), backward)


def matvec(x: Tensor, v: Tensor) -> Tensor:
    """Contract the last axis of ``x`` with the vector ``v``."""
    if v.data.ndim != 1 or x.data.shape[-1] != v.data.shape[0]:
        raise ShapeError(f"matvec dimension mismatch: x{x.dims} v{v.dims}")
    out = x.data @ v.data

    def backward(g):
        if x.requires_grad:
            x.accumulate(g[..., None] * v.data)
        if v.requires_grad:
            v.accumulate(g.reshape(-1) @ x.data.reshape(-1, v.data.shape[0]))

    return _emit(out, (x, v), backward)
