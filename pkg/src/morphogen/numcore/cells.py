"""Fused recurrent cells and bilinear attention with hand-written adjoints.

Fusing a whole cell into one tape entry keeps the Python overhead per time step
small, which is what makes desk-scale training feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RejectedInput
from .init import glorot, zeros
from .ops import sigmoid_value
from .tensor import Parameter, Tensor, accumulate, as_tensor, make_output


def _split(packed: Tensor, d: int) -> tuple[Tensor, Tensor]:
    """View the halves of a packed (..., 2d) tensor as two tensors."""

    def first_bw(g):
        full = np.zeros(packed.shape)
        full[..., :d] = g
        accumulate(packed, full)

    def second_bw(g):
        full = np.zeros(packed.shape)
        full[..., d:] = g
        accumulate(packed, full)

    v = packed.value
    return (make_output(v[..., :d], (packed,), first_bw),
            make_output(v[..., d:], (packed,), second_bw))


def _as_batch(*arrays):
    single = arrays[0].ndim == 1
    if single:
        return True, [a[None, :] for a in arrays]
    return False, list(arrays)


def _mask_col(mask, batch: int) -> np.ndarray:
    if mask is None:
        return None
    m = np.asarray(mask, dtype=np.float64).reshape(batch, 1)
    return m


@dataclass
class LSTMParams:
    W_x: Parameter  # (4d, in), gate order i, f, g, o
    W_h: Parameter  # (4d, d)
    b: Parameter  # (4d,)

    @property
    def hidden(self) -> int:
        return self.W_h.shape[1]

    def parameters(self) -> dict[str, Parameter]:
        return {"W_x": self.W_x, "W_h": self.W_h, "b": self.b}

    @classmethod
    def create(cls, n_in: int, hidden: int, rng, prefix: str = "") -> "LSTMParams":
        return cls(
            Parameter(np.concatenate([glorot(rng, hidden, n_in) for _ in range(4)]), prefix + "W_x"),
            Parameter(np.concatenate([glorot(rng, hidden, hidden) for _ in range(4)]), prefix + "W_h"),
            Parameter(zeros(4 * hidden), prefix + "b"),
        )


@dataclass
class GRUParams:
    W_x: Parameter  # (3d, in), gate order r, z, n
    W_h: Parameter  # (3d, d)
    b_x: Parameter  # (3d,)
    b_h: Parameter  # (3d,)

    @property
    def hidden(self) -> int:
        return self.W_h.shape[1]

    def parameters(self) -> dict[str, Parameter]:
        return {"W_x": self.W_x, "W_h": self.W_h, "b_x": self.b_x, "b_h": self.b_h}

    @classmethod
    def create(cls, n_in: int, hidden: int, rng, prefix: str = "") -> "GRUParams":
        return cls(
            Parameter(np.concatenate([glorot(rng, hidden, n_in) for _ in range(3)]), prefix + "W_x"),
            Parameter(np.concatenate([glorot(rng, hidden, hidden) for _ in range(3)]), prefix + "W_h"),
            Parameter(zeros(3 * hidden), prefix + "b_x"),
            Parameter(zeros(3 * hidden), prefix + "b_h"),
        )


def lstm_step(h_prev, c_prev, x, params: LSTMParams, mask=None) -> tuple[Tensor, Tensor]:
    """One LSTM transition. Rows with ``mask == 0`` carry their previous state through."""
    h_prev, c_prev, x = as_tensor(h_prev), as_tensor(c_prev), as_tensor(x)
    d = params.hidden
    Wx, Wh, b = params.W_x.value, params.W_h.value, params.b.value
    if x.shape[-1] != Wx.shape[1] or h_prev.shape[-1] != d or c_prev.shape != h_prev.shape:
        raise RejectedInput(
            f"lstm_step dimension mismatch: x{x.shape} h{h_prev.shape} c{c_prev.shape} "
            f"expects in={Wx.shape[1]} hidden={d}")
    single, (xv, hv, cv) = _as_batch(x.value, h_prev.value, c_prev.value)
    m = _mask_col(mask, xv.shape[0])

    a = xv @ Wx.T + hv @ Wh.T + b
    i = sigmoid_value(a[:, :d])
    f = sigmoid_value(a[:, d:2 * d])
    g = np.tanh(a[:, 2 * d:3 * d])
    o = sigmoid_value(a[:, 3 * d:])
    c = f * cv + i * g
    tc = np.tanh(c)
    h = o * tc
    if m is not None:
        h = m * h + (1 - m) * hv
        c = m * c + (1 - m) * cv
    packed = np.concatenate([h, c], axis=1)

    def bw(gp):
        gp = gp[None, :] if single else gp
        dh_out, dc_out = gp[:, :d], gp[:, d:]
        if m is not None:
            dh, dc_in = m * dh_out, m * dc_out
            dh_prev = (1 - m) * dh_out
            dc_prev = (1 - m) * dc_out
        else:
            dh, dc_in = dh_out, dc_out
            dh_prev = np.zeros_like(hv)
            dc_prev = np.zeros_like(cv)
        dc = dc_in + dh * o * (1 - tc * tc)
        da = np.concatenate([
            dc * g * i * (1 - i),
            dc * cv * f * (1 - f),
            dc * i * (1 - g * g),
            dh * tc * o * (1 - o),
        ], axis=1)
        dc_prev = dc_prev + dc * f
        dh_prev = dh_prev + da @ Wh
        accumulate(params.W_x, da.T @ xv)
        accumulate(params.W_h, da.T @ hv)
        accumulate(params.b, da.sum(axis=0))
        dx = da @ Wx
        if single:
            dx, dh_prev, dc_prev = dx[0], dh_prev[0], dc_prev[0]
        accumulate(x, dx)
        accumulate(h_prev, dh_prev)
        accumulate(c_prev, dc_prev)

    out = make_output(packed[0] if single else packed,
                      (x, h_prev, c_prev, params.W_x, params.W_h, params.b), bw)
    return _split(out, d)


def gru_step(h_prev, x, params: GRUParams, mask=None) -> Tensor:
    """One GRU transition (reset gate applied to the recurrent candidate term)."""
    h_prev, x = as_tensor(h_prev), as_tensor(x)
    d = params.hidden
    Wx, Wh = params.W_x.value, params.W_h.value
    if x.shape[-1] != Wx.shape[1] or h_prev.shape[-1] != d:
        raise RejectedInput(
            f"gru_step dimension mismatch: x{x.shape} h{h_prev.shape} "
            f"expects in={Wx.shape[1]} hidden={d}")
    single, (xv, hv) = _as_batch(x.value, h_prev.value)
    m = _mask_col(mask, xv.shape[0])

    gx = xv @ Wx.T + params.b_x.value
    gh = hv @ Wh.T + params.b_h.value
    r = sigmoid_value(gx[:, :d] + gh[:, :d])
    z = sigmoid_value(gx[:, d:2 * d] + gh[:, d:2 * d])
    nh = gh[:, 2 * d:]
    n = np.tanh(gx[:, 2 * d:] + r * nh)
    h = (1 - z) * n + z * hv
    if m is not None:
        h = m * h + (1 - m) * hv

    def bw(gout):
        gout = gout[None, :] if single else gout
        if m is not None:
            dh = m * gout
            dh_prev = (1 - m) * gout
        else:
            dh = gout
            dh_prev = np.zeros_like(hv)
        dh_prev = dh_prev + dh * z
        da_n = dh * (1 - z) * (1 - n * n)
        da_z = dh * (hv - n) * z * (1 - z)
        da_r = da_n * nh * r * (1 - r)
        dgx = np.concatenate([da_r, da_z, da_n], axis=1)
        dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
        accumulate(params.W_x, dgx.T @ xv)
        accumulate(params.b_x, dgx.sum(axis=0))
        accumulate(params.W_h, dgh.T @ hv)
        accumulate(params.b_h, dgh.sum(axis=0))
        dx = dgx @ Wx
        dh_prev = dh_prev + dgh @ Wh
        if single:
            dx, dh_prev = dx[0], dh_prev[0]
        accumulate(x, dx)
        accumulate(h_prev, dh_prev)

    return make_output(h[0] if single else h,
                       (x, h_prev, params.W_x, params.W_h, params.b_x, params.b_h), bw)


def bilinear_attention(query, keys, A, mask=None) -> tuple[Tensor, np.ndarray]:
    """Multiplicative attention: weights ``softmax_j(query · A · keys_j)``.

    ``query`` is (B, dq), ``keys`` (B, T, dk), ``A`` (dq, dk); ``mask`` (B, T)
    marks valid key positions. Returns the context tensor (B, dk) and the
    attention weights as a plain array.
    """
    query, keys, A = as_tensor(query), as_tensor(keys), as_tensor(A)
    qv, kv, Av = query.value, keys.value, A.value
    proj = qv @ Av  # (B, dk)
    scores = np.einsum("btk,bk->bt", kv, proj)
    if mask is not None:
        valid = np.asarray(mask, dtype=bool)
        scores = np.where(valid, scores, -np.inf)
    scores = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    alpha = e / e.sum(axis=1, keepdims=True)
    ctx = np.einsum("bt,btk->bk", alpha, kv)

    def bw(g):
        dalpha = np.einsum("bk,btk->bt", g, kv)
        dscore = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        dkeys = alpha[:, :, None] * g[:, None, :] + dscore[:, :, None] * proj[:, None, :]
        dproj = np.einsum("bt,btk->bk", dscore, kv)
        accumulate(keys, dkeys)
        accumulate(A, qv.T @ dproj)
        accumulate(query, dproj @ Av.T)

    return make_output(ctx, (query, keys, A), bw), alpha
