"""Complex multi-head attention with selectable score activations."""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.special import softmax

from autodiff import Layer
from constants import AttentionActivation
from ctensor import CTensor, as_ctensor, modulus_sq
from exceptions import DomainError
from layers.activations import zrelu_mask
from layers.dense import ComplexDense

logger = logging.getLogger(__name__)


def _masked_softmax(scores: np.ndarray, key_mask: Optional[np.ndarray]) -> np.ndarray:
    if key_mask is not None:
        scores = np.where(key_mask, scores, -np.inf)
    return softmax(scores, axis=-1)


def _softmax_backward(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    return probs * (d_probs - np.sum(probs * d_probs, axis=-1, keepdims=True))


def _broadcast_mask(key_mask: Optional[np.ndarray], ndim: int) -> Optional[np.ndarray]:
    """[seq] or [batch, seq] key mask -> broadcastable against [..., q, k] scores."""
    if key_mask is None:
        return None
    mask = np.asarray(key_mask, dtype=bool)
    if mask.ndim == 1:
        return mask
    # [batch, seq] -> [batch, 1, 1, seq]
    return mask.reshape(mask.shape[0], *([1] * (ndim - 2)), mask.shape[-1])


def attention_weights(sigma: CTensor, act: AttentionActivation, key_mask: Optional[np.ndarray] = None,
                      bias: complex = 0.0) -> Tuple[np.ndarray, dict]:
    """Normalized attention weights f(sigma) per query row.

    Returns the weights (real for every variant but split softmax) and the
    context needed by :func:`attention_weights_backward`.
    """
    mask = _broadcast_mask(key_mask, sigma.ndim)
    if mask is not None and not np.all(np.any(mask, axis=-1)):
        raise DomainError("attention: every key is masked for some query")

    if act is AttentionActivation.MOD_SOFTMAX:
        weights = _masked_softmax(np.abs(sigma), mask)
        return weights, {"weights": weights}
    if act is AttentionActivation.REAL_SOFTMAX:
        weights = _masked_softmax(sigma.real, mask)
        return weights, {"weights": weights}
    if act is AttentionActivation.SPLIT_SOFTMAX:
        w_re = _masked_softmax(sigma.real, mask)
        w_im = _masked_softmax(sigma.imag, mask)
        return w_re + 1j * w_im, {"w_re": w_re, "w_im": w_im}
    if act is AttentionActivation.SQUARED_ZRELU:
        shifted = sigma + bias
        keep = zrelu_mask(shifted)
        if mask is not None:
            keep = keep & mask
        energy = np.where(keep, modulus_sq(shifted), 0.0)
        total = energy.sum(axis=-1, keepdims=True)
        empty = total == 0.0
        if np.any(empty):
            # every key gated off: fall back to uniform weights over valid keys
            valid = np.ones_like(energy, dtype=bool) if mask is None else np.broadcast_to(mask, energy.shape)
            uniform = valid / valid.sum(axis=-1, keepdims=True)
            weights = np.where(empty, uniform, energy / np.where(empty, 1.0, total))
        else:
            weights = energy / total
        return weights, {"weights": weights, "shifted": shifted, "keep": keep, "total": total, "empty": empty}
    raise ValueError(f"unknown attention activation {act}")


def attention_weights_backward(d_weights: np.ndarray, sigma: CTensor, act: AttentionActivation,
                               ctx: dict) -> CTensor:
    """dL/d(conj sigma) from the weight gradient.

    ``d_weights`` is dL/dA for real-valued weights and the cotangent
    dL/d(conj A) for split softmax.
    """
    if act is AttentionActivation.MOD_SOFTMAX:
        d_r = _softmax_backward(ctx["weights"], d_weights)
        r = np.abs(sigma)
        return np.where(r > 0.0, d_r * sigma / (2.0 * np.where(r > 0.0, r, 1.0)), 0.0)
    if act is AttentionActivation.REAL_SOFTMAX:
        return 0.5 * _softmax_backward(ctx["weights"], d_weights) + 0j
    if act is AttentionActivation.SPLIT_SOFTMAX:
        d_a = _softmax_backward(ctx["w_re"], 2.0 * d_weights.real)
        d_b = _softmax_backward(ctx["w_im"], 2.0 * d_weights.imag)
        return 0.5 * (d_a + 1j * d_b)
    # squared zReLU
    weights, total, empty = ctx["weights"], ctx["total"], ctx["empty"]
    d_energy = (d_weights - np.sum(weights * d_weights, axis=-1, keepdims=True)) / np.where(empty, 1.0, total)
    d_energy = np.where(empty, 0.0, d_energy)
    return np.where(ctx["keep"], d_energy * ctx["shifted"], 0.0)


def complex_attention(q: CTensor, k: CTensor, v: CTensor, act: AttentionActivation,
                      key_mask: Optional[np.ndarray] = None, bias: complex = 0.0):
    """f(Q K^H / sqrt(d_k)) V over ``[batch, heads, seq, d_k]`` tensors.

    Returns (output, context) where the context holds the weights matrix A.
    """
    q, k, v = as_ctensor(q), as_ctensor(k), as_ctensor(v)
    if q.shape[-1] != k.shape[-1] or k.shape[:-1] != v.shape[:-1]:
        raise DomainError(f"attention: incompatible shapes Q{q.shape} K{k.shape} V{v.shape}")
    scale = 1.0 / math.sqrt(q.shape[-1])
    sigma = (q @ np.conj(np.swapaxes(k, -1, -2))) * scale
    weights, wctx = attention_weights(sigma, act, key_mask, bias)
    out = weights @ v
    return out, {"q": q, "k": k, "v": v, "sigma": sigma, "weights": weights, "wctx": wctx,
                 "scale": scale, "act": act}


def complex_attention_backward(grad: CTensor, ctx: dict, d_weights_extra: Optional[np.ndarray] = None):
    """Returns (g_q, g_k, g_v, g_sigma)."""
    q, k, v, weights, act = ctx["q"], ctx["k"], ctx["v"], ctx["weights"], ctx["act"]
    g_v = np.swapaxes(np.conj(weights), -1, -2) @ grad
    g_a = grad @ np.conj(np.swapaxes(v, -1, -2))
    if np.iscomplexobj(weights) and act is AttentionActivation.SPLIT_SOFTMAX:
        d_weights = g_a
    else:
        d_weights = 2.0 * g_a.real
    if d_weights_extra is not None:
        d_weights = d_weights + d_weights_extra
    g_sigma = attention_weights_backward(d_weights, ctx["sigma"], act, ctx["wctx"])
    s = ctx["scale"]
    g_q = (g_sigma @ k) * s
    g_k = (np.conj(np.swapaxes(g_sigma, -1, -2)) @ q) * s
    return g_q, g_k, g_v, g_sigma


class MultiHeadAttention(Layer):
    """Self-attention over ``[batch, seq, d_model]``.

    With ``remove_q_o_projections`` the input itself serves as the query and
    the concatenated heads are returned without an output projection.
    """

    def __init__(self, name: str, d_model: int, n_heads: int, act: AttentionActivation,
                 remove_q_o_projections: bool = False, attn_bias: complex = 0.0):
        super().__init__(name)
        if d_model % n_heads != 0:
            raise DomainError(f"d_model {d_model} is not divisible by n_heads {n_heads}")
        self.d_model, self.n_heads, self.d_k = d_model, n_heads, d_model // n_heads
        self.act = act
        self.remove_q_o = remove_q_o_projections
        self.wq = None if remove_q_o_projections else self.add_child("wq", ComplexDense(self.child_name("wq"), d_model, d_model))
        self.wk = self.add_child("wk", ComplexDense(self.child_name("wk"), d_model, d_model))
        self.wv = self.add_child("wv", ComplexDense(self.child_name("wv"), d_model, d_model))
        self.wo = None if remove_q_o_projections else self.add_child("wo", ComplexDense(self.child_name("wo"), d_model, d_model))
        self.score_bias = None
        if act is AttentionActivation.SQUARED_ZRELU:
            self.score_bias = self.add_parameter("score_bias", np.array(attn_bias), role="attn_bias", decay=False)

    def projection_layers(self):
        return [layer for layer in (self.wq, self.wk, self.wv, self.wo) if layer is not None]

    def _split(self, x: CTensor) -> CTensor:
        b, s, _ = x.shape
        return x.reshape(b, s, self.n_heads, self.d_k).transpose(0, 2, 1, 3)

    def _merge(self, x: CTensor) -> CTensor:
        b, h, s, dk = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, s, h * dk)

    def forward(self, x, training: bool = False, key_mask=None, **kwargs):
        x = as_ctensor(x)
        if x.ndim != 3 or x.shape[-1] != self.d_model:
            raise DomainError(f"{self.name}: expected [batch, seq, {self.d_model}], got {x.shape}")
        if self.wq is not None:
            q_in, q_ctx = self.wq.forward(x)
        else:
            q_in, q_ctx = x, None
        k_in, k_ctx = self.wk.forward(x)
        v_in, v_ctx = self.wv.forward(x)
        bias = complex(self.score_bias.value) if self.score_bias is not None else 0.0
        heads, attn_ctx = complex_attention(self._split(q_in), self._split(k_in), self._split(v_in),
                                            self.act, key_mask, bias)
        merged = self._merge(heads)
        if self.wo is not None:
            out, o_ctx = self.wo.forward(merged)
        else:
            out, o_ctx = merged, None
        return out, {"q": q_ctx, "k": k_ctx, "v": v_ctx, "o": o_ctx, "attn": attn_ctx, "grad_weights": None}

    def backward(self, grad, ctx):
        g_merged = self.wo.backward(grad, ctx["o"]) if self.wo is not None else grad
        g_heads = self._split(g_merged)
        g_q, g_k, g_v, g_sigma = complex_attention_backward(g_heads, ctx["attn"], ctx["grad_weights"])
        if self.score_bias is not None:
            self.score_bias.accumulate(np.array(np.sum(g_sigma)))
        g_x = self.wk.backward(self._merge(g_k), ctx["k"]) + self.wv.backward(self._merge(g_v), ctx["v"])
        if self.wq is not None:
            g_x = g_x + self.wq.backward(self._merge(g_q), ctx["q"])
        else:
            g_x = g_x + self._merge(g_q)
        return g_x
