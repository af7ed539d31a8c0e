"""Complex transformer encoder: split embedding followed by post-norm encoder layers."""

import logging
from typing import List, Optional

import numpy as np

from autodiff import Layer
from layers.activations import ComplexActivation
from layers.attention import MultiHeadAttention
from layers.dense import ComplexDense
from layers.dropout import ComplexDropout
from layers.embedding import SplitEmbedding
from layers.normalization import Normalization
from models import ModelConfig

logger = logging.getLogger(__name__)


class FeedForward(Layer):
    """Dense -> hidden activation -> dense."""

    def __init__(self, name: str, config: ModelConfig):
        super().__init__(name)
        self.inner = self.add_child("inner", ComplexDense(self.child_name("inner"), config.d_model, config.d_hidden))
        self.act = self.add_child("act", ComplexActivation(self.child_name("act"), config.hidden_activation,
                                                           **config.activation_kwargs()))
        self.outer = self.add_child("outer", ComplexDense(self.child_name("outer"), config.d_hidden, config.d_model))

    def dense_layers(self) -> List[ComplexDense]:
        return [self.inner, self.outer]

    def forward(self, x, training: bool = False, **kwargs):
        h, c1 = self.inner.forward(x)
        a, c2 = self.act.forward(h)
        y, c3 = self.outer.forward(a)
        return y, (c1, c2, c3)

    def backward(self, grad, ctx):
        c1, c2, c3 = ctx
        return self.inner.backward(self.act.backward(self.outer.backward(grad, c3), c2), c1)


class EncoderLayer(Layer):
    """h1 = norm(x + drop(attn(x))); out = norm(h1 + drop(ffn(h1)))."""

    def __init__(self, name: str, config: ModelConfig, rng: np.random.Generator):
        super().__init__(name)
        self.attention = self.add_child("attn", MultiHeadAttention(
            self.child_name("attn"), config.d_model, config.n_heads, config.attn_activation,
            config.remove_q_o_projections, config.attn_bias))
        self.attn_dropout = self.add_child("attn_dropout", ComplexDropout(self.child_name("attn_dropout"), config.dropout_p, rng))
        self.attn_norm = self.add_child("attn_norm", Normalization(self.child_name("attn_norm"), config.norm_kind, config.d_model))
        self.ffn = self.add_child("ffn", FeedForward(self.child_name("ffn"), config))
        self.ffn_dropout = self.add_child("ffn_dropout", ComplexDropout(self.child_name("ffn_dropout"), config.dropout_p, rng))
        self.ffn_norm = self.add_child("ffn_norm", Normalization(self.child_name("ffn_norm"), config.norm_kind, config.d_model))

    def dense_layers(self) -> List[ComplexDense]:
        return self.attention.projection_layers() + self.ffn.dense_layers()

    def forward(self, x, training: bool = False, key_mask=None, **kwargs):
        a, a_ctx = self.attention.forward(x, key_mask=key_mask)
        a, ad_ctx = self.attn_dropout.forward(a, training=training)
        h1, n1_ctx = self.attn_norm.forward(x + a)
        f, f_ctx = self.ffn.forward(h1)
        f, fd_ctx = self.ffn_dropout.forward(f, training=training)
        out, n2_ctx = self.ffn_norm.forward(h1 + f)
        return out, {"attn": a_ctx, "attn_dropout": ad_ctx, "attn_norm": n1_ctx,
                     "ffn": f_ctx, "ffn_dropout": fd_ctx, "ffn_norm": n2_ctx}

    def backward(self, grad, ctx):
        g_sum2 = self.ffn_norm.backward(grad, ctx["ffn_norm"])
        g_h1 = g_sum2 + self.ffn.backward(self.ffn_dropout.backward(g_sum2, ctx["ffn_dropout"]), ctx["ffn"])
        g_sum1 = self.attn_norm.backward(g_h1, ctx["attn_norm"])
        return g_sum1 + self.attention.backward(self.attn_dropout.backward(g_sum1, ctx["attn_dropout"]), ctx["attn"])


class Encoder(Layer):
    """Split embedding, embedding normalization and ``n_layers`` encoder layers.

    ``forward`` takes ``(token_ids, position_ids, segment_ids)`` and a boolean
    ``key_mask`` ``[batch, seq]``; returns hidden states ``[batch, seq, d_model]``.
    """

    def __init__(self, name: str, config: ModelConfig, rng: Optional[np.random.Generator] = None):
        super().__init__(name)
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.config = config
        self.embedding = self.add_child("embedding", SplitEmbedding(
            self.child_name("embedding"), config.vocab_size, config.max_seq_len, config.d_model))
        self.embed_norm = self.add_child("embed_norm", Normalization(self.child_name("embed_norm"), config.norm_kind, config.d_model))
        self.embed_dropout = self.add_child("embed_dropout", ComplexDropout(self.child_name("embed_dropout"), config.dropout_p, rng))
        self.layers: List[EncoderLayer] = [
            self.add_child(f"layer{i}", EncoderLayer(self.child_name(f"layer{i}"), config, rng))
            for i in range(config.n_layers)
        ]

    def attention_layers(self) -> List[MultiHeadAttention]:
        return [layer.attention for layer in self.layers]

    def dense_layers(self) -> List[ComplexDense]:
        return [dense for layer in self.layers for dense in layer.dense_layers()]

    def forward(self, x, training: bool = False, key_mask=None, **kwargs):
        e, e_ctx = self.embedding.forward(x)
        e, d_ctx = self.embed_dropout.forward(e, training=training)
        h, n_ctx = self.embed_norm.forward(e)
        layer_ctx = []
        hidden_states = [h]
        for layer in self.layers:
            h, c = layer.forward(h, training=training, key_mask=key_mask)
            layer_ctx.append(c)
            hidden_states.append(h)
        return h, {"embedding": e_ctx, "embed_norm": n_ctx, "embed_dropout": d_ctx,
                   "layers": layer_ctx, "hidden_states": hidden_states}

    def backward(self, grad, ctx):
        for layer, c in zip(reversed(self.layers), reversed(ctx["layers"])):
            grad = layer.backward(grad, c)
        grad = self.embed_norm.backward(grad, ctx["embed_norm"])
        grad = self.embed_dropout.backward(grad, ctx["embed_dropout"])
        self.embedding.backward(grad, ctx["embedding"])
        return None
