"""Complex embedding tables."""

from typing import Tuple

import numpy as np

from autodiff import Layer
from exceptions import DomainError


def _lookup(table: np.ndarray, ids: np.ndarray, what: str) -> np.ndarray:
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise DomainError(f"{what} ids must be integers, got {ids.dtype}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DomainError(f"{what} id out of range [0, {table.shape[0]}): min {ids.min()}, max {ids.max()}")
    return table[ids]


class SplitEmbedding(Layer):
    """Sum of complex token, position and segment embeddings.

    ``forward`` takes ``(token_ids, position_ids, segment_ids)``, each
    ``[batch, seq]`` integers.
    """

    def __init__(self, name: str, vocab_size: int, max_seq_len: int, d_model: int, n_segments: int = 2):
        super().__init__(name)
        self.token = self.add_parameter("token", np.zeros((vocab_size, d_model)), role="embedding")
        self.position = self.add_parameter("position", np.zeros((max_seq_len, d_model)), role="position")
        self.segment = self.add_parameter("segment", np.zeros((n_segments, d_model)), role="embedding")

    def forward(self, x: Tuple[np.ndarray, np.ndarray, np.ndarray], training: bool = False, **kwargs):
        token_ids, position_ids, segment_ids = x
        out = (_lookup(self.token.value, token_ids, "token")
               + _lookup(self.position.value, position_ids, "position")
               + _lookup(self.segment.value, segment_ids, "segment"))
        return out, (np.asarray(token_ids), np.asarray(position_ids), np.asarray(segment_ids))

    def backward(self, grad, ctx):
        for param, ids in zip((self.token, self.position, self.segment), ctx):
            acc = np.zeros_like(param.value)
            np.add.at(acc, ids.reshape(-1), grad.reshape(-1, grad.shape[-1]))
            param.accumulate(acc)
        return None


def split_embed(token_ids, position_ids, segment_ids, token_table, position_table, segment_table) -> np.ndarray:
    return (_lookup(np.asarray(token_table), token_ids, "token")
            + _lookup(np.asarray(position_table), position_ids, "position")
            + _lookup(np.asarray(segment_table), segment_ids, "segment"))


class TokenEmbedding(Layer):
    """Complex token lookup only (bag-of-words encoders)."""

    def __init__(self, name: str, vocab_size: int, d_model: int):
        super().__init__(name)
        self.token = self.add_parameter("token", np.zeros((vocab_size, d_model)), role="embedding")

    def forward(self, x, training: bool = False, **kwargs):
        return _lookup(self.token.value, x, "token"), np.asarray(x)

    def backward(self, grad, ctx):
        acc = np.zeros_like(self.token.value)
        np.add.at(acc, ctx.reshape(-1), grad.reshape(-1, grad.shape[-1]))
        self.token.accumulate(acc)
        return None
