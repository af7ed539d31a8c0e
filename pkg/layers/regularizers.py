"""Orthogonality penalties on attention weights and dense weights."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from constants import RegKind
from ctensor import modulus_sq
from exceptions import ConfigurationError


@dataclass(frozen=True)
class RegConfig:
    kind: RegKind = RegKind.NONE
    reg_lambda: float = 0.0

    def __post_init__(self):
        if self.reg_lambda < 0:
            raise ConfigurationError(f"reg_lambda must be non-negative, got {self.reg_lambda}")

    @property
    def uses_attention(self) -> bool:
        return self.kind in (RegKind.ATT_ORTHO, RegKind.BOTH_ORTHO) and self.reg_lambda > 0

    @property
    def uses_dense(self) -> bool:
        return self.kind in (RegKind.DENSE_ORTHO, RegKind.BOTH_ORTHO) and self.reg_lambda > 0


def attention_ortho(weights: np.ndarray) -> Tuple[float, np.ndarray]:
    """sum ||A A^H - diag(A A^H)||_F^2 over the leading axes of ``[..., q, k]``.

    Returns the penalty and its gradient: dR/dA for real weights, the
    cotangent dR/d(conj A) for complex weights.
    """
    gram = weights @ np.conj(np.swapaxes(weights, -1, -2))
    n = gram.shape[-1]
    off = gram * (1.0 - np.eye(n))
    penalty = float(np.sum(modulus_sq(off)))
    grad = off @ weights
    grad = 2.0 * grad if np.iscomplexobj(weights) else 4.0 * grad.real
    return penalty, grad


def dense_ortho(weight: np.ndarray) -> Tuple[float, np.ndarray]:
    """||W W^H - I||_F^2 and its cotangent 2 (W W^H - I) W."""
    defect = weight @ weight.conj().T - np.eye(weight.shape[0])
    return float(np.sum(modulus_sq(defect))), 2.0 * defect @ weight


def ortho_regularizers(affinity_batch: Sequence[np.ndarray], dense_weights: Sequence[np.ndarray],
                       cfg: RegConfig, batch_size: int) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """Total penalty with per-input gradients (already scaled by lambda and 1/M)."""
    total = 0.0
    att_grads: List[np.ndarray] = [np.zeros_like(a) for a in affinity_batch]
    dense_grads: List[np.ndarray] = [np.zeros_like(w) for w in dense_weights]
    if cfg.uses_attention:
        scale = cfg.reg_lambda / batch_size
        for i, a in enumerate(affinity_batch):
            penalty, grad = attention_ortho(a)
            total += scale * penalty
            att_grads[i] = scale * grad
    if cfg.uses_dense:
        for i, w in enumerate(dense_weights):
            penalty, grad = dense_ortho(w)
            total += cfg.reg_lambda * penalty
            dense_grads[i] = cfg.reg_lambda * grad
    return total, att_grads, dense_grads
