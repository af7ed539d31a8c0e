"""Prediction heads: MLM, NSP (measurement or dense) and the measurement classifier."""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from autodiff import Layer, Parameter
from constants import (
    IGNORE_INDEX,
    PROB_EPS,
    UNIT_STATE_TOL,
    HiddenActivation,
    MLMOutput,
    NSPHead,
)
from ctensor import CTensor, as_ctensor, modulus_sq, unitary_exp
from exceptions import DomainError
from layers.activations import ComplexActivation
from layers.dense import ComplexDense, UnitaryLayer
from layers.normalization import unit_normalize, unit_normalize_backward

logger = logging.getLogger(__name__)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                          ignore_index: int = IGNORE_INDEX) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over rows whose label is not ``ignore_index``; returns (loss, dL/dlogits)."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    valid = labels != ignore_index
    grad = np.zeros_like(logits)
    count = int(valid.sum())
    if count == 0:
        return 0.0, grad
    log_probs = log_softmax(logits[valid], axis=-1)
    targets = labels[valid]
    loss = -float(np.mean(log_probs[np.arange(count), targets]))
    d = np.exp(log_probs)
    d[np.arange(count), targets] -= 1.0
    grad[valid] = d / count
    return loss, grad


def probability_nll(probs: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean -log p[label] for explicit probability rows."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    n = probs.shape[0]
    picked = np.maximum(probs[np.arange(n), labels], PROB_EPS)
    grad = np.zeros_like(probs)
    grad[np.arange(n), labels] = -1.0 / (n * picked)
    return -float(np.mean(np.log(picked))), grad


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - np.asarray(target, dtype=np.float64).reshape(pred.shape)
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def _to_real(o: CTensor, kind: MLMOutput) -> np.ndarray:
    return np.abs(o) if kind in (MLMOutput.MODULUS, NSPHead.MODULUS) else o.real


def _to_real_backward(d_real: np.ndarray, o: CTensor, kind) -> CTensor:
    if kind in (MLMOutput.MODULUS, NSPHead.MODULUS):
        r = np.abs(o)
        return np.where(r > 0.0, d_real * o / (2.0 * np.where(r > 0.0, r, 1.0)), 0.0)
    return 0.5 * d_real + 0j


class MLMHead(Layer):
    """Complex transform, projection to the vocabulary and a real readout.

    With a tied table the projection is the Hermitian inner product with each
    embedding row: o[t, v] = sum_d h[t, d] conj(E[v, d]).
    """

    def __init__(self, name: str, d_model: int, vocab_size: int, activation: HiddenActivation,
                 output: MLMOutput = MLMOutput.MODULUS, tied_table: Optional[Parameter] = None,
                 **activation_kwargs):
        super().__init__(name)
        self.output = output
        self.transform = self.add_child("transform", ComplexDense(self.child_name("transform"), d_model, d_model))
        self.activation = self.add_child("act", ComplexActivation(self.child_name("act"), activation, **activation_kwargs))
        self.tied_table = tied_table
        self.projection = None
        if tied_table is None:
            self.projection = self.add_child("projection", ComplexDense(self.child_name("projection"), d_model, vocab_size))
        else:
            self.share_parameter("tied_table", tied_table)

    def forward(self, x, training: bool = False, **kwargs):
        t, t_ctx = self.transform.forward(x)
        h, a_ctx = self.activation.forward(t)
        if self.tied_table is None:
            o, p_ctx = self.projection.forward(h)
        else:
            o, p_ctx = h @ np.conj(self.tied_table.value).T, h
        return _to_real(o, self.output), (t_ctx, a_ctx, p_ctx, o)

    def backward(self, grad, ctx):
        t_ctx, a_ctx, p_ctx, o = ctx
        g_o = _to_real_backward(grad, o, self.output)
        if self.tied_table is None:
            g_h = self.projection.backward(g_o, p_ctx)
        else:
            h = p_ctx
            g2, h2 = g_o.reshape(-1, g_o.shape[-1]), h.reshape(-1, h.shape[-1])
            self.tied_table.accumulate(np.conj(g2).T @ h2)
            g_h = g_o @ self.tied_table.value
        return self.transform.backward(self.activation.backward(g_h, a_ctx), t_ctx)

    def loss(self, logits, labels):
        return softmax_cross_entropy(logits, labels)


def normalize_rows(value: CTensor) -> CTensor:
    norms = np.sqrt(modulus_sq(value).sum(axis=-1, keepdims=True))
    return value / np.where(norms > 0.0, norms, 1.0)


class NSPMeasurementHead(Layer):
    """Overlap of the unit-normalized projected [CLS] state with two class states.

    p_c = |<psi|phi_c>|^2 / (|<psi|phi_0>|^2 + |<psi|phi_1>|^2 + eps); no
    non-linear activation anywhere in the head.
    """

    def __init__(self, name: str, d_model: int, n_states: int = 2):
        super().__init__(name)
        self.dense = self.add_child("dense", ComplexDense(self.child_name("dense"), d_model, d_model))
        initial = np.zeros((n_states, d_model))
        initial[:, 0] = 1.0
        self.class_states = self.add_parameter("class_states", initial, role="class_state",
                                               decay=False, project=normalize_rows)

    def forward(self, x, training: bool = False, **kwargs):
        z, d_ctx = self.dense.forward(x)
        psi, norm = unit_normalize(z)
        overlaps = np.conj(psi) @ self.class_states.value.T
        scores = modulus_sq(overlaps)
        total = scores.sum(axis=-1, keepdims=True) + PROB_EPS
        probs = scores / total
        return probs, (d_ctx, psi, norm, overlaps, probs, total)

    def backward(self, grad, ctx):
        d_ctx, psi, norm, overlaps, probs, total = ctx
        d_scores = (grad - np.sum(grad * probs, axis=-1, keepdims=True)) / total
        g_o = d_scores * overlaps
        self.class_states.accumulate(g_o.T @ psi)
        g_psi = np.conj(g_o) @ self.class_states.value
        return self.dense.backward(unit_normalize_backward(g_psi, psi, norm), d_ctx)

    def loss(self, probs, labels):
        return probability_nll(probs, labels)


class NSPDenseHead(Layer):
    """Complex dense layer to two outputs read out by modulus or real part."""

    def __init__(self, name: str, d_model: int, output: NSPHead = NSPHead.MODULUS):
        super().__init__(name)
        if output is NSPHead.MEASUREMENT:
            raise ValueError("use NSPMeasurementHead for the measurement readout")
        self.output = output
        self.dense = self.add_child("dense", ComplexDense(self.child_name("dense"), d_model, 2))

    def forward(self, x, training: bool = False, **kwargs):
        o, d_ctx = self.dense.forward(x)
        return _to_real(o, self.output), (d_ctx, o)

    def backward(self, grad, ctx):
        d_ctx, o = ctx
        return self.dense.backward(_to_real_backward(grad, o, self.output), d_ctx)

    def loss(self, logits, labels):
        return softmax_cross_entropy(logits, labels)


def check_unit_states(psi: CTensor, tol: float = UNIT_STATE_TOL) -> None:
    norms = np.sqrt(modulus_sq(psi).sum(axis=-1))
    worst = float(np.max(np.abs(norms - 1.0), initial=0.0))
    if worst > tol:
        raise DomainError(f"measurement head expects unit-norm states, worst deviation {worst:.3e}")


def measurement_cls_head(psi: CTensor, w: CTensor, projection: np.ndarray,
                         bias: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Functional form: returns (logits, probabilities) for unit states ``psi``."""
    psi = as_ctensor(psi)
    check_unit_states(psi)
    w = as_ctensor(w)
    u = unitary_exp(0.5 * (w + w.conj().T))
    probs = modulus_sq(psi @ u.T)
    logits = probs @ np.asarray(projection, dtype=np.float64).T
    if bias is not None:
        logits = logits + np.asarray(bias, dtype=np.float64)
    return logits, probs


class MeasurementClassificationHead(Layer):
    """Unitary evolution, Born-rule basis measurement and a real linear projection.

    Trained with cross-entropy over the logits, or mean-squared error when
    ``n_classes`` is 1.
    """

    def __init__(self, name: str, dim: int, n_classes: int, use_bias: bool = False):
        super().__init__(name)
        self.dim, self.n_classes = dim, n_classes
        self.unitary = self.add_child("unitary", UnitaryLayer(self.child_name("unitary"), dim))
        self.projection = self.add_parameter("projection", np.zeros((n_classes, dim)), real=True, role="projection")
        self.bias = (self.add_parameter("bias", np.zeros(n_classes), real=True, role="bias", decay=False)
                     if use_bias else None)

    def forward(self, x, training: bool = False, **kwargs):
        psi = as_ctensor(x)
        check_unit_states(psi)
        evolved, u_ctx = self.unitary.forward(psi)
        probs = modulus_sq(evolved)
        logits = probs @ self.projection.value.real.T
        if self.bias is not None:
            logits = logits + self.bias.value.real
        return logits, (u_ctx, evolved, probs)

    def probabilities(self, psi: CTensor) -> np.ndarray:
        return self.forward(psi)[1][2]

    def backward(self, grad, ctx):
        u_ctx, evolved, probs = ctx
        g2, p2 = grad.reshape(-1, self.n_classes), probs.reshape(-1, self.dim)
        self.projection.accumulate(0.5 * g2.T @ p2)
        if self.bias is not None:
            self.bias.accumulate(0.5 * g2.sum(axis=0))
        d_probs = grad @ self.projection.value.real
        return self.unitary.backward(d_probs * evolved, u_ctx)

    def loss(self, logits, labels):
        if self.n_classes == 1:
            return mse_loss(logits[..., 0], labels)
        return softmax_cross_entropy(logits, labels)
