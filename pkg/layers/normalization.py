"""Split, complex, unit and mixed layer normalization over the feature axis."""

import numpy as np

from autodiff import Layer
from constants import CLS_POSITION, NORM_EPS, NormKind
from ctensor import as_ctensor, modulus_sq
from exceptions import ConfigurationError, DomainError


def _real_ln_forward(x: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    sigma = np.sqrt(((x - mu) ** 2).mean(axis=-1, keepdims=True) + NORM_EPS)
    return (x - mu) / sigma, sigma


def _real_ln_backward(d_xhat: np.ndarray, xhat: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return (d_xhat - d_xhat.mean(axis=-1, keepdims=True)
            - xhat * (d_xhat * xhat).mean(axis=-1, keepdims=True)) / sigma


def unit_normalize(h: np.ndarray):
    """h / ||h|| along the last axis; returns (y, norm)."""
    h = as_ctensor(h)
    norm = np.sqrt(modulus_sq(h).sum(axis=-1, keepdims=True))
    if np.any(norm == 0.0):
        raise DomainError("unit normalization of a zero vector")
    return h / norm, norm


def unit_normalize_backward(grad: np.ndarray, y: np.ndarray, norm: np.ndarray) -> np.ndarray:
    radial = np.sum(grad * np.conj(y), axis=-1, keepdims=True).real
    return (grad - radial * y) / norm


def complex_ln_core(h: np.ndarray):
    """(h - mean) / sigma with sigma^2 = mean |h - mean|^2 + eps."""
    c = h - h.mean(axis=-1, keepdims=True)
    sigma = np.sqrt(modulus_sq(c).mean(axis=-1, keepdims=True) + NORM_EPS)
    return c / sigma, sigma


def complex_ln_core_backward(g_n: np.ndarray, n: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    d = n.shape[-1]
    radial = np.sum(np.conj(g_n) * n, axis=-1, keepdims=True).real
    g_c = (g_n - n * radial / d) / sigma
    return g_c - g_c.mean(axis=-1, keepdims=True)


class Normalization(Layer):
    """Normalization selected by :class:`NormKind` over ``[..., seq, d]`` inputs."""

    def __init__(self, name: str, kind: NormKind, dim: int, cls_index: int = CLS_POSITION):
        super().__init__(name)
        if kind is not NormKind.UNIT_NORM and dim < 2:
            raise ConfigurationError(f"{kind.value} needs a feature dimension >= 2, got {dim}")
        self.kind, self.dim, self.cls_index = kind, dim, cls_index
        if kind is NormKind.SPLIT_LN:
            # re channel of gain/bias scales the re channel, im channel the im channel
            self.gain = self.add_parameter("gain", np.full(dim, 1.0 + 1.0j), role="gain", decay=False)
            self.bias = self.add_parameter("bias", np.zeros(dim), role="bias", decay=False)
        elif kind in (NormKind.COMPLEX_LN, NormKind.MIXED_LN):
            self.gain = self.add_parameter("gain", np.ones(dim), role="gain", decay=False)
            self.bias = self.add_parameter("bias", np.zeros(dim), role="bias", decay=False)

    def forward(self, x, training: bool = False, **kwargs):
        h = as_ctensor(x)
        if h.shape[-1] != self.dim:
            raise DomainError(f"{self.name}: feature dimension {h.shape[-1]} != {self.dim}")
        kind = self.kind
        if kind is NormKind.SPLIT_LN:
            xa, sa = _real_ln_forward(h.real)
            xb, sb = _real_ln_forward(h.imag)
            g, b = self.gain.value, self.bias.value
            out = (xa * g.real + b.real) + 1j * (xb * g.imag + b.imag)
            return out, (xa, sa, xb, sb)
        if kind is NormKind.UNIT_NORM:
            y, norm = unit_normalize(h)
            return y, (y, norm)
        if kind is NormKind.COMPLEX_LN:
            n, sigma = complex_ln_core(h)
            return n * self.gain.value + self.bias.value, (n, sigma)
        # mixed: unit norm at the CLS position, complex LN everywhere else
        if h.ndim < 2:
            raise DomainError(f"{self.name}: mixed normalization needs a sequence axis")
        n, sigma = complex_ln_core(h)
        out = n * self.gain.value + self.bias.value
        cls_y, cls_norm = unit_normalize(h[..., self.cls_index, :])
        out[..., self.cls_index, :] = cls_y
        return out, (n, sigma, cls_y, cls_norm)

    def backward(self, grad, ctx):
        kind = self.kind
        if kind is NormKind.SPLIT_LN:
            xa, sa, xb, sb = ctx
            g = self.gain.value
            lead = tuple(range(grad.ndim - 1))
            self.gain.accumulate(np.sum(grad.real * xa, axis=lead) + 1j * np.sum(grad.imag * xb, axis=lead))
            self.bias.accumulate(np.sum(grad, axis=lead))
            return (_real_ln_backward(grad.real * g.real, xa, sa)
                    + 1j * _real_ln_backward(grad.imag * g.imag, xb, sb))
        if kind is NormKind.UNIT_NORM:
            y, norm = ctx
            return unit_normalize_backward(grad, y, norm)
        if kind is NormKind.COMPLEX_LN:
            n, sigma = ctx
            lead = tuple(range(grad.ndim - 1))
            self.gain.accumulate(np.sum(grad * np.conj(n), axis=lead))
            self.bias.accumulate(np.sum(grad, axis=lead))
            return complex_ln_core_backward(grad * np.conj(self.gain.value), n, sigma)

        n, sigma, cls_y, cls_norm = ctx
        ln_grad = grad.copy()
        ln_grad[..., self.cls_index, :] = 0.0
        lead = tuple(range(grad.ndim - 1))
        self.gain.accumulate(np.sum(ln_grad * np.conj(n), axis=lead))
        self.bias.accumulate(np.sum(ln_grad, axis=lead))
        g_h = complex_ln_core_backward(ln_grad * np.conj(self.gain.value), n, sigma)
        g_h[..., self.cls_index, :] = unit_normalize_backward(grad[..., self.cls_index, :], cls_y, cls_norm)
        return g_h


def normalize(h, kind: NormKind, cls_index: int = CLS_POSITION):
    """Parameter-free application with unit gain and zero bias."""
    h = as_ctensor(h)
    return Normalization("norm", kind, h.shape[-1], cls_index).forward(h)[0]
