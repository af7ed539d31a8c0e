"""Elementwise complex activations and their Wirtinger backward rules.

Each backward returns dL/d(conj z) from g = dL/d(conj y) using
g_z = g * conj(dy/dz) + conj(g) * dy/d(conj z).
"""

import math
from typing import Tuple

import numpy as np

from autodiff import Layer
from constants import GELU_CUBIC, GELU_TANH_SCALE, HiddenActivation
from ctensor import CTensor, as_ctensor
from exceptions import ConfigurationError


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(GELU_TANH_SCALE * (x + GELU_CUBIC * x ** 3)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    t = np.tanh(GELU_TANH_SCALE * (x + GELU_CUBIC * x ** 3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * GELU_TANH_SCALE * (1.0 + 3.0 * GELU_CUBIC * x ** 2)


def _gelu_gate(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """phi(r) = (1 + tanh(k(r + c r^3))) / 2 and its derivative."""
    t = np.tanh(GELU_TANH_SCALE * (r + GELU_CUBIC * r ** 3))
    phi = 0.5 * (1.0 + t)
    dphi = 0.5 * (1.0 - t ** 2) * GELU_TANH_SCALE * (1.0 + 3.0 * GELU_CUBIC * r ** 2)
    return phi, dphi


def zrelu_mask(z: CTensor) -> np.ndarray:
    """True where both channels are non-negative."""
    return (z.real >= 0.0) & (z.imag >= 0.0)


def argrelu_mask(z: CTensor, theta1: float, theta2: float) -> np.ndarray:
    angle = np.angle(z)
    return (angle >= theta1) & (angle <= theta2)


def activate(z: CTensor, kind: HiddenActivation, modrelu_bias: float = -0.5,
             theta1: float = 0.0, theta2: float = math.pi / 2) -> CTensor:
    return ComplexActivation("act", kind, modrelu_bias, theta1, theta2).forward(as_ctensor(z))[0]


class ComplexActivation(Layer):
    """Hidden activation selected by :class:`HiddenActivation`."""

    def __init__(self, name: str, kind: HiddenActivation, modrelu_bias: float = -0.5,
                 theta1: float = 0.0, theta2: float = math.pi / 2):
        super().__init__(name)
        if kind is HiddenActivation.MODRELU and modrelu_bias >= 0:
            raise ConfigurationError(f"modReLU bias must be negative, got {modrelu_bias}")
        if kind is HiddenActivation.ARGRELU and not (-math.pi <= theta1 <= theta2 <= math.pi):
            raise ConfigurationError(f"argReLU interval [{theta1}, {theta2}] must lie within [-pi, pi]")
        self.kind = kind
        self.modrelu_bias = modrelu_bias
        self.theta1, self.theta2 = theta1, theta2

    def forward(self, x, training: bool = False, **kwargs):
        z = as_ctensor(x)
        kind = self.kind
        if kind is HiddenActivation.SPLIT_RELU:
            out = np.maximum(z.real, 0.0) + 1j * np.maximum(z.imag, 0.0)
        elif kind is HiddenActivation.SPLIT_GELU:
            out = _gelu(z.real) + 1j * _gelu(z.imag)
        elif kind is HiddenActivation.ZRELU:
            out = np.where(zrelu_mask(z), z, 0.0)
        elif kind is HiddenActivation.ARGRELU:
            out = np.where(argrelu_mask(z, self.theta1, self.theta2), z, 0.0)
        elif kind is HiddenActivation.MODRELU:
            r = np.abs(z)
            active = r + self.modrelu_bias >= 0.0
            scale = np.where(active, (r + self.modrelu_bias) / np.where(active, r, 1.0), 0.0)
            out = z * scale
        elif kind is HiddenActivation.MODGELU:
            phi, _ = _gelu_gate(np.abs(z))
            out = z * phi
        else:
            raise ConfigurationError(f"unknown hidden activation {kind}")
        return out.astype(np.complex128), z

    def backward(self, grad, ctx):
        z = ctx
        kind = self.kind
        if kind is HiddenActivation.SPLIT_RELU:
            return grad.real * (z.real > 0.0) + 1j * grad.imag * (z.imag > 0.0)
        if kind is HiddenActivation.SPLIT_GELU:
            return grad.real * _gelu_grad(z.real) + 1j * grad.imag * _gelu_grad(z.imag)
        if kind is HiddenActivation.ZRELU:
            return np.where(zrelu_mask(z), grad, 0.0)
        if kind is HiddenActivation.ARGRELU:
            return np.where(argrelu_mask(z, self.theta1, self.theta2), grad, 0.0)

        r = np.abs(z)
        safe_r = np.where(r > 0.0, r, 1.0)
        if kind is HiddenActivation.MODRELU:
            b = self.modrelu_bias
            active = r + b >= 0.0
            d_z = 1.0 + b / (2.0 * safe_r)
            d_zbar = -b * z ** 2 / (2.0 * safe_r ** 3)
            g = grad * np.conj(d_z) + np.conj(grad) * d_zbar
            return np.where(active, g, 0.0)
        # modGeLU: y = z phi(|z|)
        phi, dphi = _gelu_gate(r)
        d_z = phi + 0.5 * dphi * r
        d_zbar = np.where(r > 0.0, dphi * z ** 2 / (2.0 * safe_r), 0.0)
        return grad * np.conj(d_z) + np.conj(grad) * d_zbar
