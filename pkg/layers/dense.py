"""Complex dense and unitary layers."""

import logging
from typing import Tuple

import numpy as np

from autodiff import Layer, unitary_exp_backward
from ctensor import CTensor, HermEig, as_ctensor, unitary_exp_with_eig
from exceptions import DomainError

logger = logging.getLogger(__name__)


def complex_dense(x: CTensor, w: CTensor, b: CTensor = None) -> CTensor:
    """z = W x + b along the last axis of ``x``.

    With W = A + iB, x = u + iv and b = c + id this is
    (Au - Bv + c) + i(Bu + Av + d).
    """
    x, w = as_ctensor(x), as_ctensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[1]:
        raise DomainError(f"complex_dense: input {x.shape} does not match weight {w.shape}")
    out = x @ w.T
    if b is not None:
        b = as_ctensor(b)
        if b.shape != (w.shape[0],):
            raise DomainError(f"complex_dense: bias {b.shape} does not match weight {w.shape}")
        out = out + b
    return out


class ComplexDense(Layer):
    """Y = X W^T + b with a complex weight [d_out, d_in] and optional bias."""

    def __init__(self, name: str, d_in: int, d_out: int, use_bias: bool = True):
        super().__init__(name)
        self.d_in, self.d_out = d_in, d_out
        self.weight = self.add_parameter("weight", np.zeros((d_out, d_in)), role="weight")
        self.bias = self.add_parameter("bias", np.zeros(d_out), role="bias", decay=False) if use_bias else None

    def forward(self, x, training: bool = False, **kwargs):
        b = self.bias.value if self.bias is not None else None
        return complex_dense(x, self.weight.value, b), x

    def backward(self, grad, ctx):
        x = ctx
        g2 = grad.reshape(-1, self.d_out)
        x2 = x.reshape(-1, self.d_in)
        self.weight.accumulate(g2.T @ np.conj(x2))
        if self.bias is not None:
            self.bias.accumulate(g2.sum(axis=0))
        return grad @ np.conj(self.weight.value)


class UnitaryLayer(Layer):
    """psi -> U psi with U = exp(iH), H = (W + W^H)/2 and W a free complex matrix."""

    def __init__(self, name: str, dim: int):
        super().__init__(name)
        self.dim = dim
        self.weight = self.add_parameter("weight", np.zeros((dim, dim)), role="head_weight")

    def hamiltonian(self) -> CTensor:
        w = self.weight.value
        return 0.5 * (w + w.conj().T)

    def unitary(self) -> Tuple[CTensor, HermEig]:
        return unitary_exp_with_eig(self.hamiltonian())

    def forward(self, x, training: bool = False, **kwargs):
        x = as_ctensor(x)
        if x.shape[-1] != self.dim:
            raise DomainError(f"{self.name}: state dimension {x.shape[-1]} != {self.dim}")
        u, eig = self.unitary()
        return x @ u.T, (x, u, eig)

    def backward(self, grad, ctx):
        x, u, eig = ctx
        g2 = grad.reshape(-1, self.dim)
        x2 = x.reshape(-1, self.dim)
        grad_u = g2.T @ np.conj(x2)
        self.weight.accumulate(unitary_exp_backward(grad_u, eig))
        return grad @ np.conj(u)
