"""Complex dropout: whole complex values are dropped, never single channels."""

from typing import Optional

import numpy as np

from autodiff import Layer
from ctensor import as_ctensor
from exceptions import ConfigurationError


def complex_dropout(z, p: float, training: bool, rng: np.random.Generator):
    """Returns (output, keep-scale) where keep-scale is None in eval mode or for p = 0."""
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"dropout probability must be in [0, 1), got {p}")
    z = as_ctensor(z)
    if not training or p == 0.0:
        return z, None
    scale = (rng.random(z.shape) >= p) / (1.0 - p)
    return z * scale, scale


class ComplexDropout(Layer):

    def __init__(self, name: str, p: float, rng: Optional[np.random.Generator] = None):
        super().__init__(name)
        if not 0.0 <= p < 1.0:
            raise ConfigurationError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x, training: bool = False, **kwargs):
        return complex_dropout(x, self.p, training, self.rng)

    def backward(self, grad, ctx):
        return grad if ctx is None else grad * ctx
