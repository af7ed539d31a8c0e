"""Complex-valued layer zoo."""

from .activations import ComplexActivation, activate
from .attention import MultiHeadAttention, complex_attention
from .dense import ComplexDense, UnitaryLayer, complex_dense
from .dropout import ComplexDropout, complex_dropout
from .embedding import SplitEmbedding, TokenEmbedding, split_embed
from .heads import (
    MeasurementClassificationHead,
    MLMHead,
    NSPDenseHead,
    NSPMeasurementHead,
    measurement_cls_head,
    softmax_cross_entropy,
)
from .normalization import Normalization, normalize, unit_normalize
from .regularizers import RegConfig, ortho_regularizers

__all__ = [
    "ComplexActivation",
    "activate",
    "MultiHeadAttention",
    "complex_attention",
    "ComplexDense",
    "UnitaryLayer",
    "complex_dense",
    "ComplexDropout",
    "complex_dropout",
    "SplitEmbedding",
    "TokenEmbedding",
    "split_embed",
    "MeasurementClassificationHead",
    "MLMHead",
    "NSPDenseHead",
    "NSPMeasurementHead",
    "measurement_cls_head",
    "softmax_cross_entropy",
    "Normalization",
    "normalize",
    "unit_normalize",
    "RegConfig",
    "ortho_regularizers",
]
