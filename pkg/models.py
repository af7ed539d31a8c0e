"""Data models for the QBERT toolkit: model configuration, batches, outputs and weight init."""

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from autodiff import Parameter
from constants import (
    NUM_SPECIAL_TOKENS,
    PROJECTION_INIT_STD,
    SPLIT_NORMAL_STD,
    AttentionActivation,
    HiddenActivation,
    InitScheme,
    MLMOutput,
    NormKind,
    NSPHead,
    RegKind,
)
from exceptions import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

# Keys that may differ between a pretraining checkpoint and a fine-tuning run.
FINETUNE_MUTABLE_KEYS = frozenset({
    "seed", "dropout_p", "n_classes", "cls_use_bias", "init_scheme", "embedding_init", "init_std",
    "head_init_std", "projection_init_std", "class_state_jitter", "reg_kind", "reg_lambda",
})


@dataclass
class ModelConfig:
    """Dimensions and variant selectors of a model."""
    vocab_size: int = 512
    d_model: int = 32
    d_hidden: int = 64
    n_layers: int = 2
    n_heads: int = 2
    max_seq_len: int = 32
    attn_activation: AttentionActivation = AttentionActivation.SPLIT_SOFTMAX
    hidden_activation: HiddenActivation = HiddenActivation.SPLIT_RELU
    norm_kind: NormKind = NormKind.MIXED_LN
    dropout_p: float = 0.1
    tie_mlm_embeddings: bool = False
    remove_q_o_projections: bool = False
    n_classes: int = 2
    seed: int = 0
    init_scheme: InitScheme = InitScheme.SPLIT_NORMAL
    embedding_init: InitScheme = InitScheme.RAYLEIGH_GLOROT
    init_std: float = SPLIT_NORMAL_STD
    head_init_std: float = 0.1
    projection_init_std: float = PROJECTION_INIT_STD
    class_state_jitter: float = 0.01
    cls_use_bias: bool = False
    mlm_output: MLMOutput = MLMOutput.MODULUS
    nsp_head: NSPHead = NSPHead.MEASUREMENT
    reg_kind: RegKind = RegKind.NONE
    reg_lambda: float = 0.0
    attn_bias: complex = 0j
    modrelu_bias: float = -0.5
    argrelu_theta1: float = 0.0
    argrelu_theta2: float = math.pi / 2

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.d_model <= 0 or self.d_model % self.n_heads != 0:
            raise ConfigurationError(f"d_model {self.d_model} must be positive and divisible by n_heads {self.n_heads}")
        if self.max_seq_len < 2:
            raise ConfigurationError(f"max_seq_len must be >= 2 (CLS + one token), got {self.max_seq_len}")
        if self.vocab_size <= NUM_SPECIAL_TOKENS:
            raise ConfigurationError(f"vocab_size must exceed the {NUM_SPECIAL_TOKENS} special tokens")
        if self.n_layers < 0 or self.d_hidden <= 0:
            raise ConfigurationError("n_layers must be >= 0 and d_hidden > 0")
        if self.n_classes < 1:
            raise ConfigurationError(f"n_classes must be >= 1, got {self.n_classes}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigurationError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.hidden_activation is HiddenActivation.MODRELU and self.modrelu_bias >= 0:
            raise ConfigurationError(f"modrelu_bias must be negative, got {self.modrelu_bias}")
        if self.reg_lambda < 0:
            raise ConfigurationError(f"reg_lambda must be non-negative, got {self.reg_lambda}")

    def activation_kwargs(self) -> Dict[str, float]:
        return {"modrelu_bias": self.modrelu_bias, "theta1": self.argrelu_theta1, "theta2": self.argrelu_theta2}

    def diff(self, other: "ModelConfig", ignore: Iterable[str] = ()) -> List[str]:
        """Names of fields whose values differ, excluding ``ignore``."""
        skip = set(ignore)
        return [f.name for f in fields(self) if f.name not in skip and getattr(self, f.name) != getattr(other, f.name)]


@dataclass
class PretrainBatch:
    """Token ids with MLM labels (IGNORE_INDEX where unmasked) and binary NSP labels."""
    token_ids: np.ndarray
    segment_ids: np.ndarray
    position_ids: np.ndarray
    attention_mask: np.ndarray
    mlm_labels: np.ndarray
    nsp_labels: np.ndarray

    def validate(self, config: ModelConfig) -> None:
        shape = self.token_ids.shape
        for name in ("segment_ids", "position_ids", "attention_mask", "mlm_labels"):
            if getattr(self, name).shape != shape:
                raise DomainError(f"PretrainBatch.{name} shape {getattr(self, name).shape} != token_ids {shape}")
        if self.nsp_labels.shape != (shape[0],):
            raise DomainError(f"PretrainBatch.nsp_labels shape {self.nsp_labels.shape} != ({shape[0]},)")
        if shape[1] > config.max_seq_len:
            raise DomainError(f"sequence length {shape[1]} exceeds max_seq_len {config.max_seq_len}")


@dataclass
class FinetuneBatch:
    """Token ids with one class label (or regression target) per sequence."""
    token_ids: np.ndarray
    segment_ids: np.ndarray
    attention_mask: np.ndarray
    class_labels: np.ndarray

    @property
    def position_ids(self) -> np.ndarray:
        return np.broadcast_to(np.arange(self.token_ids.shape[1]), self.token_ids.shape)

    def validate(self, config: ModelConfig) -> None:
        if self.token_ids.shape != self.segment_ids.shape or self.token_ids.shape != self.attention_mask.shape:
            raise DomainError("FinetuneBatch arrays must share the [batch, seq] shape")
        if self.class_labels.shape != (self.token_ids.shape[0],):
            raise DomainError(f"class_labels shape {self.class_labels.shape} != ({self.token_ids.shape[0]},)")
        if self.token_ids.shape[1] > config.max_seq_len:
            raise DomainError(f"sequence length {self.token_ids.shape[1]} exceeds max_seq_len {config.max_seq_len}")
        if config.n_classes > 1:
            labels = self.class_labels
            if labels.size and (labels.min() < 0 or labels.max() >= config.n_classes):
                raise DomainError(f"class labels must lie in [0, {config.n_classes})")


@dataclass
class ModelOutput:
    """Losses and readouts of one forward pass plus the context for backward."""
    loss: float
    losses: Dict[str, float]
    logits: Dict[str, np.ndarray]
    cls_state: Optional[np.ndarray] = None
    context: Any = field(default=None, repr=False)


def _split_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape) + 1j * rng.normal(0.0, std, size=shape)


def _fans(shape) -> tuple:
    if len(shape) == 1:
        return shape[0], shape[0]
    return shape[-1], shape[0]


def _rayleigh(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    modulus = rng.rayleigh(scale, size=shape)
    phase = rng.uniform(-np.pi, np.pi, size=shape)
    return modulus * np.exp(1j * phase)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def initialize_value(shape, scheme: InitScheme, rng: np.random.Generator, std: float = SPLIT_NORMAL_STD,
                     name: str = "") -> np.ndarray:
    if scheme is InitScheme.SPLIT_NORMAL:
        return _split_normal(rng, shape, std)
    if scheme is InitScheme.UNITARY:
        if len(shape) == 2 and shape[0] == shape[1]:
            return random_unitary(rng, shape[0])
        logger.warning(f"unitary init needs a square weight, {name} has shape {shape}; using split_normal")
        return _split_normal(rng, shape, std)
    fan_in, fan_out = _fans(shape)
    if scheme is InitScheme.RAYLEIGH_GLOROT:
        return _rayleigh(rng, shape, 1.0 / math.sqrt(fan_in + fan_out))
    if scheme is InitScheme.RAYLEIGH_HE:
        return _rayleigh(rng, shape, 1.0 / math.sqrt(fan_in))
    raise ConfigurationError(f"unknown init scheme {scheme}")


def init_weights(params: Iterable[Parameter], scheme: InitScheme, rng: np.random.Generator,
                 std: float = SPLIT_NORMAL_STD, head_init_std: float = 0.1,
                 projection_std: float = PROJECTION_INIT_STD, class_state_jitter: float = 0.01,
                 embedding_scheme: Optional[InitScheme] = None) -> None:
    """Initialize parameters in place by role.

    Weights and position tables follow ``scheme``; token and segment tables
    follow ``embedding_scheme`` (``scheme`` when None). The unitary head
    weight is split normal with ``head_init_std``; the real projection is normal with
    ``projection_std``; the two NSP class states start as one random unit
    state plus small independent perturbations, so their overlaps with any
    input are nearly equal. Gains, biases and score biases keep their values.
    """
    for p in params:
        shape = p.value.shape
        if p.role in ("weight", "position"):
            p.assign(initialize_value(shape, scheme, rng, std, p.name))
        elif p.role == "embedding":
            p.assign(initialize_value(shape, embedding_scheme or scheme, rng, std, p.name))
        elif p.role == "head_weight":
            p.assign(_split_normal(rng, shape, head_init_std))
        elif p.role == "projection":
            p.assign(rng.normal(0.0, projection_std, size=shape))
        elif p.role == "class_state":
            base = _split_normal(rng, shape[1:], 1.0)
            base = base / np.linalg.norm(base)
            # perturbation norm ~ class_state_jitter
            noise = _split_normal(rng, shape, class_state_jitter / math.sqrt(2 * shape[-1]))
            states = base[None, :] + noise
            p.assign(states / np.linalg.norm(states, axis=-1, keepdims=True))
        p.zero_grad()
